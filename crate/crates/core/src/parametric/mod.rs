//! The low-complexity parametric coder: per-20 ms analysis of spectral
//! envelope (line spectral frequencies), pitch, power and voicing;
//! quantization to 50-bit frames; bitstream serialization; and the dense
//! conditioning track derived from the decoded parameters.

mod analysis;
mod conditioning;
pub mod lsf;
mod quant;
mod stream;

pub use analysis::{analyze_frame, analyze_signal, FRAME_LEN_8K, HISTORY_LEN, LPC_ORDER};
pub use conditioning::{build_conditioning, ConditioningTrack, COND_DIM};
pub use quant::{dequantize_frame, quantize_frame, quantize_frame_counting, QuantStats};
pub use stream::{pack_stream, unpack_stream, StreamError, CONDITIONING_LAYOUT_VERSION};

use crate::signal::{resample, PcmSignal, RATE_8K, ResampleError};

/// Minimum separation enforced between adjacent line spectral frequencies.
pub const LSF_MIN_SEP: f64 = 0.008;

/// Full encoder front end: analyzes a signal (downsampling 16 kHz input to
/// the 8 kHz analysis rate first) and quantizes every frame.
pub fn encode_frames(signal: &PcmSignal) -> Result<(Vec<PackedFrame>, QuantStats), ResampleError> {
    let at_8k;
    let samples = if signal.sample_rate == RATE_8K {
        &signal.samples
    } else {
        at_8k = resample(signal, RATE_8K)?;
        &at_8k.samples
    };
    let mut stats = QuantStats::default();
    let frames = analyze_signal(samples)
        .iter()
        .map(|p| quantize_frame_counting(p, &mut stats))
        .collect();
    Ok((frames, stats))
}

/// Frame duration of the parametric coder.
pub const FRAME_MS: u32 = 20;

/// Analysis parameters of one 20 ms frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameParams {
    /// 10 line spectral frequencies in radians, strictly increasing in (0, pi).
    pub lsf: [f64; 10],
    /// Fundamental frequency estimate in [50, 400] Hz. Meaningful when any
    /// band is voiced; retained (and coded) for unvoiced frames too.
    pub pitch_hz: f64,
    /// Frame RMS level in dBFS.
    pub power_db: f64,
    /// Voicing level 0 (unvoiced) ..= 3 (fully voiced).
    pub voicing: u8,
}

impl FrameParams {
    /// Flat-spectrum parameters used for degenerate (all-zero) frames.
    pub fn silent() -> Self {
        let mut lsf = [0.0; 10];
        for (i, v) in lsf.iter_mut().enumerate() {
            *v = std::f64::consts::PI * (i as f64 + 1.0) / 11.0;
        }
        Self { lsf, pitch_hz: 100.0, power_db: -100.0, voicing: 0 }
    }

    /// Checks the ordering/range invariants.
    pub fn is_valid(&self) -> bool {
        let mut prev = 0.0;
        for &w in &self.lsf {
            if !(w > prev && w < std::f64::consts::PI) {
                return false;
            }
            prev = w;
        }
        self.voicing <= 3
    }
}

/// One quantized frame: ten LSF indices (4,4,4,4,4,4,3,3,3,3 bits), a 7-bit
/// pitch index, a 5-bit power index and a 2-bit voicing level — 50 bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PackedFrame {
    pub lsf_idx: [u8; 10],
    pub pitch_idx: u8,
    pub power_idx: u8,
    pub voicing: u8,
}

/// Bit width of each LSF coefficient index.
pub const LSF_BITS: [u32; 10] = [4, 4, 4, 4, 4, 4, 3, 3, 3, 3];
/// Total payload bits per frame.
pub const FRAME_BITS: u32 = 50;

impl PackedFrame {
    /// Serializes to the 50-bit MSB-first field order:
    /// LSF indices, pitch, power, voicing.
    pub fn to_bits(self) -> u64 {
        let mut v = 0u64;
        for (i, &b) in LSF_BITS.iter().enumerate() {
            v = (v << b) | self.lsf_idx[i] as u64;
        }
        v = (v << 7) | self.pitch_idx as u64;
        v = (v << 5) | self.power_idx as u64;
        v = (v << 2) | self.voicing as u64;
        v
    }

    pub fn from_bits(mut v: u64) -> Self {
        let voicing = (v & 0x3) as u8;
        v >>= 2;
        let power_idx = (v & 0x1F) as u8;
        v >>= 5;
        let pitch_idx = (v & 0x7F) as u8;
        v >>= 7;
        let mut lsf_idx = [0u8; 10];
        for i in (0..10).rev() {
            let b = LSF_BITS[i];
            lsf_idx[i] = (v & ((1 << b) - 1)) as u8;
            v >>= b;
        }
        Self { lsf_idx, pitch_idx, power_idx, voicing }
    }
}
