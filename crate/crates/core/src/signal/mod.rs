//! Sample-domain primitives: PCM containers, G.711 mu-law companding,
//! WAV file I/O, 2x resampling and silence detection.

pub mod mulaw;
mod resample;
mod silence;
mod wav;

pub use resample::{resample, ResampleError};
pub use silence::{detect_silence, sample_silence_mask, DEFAULT_SILENCE_DB, DEFAULT_SILENCE_FRAME_MS};
pub use wav::{read_wav, write_wav, WavError};

/// Supported sample rates.
pub const RATE_8K: u32 = 8000;
pub const RATE_16K: u32 = 16000;

/// A mono 16-bit PCM signal at 8 or 16 kHz.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PcmSignal {
    pub samples: Vec<i16>,
    pub sample_rate: u32,
}

impl PcmSignal {
    pub fn new(samples: Vec<i16>, sample_rate: u32) -> Self {
        debug_assert!(sample_rate == RATE_8K || sample_rate == RATE_16K);
        Self { samples, sample_rate }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}
