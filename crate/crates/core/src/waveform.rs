//! Closed-loop waveform coder. Samples are quantized to mu-law codes,
//! entropy-coded under the model's per-sample conditional PMFs, and the
//! quantized sample (never the original) is fed back into the model, so
//! encoder and decoder state trajectories are identical by construction.
//!
//! Container layout (integers little-endian):
//! ```text
//! magic        8 bytes  "GVOXWF01"
//! version      u32      1, or 2 when a reduced quantizer is in use
//! sample_count u32
//! sample_rate  u32
//! levels       u16      only in version 2 containers
//! checksum     32 bytes SHA-256 of the serialized model weights
//! param_len    u32      embedded parametric bitstream length
//! param_bytes  ...      conditioning side information
//! payload_len  u32
//! payload      ...      arithmetic-coded symbol stream
//! ```

use thiserror::Error;

use crate::coder::{quantize_pmf, ArithmeticDecoder, ArithmeticEncoder, CoderError};
use crate::model::weights::model_checksum;
use crate::model::{ConditionalModel, ModelError, SymbolDistribution};
use crate::parametric::{
    build_conditioning, dequantize_frame, pack_stream, unpack_stream, ConditioningTrack,
    PackedFrame, StreamError,
};
use crate::rate::{InfoSample, InfoTrace, RateReport};
use crate::signal::{mulaw, sample_silence_mask, PcmSignal};

pub const MAGIC: &[u8; 8] = b"GVOXWF01";
pub const VERSION_FULL: u32 = 1;
pub const VERSION_REDUCED: u32 = 2;

#[derive(Debug, Error)]
pub enum WaveformError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error("payload underrun: {0}")]
    Underrun(#[from] CoderError),
    #[error("bad magic (not a waveform bitstream)")]
    BadMagic,
    #[error("unsupported container version {found}")]
    VersionMismatch { found: u32 },
    #[error("weights checksum mismatch: decoder model differs from encoder model")]
    ChecksumMismatch,
    #[error("container truncated")]
    Truncated,
    #[error("frames cover {covered} samples but the signal has {needed}")]
    FramesTooShort { covered: usize, needed: usize },
    #[error("unsupported quantizer level count {0} (power of two in 2..=256)")]
    UnsupportedLevels(u16),
}

/// Encoding knobs. `levels` selects the quantizer resolution: 256 is exact
/// mu-law; smaller powers of two subsample the mu-law ladder uniformly in
/// code space, trading rate for distortion.
#[derive(Debug, Clone, Copy)]
pub struct EncodeOptions {
    pub levels: u16,
    pub silence_db: Option<f64>,
    pub silence_frame_ms: u32,
}

impl Default for EncodeOptions {
    fn default() -> Self {
        Self {
            levels: 256,
            silence_db: Some(crate::signal::DEFAULT_SILENCE_DB),
            silence_frame_ms: crate::signal::DEFAULT_SILENCE_FRAME_MS,
        }
    }
}

/// Amplitude-ordered index of a mu-law code (0 = most negative level).
fn amplitude_index(code: u8) -> u16 {
    if code < 0x80 {
        code as u16
    } else {
        383 - code as u16
    }
}

fn code_of_index(u: u16) -> u8 {
    if u < 128 {
        u as u8
    } else {
        (383 - u) as u8
    }
}

/// Nearest representative code under `levels`-point subsampling.
fn representative(code: u8, levels: u16) -> u8 {
    if levels == 256 {
        return code;
    }
    let k = 256 / levels;
    let u = amplitude_index(code);
    code_of_index((u / k) * k + k / 2)
}

/// Collapses a PMF onto the representative codes.
fn condense(dist: &SymbolDistribution, levels: u16) -> SymbolDistribution {
    if levels == 256 {
        return dist.clone();
    }
    let mut raw = [0.0f64; 256];
    for c in 0..=255u8 {
        raw[representative(c, levels) as usize] += dist.prob(c);
    }
    SymbolDistribution::from_weights(&raw)
}

fn check_levels(levels: u16) -> Result<(), WaveformError> {
    if levels.is_power_of_two() && (2..=256).contains(&levels) {
        Ok(())
    } else {
        Err(WaveformError::UnsupportedLevels(levels))
    }
}

/// The conditioning both ends must agree on: built from dequantized frames
/// only, truncated to the coded length.
fn conditioning_for(
    frames: &[PackedFrame],
    sample_rate: u32,
    needed: usize,
) -> Result<ConditioningTrack, WaveformError> {
    let params: Vec<_> = frames.iter().map(dequantize_frame).collect();
    let track = build_conditioning(&params, sample_rate);
    if track.num_samples() < needed {
        return Err(WaveformError::FramesTooShort {
            covered: track.num_samples(),
            needed,
        });
    }
    Ok(track)
}

struct CodedPass {
    payload: Vec<u8>,
    reconstructed: Vec<i16>,
    trace_raw: Vec<(f64, f64)>,
}

/// The closed encoding loop shared by `encode_waveform` and `rate_report`.
fn run_encode(
    signal: &PcmSignal,
    frames: &[PackedFrame],
    model: &dyn ConditionalModel,
    levels: u16,
) -> Result<CodedPass, WaveformError> {
    let track = conditioning_for(frames, signal.sample_rate, signal.len())?;
    let mut session = model.start_session();
    let mut enc = ArithmeticEncoder::new();
    let mut trace_raw = Vec::with_capacity(signal.len());
    let mut reconstructed = Vec::with_capacity(signal.len());
    for (i, &x) in signal.samples.iter().enumerate() {
        let theta = track.row(i);
        let dist = condense(&session.next_distribution(theta)?, levels);
        let code = representative(mulaw::encode(x), levels);
        let table = quantize_pmf(&dist);
        enc.encode(code, &table);
        trace_raw.push((dist.entropy_bits(), -dist.log2_prob(code)));
        reconstructed.push(mulaw::decode(code));
        session.advance(code, theta);
    }
    Ok(CodedPass { payload: enc.finish(), reconstructed, trace_raw })
}

fn build_trace(
    pass: &CodedPass,
    sample_rate: u32,
    options: &EncodeOptions,
) -> InfoTrace {
    // Mask on the reconstruction so encoder and decoder agree bit for bit.
    let recon = PcmSignal::new(pass.reconstructed.clone(), sample_rate);
    let silent = match options.silence_db {
        Some(db) => sample_silence_mask(&recon, options.silence_frame_ms, db),
        None => vec![false; pass.reconstructed.len()],
    };
    InfoTrace {
        samples: pass
            .trace_raw
            .iter()
            .zip(&silent)
            .map(|(&(h, r), &s)| InfoSample { entropy_bits: h, code_bits: r, silent: s })
            .collect(),
    }
}

/// Encodes a signal against its parametric frames. Returns the container
/// bytes, the rate report and the per-sample information trace.
pub fn encode_waveform(
    signal: &PcmSignal,
    frames: &[PackedFrame],
    model: &dyn ConditionalModel,
    options: &EncodeOptions,
) -> Result<(Vec<u8>, RateReport, InfoTrace), WaveformError> {
    check_levels(options.levels)?;
    let pass = run_encode(signal, frames, model, options.levels)?;
    let trace = build_trace(&pass, signal.sample_rate, options);
    let report =
        RateReport::from_trace(&trace, signal.sample_rate, Some(pass.payload.len() as u64 * 8));

    let param_bytes = pack_stream(frames);
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    let version = if options.levels == 256 { VERSION_FULL } else { VERSION_REDUCED };
    out.extend_from_slice(&version.to_le_bytes());
    out.extend_from_slice(&(signal.len() as u32).to_le_bytes());
    out.extend_from_slice(&signal.sample_rate.to_le_bytes());
    if version == VERSION_REDUCED {
        out.extend_from_slice(&options.levels.to_le_bytes());
    }
    out.extend_from_slice(&model_checksum(model));
    out.extend_from_slice(&(param_bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(&param_bytes);
    out.extend_from_slice(&(pass.payload.len() as u32).to_le_bytes());
    out.extend_from_slice(&pass.payload);
    Ok((out, report, trace))
}

/// Computes the rate report without emitting a container.
pub fn rate_report(
    signal: &PcmSignal,
    frames: &[PackedFrame],
    model: &dyn ConditionalModel,
    options: &EncodeOptions,
) -> Result<(RateReport, InfoTrace), WaveformError> {
    check_levels(options.levels)?;
    let pass = run_encode(signal, frames, model, options.levels)?;
    let trace = build_trace(&pass, signal.sample_rate, options);
    let report =
        RateReport::from_trace(&trace, signal.sample_rate, Some(pass.payload.len() as u64 * 8));
    Ok((report, trace))
}

struct Header<'a> {
    sample_count: usize,
    sample_rate: u32,
    levels: u16,
    checksum: [u8; 32],
    param_bytes: &'a [u8],
    payload: &'a [u8],
}

fn parse_container(bytes: &[u8]) -> Result<Header<'_>, WaveformError> {
    let need = |n: usize, off: usize| -> Result<(), WaveformError> {
        if bytes.len() < off + n {
            Err(WaveformError::Truncated)
        } else {
            Ok(())
        }
    };
    need(8, 0)?;
    if &bytes[0..8] != MAGIC {
        return Err(WaveformError::BadMagic);
    }
    need(12, 8)?;
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != VERSION_FULL && version != VERSION_REDUCED {
        return Err(WaveformError::VersionMismatch { found: version });
    }
    let sample_count = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let sample_rate = u32::from_le_bytes(bytes[16..20].try_into().unwrap());
    let mut off = 20usize;
    let levels = if version == VERSION_REDUCED {
        need(2, off)?;
        let l = u16::from_le_bytes(bytes[off..off + 2].try_into().unwrap());
        off += 2;
        l
    } else {
        256
    };
    need(32, off)?;
    let checksum: [u8; 32] = bytes[off..off + 32].try_into().unwrap();
    off += 32;
    need(4, off)?;
    let param_len = u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as usize;
    off += 4;
    need(param_len, off)?;
    let param_bytes = &bytes[off..off + param_len];
    off += param_len;
    need(4, off)?;
    let payload_len = u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as usize;
    off += 4;
    need(payload_len, off)?;
    let payload = &bytes[off..off + payload_len];
    Ok(Header { sample_count, sample_rate, levels, checksum, param_bytes, payload })
}

/// Decodes a container. The weights checksum is verified against `model`
/// before any symbol is decoded.
pub fn decode_waveform(
    bytes: &[u8],
    model: &dyn ConditionalModel,
    options: &EncodeOptions,
) -> Result<(PcmSignal, RateReport, InfoTrace), WaveformError> {
    let header = parse_container(bytes)?;
    if header.checksum != model_checksum(model) {
        return Err(WaveformError::ChecksumMismatch);
    }
    check_levels(header.levels)?;
    let frames = unpack_stream(header.param_bytes)?;
    let track = conditioning_for(&frames, header.sample_rate, header.sample_count)?;

    let mut session = model.start_session();
    let mut dec = ArithmeticDecoder::new(header.payload);
    let mut samples = Vec::with_capacity(header.sample_count);
    let mut trace_raw = Vec::with_capacity(header.sample_count);
    for i in 0..header.sample_count {
        let theta = track.row(i);
        let dist = condense(&session.next_distribution(theta)?, header.levels);
        let table = quantize_pmf(&dist);
        let code = dec.decode(&table)?;
        trace_raw.push((dist.entropy_bits(), -dist.log2_prob(code)));
        samples.push(mulaw::decode(code));
        session.advance(code, theta);
    }
    let pass = CodedPass {
        payload: header.payload.to_vec(),
        reconstructed: samples,
        trace_raw,
    };
    let trace = build_trace(&pass, header.sample_rate, options);
    let report = RateReport::from_trace(
        &trace,
        header.sample_rate,
        Some(header.payload.len() as u64 * 8),
    );
    Ok((PcmSignal::new(pass.reconstructed, header.sample_rate), report, trace))
}
