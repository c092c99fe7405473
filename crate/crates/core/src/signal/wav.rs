//! Minimal RIFF/WAVE reader and writer for mono 16-bit PCM at 8 or 16 kHz.

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use super::{PcmSignal, RATE_16K, RATE_8K};

#[derive(Debug, Error)]
pub enum WavError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("malformed WAV header: {0}")]
    Malformed(&'static str),
    #[error("unsupported codec tag {0} (only 16-bit PCM is supported)")]
    UnsupportedFormat(u16),
    #[error("unsupported channel count {0} (mono only)")]
    UnsupportedChannels(u16),
    #[error("unsupported sample rate {0} (expected 8000 or 16000)")]
    UnsupportedRate(u32),
    #[error("unsupported bit depth {0} (16-bit only)")]
    UnsupportedBitDepth(u16),
}

fn u16_at(b: &[u8], off: usize) -> Result<u16, WavError> {
    b.get(off..off + 2)
        .map(|s| u16::from_le_bytes([s[0], s[1]]))
        .ok_or(WavError::Malformed("truncated chunk"))
}

fn u32_at(b: &[u8], off: usize) -> Result<u32, WavError> {
    b.get(off..off + 4)
        .map(|s| u32::from_le_bytes([s[0], s[1], s[2], s[3]]))
        .ok_or(WavError::Malformed("truncated chunk"))
}

/// Reads a mono 16-bit PCM WAV file. Sample values are returned exactly as
/// stored; no normalization or dithering is applied.
pub fn read_wav(path: impl AsRef<Path>) -> Result<PcmSignal, WavError> {
    let data = fs::read(path)?;
    if data.len() < 12 || &data[0..4] != b"RIFF" || &data[8..12] != b"WAVE" {
        return Err(WavError::Malformed("missing RIFF/WAVE signature"));
    }

    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    let mut pcm: Option<&[u8]> = None;
    let mut off = 12usize;
    while off + 8 <= data.len() {
        let id = &data[off..off + 4];
        let size = u32_at(&data, off + 4)? as usize;
        let body_start = off + 8;
        let body_end = body_start
            .checked_add(size)
            .ok_or(WavError::Malformed("chunk size overflow"))?;
        if body_end > data.len() {
            return Err(WavError::Malformed("chunk extends past end of file"));
        }
        let body = &data[body_start..body_end];
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(WavError::Malformed("fmt chunk too short"));
                }
                let codec = u16_at(body, 0)?;
                let channels = u16_at(body, 2)?;
                let rate = u32_at(body, 4)?;
                let bits = u16_at(body, 14)?;
                fmt = Some((codec, channels, rate, bits));
            }
            b"data" => pcm = Some(body),
            _ => {}
        }
        // Chunks are word-aligned.
        off = body_end + (size & 1);
    }

    let (codec, channels, rate, bits) = fmt.ok_or(WavError::Malformed("missing fmt chunk"))?;
    if codec != 1 {
        return Err(WavError::UnsupportedFormat(codec));
    }
    if channels != 1 {
        return Err(WavError::UnsupportedChannels(channels));
    }
    if bits != 16 {
        return Err(WavError::UnsupportedBitDepth(bits));
    }
    if rate != RATE_8K && rate != RATE_16K {
        return Err(WavError::UnsupportedRate(rate));
    }
    let pcm = pcm.ok_or(WavError::Malformed("missing data chunk"))?;
    if pcm.len() % 2 != 0 {
        return Err(WavError::Malformed("odd data chunk length"));
    }

    let samples = pcm
        .chunks_exact(2)
        .map(|c| i16::from_le_bytes([c[0], c[1]]))
        .collect();
    Ok(PcmSignal::new(samples, rate))
}

/// Writes a mono 16-bit PCM WAV file. `read_wav(write_wav(s)) == s` bit-exactly.
pub fn write_wav(signal: &PcmSignal, path: impl AsRef<Path>) -> Result<(), WavError> {
    let data_len = signal.samples.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&signal.sample_rate.to_le_bytes());
    out.extend_from_slice(&(signal.sample_rate * 2).to_le_bytes()); // byte rate
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes()); // bits per sample
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in &signal.samples {
        out.extend_from_slice(&s.to_le_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}
