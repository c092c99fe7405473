//! Frame bitstream serialization.
//!
//! Layout (all integers little-endian):
//! ```text
//! magic   8 bytes  "GVOXPC01"
//! count   u32      number of frames
//! mode    u8       coder mode id (0)
//! layout  u8       conditioning layout version
//! frames  50 bits each, MSB-first, zero-padded to a byte boundary at end
//! ```

use thiserror::Error;

use crate::bits::{BitReader, BitWriter};

use super::{PackedFrame, FRAME_BITS};

pub const MAGIC: &[u8; 8] = b"GVOXPC01";
pub const MODE_ID: u8 = 0;
/// Version of the conditioning vector layout frozen into the stream header.
pub const CONDITIONING_LAYOUT_VERSION: u8 = 1;

const HEADER_LEN: usize = 14;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StreamError {
    #[error("bad magic (not a parametric bitstream)")]
    BadMagic,
    #[error("truncated stream: expected {expected} bytes, got {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("unsupported layout version {found} (expected {expected})")]
    VersionMismatch { found: u8, expected: u8 },
}

pub fn pack_stream(frames: &[PackedFrame]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + (frames.len() * 50).div_ceil(8));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(frames.len() as u32).to_le_bytes());
    out.push(MODE_ID);
    out.push(CONDITIONING_LAYOUT_VERSION);
    let mut w = BitWriter::new();
    for f in frames {
        w.push_bits(f.to_bits(), FRAME_BITS);
    }
    out.extend_from_slice(&w.into_bytes());
    out
}

pub fn unpack_stream(bytes: &[u8]) -> Result<Vec<PackedFrame>, StreamError> {
    if bytes.len() < HEADER_LEN {
        return Err(StreamError::Truncated { expected: HEADER_LEN, actual: bytes.len() });
    }
    if &bytes[0..8] != MAGIC {
        return Err(StreamError::BadMagic);
    }
    let count = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let layout = bytes[13];
    if layout != CONDITIONING_LAYOUT_VERSION {
        return Err(StreamError::VersionMismatch {
            found: layout,
            expected: CONDITIONING_LAYOUT_VERSION,
        });
    }
    let expected = HEADER_LEN + (count * FRAME_BITS as usize).div_ceil(8);
    if bytes.len() < expected {
        return Err(StreamError::Truncated { expected, actual: bytes.len() });
    }
    let mut r = BitReader::new(&bytes[HEADER_LEN..]);
    let mut frames = Vec::with_capacity(count);
    for _ in 0..count {
        let v = r.read_bits(FRAME_BITS).ok_or(StreamError::Truncated {
            expected,
            actual: bytes.len(),
        })?;
        frames.push(PackedFrame::from_bits(v));
    }
    Ok(frames)
}
