//! Weights container. Encoder and decoder must run identical models, so
//! parameters ship as a versioned, checksummed byte image:
//!
//! ```text
//! magic   8 bytes  "GVOXNN01"
//! version u32      container version (1)
//! kind    u8 len + ascii registry name
//! payload kind-specific parameter block (raw little-endian f64 tensors)
//! crc32   u32      over all preceding bytes
//! ```

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::registry;
use super::ConditionalModel;

pub const MAGIC: &[u8; 8] = b"GVOXNN01";
pub const VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WeightsError {
    #[error("bad magic (not a weights file)")]
    BadMagic,
    #[error("unsupported weights version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("checksum mismatch (file corrupted)")]
    ChecksumMismatch,
    #[error("unknown model kind {0:?}")]
    UnknownKind(String),
    #[error("malformed parameter payload for kind {0:?}")]
    MalformedPayload(String),
    #[error("weights file truncated")]
    Truncated,
}

const fn crc32_table() -> [u32; 256] {
    let mut table = [0u32; 256];
    let mut i = 0;
    while i < 256 {
        let mut c = i as u32;
        let mut k = 0;
        while k < 8 {
            c = if c & 1 != 0 { 0xEDB8_8320 ^ (c >> 1) } else { c >> 1 };
            k += 1;
        }
        table[i] = c;
        i += 1;
    }
    table
}

static CRC_TABLE: [u32; 256] = crc32_table();

pub fn crc32(data: &[u8]) -> u32 {
    let mut c = 0xFFFF_FFFFu32;
    for &b in data {
        c = CRC_TABLE[((c ^ b as u32) & 0xFF) as usize] ^ (c >> 8);
    }
    c ^ 0xFFFF_FFFF
}

/// Serializes any registered model to its container bytes.
pub fn save_model(model: &dyn ConditionalModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let kind = model.kind().as_bytes();
    out.push(kind.len() as u8);
    out.extend_from_slice(kind);
    model.write_params(&mut out);
    let crc = crc32(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

/// Loads a model from container bytes, verifying version and checksum
/// before any parameter is interpreted.
pub fn load_model(bytes: &[u8]) -> Result<Box<dyn ConditionalModel>, WeightsError> {
    if bytes.len() < 8 + 4 + 1 + 4 {
        return Err(WeightsError::Truncated);
    }
    if &bytes[0..8] != MAGIC {
        return Err(WeightsError::BadMagic);
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(WeightsError::VersionMismatch { found: version, expected: VERSION });
    }
    let (body, crc_bytes) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(crc_bytes.try_into().unwrap());
    if crc32(body) != stored {
        return Err(WeightsError::ChecksumMismatch);
    }
    let kind_len = body[12] as usize;
    if body.len() < 13 + kind_len {
        return Err(WeightsError::Truncated);
    }
    let kind = std::str::from_utf8(&body[13..13 + kind_len])
        .map_err(|_| WeightsError::BadMagic)?
        .to_string();
    let payload = &body[13 + kind_len..];
    let builder = registry::parser_for(&kind).ok_or_else(|| WeightsError::UnknownKind(kind.clone()))?;
    (builder)(payload).ok_or(WeightsError::MalformedPayload(kind))
}

/// SHA-256 of the serialized container; embedded in waveform bitstreams to
/// guarantee the decoder holds the exact encoder weights.
pub fn model_checksum(model: &dyn ConditionalModel) -> [u8; 32] {
    let bytes = save_model(model);
    let mut h = Sha256::new();
    h.update(&bytes);
    h.finalize().into()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::gated_conv::{GatedConvConfig, GatedConvModel};
    use crate::model::oracle::OracleModel;

    #[test]
    fn round_trip_is_bit_exact() {
        let model = GatedConvModel::init(GatedConvConfig::micro(4), 11);
        let bytes = save_model(&model);
        let loaded = load_model(&bytes).unwrap();
        assert_eq!(save_model(loaded.as_ref()), bytes);

        // Distributions agree to the last bit.
        let theta = [0.1f64, 0.2, -0.3, 0.4];
        let d1 = model.start_session().next_distribution(&theta).unwrap();
        let d2 = loaded.start_session().next_distribution(&theta).unwrap();
        assert_eq!(d1.probs(), d2.probs());
    }

    #[test]
    fn flipped_byte_fails_checksum() {
        let model = OracleModel::Uniform;
        let mut bytes = save_model(&model);
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x10;
        assert!(matches!(load_model(&bytes), Err(WeightsError::ChecksumMismatch)));
    }

    #[test]
    fn old_version_is_rejected() {
        let model = OracleModel::Uniform;
        let mut bytes = save_model(&model);
        bytes[8] = 0x63;
        // Recompute the checksum so only the version differs.
        let body_len = bytes.len() - 4;
        let crc = crc32(&bytes[..body_len]);
        let at = body_len;
        bytes[at..].copy_from_slice(&crc.to_le_bytes());
        assert!(matches!(
            load_model(&bytes),
            Err(WeightsError::VersionMismatch { found: 0x63, .. })
        ));
    }

    #[test]
    fn wrong_magic_rejected() {
        let mut bytes = save_model(&OracleModel::Uniform);
        bytes[0] = b'!';
        assert!(matches!(load_model(&bytes), Err(WeightsError::BadMagic)));
    }

    #[test]
    fn checksum_is_stable() {
        let model = GatedConvModel::init(GatedConvConfig::micro(4), 1);
        assert_eq!(model_checksum(&model), model_checksum(&model));
        let other = GatedConvModel::init(GatedConvConfig::micro(4), 2);
        assert_ne!(model_checksum(&model), model_checksum(&other));
    }

    #[test]
    fn crc32_known_vector() {
        // Standard IEEE check value.
        assert_eq!(crc32(b"123456789"), 0xCBF4_3926);
    }
}
