//! Scalar quantizers for the 50-bit frame: per-coefficient uniform LSF
//! cells (36 bits), log-uniform pitch (7 bits), uniform power in dB
//! (5 bits) and the 2-bit voicing level. Out-of-range inputs are clamped,
//! never rejected; clamps are tallied in [`QuantStats`].

use super::lsf::enforce_monotonic;
use super::{FrameParams, PackedFrame, LSF_BITS};

const PITCH_LO_HZ: f64 = 50.0;
const PITCH_HI_HZ: f64 = 400.0;
const POWER_LO_DB: f64 = -60.0;
const POWER_HI_DB: f64 = 0.0;

/// Per-coefficient LSF quantizer range, centered on the flat-spectrum
/// positions with generous overlap between neighbours.
fn lsf_range(i: usize) -> (f64, f64) {
    let center = std::f64::consts::PI * (i as f64 + 1.0) / 11.0;
    let half_width = 0.52;
    let lo = (center - half_width).max(0.02);
    let hi = (center + half_width).min(std::f64::consts::PI - 0.02);
    (lo, hi)
}

/// Counters for parameter values that fell outside their quantizer range.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct QuantStats {
    pub clamped_lsf: u64,
    pub clamped_pitch: u64,
    pub clamped_power: u64,
}

fn uniform_index(x: f64, lo: f64, hi: f64, levels: u32, clamped: &mut bool) -> u8 {
    let step = (hi - lo) / levels as f64;
    if x < lo || x > hi {
        *clamped = true;
    }
    let idx = ((x - lo) / step).floor();
    (idx.clamp(0.0, (levels - 1) as f64)) as u8
}

fn uniform_center(idx: u8, lo: f64, hi: f64, levels: u32) -> f64 {
    let step = (hi - lo) / levels as f64;
    lo + (idx as f64 + 0.5) * step
}

pub fn quantize_frame(params: &FrameParams) -> PackedFrame {
    let mut stats = QuantStats::default();
    quantize_frame_counting(params, &mut stats)
}

pub fn quantize_frame_counting(params: &FrameParams, stats: &mut QuantStats) -> PackedFrame {
    let mut lsf_idx = [0u8; 10];
    for (i, idx) in lsf_idx.iter_mut().enumerate() {
        let (lo, hi) = lsf_range(i);
        let mut clamped = false;
        *idx = uniform_index(params.lsf[i], lo, hi, 1 << LSF_BITS[i], &mut clamped);
        if clamped {
            stats.clamped_lsf += 1;
        }
    }

    // 7-bit log-uniform grid with exact endpoints.
    let ratio = (params.pitch_hz.clamp(PITCH_LO_HZ, PITCH_HI_HZ) / PITCH_LO_HZ).ln()
        / (PITCH_HI_HZ / PITCH_LO_HZ).ln();
    if params.pitch_hz < PITCH_LO_HZ || params.pitch_hz > PITCH_HI_HZ {
        stats.clamped_pitch += 1;
    }
    let pitch_idx = (ratio * 127.0).round() as u8;

    let mut clamped = false;
    let power_idx = uniform_index(params.power_db, POWER_LO_DB, POWER_HI_DB, 32, &mut clamped);
    if clamped {
        stats.clamped_power += 1;
    }

    PackedFrame { lsf_idx, pitch_idx, power_idx, voicing: params.voicing & 0x3 }
}

/// Reconstructs parameters at the quantizer cell centers. Decoded LSFs are
/// repaired to strict monotonic order regardless of the index pattern, so
/// adversarial frames still produce a stable envelope.
pub fn dequantize_frame(packed: &PackedFrame) -> FrameParams {
    let mut lsf = [0.0f64; 10];
    for (i, w) in lsf.iter_mut().enumerate() {
        let (lo, hi) = lsf_range(i);
        *w = uniform_center(packed.lsf_idx[i], lo, hi, 1 << LSF_BITS[i]);
    }
    enforce_monotonic(&mut lsf);

    let pitch_hz = PITCH_LO_HZ
        * ((packed.pitch_idx as f64 / 127.0) * (PITCH_HI_HZ / PITCH_LO_HZ).ln()).exp();
    let power_db = uniform_center(packed.power_idx, POWER_LO_DB, POWER_HI_DB, 32);

    FrameParams { lsf, pitch_hz, power_db, voicing: packed.voicing & 0x3 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parametric::LSF_MIN_SEP;

    fn sample_params() -> FrameParams {
        FrameParams {
            lsf: [0.3, 0.6, 0.9, 1.2, 1.5, 1.8, 2.1, 2.4, 2.6, 2.9],
            pitch_hz: 120.0,
            power_db: -23.0,
            voicing: 2,
        }
    }

    #[test]
    fn reconstruction_error_within_half_step() {
        let p = sample_params();
        let q = quantize_frame(&p);
        let back = dequantize_frame(&q);
        for i in 0..10 {
            let (lo, hi) = lsf_range(i);
            let step = (hi - lo) / (1u32 << LSF_BITS[i]) as f64;
            assert!(
                (back.lsf[i] - p.lsf[i]).abs() <= step / 2.0 + 1e-12,
                "lsf[{i}]"
            );
        }
        assert!((back.power_db - p.power_db).abs() <= 60.0 / 32.0 / 2.0 + 1e-12);
    }

    #[test]
    fn pitch_endpoints_hit_extreme_indices() {
        let mut p = sample_params();
        p.pitch_hz = 50.0;
        assert_eq!(quantize_frame(&p).pitch_idx, 0);
        p.pitch_hz = 400.0;
        assert_eq!(quantize_frame(&p).pitch_idx, 127);
    }

    #[test]
    fn quantize_is_idempotent_on_indices() {
        let p = sample_params();
        let q1 = quantize_frame(&p);
        let q2 = quantize_frame(&dequantize_frame(&q1));
        assert_eq!(q1, q2);
    }

    #[test]
    fn adversarial_indices_decode_to_ordered_lsf() {
        // Descending indices force maximal disorder before repair.
        let packed = PackedFrame {
            lsf_idx: [15, 14, 0, 13, 0, 12, 7, 0, 7, 0],
            pitch_idx: 64,
            power_idx: 10,
            voicing: 1,
        };
        let params = dequantize_frame(&packed);
        let mut prev = 0.0;
        for &w in &params.lsf {
            assert!(w >= prev + LSF_MIN_SEP - 1e-12, "{:?}", params.lsf);
            assert!(w > 0.0 && w < std::f64::consts::PI);
            prev = w;
        }
    }

    #[test]
    fn voicing_maps_directly() {
        let mut p = sample_params();
        p.voicing = 3;
        let q = quantize_frame(&p);
        assert_eq!(q.voicing, 3);
        assert_eq!(dequantize_frame(&q).voicing, 3);
    }

    #[test]
    fn clamping_is_counted() {
        let mut p = sample_params();
        p.power_db = 10.0;
        p.pitch_hz = 20.0;
        let mut stats = QuantStats::default();
        quantize_frame_counting(&p, &mut stats);
        assert_eq!(stats.clamped_power, 1);
        assert_eq!(stats.clamped_pitch, 1);
    }
}
