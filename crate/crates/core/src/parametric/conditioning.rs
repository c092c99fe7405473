//! Dense conditioning vectors derived from decoded frame parameters.
//!
//! Layout version 1 (dimension 16):
//! ```text
//! [0..10)   line spectral frequencies, radians
//! [10]      ln(f0 in Hz), 0.0 when unvoiced
//! [11]      frame power, dBFS
//! [12..16)  voicing level one-hot
//! ```
//! Each 20 ms frame yields two vectors held constant over 10 ms intervals:
//! the frame's own values and the elementwise midpoint with the next frame
//! (the final frame repeats itself).

use super::FrameParams;

/// Conditioning vector dimensionality (layout version 1).
pub const COND_DIM: usize = 16;

/// The per-sample conditioning sequence. Vectors are stored once per 10 ms
/// interval; [`ConditioningTrack::row`] exposes the per-sample view.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditioningTrack {
    vectors: Vec<[f64; COND_DIM]>,
    samples_per_interval: usize,
}

impl ConditioningTrack {
    pub fn from_vectors(vectors: Vec<[f64; COND_DIM]>, samples_per_interval: usize) -> Self {
        assert!(samples_per_interval > 0);
        Self { vectors, samples_per_interval }
    }

    /// Total number of output samples covered.
    pub fn num_samples(&self) -> usize {
        self.vectors.len() * self.samples_per_interval
    }

    pub fn num_intervals(&self) -> usize {
        self.vectors.len()
    }

    pub fn samples_per_interval(&self) -> usize {
        self.samples_per_interval
    }

    /// The conditioning vector in effect at output sample `i`.
    pub fn row(&self, i: usize) -> &[f64; COND_DIM] {
        &self.vectors[i / self.samples_per_interval]
    }

    pub fn intervals(&self) -> &[[f64; COND_DIM]] {
        &self.vectors
    }

    /// Canonical byte image, used to assert encoder/decoder symmetry.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.vectors.len() * COND_DIM * 8 + 8);
        out.extend_from_slice(&(self.samples_per_interval as u64).to_le_bytes());
        for v in &self.vectors {
            for x in v {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }
}

fn frame_vector(p: &FrameParams) -> [f64; COND_DIM] {
    let mut v = [0.0f64; COND_DIM];
    v[..10].copy_from_slice(&p.lsf);
    v[10] = if p.voicing > 0 { p.pitch_hz.ln() } else { 0.0 };
    v[11] = p.power_db;
    v[12 + (p.voicing.min(3) as usize)] = 1.0;
    v
}

/// Builds the conditioning track for `frames` at the given output rate
/// (8000 or 16000). Output covers `frames.len() * 2` intervals of 10 ms.
pub fn build_conditioning(frames: &[FrameParams], output_rate_hz: u32) -> ConditioningTrack {
    assert!(output_rate_hz == 8000 || output_rate_hz == 16000);
    let samples_per_interval = output_rate_hz as usize / 100;
    let mut vectors = Vec::with_capacity(frames.len() * 2);
    for (k, p) in frames.iter().enumerate() {
        let own = frame_vector(p);
        let next = frames.get(k + 1).map(frame_vector).unwrap_or(own);
        let mut mid = [0.0f64; COND_DIM];
        for (m, (a, b)) in mid.iter_mut().zip(own.iter().zip(&next)) {
            *m = 0.5 * (a + b);
        }
        vectors.push(own);
        vectors.push(mid);
    }
    ConditioningTrack::from_vectors(vectors, samples_per_interval)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(power_db: f64) -> FrameParams {
        FrameParams { power_db, ..FrameParams::silent() }
    }

    #[test]
    fn one_frame_at_16k_covers_320_samples() {
        let track = build_conditioning(&[params(-10.0)], 16000);
        assert_eq!(track.num_samples(), 320);
        assert_eq!(track.num_intervals(), 2);
        for i in 0..160 {
            assert_eq!(track.row(i), track.row(0));
        }
        for i in 160..320 {
            assert_eq!(track.row(i), track.row(160));
        }
        // Last frame repeats: midpoint equals the frame vector.
        assert_eq!(track.row(0), track.row(160));
    }

    #[test]
    fn midpoint_interpolates_power() {
        let track = build_conditioning(&[params(0.0), params(-20.0)], 16000);
        assert_eq!(track.intervals()[1][11], -10.0);
        assert_eq!(track.intervals()[0][11], 0.0);
        assert_eq!(track.intervals()[2][11], -20.0);
    }

    #[test]
    fn piecewise_constant_within_intervals() {
        let frames: Vec<FrameParams> = (0..5).map(|k| params(-(k as f64) * 7.0)).collect();
        let track = build_conditioning(&frames, 8000);
        assert_eq!(track.num_samples(), 5 * 160);
        for i in 0..track.num_samples() {
            let interval = i / track.samples_per_interval();
            assert_eq!(track.row(i), &track.intervals()[interval]);
        }
    }

    #[test]
    fn empty_frames_give_empty_track() {
        let track = build_conditioning(&[], 16000);
        assert_eq!(track.num_samples(), 0);
    }

    #[test]
    fn unvoiced_pitch_component_is_zero() {
        let mut p = params(-5.0);
        p.voicing = 0;
        p.pitch_hz = 200.0;
        let track = build_conditioning(&[p.clone()], 16000);
        assert_eq!(track.intervals()[0][10], 0.0);
        p.voicing = 2;
        let track = build_conditioning(&[p], 16000);
        assert!((track.intervals()[0][10] - 200.0f64.ln()).abs() < 1e-12);
    }
}
