//! Shared fixtures for integration tests: synthetic signals and Markov
//! sources with closed-form entropy rates.

use gvox_core::model::rng::DeterministicRng;
use gvox_core::model::SymbolDistribution;
use gvox_core::signal::{PcmSignal, RATE_16K};

/// Loud mu-law codes used as synthetic-source alphabets. None of them is a
/// zero code, so decode/encode round-trips are exact.
pub const LOUD_CODES: [u8; 4] = [0x8A, 0x92, 0x0A, 0x12];

/// White noise test file.
pub fn random_signal(n: usize, seed: u64) -> PcmSignal {
    let mut rng = DeterministicRng::seed_from(seed);
    PcmSignal::new(
        (0..n).map(|_| ((rng.next_f64() - 0.5) * 28000.0) as i16).collect(),
        RATE_16K,
    )
}

/// Speech-like synthetic signal: a pitch-modulated pulse train through a
/// slowly moving two-resonance filter, with noise bursts and an amplitude
/// envelope including a silent gap.
pub fn speech_like_signal(n: usize, seed: u64) -> PcmSignal {
    let mut rng = DeterministicRng::seed_from(seed);
    let mut out = Vec::with_capacity(n);
    let mut y1 = [0.0f64; 2];
    let mut y2 = [0.0f64; 2];
    let mut phase = 0.0f64;
    for i in 0..n {
        let t = i as f64 / RATE_16K as f64;
        let f0 = 110.0 + 30.0 * (2.0 * std::f64::consts::PI * 2.3 * t).sin();
        phase += f0 / RATE_16K as f64;
        let pulse = if phase >= 1.0 {
            phase -= 1.0;
            1.0
        } else {
            0.0
        };
        let voiced_gain = 0.5 + 0.5 * (2.0 * std::f64::consts::PI * 1.1 * t).sin();
        let noise = (rng.next_f64() - 0.5) * 0.12 * (1.0 - voiced_gain);
        let x = pulse * voiced_gain + noise;
        // Two slowly wandering resonators in series.
        let w1 = 2.0 * std::f64::consts::PI * (500.0 + 200.0 * (1.7 * t).sin()) / 16000.0;
        let w2 = 2.0 * std::f64::consts::PI * (1800.0 + 500.0 * (0.9 * t).cos()) / 16000.0;
        let (r1, r2) = (0.96, 0.93);
        let v1 = x + 2.0 * r1 * w1.cos() * y1[0] - r1 * r1 * y1[1];
        y1[1] = y1[0];
        y1[0] = v1;
        let v2 = v1 + 2.0 * r2 * w2.cos() * y2[0] - r2 * r2 * y2[1];
        y2[1] = y2[0];
        y2[0] = v2;
        // Amplitude envelope with a silent stretch in the middle.
        let frac = i as f64 / n as f64;
        let env = if (0.45..0.55).contains(&frac) { 0.0 } else { 1.0 };
        out.push((v2 * 1200.0 * env).clamp(-30000.0, 30000.0) as i16);
    }
    PcmSignal::new(out, RATE_16K)
}

/// Order-1 Markov chain description with helpers for exact entropy rates.
pub struct MarkovSpec {
    pub alphabet: Vec<u8>,
    pub transition: Vec<Vec<f64>>,
}

impl MarkovSpec {
    pub fn two_plus_two() -> Self {
        Self {
            alphabet: LOUD_CODES.to_vec(),
            transition: vec![
                vec![0.70, 0.15, 0.10, 0.05],
                vec![0.05, 0.80, 0.05, 0.10],
                vec![0.25, 0.25, 0.40, 0.10],
                vec![0.10, 0.10, 0.10, 0.70],
            ],
        }
    }
}

/// Stationary distribution of an arbitrary row-stochastic matrix by power
/// iteration (deterministic, run to convergence).
pub fn stationary(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len();
    let mut pi = vec![1.0 / n as f64; n];
    let mut next = vec![0.0f64; n];
    for _ in 0..20_000 {
        next.fill(0.0);
        for (s, &ps) in pi.iter().enumerate() {
            for (t, &p) in rows[s].iter().enumerate() {
                next[t] += ps * p;
            }
        }
        let diff: f64 = pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut pi, &mut next);
        if diff < 1e-15 {
            break;
        }
    }
    pi
}

/// Exact entropy rate of the full 256-state chain defined by per-symbol
/// distribution rows (bits/symbol).
pub fn chain_entropy_rate(rows: &[SymbolDistribution]) -> f64 {
    let full: Vec<Vec<f64>> = rows.iter().map(|r| r.probs().to_vec()).collect();
    let pi = stationary(&full);
    pi.iter()
        .zip(rows)
        .map(|(&p, row)| p * row.entropy_bits())
        .sum()
}

/// Draws a symbol index from a PMF slice.
pub fn draw(pmf: &[f64], rng: &mut DeterministicRng) -> usize {
    let u = rng.next_f64();
    let mut acc = 0.0;
    for (i, &p) in pmf.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    pmf.len() - 1
}
