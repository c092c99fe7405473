//! 2x resampling between 8 kHz and 16 kHz.
//!
//! Both directions share one 48-tap Kaiser-windowed sinc lowpass with its
//! transition band centered on 4 kHz (passband edge ~3.2 kHz, stopband
//! ~4.8 kHz at better than 70 dB). The polyphase branches are normalized
//! separately so DC passes within 1 LSB.

use thiserror::Error;

use super::{PcmSignal, RATE_16K, RATE_8K};

#[derive(Debug, Error)]
pub enum ResampleError {
    #[error("unsupported rate pair {from} -> {to} (only 8000<->16000)")]
    UnsupportedRatePair { from: u32, to: u32 },
}

const TAPS: usize = 48;
const KAISER_BETA: f64 = 7.5;

fn bessel_i0(x: f64) -> f64 {
    // Power series; converges quickly for the argument range used here.
    let mut sum = 1.0;
    let mut term = 1.0;
    let half_x = x / 2.0;
    for k in 1..=30 {
        term *= (half_x / k as f64) * (half_x / k as f64);
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
    }
    sum
}

/// Lowpass prototype at the 16 kHz rate, cutoff 0.25 cycles/sample.
fn design_lowpass() -> [f64; TAPS] {
    let mut h = [0.0; TAPS];
    let center = (TAPS as f64 - 1.0) / 2.0;
    let denom = bessel_i0(KAISER_BETA);
    for (n, tap) in h.iter_mut().enumerate() {
        let t = n as f64 - center;
        let sinc = if t == 0.0 {
            1.0
        } else {
            (std::f64::consts::PI * 0.5 * t).sin() / (std::f64::consts::PI * t)
        };
        let w = 2.0 * n as f64 / (TAPS as f64 - 1.0) - 1.0;
        let kaiser = bessel_i0(KAISER_BETA * (1.0 - w * w).sqrt()) / denom;
        *tap = sinc * kaiser;
    }
    // Normalize each polyphase branch to sum exactly 0.5 so that the
    // upsampler branches (scaled by 2) and the downsampler (sum 1) are
    // both unity at DC.
    let mut sums = [0.0f64; 2];
    for (n, tap) in h.iter().enumerate() {
        sums[n % 2] += *tap;
    }
    for (n, tap) in h.iter_mut().enumerate() {
        *tap *= 0.5 / sums[n % 2];
    }
    h
}

fn clamp_round(x: f64) -> i16 {
    x.round().clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

/// Resamples between the two supported rates. Output length is `2*len`
/// upward and `ceil(len/2)` downward; the linear-phase group delay is
/// compensated so output is time-aligned with the input.
pub fn resample(signal: &PcmSignal, target_rate: u32) -> Result<PcmSignal, ResampleError> {
    match (signal.sample_rate, target_rate) {
        (RATE_8K, RATE_16K) => Ok(PcmSignal::new(upsample2(&signal.samples), RATE_16K)),
        (RATE_16K, RATE_8K) => Ok(PcmSignal::new(downsample2(&signal.samples), RATE_8K)),
        (from, to) => Err(ResampleError::UnsupportedRatePair { from, to }),
    }
}

fn upsample2(x: &[i16]) -> Vec<i16> {
    if x.is_empty() {
        return Vec::new();
    }
    let h = design_lowpass();
    let n_out = x.len() * 2;
    let mut y = Vec::with_capacity(n_out);
    // y[n] = sum_k 2*h[k] * u[n - k + TAPS/2], u = zero-stuffed input.
    let delay = TAPS as isize / 2;
    for n in 0..n_out as isize {
        let mut acc = 0.0f64;
        for (k, &tap) in h.iter().enumerate() {
            let j = n - k as isize + delay;
            if j >= 0 && j % 2 == 0 {
                let i = (j / 2) as usize;
                if i < x.len() {
                    acc += 2.0 * tap * x[i] as f64;
                }
            }
        }
        y.push(clamp_round(acc));
    }
    y
}

fn downsample2(x: &[i16]) -> Vec<i16> {
    if x.is_empty() {
        return Vec::new();
    }
    let h = design_lowpass();
    let n_out = x.len().div_ceil(2);
    let mut y = Vec::with_capacity(n_out);
    let delay = TAPS as isize / 2;
    for i in 0..n_out as isize {
        let n = 2 * i;
        let mut acc = 0.0f64;
        for (k, &tap) in h.iter().enumerate() {
            let j = n - k as isize + delay;
            if j >= 0 && (j as usize) < x.len() {
                acc += tap * x[j as usize] as f64;
            }
        }
        y.push(clamp_round(acc));
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    fn goertzel_amplitude(x: &[i16], rate: f64, freq: f64) -> f64 {
        // Single-bin DFT over an integer number of cycles.
        let n = x.len();
        let w = 2.0 * std::f64::consts::PI * freq / rate;
        let (mut re, mut im) = (0.0f64, 0.0f64);
        for (i, &s) in x.iter().enumerate() {
            re += s as f64 * (w * i as f64).cos();
            im -= s as f64 * (w * i as f64).sin();
        }
        2.0 * (re * re + im * im).sqrt() / n as f64
    }

    #[test]
    fn dc_preserved_both_directions() {
        let up = upsample2(&vec![1000i16; 400]);
        assert_eq!(up.len(), 800);
        for &s in &up[TAPS..800 - TAPS] {
            assert!((s as i32 - 1000).abs() <= 1, "up sample {s}");
        }
        let down = downsample2(&vec![1000i16; 800]);
        assert_eq!(down.len(), 400);
        for &s in &down[TAPS..400 - TAPS] {
            assert!((s as i32 - 1000).abs() <= 1, "down sample {s}");
        }
    }

    #[test]
    fn tone_3khz_survives_downsampling() {
        let rate_in = 16000.0;
        let n = 8000;
        let x: Vec<i16> = (0..n)
            .map(|i| {
                (8000.0 * (2.0 * std::f64::consts::PI * 3000.0 * i as f64 / rate_in).sin()).round()
                    as i16
            })
            .collect();
        let y = downsample2(&x);
        // Measure over integer-cycle windows away from the edges.
        let a_in = goertzel_amplitude(&x[400..400 + 7200], 16000.0, 3000.0);
        let a_out = goertzel_amplitude(&y[200..200 + 3600], 8000.0, 3000.0);
        let db = 20.0 * (a_out / a_in).log10();
        assert!(db.abs() < 0.5, "3 kHz tone level changed by {db:.3} dB");
    }

    #[test]
    fn tone_2khz_survives_upsampling() {
        let n = 4000;
        let x: Vec<i16> = (0..n)
            .map(|i| {
                (8000.0 * (2.0 * std::f64::consts::PI * 2000.0 * i as f64 / 8000.0).sin()).round()
                    as i16
            })
            .collect();
        let y = upsample2(&x);
        assert_eq!(y.len(), 2 * n);
        let a_in = goertzel_amplitude(&x[200..200 + 3600], 8000.0, 2000.0);
        let a_out = goertzel_amplitude(&y[400..400 + 7200], 16000.0, 2000.0);
        let db = 20.0 * (a_out / a_in).log10();
        assert!(db.abs() < 0.5, "2 kHz tone level changed by {db:.3} dB");
    }

    #[test]
    fn empty_signal_passes_through() {
        let empty = PcmSignal::new(vec![], RATE_8K);
        assert!(resample(&empty, RATE_16K).unwrap().is_empty());
    }

    #[test]
    fn odd_length_downsample() {
        let x = PcmSignal::new(vec![0i16; 801], RATE_16K);
        assert_eq!(resample(&x, RATE_8K).unwrap().len(), 401);
    }

    #[test]
    fn unsupported_pair_rejected() {
        let x = PcmSignal::new(vec![0i16; 10], RATE_8K);
        assert!(matches!(
            resample(&x, 8000),
            Err(ResampleError::UnsupportedRatePair { .. })
        ));
    }
}
