//! Per-frame parameter extraction at 8 kHz: windowed autocorrelation LPC
//! converted to line spectral frequencies, normalized-autocorrelation pitch
//! search, two-band voicing classification and RMS level.

use super::lsf;
use super::FrameParams;

/// Samples per 20 ms frame at 8 kHz.
pub const FRAME_LEN_8K: usize = 160;
/// Preceding samples the analyzer wants for windowing and pitch search.
pub const HISTORY_LEN: usize = 160;
/// Prediction order.
pub const LPC_ORDER: usize = 10;

const WINDOW_LEN: usize = 200;
const PITCH_MIN_LAG: usize = 20; // 400 Hz
const PITCH_MAX_LAG: usize = 160; // 50 Hz
const VOICING_THRESHOLDS: [f64; 2] = [0.6, 0.8];
const POWER_FLOOR_DB: f64 = -100.0;

/// Analyzes one 160-sample frame. `history` holds up to [`HISTORY_LEN`]
/// immediately preceding samples (fewer are zero-padded on the left); the
/// last 40 of them extend the 200-sample Hamming analysis window and the
/// full set serves the pitch correlator.
pub fn analyze_frame(frame: &[i16], history: &[i16]) -> FrameParams {
    assert_eq!(frame.len(), FRAME_LEN_8K, "frame must be 20 ms at 8 kHz");
    assert!(history.len() <= HISTORY_LEN);

    let power_db = frame_power_db(frame);
    if frame.iter().all(|&s| s == 0) {
        return FrameParams::silent();
    }

    // Contiguous [history | frame] buffer, left-padded to HISTORY_LEN.
    let mut buf = [0.0f64; HISTORY_LEN + FRAME_LEN_8K];
    let pad = HISTORY_LEN - history.len();
    for (i, &s) in history.iter().enumerate() {
        buf[pad + i] = s as f64;
    }
    for (i, &s) in frame.iter().enumerate() {
        buf[HISTORY_LEN + i] = s as f64;
    }

    let lsf = lpc_lsf(&buf);
    let (pitch_lag, corr_full) = pitch_search(&buf);
    let voicing = voicing_level(&buf, pitch_lag, corr_full);
    let pitch_hz = (8000.0 / pitch_lag as f64).clamp(50.0, 400.0);

    FrameParams { lsf, pitch_hz, power_db, voicing }
}

/// Splits a whole 8 kHz signal into frames (the last one zero-padded) and
/// analyzes each with its preceding samples as history.
pub fn analyze_signal(samples: &[i16]) -> Vec<FrameParams> {
    let n_frames = samples.len().div_ceil(FRAME_LEN_8K);
    let mut out = Vec::with_capacity(n_frames);
    let mut padded_frame = [0i16; FRAME_LEN_8K];
    for f in 0..n_frames {
        let start = f * FRAME_LEN_8K;
        let end = (start + FRAME_LEN_8K).min(samples.len());
        let frame: &[i16] = if end - start == FRAME_LEN_8K {
            &samples[start..end]
        } else {
            padded_frame.fill(0);
            padded_frame[..end - start].copy_from_slice(&samples[start..end]);
            &padded_frame
        };
        let hist_start = start.saturating_sub(HISTORY_LEN);
        out.push(analyze_frame(frame, &samples[hist_start..start]));
    }
    out
}

fn frame_power_db(frame: &[i16]) -> f64 {
    let energy: f64 = frame.iter().map(|&s| (s as f64) * (s as f64)).sum();
    let rms = (energy / frame.len() as f64).sqrt();
    if rms > 0.0 {
        (20.0 * (rms / 32768.0).log10()).max(POWER_FLOOR_DB)
    } else {
        POWER_FLOOR_DB
    }
}

/// Hamming-windowed autocorrelation LPC over the last [`WINDOW_LEN`] samples
/// of the buffer (40 history + 160 frame), lag-windowed for stability.
fn lpc_lsf(buf: &[f64; HISTORY_LEN + FRAME_LEN_8K]) -> [f64; LPC_ORDER] {
    let start = buf.len() - WINDOW_LEN;
    let mut windowed = [0.0f64; WINDOW_LEN];
    for (n, w) in windowed.iter_mut().enumerate() {
        let ham = 0.54
            - 0.46 * (2.0 * std::f64::consts::PI * n as f64 / (WINDOW_LEN as f64 - 1.0)).cos();
        *w = buf[start + n] * ham;
    }

    let mut r = [0.0f64; LPC_ORDER + 1];
    for (k, rk) in r.iter_mut().enumerate() {
        *rk = windowed[k..].iter().zip(&windowed).map(|(&a, &b)| a * b).sum();
    }
    if r[0] <= 0.0 {
        return FrameParams::silent().lsf;
    }
    // White-noise floor plus a gentle lag window keep the recursion well
    // conditioned on near-degenerate spectra.
    r[0] *= 1.0 + 1e-4;
    for (k, rk) in r.iter_mut().enumerate().skip(1) {
        *rk /= 1.0 + 1e-4 * (k * k) as f64;
    }

    let a = levinson(&r);
    match lsf::lpc_to_lsf(&a) {
        Some(mut w) => {
            lsf::enforce_monotonic(&mut w);
            w
        }
        None => FrameParams::silent().lsf,
    }
}

fn levinson(r: &[f64; LPC_ORDER + 1]) -> [f64; LPC_ORDER + 1] {
    let mut a = [0.0f64; LPC_ORDER + 1];
    a[0] = 1.0;
    let mut err = r[0];
    for i in 1..=LPC_ORDER {
        let mut acc = r[i];
        for j in 1..i {
            acc += a[j] * r[i - j];
        }
        let k = -acc / err;
        let prev = a;
        for j in 1..i {
            a[j] = prev[j] + k * prev[i - j];
        }
        a[i] = k;
        err *= 1.0 - k * k;
        if err <= 0.0 {
            break;
        }
    }
    a
}

/// Normalized autocorrelation over the frame region; returns the selected
/// lag and its correlation value.
fn pitch_search(buf: &[f64; HISTORY_LEN + FRAME_LEN_8K]) -> (usize, f64) {
    let corr = |lag: usize| normalized_corr(buf, lag);
    let mut best_lag = PITCH_MIN_LAG;
    let mut best = f64::MIN;
    for lag in PITCH_MIN_LAG..=PITCH_MAX_LAG {
        let c = corr(lag);
        if c > best {
            best = c;
            best_lag = lag;
        }
    }
    // Sub-harmonic resolution: prefer the shortest lag that divides the
    // winner and scores nearly as well.
    for div in (2..=4).rev() {
        let cand = best_lag / div;
        if cand >= PITCH_MIN_LAG && best_lag % div == 0 {
            let c = corr(cand);
            if c >= 0.9 * best {
                return (cand, c);
            }
        }
    }
    (best_lag, best)
}

fn normalized_corr(buf: &[f64; HISTORY_LEN + FRAME_LEN_8K], lag: usize) -> f64 {
    let frame = &buf[HISTORY_LEN..];
    let lagged = &buf[HISTORY_LEN - lag..buf.len() - lag];
    let mut num = 0.0;
    let mut e0 = 0.0;
    let mut e1 = 0.0;
    for (&x, &y) in frame.iter().zip(lagged) {
        num += x * y;
        e0 += x * x;
        e1 += y * y;
    }
    if e0 <= 0.0 || e1 <= 0.0 {
        0.0
    } else {
        num / (e0 * e1).sqrt()
    }
}

/// Two-band voicing vote: each band contributes up to two points for its
/// normalized correlation at the pitch lag crossing 0.6 and 0.8.
fn voicing_level(buf: &[f64; HISTORY_LEN + FRAME_LEN_8K], lag: usize, corr_full: f64) -> u8 {
    // 31-tap windowed-sinc lowpass at 2 kHz splits the band.
    const BAND_TAPS: usize = 31;
    let mut low = [0.0f64; HISTORY_LEN + FRAME_LEN_8K];
    let mut high = [0.0f64; HISTORY_LEN + FRAME_LEN_8K];
    let mut h = [0.0f64; BAND_TAPS];
    let center = (BAND_TAPS - 1) as f64 / 2.0;
    let mut sum = 0.0;
    for (n, tap) in h.iter_mut().enumerate() {
        let t = n as f64 - center;
        let sinc = if t == 0.0 {
            0.5
        } else {
            (std::f64::consts::PI * 0.5 * t).sin() / (std::f64::consts::PI * t)
        };
        let hann =
            0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / (BAND_TAPS as f64 - 1.0)).cos();
        *tap = sinc * hann;
        sum += *tap;
    }
    for tap in h.iter_mut() {
        *tap /= 2.0 * sum; // DC gain 0.5 = passband unity after the split
    }
    for n in 0..buf.len() {
        let mut acc = 0.0;
        for (k, &tap) in h.iter().enumerate() {
            let j = n as isize - k as isize + center as isize;
            if j >= 0 && (j as usize) < buf.len() {
                acc += tap * buf[j as usize];
            }
        }
        low[n] = acc * 2.0;
        high[n] = buf[n] - low[n];
    }

    let corr_low = normalized_corr(&low, lag);
    let corr_high = normalized_corr(&high, lag);
    // Very weak bands carry no evidence either way; fall back to the
    // full-band correlation for them.
    let energy = |b: &[f64]| b[HISTORY_LEN..].iter().map(|&x| x * x).sum::<f64>();
    let full_energy = energy(buf);
    let corr_low = if energy(&low) > 1e-6 * full_energy { corr_low } else { corr_full };
    let corr_high = if energy(&high) > 1e-6 * full_energy { corr_high } else { corr_full };

    let mut votes = 0u8;
    for &c in &[corr_low, corr_high] {
        for &th in &VOICING_THRESHOLDS {
            if c >= th {
                votes += 1;
            }
        }
    }
    votes.min(3)
}
