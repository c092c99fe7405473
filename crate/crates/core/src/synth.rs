//! Parametric decoding: recursive sampling of the conditional model driven
//! by the decoded conditioning track, plus a conventional harmonic-plus-
//! noise fallback renderer that needs no model at all.

use thiserror::Error;

use crate::model::rng::DeterministicRng;
use crate::model::{sample_symbol, ConditionalModel, ModelError};
use crate::parametric::{
    build_conditioning, dequantize_frame, lsf, unpack_stream, ConditioningTrack, FrameParams,
    StreamError,
};
use crate::signal::{mulaw, sample_silence_mask, PcmSignal, RATE_16K, RATE_8K};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("conditioning covers {covered} samples, need {needed}")]
    TrackTooShort { covered: usize, needed: usize },
}

/// Samples the decoder must discard from statistics while the model history
/// fills with real output (10 ms).
pub const WARMUP_MS: u32 = 10;

/// A generated signal together with the entropy of every distribution that
/// was sampled, which measures the information injected by sampling.
#[derive(Debug, Clone)]
pub struct SynthesisOutput {
    pub signal: PcmSignal,
    pub entropy_trace: Vec<f64>,
}

/// Recursively samples `model` for `n_samples` outputs driven by `track`.
/// Deterministic given the seed.
pub fn generate(
    model: &dyn ConditionalModel,
    track: &ConditioningTrack,
    n_samples: usize,
    sample_rate: u32,
    seed: u64,
    temperature: f64,
) -> Result<SynthesisOutput, SynthError> {
    if track.num_samples() < n_samples {
        return Err(SynthError::TrackTooShort {
            covered: track.num_samples(),
            needed: n_samples,
        });
    }
    let mut rng = DeterministicRng::seed_from(seed);
    let mut session = model.start_session();
    let mut samples = Vec::with_capacity(n_samples);
    let mut entropy_trace = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let theta = track.row(i);
        let dist = session.next_distribution(theta)?;
        let symbol = sample_symbol(&dist, &mut rng, temperature);
        entropy_trace.push(dist.entropy_bits());
        samples.push(mulaw::decode(symbol));
        session.advance(symbol, theta);
    }
    Ok(SynthesisOutput { signal: PcmSignal::new(samples, sample_rate), entropy_trace })
}

/// Decodes a parametric bitstream by sampling the model at 16 kHz.
/// Output length is exactly 320 samples per frame.
pub fn synthesize(
    bitstream: &[u8],
    model: &dyn ConditionalModel,
    seed: u64,
    temperature: f64,
) -> Result<SynthesisOutput, SynthError> {
    let frames = unpack_stream(bitstream)?;
    let params: Vec<FrameParams> = frames.iter().map(dequantize_frame).collect();
    let track = build_conditioning(&params, RATE_16K);
    let n = track.num_samples();
    generate(model, &track, n, RATE_16K, seed, temperature)
}

/// Mean entropy of the sampled distributions, excluding the warm-up and
/// (when a threshold is given) frames where the generated output is silent.
pub fn generation_rate(output: &SynthesisOutput, silence_db: Option<f64>) -> f64 {
    let warmup = (output.signal.sample_rate * WARMUP_MS) as usize / 1000;
    let silent = match silence_db {
        Some(db) => sample_silence_mask(&output.signal, 20, db),
        None => vec![false; output.signal.len()],
    };
    let mut sum = 0.0;
    let mut n = 0usize;
    for (i, &h) in output.entropy_trace.iter().enumerate() {
        if i < warmup || silent.get(i).copied().unwrap_or(false) {
            continue;
        }
        sum += h;
        n += 1;
    }
    if n > 0 {
        sum / n as f64
    } else {
        0.0
    }
}

/// Renders a parametric bitstream with the low-complexity fallback:
/// phase-continuous harmonics below the voicing-dependent cutoff plus
/// envelope-shaped noise above it, at 8 kHz, 160 samples per frame.
pub fn render_sinusoidal(bitstream: &[u8]) -> Result<PcmSignal, SynthError> {
    let frames = unpack_stream(bitstream)?;
    let params: Vec<FrameParams> = frames.iter().map(dequantize_frame).collect();
    Ok(render_params(&params))
}

const INTERVAL_LEN: usize = 80; // 10 ms at 8 kHz
const MAX_HARMONICS: usize = 64;

struct IntervalParams {
    lsf: [f64; 10],
    f0: f64,
    target_rms: f64,
    /// Fraction of the band synthesized harmonically, 0..=1.
    voiced_frac: f64,
}

fn interval_params(a: &FrameParams, b: &FrameParams) -> IntervalParams {
    let mut lsf = [0.0f64; 10];
    for i in 0..10 {
        lsf[i] = 0.5 * (a.lsf[i] + b.lsf[i]);
    }
    let f0 = match (a.voicing > 0, b.voicing > 0) {
        (true, true) => (a.pitch_hz.ln() * 0.5 + b.pitch_hz.ln() * 0.5).exp(),
        (true, false) => a.pitch_hz,
        (false, true) => b.pitch_hz,
        (false, false) => a.pitch_hz,
    };
    let power_db = 0.5 * (a.power_db + b.power_db);
    IntervalParams {
        lsf,
        f0,
        target_rms: 32768.0 * 10f64.powf(power_db / 20.0),
        voiced_frac: (a.voicing + b.voicing) as f64 / 6.0,
    }
}

/// |1/A(e^{jw})| for the envelope at one frequency.
fn envelope_gain(a: &[f64; 11], omega: f64) -> f64 {
    let mut re = 0.0;
    let mut im = 0.0;
    for (k, &ak) in a.iter().enumerate() {
        re += ak * (omega * k as f64).cos();
        im -= ak * (omega * k as f64).sin();
    }
    1.0 / (re * re + im * im).sqrt().max(1e-6)
}

pub(crate) fn render_params(params: &[FrameParams]) -> PcmSignal {
    let mut out = Vec::with_capacity(params.len() * 2 * INTERVAL_LEN);
    let mut phases = [0.0f64; MAX_HARMONICS];
    let mut ar_state = [0.0f64; 10];
    let mut rng = DeterministicRng::seed_from(0x51_5E);
    let mut hp_state = (0.0f64, 0.0f64);

    for (k, p) in params.iter().enumerate() {
        let next = params.get(k + 1).unwrap_or(p);
        for half in 0..2 {
            let ip = if half == 0 {
                interval_params(p, p)
            } else {
                interval_params(p, next)
            };
            render_interval(&ip, &mut phases, &mut ar_state, &mut hp_state, &mut rng, &mut out);
        }
    }
    PcmSignal::new(out, RATE_8K)
}

fn render_interval(
    ip: &IntervalParams,
    phases: &mut [f64; MAX_HARMONICS],
    ar_state: &mut [f64; 10],
    hp_state: &mut (f64, f64),
    rng: &mut DeterministicRng,
    out: &mut Vec<i16>,
) {
    let a = lsf::lsf_to_lpc(&ip.lsf);
    let cutoff_hz = 4000.0 * ip.voiced_frac;

    // Harmonic bank below the cutoff, amplitudes from the envelope.
    let f0 = ip.f0.clamp(50.0, 400.0);
    let n_harm = if cutoff_hz >= f0 {
        ((cutoff_hz.min(3800.0) / f0) as usize).min(MAX_HARMONICS)
    } else {
        0
    };
    let mut harm = [0.0f64; INTERVAL_LEN];
    if n_harm > 0 {
        let mut amps = [0.0f64; MAX_HARMONICS];
        for h in 0..n_harm {
            let omega = 2.0 * std::f64::consts::PI * f0 * (h + 1) as f64 / 8000.0;
            amps[h] = envelope_gain(&a, omega);
        }
        for sample in harm.iter_mut() {
            let mut acc = 0.0;
            for h in 0..n_harm {
                acc += amps[h] * phases[h].cos();
                phases[h] += 2.0 * std::f64::consts::PI * f0 * (h + 1) as f64 / 8000.0;
                if phases[h] > 2.0 * std::f64::consts::PI {
                    phases[h] -= 2.0 * std::f64::consts::PI;
                }
            }
            *sample = acc;
        }
    }

    // Envelope-shaped noise; high-passed at the cutoff when part of the
    // band is harmonic.
    let mut noise = [0.0f64; INTERVAL_LEN];
    for sample in noise.iter_mut() {
        let mut e = rng.next_normal();
        if ip.voiced_frac > 0.0 {
            // One-pole high-pass at the voiced/unvoiced boundary.
            let rc = (-2.0 * std::f64::consts::PI * cutoff_hz.max(1.0) / 8000.0).exp();
            let y = rc * (hp_state.0 + e - hp_state.1);
            hp_state.0 = y;
            hp_state.1 = e;
            e = y;
        }
        // All-pole envelope filter with persistent state.
        let mut s = e;
        for (j, &st) in ar_state.iter().enumerate() {
            s -= a[j + 1] * st;
        }
        for j in (1..10).rev() {
            ar_state[j] = ar_state[j - 1];
        }
        ar_state[0] = s;
        *sample = s;
    }

    // Split the target power between the components by voicing fraction,
    // normalizing each by its measured level.
    let rms = |xs: &[f64]| {
        (xs.iter().map(|&x| x * x).sum::<f64>() / xs.len() as f64).sqrt().max(1e-12)
    };
    let g_harm = if n_harm > 0 {
        ip.target_rms * ip.voiced_frac.sqrt() / rms(&harm)
    } else {
        0.0
    };
    let g_noise = ip.target_rms * (1.0 - ip.voiced_frac).max(0.0).sqrt() / rms(&noise);
    for i in 0..INTERVAL_LEN {
        let v = g_harm * harm[i] + g_noise * noise[i];
        out.push(v.round().clamp(i16::MIN as f64, i16::MAX as f64) as i16);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::oracle::OracleModel;
    use crate::parametric::{pack_stream, quantize_frame, COND_DIM};

    fn stream_of(params: &[FrameParams]) -> Vec<u8> {
        let frames: Vec<_> = params.iter().map(quantize_frame).collect();
        pack_stream(&frames)
    }

    #[test]
    fn point_mass_oracle_emits_constant_waveform() {
        let model = OracleModel::PointMass(0x9A);
        let mut p = FrameParams::silent();
        p.power_db = -20.0;
        let bytes = stream_of(&vec![p; 4]);
        let out = synthesize(&bytes, &model, 1, 0.0).unwrap();
        assert_eq!(out.signal.len(), 4 * 320);
        let level = mulaw::decode(0x9A);
        // Temperature 0 makes every draw the argmax.
        for &s in &out.signal.samples {
            assert_eq!(s, level);
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let model = OracleModel::Uniform;
        let bytes = stream_of(&vec![FrameParams::silent(); 3]);
        let a = synthesize(&bytes, &model, 77, 1.0).unwrap();
        let b = synthesize(&bytes, &model, 77, 1.0).unwrap();
        assert_eq!(a.signal, b.signal);
        let c = synthesize(&bytes, &model, 78, 1.0).unwrap();
        assert_ne!(a.signal, c.signal);
    }

    #[test]
    fn generation_rate_of_uniform_model_is_eight() {
        let model = OracleModel::Uniform;
        let bytes = stream_of(&vec![FrameParams::silent(); 4]);
        let out = synthesize(&bytes, &model, 5, 1.0).unwrap();
        assert_eq!(generation_rate(&out, None), 8.0);
    }

    #[test]
    fn generation_rate_of_point_mass_is_near_zero() {
        let model = OracleModel::PointMass(0x9A);
        let bytes = stream_of(&vec![FrameParams::silent(); 4]);
        let out = synthesize(&bytes, &model, 5, 1.0).unwrap();
        // The probability floor leaves ~0.07 bits; exactly the entropy of
        // the floored point mass.
        let expect = crate::model::SymbolDistribution::point_mass(0x9A).entropy_bits();
        assert!((generation_rate(&out, None) - expect).abs() < 1e-9);
    }

    #[test]
    fn output_samples_are_mulaw_levels() {
        let model = OracleModel::Uniform;
        let bytes = stream_of(&vec![FrameParams::silent(); 2]);
        let out = synthesize(&bytes, &model, 3, 1.0).unwrap();
        for &s in &out.signal.samples {
            assert_eq!(mulaw::transcode(s), s);
        }
    }

    #[test]
    fn track_too_short_is_reported() {
        let model = OracleModel::Uniform;
        let track = crate::parametric::ConditioningTrack::from_vectors(
            vec![[0.0; COND_DIM]; 1],
            160,
        );
        assert!(matches!(
            generate(&model, &track, 500, RATE_16K, 1, 1.0),
            Err(SynthError::TrackTooShort { .. })
        ));
    }

    fn voiced_frames(pitch: f64, power_db: f64, n: usize) -> Vec<FrameParams> {
        let mut p = FrameParams::silent();
        p.pitch_hz = pitch;
        p.power_db = power_db;
        p.voicing = 3;
        vec![p; n]
    }

    #[test]
    fn fully_voiced_render_peaks_at_harmonics() {
        let params = voiced_frames(100.0, -12.0, 50);
        let out = render_params(&params);
        assert_eq!(out.len(), 50 * 320 / 2);
        // DFT amplitude at harmonics vs between them, away from onset.
        let seg: Vec<f64> = out.samples[800..800 + 4000].iter().map(|&s| s as f64).collect();
        let amp = |freq: f64| {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, &x) in seg.iter().enumerate() {
                let w = 2.0 * std::f64::consts::PI * freq * i as f64 / 8000.0;
                re += x * w.cos();
                im -= x * w.sin();
            }
            (re * re + im * im).sqrt()
        };
        // The decoded pitch lands on the quantizer grid near 100 Hz.
        let f0 = crate::parametric::dequantize_frame(&quantize_frame(&params[0])).pitch_hz;
        for h in 1..=5 {
            let on = amp(f0 * h as f64);
            let off = amp(f0 * (h as f64 + 0.5));
            assert!(
                on > 4.0 * off,
                "harmonic {h}: on {on:.1} vs off {off:.1} (f0 {f0:.2})"
            );
        }
    }

    #[test]
    fn unvoiced_render_tracks_envelope() {
        // Noise frames with a known spectral tilt; check band powers track
        // the dequantized envelope within 3 dB.
        let mut p = FrameParams::silent();
        p.lsf = [0.25, 0.45, 0.75, 1.05, 1.4, 1.75, 2.1, 2.45, 2.7, 2.95];
        p.power_db = -15.0;
        p.voicing = 0;
        let dec = crate::parametric::dequantize_frame(&quantize_frame(&p));
        let a = lsf::lsf_to_lpc(&dec.lsf);
        let params = vec![p; 200];
        let out = render_params(&params);
        let xs: Vec<f64> = out.samples[1600..].iter().map(|&s| s as f64).collect();

        // Welch-style averaged band energies over 8 bands, with both the
        // measurement and the envelope reference averaged over the same
        // probe frequencies so steep in-band slopes do not skew the ratio.
        let bands = 8usize;
        let probes_per_band = 12usize;
        let seg_len = 256usize;
        let mut band_power = vec![0.0f64; bands];
        let mut band_ref = vec![0.0f64; bands];
        let mut count = 0usize;
        for seg in xs.chunks_exact(seg_len) {
            for b in 0..bands {
                for k in 0..probes_per_band {
                    let f = (b as f64 + (k as f64 + 0.5) / probes_per_band as f64) * 4000.0
                        / bands as f64;
                    let (mut re, mut im) = (0.0, 0.0);
                    for (i, &x) in seg.iter().enumerate() {
                        let han = 0.5
                            - 0.5
                                * (2.0 * std::f64::consts::PI * i as f64
                                    / (seg_len as f64 - 1.0))
                                    .cos();
                        let w = 2.0 * std::f64::consts::PI * f * i as f64 / 8000.0;
                        re += x * han * w.cos();
                        im -= x * han * w.sin();
                    }
                    band_power[b] += re * re + im * im;
                }
            }
            count += 1;
        }
        for b in 0..bands {
            band_power[b] /= (count * probes_per_band) as f64;
            for k in 0..probes_per_band {
                let f = (b as f64 + (k as f64 + 0.5) / probes_per_band as f64) * 4000.0
                    / bands as f64;
                let g = envelope_gain(&a, 2.0 * std::f64::consts::PI * f / 8000.0);
                band_ref[b] += g * g / probes_per_band as f64;
            }
        }
        // Compare shapes with both normalized to their own totals.
        let total_p: f64 = band_power.iter().sum();
        let total_r: f64 = band_ref.iter().sum();
        for b in 0..bands {
            let db = 10.0 * ((band_power[b] / total_p) / (band_ref[b] / total_r)).log10();
            assert!(db.abs() <= 3.0, "band {b}: envelope deviation {db:.2} dB");
        }
    }

    #[test]
    fn render_power_tracks_coded_power() {
        for &target in &[-30.0f64, -20.0, -10.0] {
            let mut p = FrameParams::silent();
            p.power_db = target;
            p.voicing = 0;
            let params = vec![p.clone(); 30];
            let dec = crate::parametric::dequantize_frame(&quantize_frame(&p));
            let out = render_params(&params);
            let xs = &out.samples[480..];
            let rms = (xs.iter().map(|&s| (s as f64) * (s as f64)).sum::<f64>()
                / xs.len() as f64)
                .sqrt();
            let db = 20.0 * (rms / 32768.0).log10();
            assert!(
                (db - dec.power_db).abs() <= 1.0,
                "target {target}: rendered {db:.2} vs coded {:.2}",
                dec.power_db
            );
        }
    }

    #[test]
    fn zero_power_frames_render_near_silence() {
        let mut p = FrameParams::silent();
        p.power_db = -100.0;
        let out = render_params(&vec![p; 10]);
        let rms = (out.samples.iter().map(|&s| (s as f64) * (s as f64)).sum::<f64>()
            / out.len() as f64)
            .sqrt();
        let db = 20.0 * (rms.max(1e-9) / 32768.0).log10();
        assert!(db <= -55.0, "rendered level {db:.1} dBFS");
    }
}
