//! Information-rate estimators: per-distribution entropy, per-sample
//! instantaneous information traces, aggregate reports, and an exhaustive
//! joint-entropy additivity checker for small synthetic sources.

use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::model::{teacher_forced, ConditionalModel, ModelError, SymbolDistribution};
use crate::parametric::ConditioningTrack;
use crate::signal::{mulaw, sample_silence_mask, PcmSignal};

#[derive(Debug, Error)]
pub enum RateError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("joint source state space too large: {states} states (limit {limit})")]
    StateSpaceTooLarge { states: u128, limit: u128 },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed trace csv: {0}")]
    MalformedCsv(String),
}

/// Shannon entropy of a distribution in bits, with 0 log 0 = 0.
pub fn conditional_entropy(dist: &SymbolDistribution) -> f64 {
    dist.entropy_bits()
}

/// Per-sample instantaneous information: the model's predicted entropy and
/// the ideal code length of the actual symbol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfoSample {
    pub entropy_bits: f64,
    pub code_bits: f64,
    pub silent: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct InfoTrace {
    pub samples: Vec<InfoSample>,
}

impl InfoTrace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn masked_mean(&self, f: impl Fn(&InfoSample) -> f64) -> (f64, usize) {
        let mut sum = 0.0;
        let mut n = 0usize;
        for s in &self.samples {
            if !s.silent {
                sum += f(s);
                n += 1;
            }
        }
        (if n > 0 { sum / n as f64 } else { 0.0 }, n)
    }
}

/// Aggregate rates over one signal. All per-sample figures are means over
/// non-silent samples; the payload figure is measured over everything that
/// was actually coded.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    /// Mean entropy of the model's per-sample distributions (bits/sample).
    pub entropy_rate_bits: f64,
    /// Mean ideal code length of the actual symbols (bits/sample).
    pub code_rate_bits: f64,
    /// Mean new information injected when the model itself generates
    /// (bits/sample); equals `entropy_rate_bits` for teacher-forced
    /// analysis and is recomputed from the synthesis trace for generation.
    pub generation_rate_bits: f64,
    /// Measured payload bits per coded sample, when a payload exists.
    pub payload_bits_per_sample: Option<f64>,
    pub samples_counted: usize,
    pub silence_excluded: usize,
    pub sample_rate: u32,
}

impl RateReport {
    pub fn from_trace(trace: &InfoTrace, sample_rate: u32, payload_bits: Option<u64>) -> Self {
        let (h, n) = trace.masked_mean(|s| s.entropy_bits);
        let (r, _) = trace.masked_mean(|s| s.code_bits);
        let total = trace.len();
        Self {
            entropy_rate_bits: h,
            code_rate_bits: r,
            generation_rate_bits: h,
            payload_bits_per_sample: payload_bits.map(|b| b as f64 / total.max(1) as f64),
            samples_counted: n,
            silence_excluded: total - n,
            sample_rate,
        }
    }

    /// Flat key=value rendering used by the command line tools.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let rate = self.sample_rate as f64;
        out.push_str(&format!("entropy_rate_bits_per_sample={:.6}\n", self.entropy_rate_bits));
        out.push_str(&format!("code_rate_bits_per_sample={:.6}\n", self.code_rate_bits));
        out.push_str(&format!(
            "generation_rate_bits_per_sample={:.6}\n",
            self.generation_rate_bits
        ));
        out.push_str(&format!("entropy_rate_bits_per_second={:.1}\n", self.entropy_rate_bits * rate));
        out.push_str(&format!("code_rate_bits_per_second={:.1}\n", self.code_rate_bits * rate));
        if let Some(p) = self.payload_bits_per_sample {
            out.push_str(&format!("payload_bits_per_sample={p:.6}\n"));
            out.push_str(&format!("payload_bits_per_second={:.1}\n", p * rate));
        }
        out.push_str(&format!("samples_counted={}\n", self.samples_counted));
        out.push_str(&format!("silence_excluded={}\n", self.silence_excluded));
        out
    }
}

/// Options for trace computation. `silence_db = None` disables exclusion.
#[derive(Debug, Clone, Copy)]
pub struct TraceOptions {
    pub silence_db: Option<f64>,
    pub silence_frame_ms: u32,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            silence_db: Some(crate::signal::DEFAULT_SILENCE_DB),
            silence_frame_ms: crate::signal::DEFAULT_SILENCE_FRAME_MS,
        }
    }
}

/// Teacher-forced instantaneous information of `signal` under the model.
pub fn info_trace(
    model: &dyn ConditionalModel,
    signal: &PcmSignal,
    track: &ConditioningTrack,
    options: &TraceOptions,
) -> Result<InfoTrace, RateError> {
    let symbols: Vec<u8> = signal.samples.iter().map(|&s| mulaw::encode(s)).collect();
    let steps = teacher_forced(model, &symbols, track)?;
    let silent = match options.silence_db {
        Some(db) => sample_silence_mask(signal, options.silence_frame_ms, db),
        None => vec![false; symbols.len()],
    };
    let samples = steps
        .iter()
        .zip(&silent)
        .map(|(s, &sil)| InfoSample {
            entropy_bits: s.entropy_bits,
            code_bits: -s.log2_prob,
            silent: sil,
        })
        .collect();
    Ok(InfoTrace { samples })
}

/// Writes `index,h_bits,r_bits,silent` rows with 9-decimal rendering.
pub fn export_trace(trace: &InfoTrace, path: impl AsRef<Path>) -> Result<(), RateError> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "index,h_bits,r_bits,silent")?;
    for (i, s) in trace.samples.iter().enumerate() {
        writeln!(
            f,
            "{},{:.9},{:.9},{}",
            i,
            s.entropy_bits,
            s.code_bits,
            if s.silent { 1 } else { 0 }
        )?;
    }
    Ok(())
}

/// Parses a trace CSV produced by [`export_trace`].
pub fn import_trace(path: impl AsRef<Path>) -> Result<InfoTrace, RateError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some("index,h_bits,r_bits,silent") => {}
        other => return Err(RateError::MalformedCsv(format!("bad header {other:?}"))),
    }
    let mut samples = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let _idx = parts.next().ok_or_else(|| RateError::MalformedCsv(line.into()))?;
        let h: f64 = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| RateError::MalformedCsv(line.into()))?;
        let r: f64 = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| RateError::MalformedCsv(line.into()))?;
        let silent = parts.next() == Some("1");
        samples.push(InfoSample { entropy_bits: h, code_bits: r, silent });
    }
    Ok(InfoTrace { samples })
}

/// Moving average with a trailing window, exposed for likelihood-trace
/// inspection against an expected level.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    assert!(window > 0);
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (i, &v) in values.iter().enumerate() {
        sum += v;
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / window.min(i + 1) as f64);
    }
    out
}

/// An explicit joint PMF over blocks of (signal symbol, conditioning
/// symbol) pairs, small enough to enumerate exhaustively.
#[derive(Debug, Clone)]
pub struct JointBlockSource {
    pub signal_alphabet: usize,
    pub theta_alphabet: usize,
    pub block_len: usize,
    /// Probability of each (s-block, theta-block) pair, indexed by
    /// `s_index * theta_space + theta_index` with digits little-end first.
    pub probs: Vec<f64>,
}

const STATE_LIMIT: u128 = 1 << 22;

impl JointBlockSource {
    fn spaces(&self) -> (usize, usize) {
        let s = self.signal_alphabet.pow(self.block_len as u32);
        let t = self.theta_alphabet.pow(self.block_len as u32);
        (s, t)
    }

    pub fn validate(&self) -> Result<(), RateError> {
        let states = (self.signal_alphabet as u128 * self.theta_alphabet as u128)
            .pow(self.block_len as u32);
        if states > STATE_LIMIT {
            return Err(RateError::StateSpaceTooLarge { states, limit: STATE_LIMIT });
        }
        Ok(())
    }

    /// Independent S and Theta blocks built from i.i.d. per-symbol PMFs.
    pub fn independent(ps: &[f64], pt: &[f64], block_len: usize) -> Self {
        let sa = ps.len();
        let ta = pt.len();
        let s_space = sa.pow(block_len as u32);
        let t_space = ta.pow(block_len as u32);
        let mut probs = vec![0.0; s_space * t_space];
        for si in 0..s_space {
            let mut p_s = 1.0;
            let mut x = si;
            for _ in 0..block_len {
                p_s *= ps[x % sa];
                x /= sa;
            }
            for ti in 0..t_space {
                let mut p_t = 1.0;
                let mut y = ti;
                for _ in 0..block_len {
                    p_t *= pt[y % ta];
                    y /= ta;
                }
                probs[si * t_space + ti] = p_s * p_t;
            }
        }
        Self { signal_alphabet: sa, theta_alphabet: ta, block_len, probs }
    }

    /// Theta is an exact copy of S.
    pub fn copy_source(ps: &[f64], block_len: usize) -> Self {
        let sa = ps.len();
        let space = sa.pow(block_len as u32);
        let mut probs = vec![0.0; space * space];
        for si in 0..space {
            let mut p = 1.0;
            let mut x = si;
            for _ in 0..block_len {
                p *= ps[x % sa];
                x /= sa;
            }
            probs[si * space + si] = p;
        }
        Self { signal_alphabet: sa, theta_alphabet: sa, block_len, probs }
    }

    /// A random joint PMF.
    pub fn random(
        signal_alphabet: usize,
        theta_alphabet: usize,
        block_len: usize,
        rng: &mut crate::model::rng::DeterministicRng,
    ) -> Self {
        let s_space = signal_alphabet.pow(block_len as u32);
        let t_space = theta_alphabet.pow(block_len as u32);
        let mut probs: Vec<f64> = (0..s_space * t_space).map(|_| rng.next_f64() + 1e-4).collect();
        let sum: f64 = probs.iter().sum();
        for p in probs.iter_mut() {
            *p /= sum;
        }
        Self { signal_alphabet, theta_alphabet, block_len, probs }
    }
}

/// Entropy rates (bits per position) of a joint block source, each computed
/// by direct enumeration: the joint, the theta marginal, and the
/// conditional via per-theta conditional PMFs (not via subtraction).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainRuleRates {
    pub joint: f64,
    pub conditional: f64,
    pub marginal_theta: f64,
}

fn entropy_of(probs: impl Iterator<Item = f64>) -> f64 {
    let mut h = 0.0;
    for p in probs {
        if p > 0.0 {
            h -= p * p.log2();
        }
    }
    h
}

/// Brute-force evaluation of the three rates. The additivity
/// `joint = conditional + marginal_theta` holds exactly; computing the
/// conditional directly makes the identity a real check.
pub fn chain_rule_check(source: &JointBlockSource) -> Result<ChainRuleRates, RateError> {
    source.validate()?;
    let (s_space, t_space) = source.spaces();
    let inv_len = 1.0 / source.block_len as f64;

    let joint = entropy_of(source.probs.iter().copied()) * inv_len;

    let mut theta_marginal = vec![0.0f64; t_space];
    for si in 0..s_space {
        for ti in 0..t_space {
            theta_marginal[ti] += source.probs[si * t_space + ti];
        }
    }
    let marginal_theta = entropy_of(theta_marginal.iter().copied()) * inv_len;

    // H(S|T) = sum_t p(t) H(S | T = t), enumerated per conditioning block.
    let mut conditional = 0.0;
    for ti in 0..t_space {
        let pt = theta_marginal[ti];
        if pt <= 0.0 {
            continue;
        }
        let h_given = entropy_of((0..s_space).map(|si| source.probs[si * t_space + ti] / pt));
        conditional += pt * h_given;
    }
    let conditional = conditional * inv_len;

    Ok(ChainRuleRates { joint, conditional, marginal_theta })
}
