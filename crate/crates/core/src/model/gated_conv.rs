//! Gated dilated-convolution model: a compact autoregressive network over
//! the mu-law alphabet. Symbols are embedded, passed through stacks of
//! kernel-2 dilated convolutions with tanh/sigmoid gating and per-layer
//! conditioning projections, and collected over skip connections into a
//! two-layer softmax head.
//!
//! The incremental session path (ring buffers of per-layer inputs) and the
//! whole-sequence path used for training perform identical arithmetic, so
//! their outputs match bit for bit.

use super::{ConditionalModel, ModelError, ModelSession, SymbolDistribution};
use crate::model::rng::DeterministicRng;
use crate::parametric::COND_DIM;
use crate::signal::mulaw;

pub const ALPHABET: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GatedConvConfig {
    pub stacks: usize,
    pub layers_per_stack: usize,
    pub residual_channels: usize,
    pub skip_channels: usize,
    pub conditioning_dim: usize,
}

impl GatedConvConfig {
    /// Desk-scale default: dilations 1..32 twice, receptive field 127.
    pub fn toy_default() -> Self {
        Self {
            stacks: 2,
            layers_per_stack: 6,
            residual_channels: 32,
            skip_channels: 64,
            conditioning_dim: COND_DIM,
        }
    }

    /// A small configuration for fast tests.
    pub fn micro(conditioning_dim: usize) -> Self {
        Self {
            stacks: 1,
            layers_per_stack: 2,
            residual_channels: 8,
            skip_channels: 8,
            conditioning_dim,
        }
    }

    pub fn num_layers(&self) -> usize {
        self.stacks * self.layers_per_stack
    }

    pub fn dilation(&self, layer: usize) -> usize {
        1 << (layer % self.layers_per_stack)
    }

    /// Kernel-2 dilated stacks see 1 + sum of dilations past samples.
    pub fn receptive_field(&self) -> usize {
        1 + self.stacks * ((1 << self.layers_per_stack) - 1)
    }
}

/// Byte offsets of one layer's tensors inside the flat parameter vector.
#[derive(Debug, Clone)]
struct LayerOffsets {
    wf0: usize, // res x res, past tap
    wf1: usize, // res x res, current tap
    bf: usize,
    wg0: usize,
    wg1: usize,
    bg: usize,
    vf: usize, // res x cond
    vg: usize,
    wres: usize, // res x res
    bres: usize,
    wskip: usize, // skip x res
    bskip: usize,
}

#[derive(Debug, Clone)]
struct Layout {
    emb: usize, // 256 x res
    layers: Vec<LayerOffsets>,
    h1w: usize, // skip x skip
    h1b: usize,
    h2w: usize, // 256 x skip
    h2b: usize,
    total: usize,
}

impl Layout {
    fn new(c: &GatedConvConfig) -> Self {
        let res = c.residual_channels;
        let skip = c.skip_channels;
        let cond = c.conditioning_dim;
        let mut off = 0usize;
        let mut take = |n: usize| {
            let at = off;
            off += n;
            at
        };
        let emb = take(ALPHABET * res);
        let layers = (0..c.num_layers())
            .map(|_| LayerOffsets {
                wf0: take(res * res),
                wf1: take(res * res),
                bf: take(res),
                wg0: take(res * res),
                wg1: take(res * res),
                bg: take(res),
                vf: take(res * cond),
                vg: take(res * cond),
                wres: take(res * res),
                bres: take(res),
                wskip: take(skip * res),
                bskip: take(skip),
            })
            .collect();
        let h1w = take(skip * skip);
        let h1b = take(skip);
        let h2w = take(ALPHABET * skip);
        let h2b = take(ALPHABET);
        Self { emb, layers, h1w, h1b, h2w, h2b, total: off }
    }
}

/// `out[o] (+)= sum_i w[o*in + i] * x[i]`
fn matvec(w: &[f64], x: &[f64], out: &mut [f64], accumulate: bool) {
    let in_dim = x.len();
    for (o, acc) in out.iter_mut().enumerate() {
        let row = &w[o * in_dim..(o + 1) * in_dim];
        let mut s = if accumulate { *acc } else { 0.0 };
        for (wi, xi) in row.iter().zip(x) {
            s += wi * xi;
        }
        *acc = s;
    }
}

/// Fixed input scaling for the frame-parameter conditioning layout; other
/// dimensionalities pass through unchanged.
pub(crate) fn normalize_theta(theta: &[f64], out: &mut [f64]) {
    out.copy_from_slice(theta);
    if theta.len() == COND_DIM {
        for v in out.iter_mut().take(10) {
            *v -= std::f64::consts::FRAC_PI_2;
        }
        out[10] = (out[10] - 4.5) / 1.5;
        out[11] = (out[11] + 30.0) / 30.0;
    }
}

#[derive(Debug, Clone)]
pub struct GatedConvModel {
    config: GatedConvConfig,
    layout: Layout,
    params: Vec<f64>,
}

impl GatedConvModel {
    /// Random initialization. The output head starts at zero so an
    /// untrained model emits the uniform distribution.
    pub fn init(config: GatedConvConfig, seed: u64) -> Self {
        let layout = Layout::new(&config);
        let mut params = vec![0.0f64; layout.total];
        let mut rng = DeterministicRng::seed_from(seed);
        let res = config.residual_channels;
        let cond = config.conditioning_dim;
        let skip = config.skip_channels;
        let mut fill = |range: std::ops::Range<usize>, fan_in: usize, p: &mut Vec<f64>| {
            let scale = (1.0 / fan_in as f64).sqrt();
            for v in &mut p[range] {
                *v = (rng.next_f64() * 2.0 - 1.0) * scale;
            }
        };
        fill(layout.emb..layout.emb + ALPHABET * res, res, &mut params);
        for l in &layout.layers {
            fill(l.wf0..l.wf0 + res * res, 2 * res + cond, &mut params);
            fill(l.wf1..l.wf1 + res * res, 2 * res + cond, &mut params);
            fill(l.wg0..l.wg0 + res * res, 2 * res + cond, &mut params);
            fill(l.wg1..l.wg1 + res * res, 2 * res + cond, &mut params);
            fill(l.vf..l.vf + res * cond, 2 * res + cond, &mut params);
            fill(l.vg..l.vg + res * cond, 2 * res + cond, &mut params);
            fill(l.wres..l.wres + res * res, res, &mut params);
            fill(l.wskip..l.wskip + skip * res, res, &mut params);
        }
        fill(layout.h1w..layout.h1w + skip * skip, skip, &mut params);
        // h2w / h2b stay zero: softmax of zeros is uniform.
        Self { config, layout, params }
    }

    pub fn config(&self) -> &GatedConvConfig {
        &self.config
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.layout.total
    }

    /// Named parameter groups (for gradient checking and diagnostics).
    pub fn param_groups(&self) -> Vec<(String, std::ops::Range<usize>)> {
        let res = self.config.residual_channels;
        let skip = self.config.skip_channels;
        let cond = self.config.conditioning_dim;
        let mut out = vec![(
            "embedding".to_string(),
            self.layout.emb..self.layout.emb + ALPHABET * res,
        )];
        for (i, l) in self.layout.layers.iter().enumerate() {
            let mut push = |name: &str, at: usize, len: usize| {
                out.push((format!("layer{i}.{name}"), at..at + len));
            };
            push("filter_past", l.wf0, res * res);
            push("filter_cur", l.wf1, res * res);
            push("filter_bias", l.bf, res);
            push("gate_past", l.wg0, res * res);
            push("gate_cur", l.wg1, res * res);
            push("gate_bias", l.bg, res);
            push("cond_filter", l.vf, res * cond);
            push("cond_gate", l.vg, res * cond);
            push("res_proj", l.wres, res * res);
            push("res_bias", l.bres, res);
            push("skip_proj", l.wskip, skip * res);
            push("skip_bias", l.bskip, skip);
        }
        out.push(("head1_w".into(), self.layout.h1w..self.layout.h1w + skip * skip));
        out.push(("head1_b".into(), self.layout.h1b..self.layout.h1b + skip));
        out.push(("head2_w".into(), self.layout.h2w..self.layout.h2w + ALPHABET * skip));
        out.push(("head2_b".into(), self.layout.h2b..self.layout.h2b + ALPHABET));
        out
    }

    /// Whole-sequence teacher-forced forward. `input_syms[t]` is the symbol
    /// fed at position t and `thetas` holds one raw conditioning row per
    /// position. Returns the distribution emitted at every position and,
    /// when requested, the activations needed for backprop.
    pub(crate) fn forward_sequence(
        &self,
        input_syms: &[u8],
        thetas: &[&[f64]],
        keep: bool,
    ) -> (Vec<SymbolDistribution>, Option<Activations>) {
        let c = &self.config;
        let res = c.residual_channels;
        let skip = c.skip_channels;
        let cond = c.conditioning_dim;
        let n_layers = c.num_layers();
        let t_len = input_syms.len();
        assert_eq!(thetas.len(), t_len);
        let p = &self.params;
        let lay = &self.layout;

        let mut theta_norm = vec![0.0f64; t_len * cond];
        for (t, row) in thetas.iter().enumerate() {
            normalize_theta(row, &mut theta_norm[t * cond..(t + 1) * cond]);
        }

        // layer_inputs[l] holds x_l[t] for all t; index l = 0 is the embedding.
        let mut layer_inputs = vec![vec![0.0f64; t_len * res]; n_layers + 1];
        let mut f_pre = vec![vec![0.0f64; t_len * res]; n_layers];
        let mut g_pre = vec![vec![0.0f64; t_len * res]; n_layers];
        let mut skip_sum = vec![0.0f64; t_len * skip];

        for t in 0..t_len {
            let emb_row = lay.emb + input_syms[t] as usize * res;
            let (dst, src) = (t * res, emb_row);
            layer_inputs[0][dst..dst + res].copy_from_slice(&p[src..src + res]);
        }

        let zero = vec![0.0f64; res];
        for l in 0..n_layers {
            let lo = &lay.layers[l];
            let d = c.dilation(l);
            // Split so we can read layer_inputs[l] while writing [l+1].
            let (head, tail) = layer_inputs.split_at_mut(l + 1);
            let x_cur_all = &head[l];
            let x_next_all = &mut tail[0];
            for t in 0..t_len {
                let x_now = &x_cur_all[t * res..(t + 1) * res];
                let x_past: &[f64] = if t >= d {
                    &x_cur_all[(t - d) * res..(t - d + 1) * res]
                } else {
                    &zero
                };
                let th = &theta_norm[t * cond..(t + 1) * cond];
                let f = &mut f_pre[l][t * res..(t + 1) * res];
                f.copy_from_slice(&p[lo.bf..lo.bf + res]);
                matvec(&p[lo.wf0..lo.wf0 + res * res], x_past, f, true);
                matvec(&p[lo.wf1..lo.wf1 + res * res], x_now, f, true);
                matvec(&p[lo.vf..lo.vf + res * cond], th, f, true);
                let g = &mut g_pre[l][t * res..(t + 1) * res];
                g.copy_from_slice(&p[lo.bg..lo.bg + res]);
                matvec(&p[lo.wg0..lo.wg0 + res * res], x_past, g, true);
                matvec(&p[lo.wg1..lo.wg1 + res * res], x_now, g, true);
                matvec(&p[lo.vg..lo.vg + res * cond], th, g, true);

                let mut z = vec![0.0f64; res];
                for i in 0..res {
                    z[i] = f_pre[l][t * res + i].tanh() * sigmoid(g_pre[l][t * res + i]);
                }
                {
                    let sk = &mut skip_sum[t * skip..(t + 1) * skip];
                    matvec(&p[lo.wskip..lo.wskip + skip * res], &z, sk, true);
                    for (si, bi) in sk.iter_mut().zip(&p[lo.bskip..lo.bskip + skip]) {
                        *si += bi;
                    }
                }
                let x_next = &mut x_next_all[t * res..(t + 1) * res];
                x_next.copy_from_slice(&p[lo.bres..lo.bres + res]);
                matvec(&p[lo.wres..lo.wres + res * res], &z, x_next, true);
                for i in 0..res {
                    x_next[i] += x_now[i];
                }
            }
        }

        let mut dists = Vec::with_capacity(t_len);
        let mut h1_pre = vec![0.0f64; t_len * skip];
        let mut probs = vec![0.0f64; if keep { t_len * ALPHABET } else { 0 }];
        let mut s_buf = vec![0.0f64; skip];
        for t in 0..t_len {
            for i in 0..skip {
                s_buf[i] = skip_sum[t * skip + i].max(0.0);
            }
            let h1 = &mut h1_pre[t * skip..(t + 1) * skip];
            h1.copy_from_slice(&p[lay.h1b..lay.h1b + skip]);
            matvec(&p[lay.h1w..lay.h1w + skip * skip], &s_buf, h1, true);
            let mut h1_act = vec![0.0f64; skip];
            for i in 0..skip {
                h1_act[i] = h1[i].max(0.0);
            }
            let mut logits = [0.0f64; ALPHABET];
            logits.copy_from_slice(&p[lay.h2b..lay.h2b + ALPHABET]);
            matvec(&p[lay.h2w..lay.h2w + ALPHABET * skip], &h1_act, &mut logits, true);
            let dist = SymbolDistribution::from_logits(&logits);
            if keep {
                probs[t * ALPHABET..(t + 1) * ALPHABET].copy_from_slice(dist.probs());
            }
            dists.push(dist);
        }

        let acts = keep.then(|| Activations {
            theta_norm,
            layer_inputs,
            f_pre,
            g_pre,
            skip_sum,
            h1_pre,
            probs,
        });
        (dists, acts)
    }

    /// Full-recompute view of a session: distributions for positions
    /// 0..symbols.len() given the per-position conditioning rows, with the
    /// receptive-field zero-code warm-up prepended exactly as
    /// [`ConditionalModel::start_session`] does.
    pub fn forward_teacher_forced(
        &self,
        symbols: &[u8],
        thetas: &[&[f64]],
    ) -> Vec<SymbolDistribution> {
        let r = self.config.receptive_field();
        let cond = self.config.conditioning_dim;
        let zero_theta = vec![0.0f64; cond];
        let mut input_syms = Vec::with_capacity(r + symbols.len());
        let mut rows: Vec<&[f64]> = Vec::with_capacity(r + symbols.len());
        for _ in 0..r {
            input_syms.push(mulaw::ZERO_CODE);
            rows.push(&zero_theta);
        }
        // Position r+i predicts symbols[i], so its input is symbols[i-1]
        // (the last warm-up code for i = 0).
        for (i, row) in thetas.iter().enumerate() {
            input_syms.push(if i == 0 { mulaw::ZERO_CODE } else { symbols[i - 1] });
            rows.push(row);
        }
        let (dists, _) = self.forward_sequence(&input_syms, &rows, false);
        dists[r..].to_vec()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Stored activations of one sequence forward, consumed by the trainer.
pub(crate) struct Activations {
    pub theta_norm: Vec<f64>,
    pub layer_inputs: Vec<Vec<f64>>,
    pub f_pre: Vec<Vec<f64>>,
    pub g_pre: Vec<Vec<f64>>,
    pub skip_sum: Vec<f64>,
    pub h1_pre: Vec<f64>,
    pub probs: Vec<f64>,
}

struct Ring {
    buf: Vec<f64>,
    entries: usize,
    width: usize,
    pos: usize,
}

impl Ring {
    fn new(entries: usize, width: usize) -> Self {
        Self { buf: vec![0.0; entries * width], entries, width, pos: 0 }
    }

    /// The entry pushed `entries` steps ago (zeros until warmed).
    fn oldest(&self) -> &[f64] {
        &self.buf[self.pos * self.width..(self.pos + 1) * self.width]
    }

    fn push(&mut self, v: &[f64]) {
        self.buf[self.pos * self.width..(self.pos + 1) * self.width].copy_from_slice(v);
        self.pos = (self.pos + 1) % self.entries;
    }
}

pub struct GatedConvSession<'a> {
    model: &'a GatedConvModel,
    prev: u8,
    rings: Vec<Ring>,
    // scratch buffers reused across steps
    x: Vec<f64>,
    x_next: Vec<f64>,
    z: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    skip: Vec<f64>,
    theta_norm: Vec<f64>,
}

impl<'a> GatedConvSession<'a> {
    fn new(model: &'a GatedConvModel) -> Self {
        let c = model.config;
        let res = c.residual_channels;
        let rings = (0..c.num_layers()).map(|l| Ring::new(c.dilation(l), res)).collect();
        let mut s = Self {
            model,
            prev: mulaw::ZERO_CODE,
            rings,
            x: vec![0.0; res],
            x_next: vec![0.0; res],
            z: vec![0.0; res],
            f: vec![0.0; res],
            g: vec![0.0; res],
            skip: vec![0.0; c.skip_channels],
            theta_norm: vec![0.0; c.conditioning_dim],
        };
        // Warm up with receptive_field zero-code symbols under zero
        // conditioning; this matches the whole-sequence path exactly.
        let zero_theta = vec![0.0f64; c.conditioning_dim];
        let mut warm = vec![0.0f64; c.conditioning_dim];
        normalize_theta(&zero_theta, &mut warm);
        for _ in 0..c.receptive_field() {
            s.run_step(&warm, true, false);
        }
        s
    }

    /// One network step at the current position. When `commit` is set the
    /// per-layer inputs are pushed into the rings and the position advances.
    fn run_step(&mut self, theta_norm: &[f64], commit: bool, need_logits: bool) -> [f64; ALPHABET] {
        let model = self.model;
        let c = &model.config;
        let res = c.residual_channels;
        let skip_ch = c.skip_channels;
        let p = &model.params;
        let lay = &model.layout;

        let emb = lay.emb + self.prev as usize * res;
        self.x.copy_from_slice(&p[emb..emb + res]);
        self.skip.fill(0.0);

        for l in 0..c.num_layers() {
            let lo = &lay.layers[l];
            {
                let x_past = self.rings[l].oldest();
                self.f.copy_from_slice(&p[lo.bf..lo.bf + res]);
                matvec(&p[lo.wf0..lo.wf0 + res * res], x_past, &mut self.f, true);
                matvec(&p[lo.wf1..lo.wf1 + res * res], &self.x, &mut self.f, true);
                matvec(&p[lo.vf..lo.vf + res * c.conditioning_dim], theta_norm, &mut self.f, true);
                self.g.copy_from_slice(&p[lo.bg..lo.bg + res]);
                matvec(&p[lo.wg0..lo.wg0 + res * res], x_past, &mut self.g, true);
                matvec(&p[lo.wg1..lo.wg1 + res * res], &self.x, &mut self.g, true);
                matvec(&p[lo.vg..lo.vg + res * c.conditioning_dim], theta_norm, &mut self.g, true);
            }
            for i in 0..res {
                self.z[i] = self.f[i].tanh() * sigmoid(self.g[i]);
            }
            matvec(&p[lo.wskip..lo.wskip + skip_ch * res], &self.z, &mut self.skip, true);
            for (si, bi) in self.skip.iter_mut().zip(&p[lo.bskip..lo.bskip + skip_ch]) {
                *si += bi;
            }
            self.x_next.copy_from_slice(&p[lo.bres..lo.bres + res]);
            matvec(&p[lo.wres..lo.wres + res * res], &self.z, &mut self.x_next, true);
            for i in 0..res {
                self.x_next[i] += self.x[i];
            }
            if commit {
                self.rings[l].push(&self.x);
            }
            std::mem::swap(&mut self.x, &mut self.x_next);
        }

        let mut logits = [0.0f64; ALPHABET];
        if need_logits {
            let mut s_act = vec![0.0f64; skip_ch];
            for i in 0..skip_ch {
                s_act[i] = self.skip[i].max(0.0);
            }
            let mut h1 = p[lay.h1b..lay.h1b + skip_ch].to_vec();
            matvec(&p[lay.h1w..lay.h1w + skip_ch * skip_ch], &s_act, &mut h1, true);
            for v in h1.iter_mut() {
                *v = v.max(0.0);
            }
            logits.copy_from_slice(&p[lay.h2b..lay.h2b + ALPHABET]);
            matvec(&p[lay.h2w..lay.h2w + ALPHABET * skip_ch], &h1, &mut logits, true);
        }
        logits
    }
}

impl ModelSession for GatedConvSession<'_> {
    fn next_distribution(&mut self, theta: &[f64]) -> Result<SymbolDistribution, ModelError> {
        let cond = self.model.config.conditioning_dim;
        if theta.len() != cond {
            return Err(ModelError::DimensionMismatch { expected: cond, got: theta.len() });
        }
        let mut norm = std::mem::take(&mut self.theta_norm);
        normalize_theta(theta, &mut norm);
        let logits = self.run_step(&norm, false, true);
        self.theta_norm = norm;
        Ok(SymbolDistribution::from_logits(&logits))
    }

    fn advance(&mut self, symbol: u8, theta: &[f64]) {
        let cond = self.model.config.conditioning_dim;
        assert_eq!(theta.len(), cond, "conditioning dimension mismatch in advance");
        let mut norm = std::mem::take(&mut self.theta_norm);
        normalize_theta(theta, &mut norm);
        self.run_step(&norm, true, false);
        self.theta_norm = norm;
        self.prev = symbol;
    }
}

impl ConditionalModel for GatedConvModel {
    fn kind(&self) -> &'static str {
        "gated-conv"
    }

    fn conditioning_dim(&self) -> usize {
        self.config.conditioning_dim
    }

    fn receptive_field(&self) -> usize {
        self.config.receptive_field()
    }

    fn start_session(&self) -> Box<dyn ModelSession + '_> {
        Box::new(GatedConvSession::new(self))
    }

    fn write_params(&self, out: &mut Vec<u8>) {
        let c = &self.config;
        for v in [
            c.stacks,
            c.layers_per_stack,
            c.residual_channels,
            c.skip_channels,
            c.conditioning_dim,
        ] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        out.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        for &p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
    }
}

impl GatedConvModel {
    pub fn parse_params(bytes: &[u8]) -> Option<Self> {
        if bytes.len() < 28 {
            return None;
        }
        let mut off = 0usize;
        let mut next_u32 = || {
            let v = u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as usize;
            off += 4;
            v
        };
        let config = GatedConvConfig {
            stacks: next_u32(),
            layers_per_stack: next_u32(),
            residual_channels: next_u32(),
            skip_channels: next_u32(),
            conditioning_dim: next_u32(),
        };
        if config.stacks == 0
            || config.layers_per_stack == 0
            || config.layers_per_stack > 16
            || config.residual_channels == 0
            || config.skip_channels == 0
        {
            return None;
        }
        let count = u64::from_le_bytes(bytes.get(off..off + 8)?.try_into().unwrap()) as usize;
        off += 8;
        let layout = Layout::new(&config);
        if count != layout.total || bytes.len() < off + count * 8 {
            return None;
        }
        let mut params = Vec::with_capacity(count);
        for k in 0..count {
            let at = off + k * 8;
            params.push(f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap()));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return None;
        }
        Some(Self { config, layout, params })
    }
}
