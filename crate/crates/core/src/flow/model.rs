//! Patch-token transformer denoiser with adaptive layer-norm time modulation
//! and hand-written backpropagation.
//!
//! Each `patch`×`patch` tile of the noisy latent is concatenated with the
//! matching tile of the condition and embedded as one token. The network
//! predicts a clean-sample residual on top of the condition; velocity follows
//! from the linear interpolation path as `(x̂₀ − x_t) / (1 − t)`.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::tensor::{add_row, col_sum, gelu, gelu_grad, matmul, silu, silu_grad, Real};
use super::FlowError;

/// Lower bound on `1 − t` when converting a clean-sample estimate to a velocity.
pub const MIN_REMAINING: f64 = 0.05;
const LN_EPS: f64 = 1e-6;

/// What the network's output head represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prediction {
    /// A residual on the condition image giving x̂₀.
    #[default]
    CleanSample,
    /// The velocity `x₀ − x₁` directly.
    Velocity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub patch: usize,
    pub dim: usize,
    pub depth: usize,
    pub heads: usize,
    pub mlp_ratio: usize,
    /// Width of the sinusoidal time features.
    pub time_dim: usize,
    #[serde(default)]
    pub prediction: Prediction,
}

impl ModelConfig {
    /// Defaults sized for single-core training on small grids.
    pub fn small(height: usize, width: usize, patch: usize) -> Self {
        ModelConfig {
            channels: 3,
            height,
            width,
            patch,
            dim: 128,
            depth: 4,
            heads: 4,
            mlp_ratio: 2,
            time_dim: 128,
            prediction: Prediction::CleanSample,
        }
    }

    pub fn validate(&self) -> Result<(), FlowError> {
        let bad = |m: &str| Err(FlowError::Config(m.to_string()));
        if self.channels == 0 || self.patch == 0 || self.height == 0 || self.width == 0 {
            return bad("zero-sized image or patch");
        }
        if self.height % self.patch != 0 || self.width % self.patch != 0 {
            return bad("image sides must be multiples of the patch size");
        }
        if self.heads == 0 || self.dim == 0 || self.dim % self.heads != 0 || self.dim % 4 != 0 {
            return bad("dim must be a positive multiple of heads and of 4");
        }
        if self.depth == 0 || self.mlp_ratio == 0 || self.time_dim < 2 || self.time_dim % 2 != 0 {
            return bad("depth, mlp_ratio must be positive and time_dim even");
        }
        if self.tokens() > 4096 || self.dim > 4096 {
            return bad("model too large");
        }
        Ok(())
    }

    pub fn tokens(&self) -> usize {
        (self.height / self.patch) * (self.width / self.patch)
    }

    pub fn latent_len(&self) -> usize {
        self.channels * self.height * self.width
    }

    fn token_out(&self) -> usize {
        self.channels * self.patch * self.patch
    }

    fn token_in(&self) -> usize {
        2 * self.token_out()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct BlockIdx {
    w_mod: usize,
    b_mod: usize,
    w_qkv: usize,
    b_qkv: usize,
    w_o: usize,
    b_o: usize,
    w_1: usize,
    b_1: usize,
    w_2: usize,
    b_2: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Idx {
    w_in: usize,
    b_in: usize,
    pos: usize,
    w_t1: usize,
    b_t1: usize,
    w_t2: usize,
    b_t2: usize,
    blocks: Vec<BlockIdx>,
    w_f: usize,
    b_f: usize,
    w_out: usize,
    b_out: usize,
}

/// How a tensor is initialized.
#[derive(Clone, Copy)]
enum Init {
    Zero,
    /// Normal with this standard deviation.
    Normal(f64),
    /// Normal with std `sqrt(2 / (fan_in + fan_out))`.
    Xavier,
    /// Fixed 2-D sine/cosine table over a rows × cols token grid.
    SinCos2d(usize, usize),
}

/// Half the features encode the row, half the column, each as sin/cos pairs.
fn sincos_2d(rows: usize, cols: usize, dim: usize) -> Vec<f64> {
    let quarter = dim / 4;
    let mut out = vec![0.0; rows * cols * dim];
    for r in 0..rows {
        for c in 0..cols {
            let row = &mut out[(r * cols + c) * dim..][..dim];
            for (offset, coord) in [(0, r), (2 * quarter, c)] {
                for i in 0..quarter {
                    let omega = 1.0 / 10_000f64.powf(i as f64 / quarter as f64);
                    let arg = coord as f64 * omega;
                    row[offset + i] = arg.sin();
                    row[offset + quarter + i] = arg.cos();
                }
            }
        }
    }
    out
}

fn layout(cfg: &ModelConfig) -> (Vec<(String, Vec<usize>, Init)>, Idx) {
    let mut specs: Vec<(String, Vec<usize>, Init)> = Vec::new();
    let mut add = |name: String, shape: Vec<usize>, init: Init| {
        specs.push((name, shape, init));
        specs.len() - 1
    };
    let d = cfg.dim;
    let f = d * cfg.mlp_ratio;
    let w_in = add("embed.w".into(), vec![cfg.token_in(), d], Init::Xavier);
    let b_in = add("embed.b".into(), vec![d], Init::Zero);
    let pos = add(
        "embed.pos".into(), vec![cfg.tokens(), d],
        Init::SinCos2d(cfg.height / cfg.patch, cfg.width / cfg.patch),
    );
    let w_t1 = add("time.w1".into(), vec![cfg.time_dim, d], Init::Normal(0.02));
    let b_t1 = add("time.b1".into(), vec![d], Init::Zero);
    let w_t2 = add("time.w2".into(), vec![d, d], Init::Normal(0.02));
    let b_t2 = add("time.b2".into(), vec![d], Init::Zero);
    let blocks = (0..cfg.depth)
        .map(|l| {
            let p = |s: &str| format!("block{l}.{s}");
            BlockIdx {
                w_mod: add(p("mod.w"), vec![d, 6 * d], Init::Zero),
                b_mod: add(p("mod.b"), vec![6 * d], Init::Zero),
                w_qkv: add(p("qkv.w"), vec![d, 3 * d], Init::Xavier),
                b_qkv: add(p("qkv.b"), vec![3 * d], Init::Zero),
                w_o: add(p("proj.w"), vec![d, d], Init::Xavier),
                b_o: add(p("proj.b"), vec![d], Init::Zero),
                w_1: add(p("mlp.w1"), vec![d, f], Init::Xavier),
                b_1: add(p("mlp.b1"), vec![f], Init::Zero),
                w_2: add(p("mlp.w2"), vec![f, d], Init::Xavier),
                b_2: add(p("mlp.b2"), vec![d], Init::Zero),
            }
        })
        .collect();
    let w_f = add("final.mod.w".into(), vec![d, 2 * d], Init::Zero);
    let b_f = add("final.mod.b".into(), vec![2 * d], Init::Zero);
    let w_out = add("final.w".into(), vec![d, cfg.token_out()], Init::Zero);
    let b_out = add("final.b".into(), vec![cfg.token_out()], Init::Zero);
    (specs, Idx { w_in, b_in, pos, w_t1, b_t1, w_t2, b_t2, blocks, w_f, b_f, w_out, b_out })
}

/// Named parameter tensors in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct Params<T> {
    pub names: Vec<String>,
    pub shapes: Vec<Vec<usize>>,
    pub data: Vec<Vec<T>>,
}

impl<T: Real> Params<T> {
    pub fn zeros_like(&self) -> Self {
        Params {
            names: self.names.clone(),
            shapes: self.shapes.clone(),
            data: self.data.iter().map(|d| vec![T::zero(); d.len()]).collect(),
        }
    }

    pub fn count(&self) -> usize {
        self.data.iter().map(Vec::len).sum()
    }

    pub fn cast<U: Real>(&self) -> Params<U> {
        Params {
            names: self.names.clone(),
            shapes: self.shapes.clone(),
            data: self.data.iter().map(|d| d.iter().map(|v| U::of(v.to_f64().unwrap())).collect()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Denoiser<T> {
    pub config: ModelConfig,
    pub params: Params<T>,
    idx: Idx,
}

struct BlockCache<T> {
    modv: Vec<T>,
    n1: Vec<T>,
    rstd1: Vec<T>,
    a1: Vec<T>,
    qkv: Vec<T>,
    probs: Vec<T>,
    att: Vec<T>,
    o: Vec<T>,
    n2: Vec<T>,
    rstd2: Vec<T>,
    a2: Vec<T>,
    u: Vec<T>,
    gl: Vec<T>,
    m: Vec<T>,
}

/// Activations kept for the backward pass.
pub struct Cache<T> {
    batch: usize,
    tokens_in: Vec<T>,
    tfeat: Vec<T>,
    e1: Vec<T>,
    s1: Vec<T>,
    e2: Vec<T>,
    c: Vec<T>,
    blocks: Vec<BlockCache<T>>,
    modf: Vec<T>,
    nf: Vec<T>,
    rstdf: Vec<T>,
    af: Vec<T>,
}

/// Row-wise layer norm without affine terms; returns (normalized, 1/std).
fn layer_norm<T: Real>(x: &[T], d: usize) -> (Vec<T>, Vec<T>) {
    let mut y = vec![T::zero(); x.len()];
    let mut rstd = Vec::with_capacity(x.len() / d);
    for (row, out) in x.chunks_exact(d).zip(y.chunks_exact_mut(d)) {
        let mean = row.iter().copied().sum::<T>() / T::of(d as f64);
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / T::of(d as f64);
        let r = T::one() / (var + T::of(LN_EPS)).sqrt();
        for (o, &v) in out.iter_mut().zip(row) {
            *o = (v - mean) * r;
        }
        rstd.push(r);
    }
    (y, rstd)
}

/// Accumulate the layer-norm input gradient into `dx`.
fn layer_norm_back<T: Real>(dy: &[T], y: &[T], rstd: &[T], d: usize, dx: &mut [T]) {
    let inv = T::one() / T::of(d as f64);
    for (((g, yr), &r), out) in dy.chunks_exact(d).zip(y.chunks_exact(d)).zip(rstd).zip(dx.chunks_exact_mut(d)) {
        let mg = g.iter().copied().sum::<T>() * inv;
        let mgy = g.iter().zip(yr).map(|(&a, &b)| a * b).sum::<T>() * inv;
        for ((o, &gi), &yi) in out.iter_mut().zip(g).zip(yr) {
            *o += r * (gi - mg - yi * mgy);
        }
    }
}

/// `a = n ⊙ (1 + scale[b]) + shift[b]` per sample, modulation read from
/// columns `[shift_col, shift_col + d)` and `[scale_col, …)` of `modv`.
fn modulate<T: Real>(n: &[T], modv: &[T], mod_w: usize, shift_col: usize, scale_col: usize, tokens: usize, d: usize) -> Vec<T> {
    let mut a = vec![T::zero(); n.len()];
    for (i, (row, out)) in n.chunks_exact(d).zip(a.chunks_exact_mut(d)).enumerate() {
        let m = &modv[(i / tokens) * mod_w..][..mod_w];
        for j in 0..d {
            out[j] = row[j] * (T::one() + m[scale_col + j]) + m[shift_col + j];
        }
    }
    a
}

/// Backward of [`modulate`]: accumulates into `dmod` and returns `dn`.
#[allow(clippy::too_many_arguments)]
fn modulate_back<T: Real>(da: &[T], n: &[T], modv: &[T], dmod: &mut [T], mod_w: usize, shift_col: usize, scale_col: usize, tokens: usize, d: usize) -> Vec<T> {
    let mut dn = vec![T::zero(); da.len()];
    for (i, ((g, row), out)) in da.chunks_exact(d).zip(n.chunks_exact(d)).zip(dn.chunks_exact_mut(d)).enumerate() {
        let b = i / tokens;
        let m = &modv[b * mod_w..][..mod_w];
        let dm = &mut dmod[b * mod_w..][..mod_w];
        for j in 0..d {
            dm[shift_col + j] += g[j];
            dm[scale_col + j] += g[j] * row[j];
            out[j] = g[j] * (T::one() + m[scale_col + j]);
        }
    }
    dn
}

/// `h += gate[b] ⊙ x` per sample.
fn gated_add<T: Real>(h: &mut [T], x: &[T], modv: &[T], mod_w: usize, gate_col: usize, tokens: usize, d: usize) {
    for (i, (hr, xr)) in h.chunks_exact_mut(d).zip(x.chunks_exact(d)).enumerate() {
        let g = &modv[(i / tokens) * mod_w + gate_col..][..d];
        for j in 0..d {
            hr[j] += g[j] * xr[j];
        }
    }
}

/// Backward of [`gated_add`] with respect to the gate and `x`.
fn gated_add_back<T: Real>(dh: &[T], x: &[T], modv: &[T], dmod: &mut [T], mod_w: usize, gate_col: usize, tokens: usize, d: usize) -> Vec<T> {
    let mut dx = vec![T::zero(); dh.len()];
    for (i, ((g, xr), out)) in dh.chunks_exact(d).zip(x.chunks_exact(d)).zip(dx.chunks_exact_mut(d)).enumerate() {
        let b = i / tokens;
        let gate = &modv[b * mod_w + gate_col..][..d];
        let dg = &mut dmod[b * mod_w + gate_col..][..d];
        for j in 0..d {
            dg[j] += g[j] * xr[j];
            out[j] = g[j] * gate[j];
        }
    }
    dx
}

fn linear<T: Real>(x: &[T], w: &[T], b: &[T], rows: usize, din: usize, dout: usize) -> Vec<T> {
    let mut y = vec![T::zero(); rows * dout];
    matmul(x, false, w, false, &mut y, rows, din, dout, false);
    add_row(&mut y, b);
    y
}

/// Accumulate weight/bias gradients and return the input gradient.
#[allow(clippy::too_many_arguments)]
fn linear_back<T: Real>(dy: &[T], x: &[T], w: &[T], dw: &mut [T], db: &mut [T], rows: usize, din: usize, dout: usize) -> Vec<T> {
    matmul(x, true, dy, false, dw, din, rows, dout, true);
    col_sum(dy, db);
    let mut dx = vec![T::zero(); rows * din];
    matmul(dy, false, w, true, &mut dx, rows, dout, din, false);
    dx
}

fn time_features<T: Real>(t: &[T], dim: usize) -> Vec<T> {
    let half = dim / 2;
    let mut out = vec![T::zero(); t.len() * dim];
    for (b, &tv) in t.iter().enumerate() {
        for i in 0..half {
            let freq = (-(10_000f64.ln()) * i as f64 / half as f64).exp();
            let arg = tv.to_f64().unwrap() * 1000.0 * freq;
            out[b * dim + i] = T::of(arg.cos());
            out[b * dim + half + i] = T::of(arg.sin());
        }
    }
    out
}

impl<T: Real> Denoiser<T> {
    /// Fresh network. Modulation and output layers start at zero, so the
    /// initial clean-sample estimate is the condition itself.
    pub fn init<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Result<Self, FlowError> {
        config.validate()?;
        let (specs, idx) = layout(&config);
        let mut params = Params { names: Vec::new(), shapes: Vec::new(), data: Vec::new() };
        for (name, shape, init) in specs {
            let len: usize = shape.iter().product();
            let std = match init {
                Init::Zero | Init::SinCos2d(..) => 0.0,
                Init::Normal(s) => s,
                Init::Xavier => (2.0 / (shape[0] + shape[shape.len() - 1]) as f64).sqrt(),
            };
            let data = if let Init::SinCos2d(rows, cols) = init {
                sincos_2d(rows, cols, config.dim).into_iter().map(T::of).collect()
            } else if std == 0.0 {
                vec![T::zero(); len]
            } else {
                let dist = Normal::new(0.0, std).expect("positive std");
                (0..len).map(|_| T::of(dist.sample(rng))).collect()
            };
            params.names.push(name);
            params.shapes.push(shape);
            params.data.push(data);
        }
        Ok(Denoiser { config, params, idx })
    }

    /// Rebuild from stored tensors, checking names and shapes.
    pub fn from_params(config: ModelConfig, params: Params<T>) -> Result<Self, FlowError> {
        config.validate()?;
        let (specs, idx) = layout(&config);
        if specs.len() != params.names.len() {
            return Err(FlowError::Config(format!("expected {} tensors, got {}", specs.len(), params.names.len())));
        }
        for (i, (name, shape, _)) in specs.iter().enumerate() {
            let len: usize = shape.iter().product();
            if &params.names[i] != name || &params.shapes[i] != shape || params.data[i].len() != len {
                return Err(FlowError::Config(format!("tensor {i} should be {name} {shape:?}")));
            }
        }
        Ok(Denoiser { config, params, idx })
    }

    fn p(&self, i: usize) -> &[T] {
        &self.params.data[i]
    }

    /// Split latents (`batch × C×H×W`, channel-planar) into token rows and
    /// interleave the matching condition tile.
    fn patchify(&self, x_t: &[T], cond: &[T], batch: usize) -> Vec<T> {
        let c = &self.config;
        let (p, gw) = (c.patch, c.width / c.patch);
        let half = c.token_out();
        let n = c.tokens();
        let mut out = vec![T::zero(); batch * n * 2 * half];
        for b in 0..batch {
            for tok in 0..n {
                let (ty, tx) = (tok / gw, tok % gw);
                let row = &mut out[(b * n + tok) * 2 * half..][..2 * half];
                let mut k = 0;
                for ch in 0..c.channels {
                    for dy in 0..p {
                        let src = b * c.latent_len() + ch * c.height * c.width + (ty * p + dy) * c.width + tx * p;
                        row[k..k + p].copy_from_slice(&x_t[src..src + p]);
                        row[half + k..half + k + p].copy_from_slice(&cond[src..src + p]);
                        k += p;
                    }
                }
            }
        }
        out
    }

    /// Inverse of the output half of [`Self::patchify`]; `add` selects
    /// accumulate-into versus scatter.
    fn unpatchify(&self, tokens: &[T], batch: usize, out: &mut [T]) {
        let c = &self.config;
        let (p, gw) = (c.patch, c.width / c.patch);
        let q = c.token_out();
        for b in 0..batch {
            for tok in 0..c.tokens() {
                let (ty, tx) = (tok / gw, tok % gw);
                let row = &tokens[(b * c.tokens() + tok) * q..][..q];
                let mut k = 0;
                for ch in 0..c.channels {
                    for dy in 0..p {
                        let dst = b * c.latent_len() + ch * c.height * c.width + (ty * p + dy) * c.width + tx * p;
                        for dx in 0..p {
                            out[dst + dx] += row[k + dx];
                        }
                        k += p;
                    }
                }
            }
        }
    }

    fn patchify_out(&self, img: &[T], batch: usize) -> Vec<T> {
        let c = &self.config;
        let (p, gw) = (c.patch, c.width / c.patch);
        let q = c.token_out();
        let mut out = vec![T::zero(); batch * c.tokens() * q];
        for b in 0..batch {
            for tok in 0..c.tokens() {
                let (ty, tx) = (tok / gw, tok % gw);
                let row = &mut out[(b * c.tokens() + tok) * q..][..q];
                let mut k = 0;
                for ch in 0..c.channels {
                    for dy in 0..p {
                        let src = b * c.latent_len() + ch * c.height * c.width + (ty * p + dy) * c.width + tx * p;
                        row[k..k + p].copy_from_slice(&img[src..src + p]);
                        k += p;
                    }
                }
            }
        }
        out
    }

    fn check_shapes(&self, x_t: &[T], cond: &[T], t: &[T]) -> Result<usize, FlowError> {
        let len = self.config.latent_len();
        let batch = t.len();
        if batch == 0 || x_t.len() != batch * len || cond.len() != batch * len {
            return Err(FlowError::Shape(format!(
                "batch {batch}: x_t {} and cond {} values, expected {} each",
                x_t.len(),
                cond.len(),
                batch * len
            )));
        }
        Ok(batch)
    }

    /// Clean-sample estimate x̂₀ for a batch (`t.len()` samples).
    pub fn predict_x0(&self, x_t: &[T], cond: &[T], t: &[T]) -> Result<Vec<T>, FlowError> {
        let out = self.forward(x_t, cond, t)?.0;
        Ok(match self.config.prediction {
            Prediction::CleanSample => out,
            Prediction::Velocity => velocity_to_x0(&out, x_t, t),
        })
    }

    /// Velocity for a batch; a clean-sample head is converted with
    /// `(x̂₀ − x_t) / max(1 − t, MIN_REMAINING)`.
    pub fn velocity(&self, x_t: &[T], cond: &[T], t: &[T]) -> Result<Vec<T>, FlowError> {
        let out = self.forward(x_t, cond, t)?.0;
        Ok(match self.config.prediction {
            Prediction::CleanSample => x0_to_velocity(&out, x_t, t),
            Prediction::Velocity => out,
        })
    }

    pub fn forward(&self, x_t: &[T], cond: &[T], t: &[T]) -> Result<(Vec<T>, Cache<T>), FlowError> {
        let batch = self.check_shapes(x_t, cond, t)?;
        let cfg = &self.config;
        let (d, n, f) = (cfg.dim, cfg.tokens(), cfg.dim * cfg.mlp_ratio);
        let rows = batch * n;
        let ix = &self.idx;

        let tokens_in = self.patchify(x_t, cond, batch);
        let mut h = linear(&tokens_in, self.p(ix.w_in), self.p(ix.b_in), rows, cfg.token_in(), d);
        for (i, row) in h.chunks_exact_mut(d).enumerate() {
            for (v, &pe) in row.iter_mut().zip(&self.p(ix.pos)[(i % n) * d..][..d]) {
                *v += pe;
            }
        }

        let tfeat = time_features(t, cfg.time_dim);
        let e1 = linear(&tfeat, self.p(ix.w_t1), self.p(ix.b_t1), batch, cfg.time_dim, d);
        let s1: Vec<T> = e1.iter().map(|&v| silu(v)).collect();
        let e2 = linear(&s1, self.p(ix.w_t2), self.p(ix.b_t2), batch, d, d);
        let c: Vec<T> = e2.iter().map(|&v| silu(v)).collect();

        let mut blocks = Vec::with_capacity(cfg.depth);
        for bi in &ix.blocks {
            let modv = linear(&c, self.p(bi.w_mod), self.p(bi.b_mod), batch, d, 6 * d);
            let (n1, rstd1) = layer_norm(&h, d);
            let a1 = modulate(&n1, &modv, 6 * d, 0, d, n, d);
            let qkv = linear(&a1, self.p(bi.w_qkv), self.p(bi.b_qkv), rows, d, 3 * d);
            let (att, probs) = self.attention(&qkv, batch);
            let o = linear(&att, self.p(bi.w_o), self.p(bi.b_o), rows, d, d);
            gated_add(&mut h, &o, &modv, 6 * d, 2 * d, n, d);
            let (n2, rstd2) = layer_norm(&h, d);
            let a2 = modulate(&n2, &modv, 6 * d, 3 * d, 4 * d, n, d);
            let u = linear(&a2, self.p(bi.w_1), self.p(bi.b_1), rows, d, f);
            let gl: Vec<T> = u.iter().map(|&v| gelu(v)).collect();
            let m = linear(&gl, self.p(bi.w_2), self.p(bi.b_2), rows, f, d);
            gated_add(&mut h, &m, &modv, 6 * d, 5 * d, n, d);
            blocks.push(BlockCache { modv, n1, rstd1, a1, qkv, probs, att, o, n2, rstd2, a2, u, gl, m });
        }

        let modf = linear(&c, self.p(ix.w_f), self.p(ix.b_f), batch, d, 2 * d);
        let (nf, rstdf) = layer_norm(&h, d);
        let af = modulate(&nf, &modf, 2 * d, 0, d, n, d);
        let out = linear(&af, self.p(ix.w_out), self.p(ix.b_out), rows, d, cfg.token_out());

        let mut head = match cfg.prediction {
            Prediction::CleanSample => cond.to_vec(),
            Prediction::Velocity => vec![T::zero(); cond.len()],
        };
        self.unpatchify(&out, batch, &mut head);
        let cache = Cache { batch, tokens_in, tfeat, e1, s1, e2, c, blocks, modf, nf, rstdf, af };
        Ok((head, cache))
    }

    /// Multi-head self-attention over each sample's tokens. Returns the
    /// concatenated head outputs and the attention probabilities.
    fn attention(&self, qkv: &[T], batch: usize) -> (Vec<T>, Vec<T>) {
        let cfg = &self.config;
        let (d, n, heads) = (cfg.dim, cfg.tokens(), cfg.heads);
        let dh = d / heads;
        let scale = T::one() / T::of(dh as f64).sqrt();
        let mut att = vec![T::zero(); batch * n * d];
        let mut probs = vec![T::zero(); batch * heads * n * n];
        let ld = 3 * d as isize;
        for b in 0..batch {
            let base = b * n * 3 * d;
            for hd in 0..heads {
                let p = &mut probs[(b * heads + hd) * n * n..][..n * n];
                // scores = Q Kᵀ · scale
                T::gemm(n, dh, n, scale, &qkv[base + hd * dh..], ld, 1, &qkv[base + d + hd * dh..], 1, ld, T::zero(), p, n as isize, 1);
                for row in p.chunks_exact_mut(n) {
                    let mx = row.iter().copied().fold(T::neg_infinity(), T::max);
                    let mut sum = T::zero();
                    for v in row.iter_mut() {
                        *v = (*v - mx).exp();
                        sum += *v;
                    }
                    for v in row.iter_mut() {
                        *v /= sum;
                    }
                }
                T::gemm(n, n, dh, T::one(), p, n as isize, 1, &qkv[base + 2 * d + hd * dh..], ld, 1, T::zero(), &mut att[b * n * d + hd * dh..], d as isize, 1);
            }
        }
        (att, probs)
    }

    fn attention_back(&self, datt: &[T], qkv: &[T], probs: &[T], batch: usize) -> Vec<T> {
        let cfg = &self.config;
        let (d, n, heads) = (cfg.dim, cfg.tokens(), cfg.heads);
        let dh = d / heads;
        let scale = T::one() / T::of(dh as f64).sqrt();
        let mut dqkv = vec![T::zero(); qkv.len()];
        let ld = 3 * d as isize;
        let mut dp = vec![T::zero(); n * n];
        for b in 0..batch {
            let base = b * n * 3 * d;
            for hd in 0..heads {
                let p = &probs[(b * heads + hd) * n * n..][..n * n];
                let dout = &datt[b * n * d + hd * dh..];
                // dP = dO Vᵀ
                T::gemm(n, dh, n, T::one(), dout, d as isize, 1, &qkv[base + 2 * d + hd * dh..], 1, ld, T::zero(), &mut dp, n as isize, 1);
                // dV = Pᵀ dO
                T::gemm(n, n, dh, T::one(), p, 1, n as isize, dout, d as isize, 1, T::zero(), &mut dqkv[base + 2 * d + hd * dh..], ld, 1);
                for (dr, pr) in dp.chunks_exact_mut(n).zip(p.chunks_exact(n)) {
                    let dot: T = dr.iter().zip(pr).map(|(&a, &b)| a * b).sum();
                    for (g, &pv) in dr.iter_mut().zip(pr) {
                        *g = pv * (*g - dot);
                    }
                }
                // dQ = dS K · scale ; dK = dSᵀ Q · scale
                T::gemm(n, n, dh, scale, &dp, n as isize, 1, &qkv[base + d + hd * dh..], ld, 1, T::zero(), &mut dqkv[base + hd * dh..], ld, 1);
                T::gemm(n, n, dh, scale, &dp, 1, n as isize, &qkv[base + hd * dh..], ld, 1, T::zero(), &mut dqkv[base + d + hd * dh..], ld, 1);
            }
        }
        dqkv
    }

    /// Parameter gradients given the loss gradient with respect to x̂₀.
    pub fn backward(&self, cache: &Cache<T>, d_x0: &[T]) -> Params<T> {
        let cfg = &self.config;
        let (d, n, f) = (cfg.dim, cfg.tokens(), cfg.dim * cfg.mlp_ratio);
        let batch = cache.batch;
        let rows = batch * n;
        let ix = &self.idx;
        let mut g = self.params.zeros_like();
        let mut dc = vec![T::zero(); batch * d];

        let dout = self.patchify_out(d_x0, batch);
        let daf = {
            let (dw, rest) = split2(&mut g.data, ix.w_out, ix.b_out);
            linear_back(&dout, &cache.af, self.p(ix.w_out), dw, rest, rows, d, cfg.token_out())
        };
        let mut dmodf = vec![T::zero(); batch * 2 * d];
        let dnf = modulate_back(&daf, &cache.nf, &cache.modf, &mut dmodf, 2 * d, 0, d, n, d);
        let mut dh = vec![T::zero(); rows * d];
        layer_norm_back(&dnf, &cache.nf, &cache.rstdf, d, &mut dh);
        {
            let (dw, db) = split2(&mut g.data, ix.w_f, ix.b_f);
            let dcf = linear_back(&dmodf, &cache.c, self.p(ix.w_f), dw, db, batch, d, 2 * d);
            add_into(&mut dc, &dcf);
        }

        for (bi, bc) in ix.blocks.iter().zip(&cache.blocks).rev() {
            let mut dmod = vec![T::zero(); batch * 6 * d];
            // MLP branch
            let dm = gated_add_back(&dh, &bc.m, &bc.modv, &mut dmod, 6 * d, 5 * d, n, d);
            let dgl = {
                let (dw, db) = split2(&mut g.data, bi.w_2, bi.b_2);
                linear_back(&dm, &bc.gl, self.p(bi.w_2), dw, db, rows, f, d)
            };
            let du: Vec<T> = dgl.iter().zip(&bc.u).map(|(&gv, &u)| gv * gelu_grad(u)).collect();
            let da2 = {
                let (dw, db) = split2(&mut g.data, bi.w_1, bi.b_1);
                linear_back(&du, &bc.a2, self.p(bi.w_1), dw, db, rows, d, f)
            };
            let dn2 = modulate_back(&da2, &bc.n2, &bc.modv, &mut dmod, 6 * d, 3 * d, 4 * d, n, d);
            layer_norm_back(&dn2, &bc.n2, &bc.rstd2, d, &mut dh);
            // attention branch
            let do_ = gated_add_back(&dh, &bc.o, &bc.modv, &mut dmod, 6 * d, 2 * d, n, d);
            let datt = {
                let (dw, db) = split2(&mut g.data, bi.w_o, bi.b_o);
                linear_back(&do_, &bc.att, self.p(bi.w_o), dw, db, rows, d, d)
            };
            let dqkv = self.attention_back(&datt, &bc.qkv, &bc.probs, batch);
            let da1 = {
                let (dw, db) = split2(&mut g.data, bi.w_qkv, bi.b_qkv);
                linear_back(&dqkv, &bc.a1, self.p(bi.w_qkv), dw, db, rows, d, 3 * d)
            };
            let dn1 = modulate_back(&da1, &bc.n1, &bc.modv, &mut dmod, 6 * d, 0, d, n, d);
            layer_norm_back(&dn1, &bc.n1, &bc.rstd1, d, &mut dh);
            let (dw, db) = split2(&mut g.data, bi.w_mod, bi.b_mod);
            let dcb = linear_back(&dmod, &cache.c, self.p(bi.w_mod), dw, db, batch, d, 6 * d);
            add_into(&mut dc, &dcb);
        }

        {
            let (dw, db) = split2(&mut g.data, ix.w_in, ix.b_in);
            matmul(&cache.tokens_in, true, &dh, false, dw, cfg.token_in(), rows, d, true);
            col_sum(&dh, db);
        }
        for (i, row) in dh.chunks_exact(d).enumerate() {
            for (p, &v) in g.data[ix.pos][(i % n) * d..][..d].iter_mut().zip(row) {
                *p += v;
            }
        }

        let de2: Vec<T> = dc.iter().zip(&cache.e2).map(|(&gv, &e)| gv * silu_grad(e)).collect();
        let ds1 = {
            let (dw, db) = split2(&mut g.data, ix.w_t2, ix.b_t2);
            linear_back(&de2, &cache.s1, self.p(ix.w_t2), dw, db, batch, d, d)
        };
        let de1: Vec<T> = ds1.iter().zip(&cache.e1).map(|(&gv, &e)| gv * silu_grad(e)).collect();
        let (dw, db) = split2(&mut g.data, ix.w_t1, ix.b_t1);
        matmul(&cache.tfeat, true, &de1, false, dw, cfg.time_dim, batch, d, true);
        col_sum(&de1, db);
        g
    }
}

/// Velocity implied by a clean-sample estimate on the linear path.
pub fn x0_to_velocity<T: Real>(x0: &[T], x_t: &[T], t: &[T]) -> Vec<T> {
    let per = x0.len() / t.len();
    x0.iter()
        .zip(x_t)
        .enumerate()
        .map(|(i, (&a, &b))| (a - b) / remaining(t[i / per]))
        .collect()
}

/// `x_t + (1 − t)·v`.
pub fn velocity_to_x0<T: Real>(v: &[T], x_t: &[T], t: &[T]) -> Vec<T> {
    let per = v.len() / t.len();
    v.iter()
        .zip(x_t)
        .enumerate()
        .map(|(i, (&a, &b))| b + (T::one() - t[i / per]) * a)
        .collect()
}

/// `max(1 − t, MIN_REMAINING)`.
pub fn remaining<T: Real>(t: T) -> T {
    (T::one() - t).max(T::of(MIN_REMAINING))
}

fn add_into<T: Real>(acc: &mut [T], x: &[T]) {
    for (a, &v) in acc.iter_mut().zip(x) {
        *a += v;
    }
}

/// Two distinct mutable tensors from the gradient store (`i < j`).
fn split2<T>(data: &mut [Vec<T>], i: usize, j: usize) -> (&mut [T], &mut [T]) {
    assert!(i < j);
    let (lo, hi) = data.split_at_mut(j);
    (&mut lo[i], &mut hi[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::split_rng;

    fn tiny() -> ModelConfig {
        ModelConfig { channels: 3, height: 8, width: 12, patch: 4, dim: 16, depth: 2, heads: 2, mlp_ratio: 2, time_dim: 8, prediction: Default::default() }
    }

    /// Perturb every tensor so zero-initialized layers carry gradient.
    fn jittered(seed: u64) -> Denoiser<f64> {
        let mut rng = split_rng(seed, "jitter");
        let mut m = Denoiser::<f64>::init(tiny(), &mut rng).unwrap();
        let dist = Normal::new(0.0, 0.2).unwrap();
        for t in &mut m.params.data {
            for v in t.iter_mut() {
                *v += dist.sample(&mut rng);
            }
        }
        m
    }

    fn inputs(cfg: &ModelConfig, batch: usize, seed: u64) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut rng = split_rng(seed, "inputs");
        let len = batch * cfg.latent_len();
        let x: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let tgt: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let t: Vec<f64> = (0..batch).map(|_| rng.random_range(0.05..0.95)).collect();
        (x, c, t, tgt)
    }

    fn loss(m: &Denoiser<f64>, x: &[f64], c: &[f64], t: &[f64], tgt: &[f64]) -> f64 {
        let x0 = m.forward(x, c, t).unwrap().0;
        x0.iter().zip(tgt).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x0.len() as f64
    }

    #[test]
    fn fresh_model_outputs() {
        let len = tiny().latent_len();
        let c: Vec<f32> = (0..len).map(|i| (i as f32 * 0.01).sin()).collect();
        let x = vec![0.3f32; len];
        let clean = ModelConfig { prediction: Prediction::CleanSample, ..tiny() };
        let m = Denoiser::<f32>::init(clean, &mut split_rng(0, "i")).unwrap();
        assert_eq!(m.predict_x0(&x, &c, &[0.5]).unwrap(), c);
        let vel = ModelConfig { prediction: Prediction::Velocity, ..tiny() };
        let m = Denoiser::<f32>::init(vel, &mut split_rng(0, "i")).unwrap();
        assert!(m.velocity(&x, &c, &[0.5]).unwrap().iter().all(|&v| v == 0.0));
        assert_eq!(m.predict_x0(&x, &c, &[0.5]).unwrap(), x);
    }

    #[test]
    fn position_table_starts_as_sincos() {
        let m = Denoiser::<f64>::init(tiny(), &mut split_rng(0, "i")).unwrap();
        let pos = &m.params.data[m.idx.pos];
        let d = tiny().dim;
        // Token (0, 0): sin 0 = 0 and cos 0 = 1 in each quarter.
        assert_eq!(&pos[..d / 4], &vec![0.0; d / 4][..]);
        assert_eq!(&pos[d / 4..d / 2], &vec![1.0; d / 4][..]);
        // Token (0, 1) differs from (1, 0).
        assert_ne!(&pos[d..2 * d], &pos[3 * d..4 * d]);
    }

    #[test]
    fn gradients_match_finite_differences() {
        for prediction in [Prediction::Velocity, Prediction::CleanSample] {
            check_gradients(prediction);
        }
    }

    fn check_gradients(prediction: Prediction) {
        let mut m = jittered(3);
        m.config.prediction = prediction;
        let (x, c, t, tgt) = inputs(&m.config, 2, 4);
        let (x0, cache) = m.forward(&x, &c, &t).unwrap();
        let scale = 2.0 / x0.len() as f64;
        let dx0: Vec<f64> = x0.iter().zip(&tgt).map(|(a, b)| scale * (a - b)).collect();
        let g = m.backward(&cache, &dx0);
        let h = 1e-5;
        for ti in 0..m.params.data.len() {
            for &k in &[0usize, 7, 13] {
                let k = k % m.params.data[ti].len();
                let orig = m.params.data[ti][k];
                m.params.data[ti][k] = orig + h;
                let lp = loss(&m, &x, &c, &t, &tgt);
                m.params.data[ti][k] = orig - h;
                let lm = loss(&m, &x, &c, &t, &tgt);
                m.params.data[ti][k] = orig;
                let fd = (lp - lm) / (2.0 * h);
                let an = g.data[ti][k];
                assert!(
                    (fd - an).abs() <= 1e-6 + 1e-4 * fd.abs().max(an.abs()),
                    "{}[{k}]: fd {fd} vs analytic {an}",
                    m.params.names[ti]
                );
            }
        }
    }

    #[test]
    fn batch_rows_are_independent() {
        let m = jittered(5);
        let (x, c, t, _) = inputs(&m.config, 3, 6);
        let all = m.predict_x0(&x, &c, &t).unwrap();
        let len = m.config.latent_len();
        let one = m.predict_x0(&x[len..2 * len], &c[len..2 * len], &t[1..2]).unwrap();
        for (a, b) in all[len..2 * len].iter().zip(&one) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn config_validation() {
        let mut c = tiny();
        c.patch = 5;
        assert!(c.validate().is_err());
        let mut c = tiny();
        c.heads = 3;
        assert!(c.validate().is_err());
    }
}
