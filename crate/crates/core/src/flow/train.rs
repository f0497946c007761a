//! Training loop: Adam with bias correction, global-norm clipping and an
//! exponential moving average of the weights.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::checkpoint::{CheckpointMeta, DenoiserCheckpoint};
use super::model::{remaining, Denoiser, Params, Prediction};
use super::{sample_timestep, FlowError, Latent};
use crate::seed::{split_rng, Stream};
use crate::taskgen::DatasetItem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr: f64,
    pub steps: u64,
    /// Probability of replacing the condition by the null condition.
    pub p_uncond: f64,
    /// Logit-normal timestep location.
    pub mu: f64,
    /// Logit-normal timestep scale.
    pub sigma: f64,
    pub ema_decay: f64,
    pub seed: u64,
    pub warmup_steps: u64,
    /// Global gradient-norm ceiling; 0 disables clipping.
    pub grad_clip: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Write a CSV row every this many steps.
    pub log_every: u64,
    /// Write the checkpoint every this many steps (0: only at the end).
    pub checkpoint_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 16,
            lr: 1e-4,
            steps: 2000,
            p_uncond: 0.1,
            mu: 0.0,
            sigma: 1.0,
            ema_decay: 0.999,
            seed: 0,
            warmup_steps: 0,
            grad_clip: 1.0,
            beta1: 0.9,
            beta2: 0.999,
            log_every: 1,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), FlowError> {
        let bad = |m: &str| Err(FlowError::Config(m.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(0.0..1.0).contains(&self.p_uncond) {
            return bad("p_uncond must lie in [0, 1)");
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) || !self.mu.is_finite() {
            return bad("sigma must be positive and finite");
        }
        if !(0.0..1.0).contains(&self.ema_decay) {
            return bad("ema_decay must lie in [0, 1)");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.grad_clip < 0.0 {
            return bad("betas must lie in [0, 1) and grad_clip be non-negative");
        }
        Ok(())
    }
}

/// Encoded training pairs, `n` clean targets with their conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainData {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub n: usize,
    pub x0: Vec<f32>,
    pub cond: Vec<f32>,
}

impl TrainData {
    pub fn from_pairs(pairs: &[(Latent, Latent)]) -> Result<Self, FlowError> {
        let (first, _) = pairs.first().ok_or(FlowError::EmptyData)?;
        let (channels, height, width) = first.shape();
        let mut x0 = Vec::with_capacity(pairs.len() * first.data.len());
        let mut cond = Vec::with_capacity(x0.capacity());
        for (a, c) in pairs {
            if a.shape() != first.shape() || c.shape() != first.shape() {
                return Err(FlowError::Shape("training images differ in size".into()));
            }
            x0.extend_from_slice(&a.data);
            cond.extend_from_slice(&c.data);
        }
        Ok(TrainData { channels, height, width, n: pairs.len(), x0, cond })
    }

    fn len(&self) -> usize {
        self.channels * self.height * self.width
    }
}

/// Targets and problem images from a loaded dataset.
pub fn load_training_data(items: &[DatasetItem]) -> Result<TrainData, FlowError> {
    let pairs: Vec<_> = items.iter().map(|it| (Latent::encode(&it.target), Latent::encode(&it.input))).collect();
    TrainData::from_pairs(&pairs)
}

pub struct Trainer {
    pub meta: CheckpointMeta,
    pub model: Denoiser<f32>,
    pub ema: Params<f32>,
    m: Params<f32>,
    v: Params<f32>,
    pub step: u64,
    rng: Stream,
}

impl Trainer {
    pub fn new(meta: CheckpointMeta) -> Result<Self, FlowError> {
        meta.train.validate()?;
        let model = Denoiser::<f32>::init(meta.model, &mut split_rng(meta.train.seed, "init"))?;
        let ema = model.params.clone();
        let m = model.params.zeros_like();
        let v = model.params.zeros_like();
        let rng = split_rng(meta.train.seed, "train");
        Ok(Trainer { meta, model, ema, m, v, step: 0, rng })
    }

    pub fn rng_digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(self.rng.get_seed());
        h.update(self.rng.get_stream().to_le_bytes());
        h.update(self.rng.get_word_pos().to_le_bytes());
        h.finalize().into()
    }

    pub fn checkpoint(&self) -> DenoiserCheckpoint {
        DenoiserCheckpoint {
            meta: self.meta.clone(),
            step: self.step,
            rng_digest: self.rng_digest(),
            params: self.model.params.clone(),
            ema: self.ema.clone(),
            adam_m: self.m.clone(),
            adam_v: self.v.clone(),
        }
    }

    /// One optimizer step on a random minibatch; returns the batch loss.
    pub fn step(&mut self, data: &TrainData) -> Result<f64, FlowError> {
        let cfg = self.meta.train;
        let mc = self.model.config;
        if data.n == 0 {
            return Err(FlowError::EmptyData);
        }
        if (data.channels, data.height, data.width) != (mc.channels, mc.height, mc.width) {
            return Err(FlowError::Shape(format!(
                "data {}x{}x{}, model {}x{}x{}",
                data.channels, data.height, data.width, mc.channels, mc.height, mc.width
            )));
        }
        let len = data.len();
        let b = cfg.batch_size;
        let mut x_t = vec![0f32; b * len];
        let mut cond = vec![0f32; b * len];
        let mut target = vec![0f32; b * len];
        let mut ts = vec![0f32; b];
        for s in 0..b {
            let i = self.rng.random_range(0..data.n);
            let x0 = &data.x0[i * len..][..len];
            let t = sample_timestep(&mut self.rng, cfg.mu, cfg.sigma) as f32;
            let drop = self.rng.random::<f64>() < cfg.p_uncond;
            ts[s] = t;
            for k in 0..len {
                let x1: f32 = StandardNormal.sample(&mut self.rng);
                x_t[s * len + k] = t * x0[k] + (1.0 - t) * x1;
                target[s * len + k] = x0[k] - x1;
            }
            if !drop {
                cond[s * len..][..len].copy_from_slice(&data.cond[i * len..][..len]);
            }
        }

        let (head, cache) = self.model.forward(&x_t, &cond, &ts)?;
        let count = (b * len) as f64;
        let mut loss = 0.0f64;
        let mut d_head = vec![0f32; b * len];
        let clean = mc.prediction == Prediction::CleanSample;
        for k in 0..b * len {
            // Chain through v = (x̂₀ − x_t) / (1 − t) for a clean-sample head.
            let rem = if clean { remaining(ts[k / len]) } else { 1.0 };
            let v = if clean { (head[k] - x_t[k]) / rem } else { head[k] };
            let diff = v - target[k];
            loss += (diff as f64) * (diff as f64);
            d_head[k] = (2.0 * diff as f64 / count) as f32 / rem;
        }
        loss /= count;
        if !loss.is_finite() {
            return Err(FlowError::NonFinite { step: self.step, detail: format!("loss {loss}") });
        }
        let mut grads = self.model.backward(&cache, &d_head);
        self.apply(&mut grads)?;
        Ok(loss)
    }

    fn apply(&mut self, grads: &mut Params<f32>) -> Result<(), FlowError> {
        let cfg = self.meta.train;
        let norm = grads.data.iter().flatten().map(|&g| (g as f64) * (g as f64)).sum::<f64>().sqrt();
        if !norm.is_finite() {
            return Err(FlowError::NonFinite { step: self.step, detail: "gradient norm".into() });
        }
        let clip = if cfg.grad_clip > 0.0 && norm > cfg.grad_clip { (cfg.grad_clip / norm) as f32 } else { 1.0 };
        self.step += 1;
        let t = self.step as f64;
        let warm = if cfg.warmup_steps > 0 { (t / cfg.warmup_steps as f64).min(1.0) } else { 1.0 };
        let lr = cfg.lr * warm;
        let bc1 = 1.0 - cfg.beta1.powf(t);
        let bc2 = 1.0 - cfg.beta2.powf(t);
        let step_size = (lr / bc1) as f32;
        let (b1, b2) = (cfg.beta1 as f32, cfg.beta2 as f32);
        let bc2_sqrt = bc2.sqrt() as f32;
        // Averaging warms up so early weights do not dominate short runs.
        let decay = cfg.ema_decay.min((1.0 + t) / (10.0 + t)) as f32;
        for ti in 0..grads.data.len() {
            let p = &mut self.model.params.data[ti];
            let (m, v, e) = (&mut self.m.data[ti], &mut self.v.data[ti], &mut self.ema.data[ti]);
            for k in 0..p.len() {
                let g = grads.data[ti][k] * clip;
                m[k] = b1 * m[k] + (1.0 - b1) * g;
                v[k] = b2 * v[k] + (1.0 - b2) * g * g;
                p[k] -= step_size * m[k] / (v[k].sqrt() / bc2_sqrt + 1e-8);
                e[k] = decay * e[k] + (1.0 - decay) * p[k];
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: DenoiserCheckpoint,
    pub losses: Vec<f64>,
}

/// Run `meta.train.steps` optimizer steps, writing the `step,loss,ema_loss`
/// log and the checkpoint when paths are given.
pub fn train(
    meta: CheckpointMeta,
    data: &TrainData,
    out_checkpoint: Option<&Path>,
    log_csv: Option<&Path>,
) -> Result<TrainOutcome, FlowError> {
    if data.n == 0 {
        return Err(FlowError::EmptyData);
    }
    let mut trainer = Trainer::new(meta)?;
    let cfg = trainer.meta.train;
    let mut log = match log_csv {
        Some(p) => {
            let mut w = BufWriter::new(fs::File::create(p)?);
            writeln!(w, "step,loss,ema_loss")?;
            Some(w)
        }
        None => None,
    };
    let mut losses = Vec::with_capacity(cfg.steps as usize);
    let mut smooth = None;
    for _ in 0..cfg.steps {
        let loss = trainer.step(data)?;
        losses.push(loss);
        let s = smooth.map_or(loss, |s: f64| 0.98 * s + 0.02 * loss);
        smooth = Some(s);
        if let Some(w) = log.as_mut() {
            if cfg.log_every > 0 && trainer.step % cfg.log_every == 0 {
                writeln!(w, "{},{loss:.6},{s:.6}", trainer.step)?;
            }
        }
        if let Some(p) = out_checkpoint {
            if cfg.checkpoint_every > 0 && trainer.step % cfg.checkpoint_every == 0 {
                trainer.checkpoint().save(p)?;
            }
        }
    }
    if let Some(mut w) = log {
        w.flush()?;
    }
    let checkpoint = trainer.checkpoint();
    if let Some(p) = out_checkpoint {
        checkpoint.save(p)?;
    }
    Ok(TrainOutcome { checkpoint, losses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::ModelConfig;
    use crate::render::RenderSpec;
    use crate::types::{Level, TaskKind};

    fn meta(steps: u64, ema_decay: f64) -> CheckpointMeta {
        CheckpointMeta {
            model: ModelConfig { channels: 3, height: 8, width: 8, patch: 4, dim: 16, depth: 1, heads: 2, mlp_ratio: 2, time_dim: 8, prediction: Default::default() },
            render: RenderSpec::default(),
            train: TrainConfig { steps, ema_decay, batch_size: 4, lr: 1e-3, ..Default::default() },
            kind: TaskKind::VspFrozenLake,
            level: Level::GridSize(3),
        }
    }

    fn data() -> TrainData {
        let pairs: Vec<_> = (0..6)
            .map(|i| {
                let x0 = Latent::from_vec(3, 8, 8, (0..192).map(|k| ((k * (i + 1)) % 7) as f32 / 3.5 - 1.0).collect()).unwrap();
                let c = Latent::from_vec(3, 8, 8, (0..192).map(|k| ((k + i) % 5) as f32 / 2.5 - 1.0).collect()).unwrap();
                (x0, c)
            })
            .collect();
        TrainData::from_pairs(&pairs).unwrap()
    }

    #[test]
    fn seeded_runs_repeat_exactly() {
        let a = train(meta(15, 0.999), &data(), None, None).unwrap();
        let b = train(meta(15, 0.999), &data(), None, None).unwrap();
        assert_eq!(a.losses, b.losses);
        assert_eq!(a.checkpoint, b.checkpoint);
    }

    #[test]
    fn zero_decay_tracks_raw_weights() {
        let out = train(meta(5, 0.0), &data(), None, None).unwrap();
        assert_eq!(out.checkpoint.ema, out.checkpoint.params);
    }

    #[test]
    fn empty_data_and_bad_config() {
        let empty = TrainData { channels: 3, height: 8, width: 8, n: 0, x0: vec![], cond: vec![] };
        assert!(matches!(train(meta(1, 0.9), &empty, None, None), Err(FlowError::EmptyData)));
        let mut m = meta(1, 0.9);
        m.train.p_uncond = 1.0;
        assert!(matches!(Trainer::new(m), Err(FlowError::Config(_))));
    }

    #[test]
    fn log_has_header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let log = dir.path().join("loss.csv");
        train(meta(3, 0.9), &data(), None, Some(&log)).unwrap();
        let text = fs::read_to_string(log).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "step,loss,ema_loss");
        assert_eq!(lines.len(), 4);
    }
}
