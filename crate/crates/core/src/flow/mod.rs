//! Conditional flow matching in normalized pixel space.
//!
//! Clean data `x₀` and Gaussian noise `x₁` are joined by the straight path
//! `x_t = t·x₀ + (1−t)·x₁`, whose velocity is `x₀ − x₁`. The denoiser learns
//! that velocity given the problem image as condition.

mod checkpoint;
mod model;
pub mod tensor;
mod train;

pub use checkpoint::{CheckpointMeta, DenoiserCheckpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use model::{remaining, velocity_to_x0, x0_to_velocity, Cache, Denoiser, ModelConfig, Params, Prediction, MIN_REMAINING};
pub use train::{load_training_data, train, TrainConfig, TrainData, TrainOutcome, Trainer};

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use thiserror::Error;

use crate::types::RasterImage;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("non-finite loss at step {step}: {detail}")]
    NonFinite { step: u64, detail: String },
    #[error("empty training set")]
    EmptyData,
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A `channels×height×width` tensor, channel-planar, nominally in [−1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Latent {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl Latent {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Latent { channels, height, width, data: vec![0.0; channels * height * width] }
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self, FlowError> {
        if data.len() != channels * height * width {
            return Err(FlowError::Shape(format!("{} values for {channels}x{height}x{width}", data.len())));
        }
        Ok(Latent { channels, height, width, data })
    }

    pub fn standard_normal<R: Rng + ?Sized>(channels: usize, height: usize, width: usize, rng: &mut R) -> Self {
        let data = (0..channels * height * width).map(|_| StandardNormal.sample(rng)).collect();
        Latent { channels, height, width, data }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    /// Identity codec: pixel `p` ↦ `p / 127.5 − 1`.
    pub fn encode(img: &RasterImage) -> Self {
        let (w, h) = (img.width(), img.height());
        let mut data = vec![0.0; 3 * w * h];
        for (i, px) in img.pixels().chunks_exact(3).enumerate() {
            for c in 0..3 {
                data[c * w * h + i] = px[c] as f32 / 127.5 - 1.0;
            }
        }
        Latent { channels: 3, height: h, width: w, data }
    }

    /// Clamp to [−1, 1] and quantize to RGB8.
    pub fn decode(&self) -> RasterImage {
        let (w, h) = (self.width, self.height);
        let mut px = vec![0u8; 3 * w * h];
        for i in 0..w * h {
            for c in 0..3.min(self.channels) {
                let v = self.data[c * w * h + i].clamp(-1.0, 1.0);
                px[3 * i + c] = ((v + 1.0) * 127.5).round() as u8;
            }
        }
        RasterImage::from_raw(w, h, px).expect("buffer sized to the latent")
    }

    pub fn check_same(&self, other: &Latent) -> Result<(), FlowError> {
        if self.shape() != other.shape() {
            return Err(FlowError::Shape(format!("{:?} vs {:?}", self.shape(), other.shape())));
        }
        Ok(())
    }
}

/// Problem image as conditioning signal; the null condition is all zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub latent: Latent,
    pub null: bool,
}

pub fn encode_condition(img: &RasterImage) -> Condition {
    Condition { latent: Latent::encode(img), null: false }
}

/// Like [`encode_condition`], rejecting images of the wrong size.
pub fn encode_condition_checked(img: &RasterImage, height: usize, width: usize) -> Result<Condition, FlowError> {
    if (img.height(), img.width()) != (height, width) {
        return Err(FlowError::Shape(format!(
            "condition image {}x{}, model expects {width}x{height}",
            img.width(),
            img.height()
        )));
    }
    Ok(encode_condition(img))
}

pub fn null_condition(channels: usize, height: usize, width: usize) -> Condition {
    Condition { latent: Latent::zeros(channels, height, width), null: true }
}

/// `t·x₀ + (1−t)·x₁`.
pub fn interpolate(x0: &Latent, x1: &Latent, t: f64) -> Result<Latent, FlowError> {
    x0.check_same(x1)?;
    let t = t as f32;
    let data = x0.data.iter().zip(&x1.data).map(|(&a, &b)| t * a + (1.0 - t) * b).collect();
    Ok(Latent { data, ..*x0 })
}

/// `x₀ − x₁`.
pub fn target_velocity(x0: &Latent, x1: &Latent) -> Result<Latent, FlowError> {
    x0.check_same(x1)?;
    let data = x0.data.iter().zip(&x1.data).map(|(&a, &b)| a - b).collect();
    Ok(Latent { data, ..*x0 })
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// `sigmoid(z)` with `z ~ Normal(mu, sigma²)`, kept strictly inside (0, 1).
pub fn sample_timestep<R: Rng + ?Sized>(rng: &mut R, mu: f64, sigma: f64) -> f64 {
    let z = Normal::new(mu, sigma).expect("sigma must be positive and finite").sample(rng);
    sigmoid(z).clamp(1e-9, 1.0 - 1e-9)
}

/// Anything that predicts a velocity for one sample.
pub trait VelocityField {
    fn velocity(&self, x_t: &Latent, t: f64, h: &Condition) -> Result<Latent, FlowError>;
}

impl VelocityField for Denoiser<f32> {
    fn velocity(&self, x_t: &Latent, t: f64, h: &Condition) -> Result<Latent, FlowError> {
        x_t.check_same(&h.latent)?;
        let v = Denoiser::velocity(self, &x_t.data, &h.latent.data, &[t as f32])?;
        Ok(Latent { data: v, ..*x_t })
    }
}

/// Stochastic ingredients of one loss term.
#[derive(Debug, Clone)]
pub struct FlowSample {
    pub x0: Latent,
    pub x1: Latent,
    pub x_t: Latent,
    pub t: f64,
    pub h: Condition,
}

/// Noise, timestep and condition-dropout settings for [`fm_loss`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub p_uncond: f64,
    pub mu: f64,
    pub sigma: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig { p_uncond: 0.1, mu: 0.0, sigma: 1.0 }
    }
}

/// Draw `(x₁, t, dropout)` for one pair, in a fixed order.
pub fn draw_sample<R: Rng + ?Sized>(x0: &Latent, h: &Condition, cfg: &LossConfig, rng: &mut R) -> FlowSample {
    let x1 = Latent::standard_normal(x0.channels, x0.height, x0.width, rng);
    let t = sample_timestep(rng, cfg.mu, cfg.sigma);
    let drop = rng.random::<f64>() < cfg.p_uncond;
    let h = if drop { null_condition(x0.channels, x0.height, x0.width) } else { h.clone() };
    let x_t = interpolate(x0, &x1, t).expect("same shape");
    FlowSample { x0: x0.clone(), x1, x_t, t, h }
}

/// Mean squared error between predicted and target velocity over a batch,
/// with the predictor given full access to each drawn sample.
pub fn fm_loss_with<R, F>(batch: &[(Latent, Condition)], rng: &mut R, cfg: &LossConfig, mut predict: F) -> Result<f64, FlowError>
where
    R: Rng + ?Sized,
    F: FnMut(&FlowSample) -> Result<Latent, FlowError>,
{
    if batch.is_empty() {
        return Err(FlowError::EmptyData);
    }
    let mut sum = 0.0f64;
    let mut count = 0usize;
    for (x0, h) in batch {
        x0.check_same(&h.latent)?;
        let s = draw_sample(x0, h, cfg, rng);
        let v = predict(&s)?;
        v.check_same(x0)?;
        let target = target_velocity(&s.x0, &s.x1)?;
        for (&a, &b) in v.data.iter().zip(&target.data) {
            let d = a as f64 - b as f64;
            sum += d * d;
        }
        count += v.data.len();
    }
    Ok(sum / count as f64)
}

/// `𝔼‖v_θ(x_t, t, h) − (x₀ − x₁)‖²` per element.
pub fn fm_loss<R: Rng + ?Sized, M: VelocityField + ?Sized>(model: &M, batch: &[(Latent, Condition)], rng: &mut R, cfg: &LossConfig) -> Result<f64, FlowError> {
    fm_loss_with(batch, rng, cfg, |s| model.velocity(&s.x_t, s.t, &s.h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::split_rng;

    fn rand_latent(seed: u64) -> Latent {
        Latent::standard_normal(3, 4, 5, &mut split_rng(seed, "lat"))
    }

    #[test]
    fn interpolation_endpoints_and_identity() {
        let (x0, x1) = (rand_latent(1), rand_latent(2));
        assert_eq!(interpolate(&x0, &x1, 0.0).unwrap(), x1);
        assert_eq!(interpolate(&x0, &x1, 1.0).unwrap(), x0);
        let a = Latent::from_vec(1, 1, 1, vec![2.0]).unwrap();
        let b = Latent::from_vec(1, 1, 1, vec![0.0]).unwrap();
        assert_eq!(interpolate(&a, &b, 0.5).unwrap().data, vec![1.0]);
        let v = target_velocity(&x0, &x1).unwrap();
        for t in [0.1, 0.37, 0.9] {
            let xt = interpolate(&x0, &x1, t).unwrap();
            for i in 0..x0.data.len() {
                assert!((xt.data[i] + (1.0 - t as f32) * v.data[i] - x0.data[i]).abs() < 1e-6);
            }
        }
        assert!(interpolate(&x0, &Latent::zeros(3, 4, 4), 0.5).is_err());
    }

    #[test]
    fn codec_extremes() {
        let white = RasterImage::filled(3, 2, [255; 3]);
        assert!(encode_condition(&white).latent.data.iter().all(|&v| v == 1.0));
        let black = RasterImage::filled(3, 2, [0; 3]);
        assert!(encode_condition(&black).latent.data.iter().all(|&v| v == -1.0));
        let mut img = RasterImage::filled(4, 3, [0; 3]);
        img.put(2, 1, [220, 30, 30]);
        assert_eq!(Latent::encode(&img).decode(), img);
    }

    #[test]
    fn logit_normal_medians() {
        for (mu, want) in [(0.0, 0.5), (3.0, sigmoid(3.0))] {
            let mut rng = split_rng(9, "t");
            let mut ts: Vec<f64> = (0..100_000).map(|_| sample_timestep(&mut rng, mu, 1.0)).collect();
            assert!(ts.iter().all(|&t| t > 0.0 && t < 1.0));
            ts.sort_by(f64::total_cmp);
            assert!((ts[50_000] - want).abs() < 0.01, "mu {mu}: median {}", ts[50_000]);
        }
    }

    #[test]
    fn oracle_and_zero_losses() {
        let batch: Vec<_> = (0..64).map(|_| (Latent::zeros(3, 8, 8), null_condition(3, 8, 8))).collect();
        let cfg = LossConfig::default();
        let exact = fm_loss_with(&batch, &mut split_rng(1, "l"), &cfg, |s| target_velocity(&s.x0, &s.x1)).unwrap();
        assert_eq!(exact, 0.0);
        let zero = fm_loss_with(&batch, &mut split_rng(1, "l"), &cfg, |_| Ok(Latent::zeros(3, 8, 8))).unwrap();
        assert!((zero - 1.0).abs() < 0.05, "{zero}");
    }
}
