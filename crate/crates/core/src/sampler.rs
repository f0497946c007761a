//! Euler integration of the learned flow from noise (t = 0) to a solution
//! image (t = 1), with classifier-free guidance.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::{null_condition, Condition, FlowError, Latent, VelocityField};
use crate::render::encode_png;
use crate::seed::split_rng;
use crate::types::RasterImage;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    pub steps: usize,
    pub cfg_scale: f64,
    pub seed: u64,
    pub record_trajectory: bool,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig { steps: 20, cfg_scale: 4.0, seed: 0, record_trajectory: false }
    }
}

impl SampleConfig {
    pub fn validate(&self) -> Result<(), SampleError> {
        if self.steps == 0 {
            return Err(SampleError::Config("steps must be at least 1".into()));
        }
        if !(self.cfg_scale >= 0.0 && self.cfg_scale.is_finite()) {
            return Err(SampleError::Config("cfg_scale must be finite and non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SampleError {
    #[error("invalid sampling config: {0}")]
    Config(String),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error("sampling diverged at step {step}")]
    SampleDiverged { step: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("png: {0}")]
    Codec(String),
}

/// `v_u + w·(v_c − v_u)`. The endpoints w = 1 and w = 0 return the
/// corresponding input bit for bit.
pub fn cfg_velocity(v_cond: &Latent, v_uncond: &Latent, w: f64) -> Result<Latent, FlowError> {
    v_cond.check_same(v_uncond)?;
    if w < 0.0 || w.is_nan() {
        return Err(FlowError::Config(format!("guidance scale {w} is negative")));
    }
    if w == 1.0 {
        return Ok(v_cond.clone());
    }
    if w == 0.0 {
        return Ok(v_uncond.clone());
    }
    let w = w as f32;
    let data = v_cond.data.iter().zip(&v_uncond.data).map(|(&c, &u)| u + w * (c - u)).collect();
    Ok(Latent { data, ..*v_cond })
}

/// `x_t + (1−t)·v`: the clean sample implied by the current velocity.
pub fn estimate_x0(x_t: &Latent, t: f64, v: &Latent) -> Latent {
    let r = (1.0 - t) as f32;
    let data = x_t.data.iter().zip(&v.data).map(|(&x, &v)| x + r * v).collect();
    Latent { data, ..*x_t }
}

/// The starting noise for `seed`.
pub fn initial_noise(channels: usize, height: usize, width: usize, seed: u64) -> Latent {
    Latent::standard_normal(channels, height, width, &mut split_rng(seed, "sample"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub x0_hat: Latent,
}

impl Snapshot {
    pub fn image(&self) -> RasterImage {
        self.x0_hat.decode()
    }
}

/// One x̂₀ snapshot per Euler step, at t = k/T.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
}

fn guided<M: VelocityField + ?Sized>(
    model: &M,
    x: &Latent,
    t: f64,
    cond: &Condition,
    uncond: &Condition,
    w: f64,
) -> Result<Latent, FlowError> {
    let v_c = model.velocity(x, t, cond)?;
    if w == 1.0 {
        return Ok(v_c);
    }
    let v_u = model.velocity(x, t, uncond)?;
    cfg_velocity(&v_c, &v_u, w)
}

/// Integrate to t = 1 and return the final latent, undecoded.
pub fn euler_sample_latent<M: VelocityField + ?Sized>(
    model: &M,
    cond: &Condition,
    cfg: &SampleConfig,
) -> Result<(Latent, Option<Trajectory>), SampleError> {
    cfg.validate()?;
    let (c, h, w) = cond.latent.shape();
    let uncond = null_condition(c, h, w);
    let mut x = initial_noise(c, h, w, cfg.seed);
    let mut traj = cfg.record_trajectory.then(Trajectory::default);
    let dt = 1.0 / cfg.steps as f64;
    for k in 0..cfg.steps {
        let t = k as f64 / cfg.steps as f64;
        let v = guided(model, &x, t, cond, &uncond, cfg.cfg_scale)?;
        if let Some(tr) = traj.as_mut() {
            tr.snapshots.push(Snapshot { t, x0_hat: estimate_x0(&x, t, &v) });
        }
        let dtf = dt as f32;
        for (a, b) in x.data.iter_mut().zip(&v.data) {
            *a += dtf * b;
        }
        if x.data.iter().any(|a| !a.is_finite()) {
            return Err(SampleError::SampleDiverged { step: k });
        }
    }
    Ok((x, traj))
}

/// Sample a solution image: clamp the final latent to [−1, 1] and quantize.
pub fn euler_sample<M: VelocityField + ?Sized>(
    model: &M,
    cond: &Condition,
    cfg: &SampleConfig,
) -> Result<(RasterImage, Option<Trajectory>), SampleError> {
    let (x, traj) = euler_sample_latent(model, cond, cfg)?;
    Ok((x.decode(), traj))
}

fn write_png(path: &Path, img: &RasterImage) -> Result<(), SampleError> {
    let bytes = encode_png(img).map_err(|e| SampleError::Codec(e.to_string()))?;
    fs::write(path, bytes)?;
    Ok(())
}

/// `step_<k>_t<t>.png` per snapshot plus `montage.png`, frames left to right.
pub fn dump_trajectory(traj: &Trajectory, out_dir: &Path) -> Result<Vec<PathBuf>, SampleError> {
    if traj.snapshots.is_empty() {
        return Err(SampleError::Config("empty trajectory".into()));
    }
    fs::create_dir_all(out_dir)?;
    let frames: Vec<RasterImage> = traj.snapshots.iter().map(Snapshot::image).collect();
    let mut written = Vec::with_capacity(frames.len() + 1);
    for (k, (s, img)) in traj.snapshots.iter().zip(&frames).enumerate() {
        let p = out_dir.join(format!("step_{k:02}_t{:.3}.png", s.t));
        write_png(&p, img)?;
        written.push(p);
    }
    let montage = RasterImage::hstack(&frames).expect("nonempty frames of equal height");
    let p = out_dir.join("montage.png");
    write_png(&p, &montage)?;
    written.push(p);
    Ok(written)
}
