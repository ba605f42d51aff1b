//! Channel masking, Gaussian noise and channel scaling applied to normalized
//! windows, the 4x augmented dataset that labels each copy with the
//! transformation it received, and multitask training on it.

mod io;

pub use io::{read_augmented, write_augmented};

use ndarray::{Array2, Axis};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::model::{fit, ModelBundle, ModelConfig, TrainOptions, NUM_TRANSFORM_FLAGS};
use crate::signal::{ChannelStats, WindowDataset};
use crate::{Error, Result};

/// The transformations, in flag-column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    Mask,
    Noise,
    Scale,
}

impl Transform {
    pub const ALL: [Transform; NUM_TRANSFORM_FLAGS] = [Transform::Mask, Transform::Noise, Transform::Scale];

    pub fn flag_index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Transform::Mask => "mask",
            Transform::Noise => "noise",
            Transform::Scale => "scale",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentConfig {
    /// Noise standard deviation in normalized units.
    pub noise_sigma: f64,
    pub scale_low: f64,
    pub scale_high: f64,
    /// Channels touched per copy are drawn uniformly from `1..=max_channels`.
    pub max_channels: usize,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            noise_sigma: 0.06,
            scale_low: 0.5,
            scale_high: 1.5,
            max_channels: 3,
            seed: 0,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config("noise_sigma must be finite and >= 0".into()));
        }
        if !(self.scale_low <= self.scale_high) || !self.scale_low.is_finite() || !self.scale_high.is_finite() {
            return Err(Error::Config("scale range must satisfy low <= high".into()));
        }
        if self.max_channels == 0 {
            return Err(Error::Config("max_channels must be >= 1".into()));
        }
        Ok(())
    }
}

fn pick<R: Rng + ?Sized>(w: &Array2<f64>, k: usize, rng: &mut R) -> Result<Vec<usize>> {
    let c = w.ncols();
    if k > c {
        return Err(Error::InvalidInput(format!("cannot pick {k} of {c} channels")));
    }
    Ok(sample(rng, c, k).into_vec())
}

/// Zeroes `k` distinct random channels over every time step. Returns them.
pub fn mask_channels<R: Rng + ?Sized>(w: &mut Array2<f64>, k: usize, rng: &mut R) -> Result<Vec<usize>> {
    let chosen = pick(w, k, rng)?;
    for &c in &chosen {
        w.column_mut(c).fill(0.0);
    }
    Ok(chosen)
}

/// Adds `N(0, sigma²)` noise to `k` random channels. Returns them.
pub fn add_noise<R: Rng + ?Sized>(
    w: &mut Array2<f64>,
    sigma: f64,
    k: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if !(sigma >= 0.0) {
        return Err(Error::InvalidInput(format!("noise sigma {sigma} < 0")));
    }
    let chosen = pick(w, k, rng)?;
    if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidInput(e.to_string()))?;
        for &c in &chosen {
            for v in w.column_mut(c) {
                *v += normal.sample(rng);
            }
        }
    }
    Ok(chosen)
}

/// Multiplies each of `k` random channels by its own scalar drawn uniformly
/// from `[low, high]`. Returns the channels and scalars.
pub fn scale_channels<R: Rng + ?Sized>(
    w: &mut Array2<f64>,
    low: f64,
    high: f64,
    k: usize,
    rng: &mut R,
) -> Result<Vec<(usize, f64)>> {
    if !(low <= high) {
        return Err(Error::InvalidInput(format!("scale range [{low}, {high}] is empty")));
    }
    let chosen = pick(w, k, rng)?;
    Ok(chosen
        .into_iter()
        .map(|c| {
            let s = if low == high { low } else { rng.random_range(low..=high) };
            w.column_mut(c).mapv_inplace(|v| v * s);
            (c, s)
        })
        .collect())
}

/// Applies one transformation with `k` drawn from `1..=max_channels`.
pub fn apply<R: Rng + ?Sized>(
    t: Transform,
    w: &mut Array2<f64>,
    cfg: &AugmentConfig,
    rng: &mut R,
) -> Result<()> {
    let k = rng.random_range(1..=cfg.max_channels.min(w.ncols()));
    match t {
        Transform::Mask => mask_channels(w, k, rng).map(drop),
        Transform::Noise => add_noise(w, cfg.noise_sigma, k, rng).map(drop),
        Transform::Scale => scale_channels(w, cfg.scale_low, cfg.scale_high, k, rng).map(drop),
    }
}

/// Deterministic per-row generator: one stream per (row, transformation).
fn row_rng(seed: u64, row: usize, t: Transform) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((row * NUM_TRANSFORM_FLAGS + t.flag_index()) as u64);
    rng
}

/// Originals (flags all zero) followed by one block per transformation, each
/// row carrying the single flag of the transformation it received. Angles
/// are copied unchanged.
pub fn build_augmented_dataset(d: &WindowDataset, cfg: &AugmentConfig) -> Result<WindowDataset> {
    cfg.validate()?;
    if d.is_empty() {
        return Err(Error::InvalidInput("cannot augment an empty dataset".into()));
    }
    let n = d.len();
    let copies = 1 + NUM_TRANSFORM_FLAGS;
    let mut windows = Vec::with_capacity(n * copies);
    windows.extend(d.windows.iter().cloned());
    let mut flags = Array2::zeros((n * copies, NUM_TRANSFORM_FLAGS));
    for t in Transform::ALL {
        for (row, w) in d.windows.iter().enumerate() {
            let mut w = w.clone();
            apply(t, &mut w, cfg, &mut row_rng(cfg.seed, row, t))?;
            flags[[windows.len(), t.flag_index()]] = 1.0;
            windows.push(w);
        }
    }
    let targets = ndarray::concatenate(Axis(0), &vec![d.targets.view(); copies])
        .map_err(|e| Error::Shape(e.to_string()))?;
    let end_frames = d.end_frames.iter().cycle().take(n * copies).cloned().collect();
    Ok(WindowDataset {
        windows,
        targets,
        flags: Some(flags),
        end_frames,
    })
}

/// Applies `t` to every (already normalized) window, for robustness tests.
pub fn perturb_all(windows: &[Array2<f64>], t: Transform, cfg: &AugmentConfig) -> Result<Vec<Array2<f64>>> {
    cfg.validate()?;
    windows
        .iter()
        .enumerate()
        .map(|(row, w)| {
            let mut w = w.clone();
            apply(t, &mut w, cfg, &mut row_rng(cfg.seed ^ 0x5eed, row, t))?;
            Ok(w)
        })
        .collect()
}

/// Normalizes raw training windows, builds the augmented set and trains a
/// model with three transformation-flag outputs on it, with smooth L1 and
/// binary cross-entropy weighted equally.
pub fn multitask_train(
    raw: &WindowDataset,
    config: &ModelConfig,
    aug: &AugmentConfig,
    opts: &TrainOptions,
) -> Result<ModelBundle> {
    if config.multitask_flags_dim != NUM_TRANSFORM_FLAGS {
        return Err(Error::Config(format!(
            "multitask training needs multitask_flags_dim = {NUM_TRANSFORM_FLAGS}"
        )));
    }
    if raw.is_empty() {
        return Err(Error::InvalidInput("training set is empty".into()));
    }
    let stats = ChannelStats::from_windows(&raw.windows)?;
    let mut normalized = raw.clone();
    normalized.flags = None;
    for w in &mut normalized.windows {
        stats.normalize_in_place(w)?;
    }
    let augmented = build_augmented_dataset(&normalized, aug)?;
    let mut bundle = ModelBundle::new(config.clone(), stats, opts.seed)?;
    fit(&mut bundle, &augmented, opts)?;
    Ok(bundle)
}
