//! Robustness grid: Gaussian noise on every channel, masking of a fixed number
//! of channels and random channel scaling, each applied to normalized test
//! windows, scored per model.

use std::fmt::Write as _;

use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::regression_metrics;
use crate::augment::{add_noise, mask_channels, scale_channels};
use crate::model::ModelBundle;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub noise_sigmas: Vec<f64>,
    pub mask_counts: Vec<usize>,
    /// Scale factors are drawn from `[1 - w/2, 1 + w/2]` for each width `w`.
    pub scale_widths: Vec<f64>,
    /// Channels rescaled per window on the scale axis.
    pub scale_channels: usize,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            noise_sigmas: (0..=6).map(|i| 0.02 * i as f64).collect(),
            mask_counts: vec![0, 1, 2, 3],
            scale_widths: vec![0.0, 0.5, 1.0],
            scale_channels: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Noise,
    Mask,
    Scale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub axis: SweepAxis,
    pub level: f64,
    pub model: String,
    pub avg_rmse: f64,
    pub avg_r2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub seed: u64,
    pub cells: Vec<SweepCell>,
}

impl SweepReport {
    /// Mean RMSE of `model` over all cells with a nonzero perturbation.
    pub fn perturbed_average(&self, model: &str) -> Option<f64> {
        let v: Vec<f64> = self
            .cells
            .iter()
            .filter(|c| c.model == model && c.level != 0.0)
            .map(|c| c.avg_rmse)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn cells_for<'a>(&'a self, model: &'a str, axis: SweepAxis) -> impl Iterator<Item = &'a SweepCell> {
        self.cells.iter().filter(move |c| c.model == model && c.axis == axis)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("axis,level,model,avg_rmse_deg,avg_r2_pct\n");
        for c in &self.cells {
            let axis = match c.axis {
                SweepAxis::Noise => "noise",
                SweepAxis::Mask => "mask",
                SweepAxis::Scale => "scale",
            };
            let r2 = c.avg_r2.map_or_else(String::new, |v| format!("{v:.4}"));
            let _ = writeln!(s, "{axis},{},{},{:.6},{r2}", c.level, c.model, c.avg_rmse);
        }
        s
    }
}

fn perturb(
    w: &mut Array2<f64>,
    axis: SweepAxis,
    level: f64,
    cfg: &SweepConfig,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let c = w.ncols();
    match axis {
        SweepAxis::Noise => add_noise(w, level, c, rng).map(drop),
        SweepAxis::Mask => mask_channels(w, level as usize, rng).map(drop),
        SweepAxis::Scale => {
            scale_channels(w, 1.0 - level / 2.0, 1.0 + level / 2.0, cfg.scale_channels.min(c), rng)
                .map(drop)
        }
    }
}

/// Scores every model on every grid cell. Each model normalizes the raw
/// windows with its own statistics; the perturbation drawn for window `i` in
/// a given cell is the same for every model.
pub fn robustness_sweep(
    models: &[(&str, &ModelBundle)],
    raw_windows: &[Array2<f64>],
    targets: ArrayView2<f64>,
    cfg: &SweepConfig,
) -> Result<SweepReport> {
    if raw_windows.is_empty() {
        return Err(Error::InvalidInput("empty test set".into()));
    }
    if cfg.scale_widths.iter().any(|&w| !(0.0..=2.0).contains(&w))
        || cfg.noise_sigmas.iter().any(|&s| !(s >= 0.0))
    {
        return Err(Error::Config("sweep levels out of range".into()));
    }
    let grid: Vec<(SweepAxis, f64)> = cfg
        .noise_sigmas
        .iter()
        .map(|&s| (SweepAxis::Noise, s))
        .chain(cfg.mask_counts.iter().map(|&m| (SweepAxis::Mask, m as f64)))
        .chain(cfg.scale_widths.iter().map(|&w| (SweepAxis::Scale, w)))
        .collect();
    let mut cells = Vec::new();
    for (name, bundle) in models {
        let normalized = raw_windows
            .iter()
            .map(|w| bundle.stats.normalize(w.view()))
            .collect::<Result<Vec<_>>>()?;
        for (g, &(axis, level)) in grid.iter().enumerate() {
            let windows = if level == 0.0 {
                normalized.clone()
            } else {
                normalized
                    .iter()
                    .enumerate()
                    .map(|(i, w)| {
                        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                        rng.set_stream(((g as u64) << 40) | i as u64);
                        let mut w = w.clone();
                        perturb(&mut w, axis, level, cfg, &mut rng)?;
                        Ok(w)
                    })
                    .collect::<Result<Vec<_>>>()?
            };
            let pred = bundle.predict_angles(&windows, 256)?;
            let m = regression_metrics(pred.view(), targets)?;
            cells.push(SweepCell {
                axis,
                level,
                model: name.to_string(),
                avg_rmse: m.avg_rmse,
                avg_r2: m.avg_r2,
            });
        }
    }
    Ok(SweepReport {
        seed: cfg.seed,
        cells,
    })
}
