use ndarray::{s, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Windows of `length x C` model inputs with the joint angles at each
/// window's final frame, and optional transformation flags.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WindowDataset {
    pub windows: Vec<Array2<f64>>,
    /// `M x 22` (or `M x 0` for unlabeled streams).
    pub targets: Array2<f64>,
    /// `M x 3` transformation flags for multitask training.
    pub flags: Option<Array2<f64>>,
    /// Index of each window's final frame in its source stream.
    pub end_frames: Vec<usize>,
}

impl WindowDataset {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> WindowDataset {
        WindowDataset {
            windows: indices.iter().map(|&i| self.windows[i].clone()).collect(),
            targets: self.targets.select(Axis(0), indices),
            flags: self.flags.as_ref().map(|f| f.select(Axis(0), indices)),
            end_frames: indices.iter().map(|&i| self.end_frames[i]).collect(),
        }
    }

    /// Appends `other`; flag blocks must be present on both or neither.
    pub fn extend(&mut self, other: WindowDataset) -> Result<()> {
        if self.is_empty() {
            *self = other;
            return Ok(());
        }
        if other.is_empty() {
            return Ok(());
        }
        if self.flags.is_some() != other.flags.is_some()
            || self.targets.ncols() != other.targets.ncols()
        {
            return Err(Error::Shape("cannot merge window datasets of different layouts".into()));
        }
        self.windows.extend(other.windows);
        self.targets
            .append(Axis(0), other.targets.view())
            .map_err(|e| Error::Shape(e.to_string()))?;
        if let (Some(a), Some(b)) = (self.flags.as_mut(), other.flags) {
            a.append(Axis(0), b.view())
                .map_err(|e| Error::Shape(e.to_string()))?;
        }
        self.end_frames.extend(other.end_frames);
        Ok(())
    }
}

/// Slices `features` (`N x C`) into `floor((N - length) / stride) + 1`
/// windows; window `k` covers frames `k * stride .. k * stride + length`.
/// Fewer than `length` frames give an empty dataset.
pub fn make_windows(
    features: ArrayView2<f64>,
    labels: Option<ArrayView2<f64>>,
    length: usize,
    stride: usize,
) -> Result<WindowDataset> {
    if stride == 0 || length == 0 {
        return Err(Error::Config(format!(
            "window length {length} and stride {stride} must be >= 1"
        )));
    }
    let n = features.nrows();
    if let Some(l) = &labels {
        if l.nrows() != n {
            return Err(Error::Shape(format!("{} label rows for {n} frames", l.nrows())));
        }
    }
    let label_cols = labels.as_ref().map_or(0, |l| l.ncols());
    if n < length {
        return Ok(WindowDataset {
            targets: Array2::zeros((0, label_cols)),
            ..Default::default()
        });
    }
    let count = (n - length) / stride + 1;
    let mut windows = Vec::with_capacity(count);
    let mut targets = Array2::zeros((count, label_cols));
    let mut end_frames = Vec::with_capacity(count);
    for k in 0..count {
        let start = k * stride;
        windows.push(features.slice(s![start..start + length, ..]).to_owned());
        if let Some(l) = &labels {
            targets.row_mut(k).assign(&l.row(start + length - 1));
        }
        end_frames.push(start + length - 1);
    }
    Ok(WindowDataset {
        windows,
        targets,
        flags: None,
        end_frames,
    })
}

/// Per-channel z-score statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Channels with zero spread; their `std` is stored as 1.
    pub degenerate: Vec<bool>,
}

impl ChannelStats {
    pub fn identity(channels: usize) -> Self {
        Self {
            mean: vec![0.0; channels],
            std: vec![1.0; channels],
            degenerate: vec![false; channels],
        }
    }

    pub fn channels(&self) -> usize {
        self.mean.len()
    }

    /// Population mean and standard deviation over all rows.
    pub fn from_rows(rows: ArrayView2<f64>) -> Result<Self> {
        Self::from_row_blocks(std::iter::once(rows))
    }

    /// Statistics over every row of every window.
    pub fn from_windows(windows: &[Array2<f64>]) -> Result<Self> {
        Self::from_row_blocks(windows.iter().map(|w| w.view()))
    }

    fn from_row_blocks<'a>(blocks: impl Iterator<Item = ArrayView2<'a, f64>> + Clone) -> Result<Self> {
        let mut count = 0usize;
        let mut sum: Vec<f64> = Vec::new();
        for b in blocks.clone() {
            if sum.is_empty() {
                sum = vec![0.0; b.ncols()];
            }
            if b.ncols() != sum.len() {
                return Err(Error::Shape("inconsistent channel counts".into()));
            }
            for row in b.rows() {
                for (s, v) in sum.iter_mut().zip(row) {
                    *s += v;
                }
            }
            count += b.nrows();
        }
        if count == 0 {
            return Err(Error::InvalidInput("no rows to compute statistics".into()));
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
        let mut sq = vec![0.0; mean.len()];
        for b in blocks {
            for row in b.rows() {
                for ((acc, v), m) in sq.iter_mut().zip(row).zip(&mean) {
                    *acc += (v - m) * (v - m);
                }
            }
        }
        let mut std = Vec::with_capacity(mean.len());
        let mut degenerate = Vec::with_capacity(mean.len());
        for (c, s) in sq.iter().enumerate() {
            let sd = (s / count as f64).sqrt();
            if sd > 0.0 && sd.is_finite() {
                std.push(sd);
                degenerate.push(false);
            } else {
                log::warn!("channel {c} has zero variance; passing it through unscaled");
                std.push(1.0);
                degenerate.push(true);
            }
        }
        Ok(Self {
            mean,
            std,
            degenerate,
        })
    }

    fn check(&self, cols: usize) -> Result<()> {
        if cols != self.channels() {
            return Err(Error::Shape(format!(
                "window has {cols} channels, statistics have {}",
                self.channels()
            )));
        }
        Ok(())
    }

    pub fn normalize(&self, window: ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut w = window.to_owned();
        self.normalize_in_place(&mut w)?;
        Ok(w)
    }

    pub fn normalize_in_place(&self, window: &mut Array2<f64>) -> Result<()> {
        self.check(window.ncols())?;
        for mut row in window.rows_mut() {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
        Ok(())
    }

    pub fn normalize_row(&self, row: &mut [f64]) -> Result<()> {
        self.check(row.len())?;
        for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = (*v - m) / s;
        }
        Ok(())
    }

    pub fn denormalize(&self, window: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check(window.ncols())?;
        let mut w = window.to_owned();
        for mut row in w.rows_mut() {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = *v * s + m;
            }
        }
        Ok(w)
    }
}
