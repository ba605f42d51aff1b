use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::model::JOINT_NAMES;
use crate::{Error, Result};

fn check(pred: &[f64], truth: &[f64]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::Shape(format!("{} predictions for {} targets", pred.len(), truth.len())));
    }
    if pred.is_empty() {
        return Err(Error::InvalidInput("no samples to score".into()));
    }
    Ok(())
}

/// Root mean squared error.
pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check(pred, truth)?;
    let sse: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((sse / pred.len() as f64).sqrt())
}

/// Coefficient of determination in percent, `100 (1 - SSE/SST)`; `None` when
/// the truth has zero variance.
pub fn r2(pred: &[f64], truth: &[f64]) -> Result<Option<f64>> {
    check(pred, truth)?;
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let sst: f64 = truth.iter().map(|t| (t - mean) * (t - mean)).sum();
    if sst == 0.0 {
        return Ok(None);
    }
    let sse: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(Some(100.0 * (1.0 - sse / sst)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointMetrics {
    pub joint: String,
    pub rmse: f64,
    pub r2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub joints: Vec<JointMetrics>,
    /// Unweighted mean over joints.
    pub avg_rmse: f64,
    /// Mean over joints whose R² is defined.
    pub avg_r2: Option<f64>,
}

/// Per-joint RMSE and R² over the rows of `M x J` predictions.
pub fn regression_metrics(pred: ArrayView2<f64>, truth: ArrayView2<f64>) -> Result<RegressionMetrics> {
    if pred.dim() != truth.dim() {
        return Err(Error::Shape(format!("{:?} vs {:?}", pred.dim(), truth.dim())));
    }
    let mut joints = Vec::with_capacity(pred.ncols());
    for j in 0..pred.ncols() {
        let p = pred.column(j).to_vec();
        let t = truth.column(j).to_vec();
        joints.push(JointMetrics {
            joint: JOINT_NAMES.get(j).map_or_else(|| format!("joint{j}"), |s| s.to_string()),
            rmse: rmse(&p, &t)?,
            r2: r2(&p, &t)?,
        });
    }
    let avg_rmse = joints.iter().map(|j| j.rmse).sum::<f64>() / joints.len().max(1) as f64;
    let defined: Vec<f64> = joints.iter().filter_map(|j| j.r2).collect();
    let avg_r2 = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    Ok(RegressionMetrics {
        joints,
        avg_rmse,
        avg_r2,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub num_classes: usize,
    /// `confusion[true][predicted]` counts.
    pub confusion: Vec<Vec<u64>>,
    /// Recall per class in percent; `None` for classes absent from the test set.
    pub sensitivity: Vec<Option<f64>>,
    pub accuracy: f64,
}

pub fn sensitivity_and_confusion(
    preds: &[usize],
    labels: &[usize],
    num_classes: usize,
) -> Result<ClassificationMetrics> {
    if preds.len() != labels.len() {
        return Err(Error::Shape(format!("{} predictions for {} labels", preds.len(), labels.len())));
    }
    if preds.is_empty() {
        return Err(Error::InvalidInput("no samples to score".into()));
    }
    let mut confusion = vec![vec![0u64; num_classes]; num_classes];
    for (&p, &l) in preds.iter().zip(labels) {
        if p >= num_classes || l >= num_classes {
            return Err(Error::InvalidInput(format!(
                "class {} outside 0..{num_classes}",
                p.max(l)
            )));
        }
        confusion[l][p] += 1;
    }
    let sensitivity = confusion
        .iter()
        .enumerate()
        .map(|(c, row)| {
            let count: u64 = row.iter().sum();
            (count > 0).then(|| 100.0 * row[c] as f64 / count as f64)
        })
        .collect();
    let trace: u64 = (0..num_classes).map(|c| confusion[c][c]).sum();
    Ok(ClassificationMetrics {
        num_classes,
        confusion,
        sensitivity,
        accuracy: trace as f64 / preds.len() as f64,
    })
}
