use ndarray::{Array2, ArrayView2, Zip};

use super::sigmoid;
use crate::{Error, Result};

/// Knee of the regression loss.
pub const SMOOTH_L1_BETA: f64 = 0.5;

fn check_same(a: &ArrayView2<f64>, b: &ArrayView2<f64>, what: &str) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!("{what}: {:?} vs {:?}", a.dim(), b.dim())));
    }
    if a.is_empty() {
        return Err(Error::Shape(format!("{what}: empty input")));
    }
    Ok(())
}

fn smooth_l1_elem(d: f64, beta: f64) -> f64 {
    let ad = d.abs();
    if ad < beta {
        0.5 * d * d / beta
    } else {
        ad - 0.5 * beta
    }
}

fn smooth_l1_slope(d: f64, beta: f64) -> f64 {
    if d.abs() < beta {
        d / beta
    } else {
        d.signum()
    }
}

/// Mean smooth L1 (Huber-style) loss: quadratic `0.5 d^2 / beta` inside the
/// knee, linear `|d| - 0.5 beta` outside.
pub fn smooth_l1(pred: ArrayView2<f64>, target: ArrayView2<f64>, beta: f64) -> Result<f64> {
    check_same(&pred, &target, "smooth_l1")?;
    if beta <= 0.0 {
        return Err(Error::InvalidInput(format!("smooth_l1 beta must be > 0, got {beta}")));
    }
    let sum: f64 = Zip::from(&pred)
        .and(&target)
        .fold(0.0, |acc, &p, &t| acc + smooth_l1_elem(p - t, beta));
    Ok(sum / pred.len() as f64)
}

/// Loss value and its gradient with respect to `pred`.
pub fn smooth_l1_with_grad(
    pred: ArrayView2<f64>,
    target: ArrayView2<f64>,
    beta: f64,
) -> Result<(f64, Array2<f64>)> {
    let loss = smooth_l1(pred, target, beta)?;
    let n = pred.len() as f64;
    let grad = Zip::from(&pred)
        .and(&target)
        .map_collect(|&p, &t| smooth_l1_slope(p - t, beta) / n);
    Ok((loss, grad))
}

/// Mean binary cross-entropy on logits, written as
/// `max(z, 0) - z y + ln(1 + e^{-|z|})` so large logits never overflow.
pub fn bce_with_logits(
    logits: ArrayView2<f64>,
    targets: ArrayView2<f64>,
) -> Result<(f64, Array2<f64>)> {
    check_same(&logits, &targets, "bce")?;
    let n = logits.len() as f64;
    let sum: f64 = Zip::from(&logits).and(&targets).fold(0.0, |acc, &z, &y| {
        acc + z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
    });
    let grad = Zip::from(&logits)
        .and(&targets)
        .map_collect(|&z, &y| (sigmoid(z) - y) / n);
    Ok((sum / n, grad))
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(logits: ArrayView2<f64>) -> Array2<f64> {
    let mut out = logits.to_owned();
    for mut row in out.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row /= s;
    }
    out
}

/// Mean categorical cross-entropy of softmax(logits) against class indices.
pub fn softmax_cross_entropy(
    logits: ArrayView2<f64>,
    labels: &[usize],
) -> Result<(f64, Array2<f64>)> {
    let (batch, classes) = logits.dim();
    if labels.len() != batch || batch == 0 {
        return Err(Error::Shape(format!(
            "cross entropy: {batch} rows vs {} labels",
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::InvalidInput(format!("label {bad} >= {classes} classes")));
    }
    let mut loss = 0.0;
    let mut grad = Array2::zeros((batch, classes));
    for (b, (row, &label)) in logits.rows().into_iter().zip(labels).enumerate() {
        let m = row.fold(f64::NEG_INFINITY, |a, &v| a.max(v));
        let lse = m + row.iter().map(|&v| (v - m).exp()).sum::<f64>().ln();
        loss += lse - row[label];
        for (k, &v) in row.iter().enumerate() {
            grad[[b, k]] = (v - lse).exp() / batch as f64;
        }
        grad[[b, label]] -= 1.0 / batch as f64;
    }
    Ok((loss / batch as f64, grad))
}
