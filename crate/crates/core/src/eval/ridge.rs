//! Linear baseline: ridge regression on flattened normalized windows.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct RidgeRegression {
    pub weights: Array2<f64>,
    pub intercept: Array1<f64>,
    x_mean: Array1<f64>,
}

fn flatten(windows: &[Array2<f64>]) -> Result<Array2<f64>> {
    let d = windows
        .first()
        .map(|w| w.len())
        .ok_or_else(|| Error::InvalidInput("no windows".into()))?;
    let mut x = Array2::zeros((windows.len(), d));
    for (mut row, w) in x.rows_mut().into_iter().zip(windows) {
        if w.len() != d {
            return Err(Error::Shape("windows differ in size".into()));
        }
        row.iter_mut().zip(w.iter()).for_each(|(r, v)| *r = *v);
    }
    Ok(x)
}

/// Solves `A x = B` in place for symmetric positive definite `A` by Cholesky.
fn cholesky_solve(mut a: Array2<f64>, mut b: Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= a[[j, k]] * a[[j, k]];
        }
        if !(d > 0.0) {
            return Err(Error::NonFinite("ridge system is not positive definite".into()));
        }
        let d = d.sqrt();
        a[[j, j]] = d;
        for i in j + 1..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= a[[i, k]] * a[[j, k]];
            }
            a[[i, j]] = s / d;
        }
    }
    for c in 0..b.ncols() {
        for i in 0..n {
            let mut s = b[[i, c]];
            for k in 0..i {
                s -= a[[i, k]] * b[[k, c]];
            }
            b[[i, c]] = s / a[[i, i]];
        }
        for i in (0..n).rev() {
            let mut s = b[[i, c]];
            for k in i + 1..n {
                s -= a[[k, i]] * b[[k, c]];
            }
            b[[i, c]] = s / a[[i, i]];
        }
    }
    Ok(b)
}

impl RidgeRegression {
    /// Fits `y ≈ (x - mean) W + b` with penalty `lambda ||W||²`.
    pub fn fit(windows: &[Array2<f64>], targets: ArrayView2<f64>, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::Config("ridge lambda must be > 0".into()));
        }
        let mut x = flatten(windows)?;
        if targets.nrows() != x.nrows() {
            return Err(Error::Shape("targets do not match windows".into()));
        }
        let x_mean = x.mean_axis(Axis(0)).expect("non-empty");
        let intercept = targets.mean_axis(Axis(0)).expect("non-empty");
        x -= &x_mean;
        let y = &targets - &intercept;
        let mut gram = x.t().dot(&x);
        for i in 0..gram.nrows() {
            gram[[i, i]] += lambda;
        }
        let rhs = x.t().dot(&y);
        let weights = cholesky_solve(gram, rhs)?;
        Ok(Self {
            weights,
            intercept,
            x_mean,
        })
    }

    pub fn predict(&self, windows: &[Array2<f64>]) -> Result<Array2<f64>> {
        let mut x = flatten(windows)?;
        if x.ncols() != self.weights.nrows() {
            return Err(Error::Shape("window size differs from the fitted model".into()));
        }
        x -= &self.x_mean;
        Ok(x.dot(&self.weights) + &self.intercept)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn recovers_a_linear_map() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let windows: Vec<Array2<f64>> = (0..200)
            .map(|_| Array2::from_shape_simple_fn((2, 3), || rng.random_range(-1.0..1.0)))
            .collect();
        let w_true = Array2::from_shape_fn((6, 2), |(i, j)| (i as f64 - 2.0) * (j as f64 + 1.0));
        let y = flatten(&windows).unwrap().dot(&w_true) + 3.0;
        let model = RidgeRegression::fit(&windows, y.view(), 1e-9).unwrap();
        let p = model.predict(&windows).unwrap();
        assert!(p.iter().zip(y.iter()).all(|(a, b)| (a - b).abs() < 1e-6));
    }
}
