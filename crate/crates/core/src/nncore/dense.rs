use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use super::param::{Param, Parameterized};
use crate::{Error, Result};

/// Fully connected layer `y = x W^T + b` over a batch of row vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `out x in`
    pub weight: Param,
    /// `1 x out`
    pub bias: Param,
}

impl Dense {
    /// Weights and biases uniform in `±1/sqrt(fan_in)`.
    pub fn new<R: Rng>(name: &str, inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let limit = 1.0 / (inputs as f64).sqrt();
        Self {
            weight: Param::uniform(format!("{name}.weight"), outputs, inputs, limit, rng),
            bias: Param::uniform(format!("{name}.bias"), 1, outputs, limit, rng),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.value.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.value.nrows()
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        fc_forward(x, self.weight.value.view(), self.bias.value.row(0))
    }

    /// Accumulates parameter gradients for upstream gradient `dy` and returns
    /// the gradient with respect to `x`.
    pub fn backward(&mut self, x: ArrayView2<f64>, dy: ArrayView2<f64>) -> Array2<f64> {
        self.weight.grad += &dy.t().dot(&x);
        self.bias.grad.row_mut(0).scaled_add(1.0, &dy.sum_axis(Axis(0)));
        dy.dot(&self.weight.value)
    }
}

impl Parameterized for Dense {
    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// `y = x W^T + b` for `x: (batch, in)`, `W: (out, in)`, `b: (out)`.
pub fn fc_forward(
    x: ArrayView2<f64>,
    weight: ArrayView2<f64>,
    bias: ArrayView1<f64>,
) -> Result<Array2<f64>> {
    if x.ncols() != weight.ncols() || bias.len() != weight.nrows() {
        return Err(Error::Shape(format!(
            "fc: input {:?}, weight {:?}, bias {}",
            x.dim(),
            weight.dim(),
            bias.len()
        )));
    }
    let mut y = x.dot(&weight.t());
    y += &bias;
    Ok(y)
}
