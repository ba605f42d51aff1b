use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use rand::Rng;

use super::param::{Param, Parameterized};
use super::sigmoid;
use crate::{Error, Result};

/// One LSTM direction. Gate blocks are stacked in the order
/// input, forget, cell candidate, output along the `4H` axis.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell {
    /// `4H x in`
    pub w_ih: Param,
    /// `4H x H`
    pub w_hh: Param,
    /// `1 x 4H`
    pub bias: Param,
}

/// Post-activation gates, cell states and hidden states of one direction,
/// indexed by real time step (row `t * B + b`), whatever the scan direction.
#[derive(Debug, Clone)]
pub struct LstmCache {
    pub gates: Array2<f64>,
    pub cells: Array2<f64>,
    pub hidden: Array2<f64>,
}

impl LstmCell {
    /// Input weights uniform in `±1/sqrt(in)`, recurrent weights in
    /// `±1/sqrt(H)`, zero biases except the forget gate at +1.
    pub fn new<R: Rng>(name: &str, inputs: usize, hidden: usize, rng: &mut R) -> Self {
        let w_ih = Param::uniform(
            format!("{name}.w_ih"),
            4 * hidden,
            inputs,
            1.0 / (inputs as f64).sqrt(),
            rng,
        );
        let w_hh = Param::uniform(
            format!("{name}.w_hh"),
            4 * hidden,
            hidden,
            1.0 / (hidden as f64).sqrt(),
            rng,
        );
        let mut bias = Param::zeros(format!("{name}.bias"), 1, 4 * hidden);
        bias.value.slice_mut(s![0, hidden..2 * hidden]).fill(1.0);
        Self { w_ih, w_hh, bias }
    }

    pub fn hidden_size(&self) -> usize {
        self.w_hh.value.ncols()
    }

    pub fn input_size(&self) -> usize {
        self.w_ih.value.ncols()
    }

    fn check_input(&self, x: &ArrayView2<f64>, batch: usize) -> Result<usize> {
        if x.ncols() != self.input_size() {
            return Err(Error::Shape(format!(
                "lstm expects {} input features, got {}",
                self.input_size(),
                x.ncols()
            )));
        }
        if batch == 0 || x.nrows() % batch != 0 || x.nrows() == 0 {
            return Err(Error::Shape(format!(
                "lstm input has {} rows, not a positive multiple of batch {batch}",
                x.nrows()
            )));
        }
        Ok(x.nrows() / batch)
    }

    /// Runs the cell over a `T * B` row sequence, left to right or right to
    /// left, from zero initial state.
    pub fn forward_seq(&self, x: ArrayView2<f64>, batch: usize, reverse: bool) -> Result<LstmCache> {
        let steps = self.check_input(&x, batch)?;
        let h = self.hidden_size();
        let mut gates = standard(x.dot(&self.w_ih.value.t()));
        gates += &self.bias.value.row(0);
        let mut cells = Array2::<f64>::zeros((steps * batch, h));
        let mut hidden = Array2::<f64>::zeros((steps * batch, h));
        let zeros = vec![0.0; batch * h];
        let mut c_prev = zeros.clone();

        let mut prev: Option<usize> = None;
        for step in 0..steps {
            let t = if reverse { steps - 1 - step } else { step };
            let rows = t * batch..(t + 1) * batch;
            if let Some(p) = prev {
                let rec = hidden
                    .slice(s![p * batch..(p + 1) * batch, ..])
                    .dot(&self.w_hh.value.t());
                let mut block = gates.slice_mut(s![rows.clone(), ..]);
                block += &rec;
                c_prev.copy_from_slice(
                    cells
                        .slice(s![p * batch..(p + 1) * batch, ..])
                        .as_slice()
                        .expect("contiguous rows"),
                );
            } else {
                c_prev.copy_from_slice(&zeros);
            }
            let mut g = gates.slice_mut(s![rows.clone(), ..]);
            let mut c = cells.slice_mut(s![rows.clone(), ..]);
            let mut hh = hidden.slice_mut(s![rows, ..]);
            activate(
                g.as_slice_mut().expect("contiguous rows"),
                &c_prev,
                c.as_slice_mut().expect("contiguous rows"),
                hh.as_slice_mut().expect("contiguous rows"),
                h,
            );
            prev = Some(t);
        }
        Ok(LstmCache {
            gates,
            cells,
            hidden,
        })
    }

    /// Backpropagation through time. `dh_all` is the loss gradient with
    /// respect to every hidden state (`T * B x H`). Accumulates parameter
    /// gradients and returns the gradient with respect to `x`.
    pub fn backward_seq(
        &mut self,
        x: ArrayView2<f64>,
        cache: &LstmCache,
        dh_all: ArrayView2<f64>,
        batch: usize,
        reverse: bool,
    ) -> Result<Array2<f64>> {
        let steps = self.check_input(&x, batch)?;
        let h = self.hidden_size();
        if dh_all.dim() != (steps * batch, h) {
            return Err(Error::Shape(format!(
                "lstm upstream gradient {:?}, expected {:?}",
                dh_all.dim(),
                (steps * batch, h)
            )));
        }
        let order = |step: usize| if reverse { steps - 1 - step } else { step };
        let mut dgates = Array2::<f64>::zeros((steps * batch, 4 * h));
        let mut dh_next = Array2::<f64>::zeros((batch, h));
        let mut dc_next = vec![0.0; batch * h];

        let gates = cache.gates.as_slice().expect("contiguous");
        let cells = cache.cells.as_slice().expect("contiguous");
        let dh_up = dh_all.as_standard_layout();
        let dh_up = dh_up.as_slice().expect("contiguous");

        for step in (0..steps).rev() {
            let t = order(step);
            let prev = (step > 0).then(|| order(step - 1));
            {
                let dg = dgates
                    .slice_mut(s![t * batch..(t + 1) * batch, ..])
                    .into_slice()
                    .expect("contiguous rows");
                let dhn = dh_next.as_slice().expect("contiguous");
                for b in 0..batch {
                    let row = t * batch + b;
                    let gr = &gates[row * 4 * h..(row + 1) * 4 * h];
                    let dgr = &mut dg[b * 4 * h..(b + 1) * 4 * h];
                    for j in 0..h {
                        let (i, f, g, o) = (gr[j], gr[h + j], gr[2 * h + j], gr[3 * h + j]);
                        let c = cells[row * h + j];
                        let cp = prev.map_or(0.0, |p| cells[(p * batch + b) * h + j]);
                        let tc = c.tanh();
                        let dh = dh_up[row * h + j] + dhn[b * h + j];
                        let d_o = dh * tc;
                        let dc = dc_next[b * h + j] + dh * o * (1.0 - tc * tc);
                        dgr[j] = dc * g * i * (1.0 - i);
                        dgr[h + j] = dc * cp * f * (1.0 - f);
                        dgr[2 * h + j] = dc * i * (1.0 - g * g);
                        dgr[3 * h + j] = d_o * o * (1.0 - o);
                        dc_next[b * h + j] = dc * f;
                    }
                }
            }
            if prev.is_some() {
                dh_next = standard(
                    dgates
                        .slice(s![t * batch..(t + 1) * batch, ..])
                        .dot(&self.w_hh.value),
                );
            }
        }

        // Hidden state that fed the recurrent product at each real time step.
        let mut h_prev = Array2::<f64>::zeros((steps * batch, h));
        for step in 1..steps {
            let (t, p) = (order(step), order(step - 1));
            h_prev
                .slice_mut(s![t * batch..(t + 1) * batch, ..])
                .assign(&cache.hidden.slice(s![p * batch..(p + 1) * batch, ..]));
        }
        self.w_ih.grad += &dgates.t().dot(&x);
        self.w_hh.grad += &dgates.t().dot(&h_prev);
        self.bias
            .grad
            .row_mut(0)
            .scaled_add(1.0, &dgates.sum_axis(Axis(0)));
        Ok(dgates.dot(&self.w_ih.value))
    }
}

impl Parameterized for LstmCell {
    fn params(&self) -> Vec<&Param> {
        vec![&self.w_ih, &self.w_hh, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.w_ih, &mut self.w_hh, &mut self.bias]
    }
}

/// Matrix products may come back column-major; the gate loops index rows.
fn standard(a: Array2<f64>) -> Array2<f64> {
    if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().into_owned()
    }
}

/// Applies gate nonlinearities in place on pre-activations `a` (`B x 4H`)
/// and writes the new cell and hidden states.
fn activate(a: &mut [f64], c_prev: &[f64], c: &mut [f64], h_out: &mut [f64], h: usize) {
    let batch = c.len() / h;
    for b in 0..batch {
        let row = &mut a[b * 4 * h..(b + 1) * 4 * h];
        for j in 0..h {
            let i = sigmoid(row[j]);
            let f = sigmoid(row[h + j]);
            let g = row[2 * h + j].tanh();
            let o = sigmoid(row[3 * h + j]);
            row[j] = i;
            row[h + j] = f;
            row[2 * h + j] = g;
            row[3 * h + j] = o;
            let cell = f * c_prev[b * h + j] + i * g;
            c[b * h + j] = cell;
            h_out[b * h + j] = o * cell.tanh();
        }
    }
}

/// Single LSTM step for a batch of inputs `x_t: (B, in)` with previous states
/// `(B, H)`. Returns `(h_t, c_t)`.
pub fn lstm_step(
    x_t: ArrayView2<f64>,
    h_prev: ArrayView2<f64>,
    c_prev: ArrayView2<f64>,
    cell: &LstmCell,
) -> Result<(Array2<f64>, Array2<f64>)> {
    let h = cell.hidden_size();
    let batch = x_t.nrows();
    if x_t.ncols() != cell.input_size() || h_prev.dim() != (batch, h) || c_prev.dim() != (batch, h)
    {
        return Err(Error::Shape(format!(
            "lstm_step: x {:?}, h {:?}, c {:?} for input {} hidden {h}",
            x_t.dim(),
            h_prev.dim(),
            c_prev.dim(),
            cell.input_size()
        )));
    }
    let mut a = standard(x_t.dot(&cell.w_ih.value.t()) + h_prev.dot(&cell.w_hh.value.t()));
    a += &cell.bias.value.row(0);
    let mut c = Array2::zeros((batch, h));
    let mut h_t = Array2::zeros((batch, h));
    let c_prev = c_prev.as_standard_layout();
    activate(
        a.as_slice_mut().expect("owned"),
        c_prev.as_slice().expect("standard layout"),
        c.as_slice_mut().expect("owned"),
        h_t.as_slice_mut().expect("owned"),
        h,
    );
    Ok((h_t, c))
}

/// Forward and backward LSTM directions over the same input; outputs are the
/// per-step concatenation `[h_fwd, h_bwd]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmLayer {
    pub fwd: LstmCell,
    pub bwd: LstmCell,
}

#[derive(Debug, Clone)]
pub struct BiLstmCache {
    pub fwd: LstmCache,
    pub bwd: LstmCache,
}

impl BiLstmLayer {
    pub fn new<R: Rng>(name: &str, inputs: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            fwd: LstmCell::new(&format!("{name}.fwd"), inputs, hidden, rng),
            bwd: LstmCell::new(&format!("{name}.bwd"), inputs, hidden, rng),
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.fwd.hidden_size()
    }

    pub fn input_size(&self) -> usize {
        self.fwd.input_size()
    }

    /// Returns the `T * B x 2H` output and the caches needed for backward.
    pub fn forward(&self, x: ArrayView2<f64>, batch: usize) -> Result<(Array2<f64>, BiLstmCache)> {
        let fwd = self.fwd.forward_seq(x, batch, false)?;
        let bwd = self.bwd.forward_seq(x, batch, true)?;
        let out = concatenate(Axis(1), &[fwd.hidden.view(), bwd.hidden.view()])
            .expect("matching row counts");
        Ok((out, BiLstmCache { fwd, bwd }))
    }

    pub fn backward(
        &mut self,
        x: ArrayView2<f64>,
        cache: &BiLstmCache,
        d_out: ArrayView2<f64>,
        batch: usize,
    ) -> Result<Array2<f64>> {
        let h = self.hidden_size();
        let mut dx = self
            .fwd
            .backward_seq(x, &cache.fwd, d_out.slice(s![.., ..h]), batch, false)?;
        dx += &self
            .bwd
            .backward_seq(x, &cache.bwd, d_out.slice(s![.., h..]), batch, true)?;
        Ok(dx)
    }
}

impl Parameterized for BiLstmLayer {
    fn params(&self) -> Vec<&Param> {
        let mut v = self.fwd.params();
        v.extend(self.bwd.params());
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = self.fwd.params_mut();
        v.extend(self.bwd.params_mut());
        v
    }
}

/// Runs a stack of bidirectional layers over one `T x C` sequence and returns
/// the top layer's `T x 2H` output.
pub fn bilstm_forward(seq: ArrayView2<f64>, layers: &[BiLstmLayer]) -> Result<Array2<f64>> {
    if seq.nrows() == 0 {
        return Err(Error::Shape("bilstm_forward needs at least one time step".into()));
    }
    let mut x = seq.to_owned();
    for layer in layers {
        x = layer.forward(x.view(), 1)?.0;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_seq(t: usize, c: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_simple_fn((t, c), || rng.random_range(-1.0..1.0))
    }

    /// Scalar LSTM written out longhand, one unit, one input.
    fn scalar_lstm(x: f64, h: f64, c: f64, w: [f64; 4], u: [f64; 4], b: [f64; 4]) -> (f64, f64) {
        let s = |z: f64| 1.0 / (1.0 + (-z).exp());
        let i = s(w[0] * x + u[0] * h + b[0]);
        let f = s(w[1] * x + u[1] * h + b[1]);
        let g = (w[2] * x + u[2] * h + b[2]).tanh();
        let o = s(w[3] * x + u[3] * h + b[3]);
        let c_new = f * c + i * g;
        (o * c_new.tanh(), c_new)
    }

    #[test]
    fn zero_parameters_give_zero_state() {
        let mut cell = LstmCell::new("c", 3, 4, &mut ChaCha8Rng::seed_from_u64(1));
        for p in cell.params_mut() {
            p.value.fill(0.0);
        }
        let (h, c) = lstm_step(
            array![[0.3, -0.7, 2.0]].view(),
            Array2::zeros((1, 4)).view(),
            Array2::zeros((1, 4)).view(),
            &cell,
        )
        .unwrap();
        assert!(h.iter().all(|&v| v == 0.0));
        assert!(c.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn saturated_forget_gate_keeps_cell() {
        let mut cell = LstmCell::new("c", 2, 3, &mut ChaCha8Rng::seed_from_u64(2));
        for p in cell.params_mut() {
            p.value.fill(0.0);
        }
        cell.bias.value.slice_mut(s![0, 3..6]).fill(50.0);
        let c_prev = array![[0.4, -1.2, 2.5]];
        let (_, c) = lstm_step(
            array![[1.0, -1.0]].view(),
            Array2::zeros((1, 3)).view(),
            c_prev.view(),
            &cell,
        )
        .unwrap();
        // sigma(50) = 1 - 2e-22, candidate tanh(0) = 0.
        for (a, b) in c.iter().zip(c_prev.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn single_unit_matches_scalar_reference() {
        let cell = LstmCell::new("c", 1, 1, &mut ChaCha8Rng::seed_from_u64(3));
        let w: [f64; 4] = std::array::from_fn(|k| cell.w_ih.value[[k, 0]]);
        let u: [f64; 4] = std::array::from_fn(|k| cell.w_hh.value[[k, 0]]);
        let b: [f64; 4] = std::array::from_fn(|k| cell.bias.value[[0, k]]);
        let xs = [0.5, -1.5, 2.0, 0.1];
        let (mut h, mut c) = (0.0, 0.0);
        let mut hs = Array2::zeros((1, 1));
        let mut cs = Array2::zeros((1, 1));
        for &x in &xs {
            (h, c) = scalar_lstm(x, h, c, w, u, b);
            let (h2, c2) = lstm_step(array![[x]].view(), hs.view(), cs.view(), &cell).unwrap();
            hs = h2;
            cs = c2;
            assert!((hs[[0, 0]] - h).abs() < 1e-15);
            assert!((cs[[0, 0]] - c).abs() < 1e-15);
        }
        // The sequence path agrees with stepping.
        let seq = Array2::from_shape_vec((4, 1), xs.to_vec()).unwrap();
        let cache = cell.forward_seq(seq.view(), 1, false).unwrap();
        assert!((cache.hidden[[3, 0]] - h).abs() < 1e-15);
    }

    #[test]
    fn single_step_sees_same_input_both_ways() {
        let layer = BiLstmLayer::new("l", 3, 5, &mut ChaCha8Rng::seed_from_u64(4));
        let seq = random_seq(1, 3, 5);
        let out = bilstm_forward(seq.view(), std::slice::from_ref(&layer)).unwrap();
        let (hf, _) = lstm_step(
            seq.view(),
            Array2::zeros((1, 5)).view(),
            Array2::zeros((1, 5)).view(),
            &layer.fwd,
        )
        .unwrap();
        let (hb, _) = lstm_step(
            seq.view(),
            Array2::zeros((1, 5)).view(),
            Array2::zeros((1, 5)).view(),
            &layer.bwd,
        )
        .unwrap();
        assert_eq!(out.slice(s![0, ..5]), hf.row(0));
        assert_eq!(out.slice(s![0, 5..]), hb.row(0));
    }

    #[test]
    fn time_reversal_swaps_halves_with_swapped_directions() {
        let layer = BiLstmLayer::new("l", 4, 3, &mut ChaCha8Rng::seed_from_u64(6));
        let swapped = BiLstmLayer {
            fwd: layer.bwd.clone(),
            bwd: layer.fwd.clone(),
        };
        let seq = random_seq(7, 4, 7);
        let mut rev = seq.clone();
        rev.invert_axis(Axis(0));
        let out = bilstm_forward(seq.view(), std::slice::from_ref(&layer)).unwrap();
        let out_rev = bilstm_forward(rev.view(), std::slice::from_ref(&swapped)).unwrap();
        for t in 0..7 {
            let m = 6 - t;
            for j in 0..3 {
                assert!((out_rev[[t, j]] - out[[m, 3 + j]]).abs() < 1e-14);
                assert!((out_rev[[t, 3 + j]] - out[[m, j]]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn stacked_output_shape_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let layers = vec![
            BiLstmLayer::new("l0", 6, 4, &mut rng),
            BiLstmLayer::new("l1", 8, 4, &mut rng),
        ];
        for t in [1, 2, 13] {
            let seq = random_seq(t, 6, t as u64);
            let a = bilstm_forward(seq.view(), &layers).unwrap();
            let b = bilstm_forward(seq.view(), &layers).unwrap();
            assert_eq!(a.dim(), (t, 8));
            assert_eq!(a, b);
        }
    }

    #[test]
    fn batched_rows_match_individual_sequences() {
        let cell = LstmCell::new("c", 3, 4, &mut ChaCha8Rng::seed_from_u64(9));
        let a = random_seq(5, 3, 10);
        let b = random_seq(5, 3, 11);
        let mut x = Array2::zeros((10, 3));
        for t in 0..5 {
            x.row_mut(2 * t).assign(&a.row(t));
            x.row_mut(2 * t + 1).assign(&b.row(t));
        }
        let both = cell.forward_seq(x.view(), 2, true).unwrap();
        let only_b = cell.forward_seq(b.view(), 1, true).unwrap();
        for t in 0..5 {
            for j in 0..4 {
                assert!((both.hidden[[2 * t + 1, j]] - only_b.hidden[[t, j]]).abs() < 1e-14);
            }
        }
    }
}
