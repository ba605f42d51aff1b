use ndarray::{s, Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ModelConfig, Pooling};
use crate::nncore::{BiLstmLayer, Dense, Param, Parameterized};
use crate::nncore::BiLstmCache;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GlovePoseNet {
    pub config: ModelConfig,
    pub lstm: Vec<BiLstmLayer>,
    pub fc1: Dense,
    pub fc2: Dense,
}

/// Activations kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct NetCache {
    batch: usize,
    layer_inputs: Vec<Array2<f64>>,
    layer_caches: Vec<BiLstmCache>,
    pooled: Array2<f64>,
    fc1_pre: Array2<f64>,
    fc1_out: Array2<f64>,
}

impl GlovePoseNet {
    pub fn new(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = config.hidden_size;
        let lstm = (0..config.num_stacked_layers)
            .map(|l| {
                let inputs = if l == 0 { config.input_channels } else { 2 * h };
                BiLstmLayer::new(&format!("lstm{l}"), inputs, h, &mut rng)
            })
            .collect();
        let fc1 = Dense::new("fc1", 2 * h, config.fc1_width, &mut rng);
        let fc2 = Dense::new("fc2", config.fc1_width, config.total_outputs(), &mut rng);
        Ok(Self {
            config: config.clone(),
            lstm,
            fc1,
            fc2,
        })
    }

    fn check_window(&self, w: &ArrayView2<f64>) -> Result<()> {
        let expected = (self.config.window_length, self.config.input_channels);
        if w.dim() != expected {
            return Err(Error::Shape(format!(
                "window {:?}, model expects {expected:?}",
                w.dim()
            )));
        }
        Ok(())
    }

    /// Forward pass over a batch of normalized windows. Returns
    /// `B x (22 + flags)` outputs.
    pub fn forward_batch(&self, windows: &[ArrayView2<f64>]) -> Result<(Array2<f64>, NetCache)> {
        let batch = windows.len();
        if batch == 0 {
            return Err(Error::Shape("empty batch".into()));
        }
        for w in windows {
            self.check_window(w)?;
        }
        let steps = self.config.window_length;
        let mut x = Array2::zeros((steps * batch, self.config.input_channels));
        for (b, w) in windows.iter().enumerate() {
            for t in 0..steps {
                x.row_mut(t * batch + b).assign(&w.row(t));
            }
        }
        let mut layer_inputs = Vec::with_capacity(self.lstm.len());
        let mut layer_caches = Vec::with_capacity(self.lstm.len());
        for layer in &self.lstm {
            let (out, cache) = layer.forward(x.view(), batch)?;
            layer_inputs.push(x);
            layer_caches.push(cache);
            x = out;
        }
        let pooled = match self.config.pooling {
            Pooling::Last => x.slice(s![(steps - 1) * batch.., ..]).to_owned(),
            Pooling::Mean => {
                let mut acc = Array2::zeros((batch, x.ncols()));
                for t in 0..steps {
                    acc += &x.slice(s![t * batch..(t + 1) * batch, ..]);
                }
                acc / steps as f64
            }
        };
        let fc1_pre = self.fc1.forward(pooled.view())?;
        let fc1_out = fc1_pre.mapv(|v| v.max(0.0));
        let out = self.fc2.forward(fc1_out.view())?;
        Ok((
            out,
            NetCache {
                batch,
                layer_inputs,
                layer_caches,
                pooled,
                fc1_pre,
                fc1_out,
            },
        ))
    }

    /// Accumulates parameter gradients for upstream gradient `d_out`.
    pub fn backward(&mut self, cache: &NetCache, d_out: ArrayView2<f64>) -> Result<()> {
        let batch = cache.batch;
        if d_out.dim() != (batch, self.config.total_outputs()) {
            return Err(Error::Shape(format!(
                "output gradient {:?}, expected {:?}",
                d_out.dim(),
                (batch, self.config.total_outputs())
            )));
        }
        let d_fc1_out = self.fc2.backward(cache.fc1_out.view(), d_out);
        let mut d_fc1_pre = d_fc1_out;
        ndarray::Zip::from(&mut d_fc1_pre)
            .and(&cache.fc1_pre)
            .for_each(|d, &z| {
                if z <= 0.0 {
                    *d = 0.0
                }
            });
        let d_pooled = self.fc1.backward(cache.pooled.view(), d_fc1_pre.view());
        let steps = self.config.window_length;
        let mut d = Array2::zeros((steps * batch, d_pooled.ncols()));
        match self.config.pooling {
            Pooling::Last => d.slice_mut(s![(steps - 1) * batch.., ..]).assign(&d_pooled),
            Pooling::Mean => {
                let share = d_pooled / steps as f64;
                for t in 0..steps {
                    d.slice_mut(s![t * batch..(t + 1) * batch, ..]).assign(&share);
                }
            }
        }
        for (l, layer) in self.lstm.iter_mut().enumerate().rev() {
            d = layer.backward(
                cache.layer_inputs[l].view(),
                &cache.layer_caches[l],
                d.view(),
                batch,
            )?;
        }
        Ok(())
    }
}

impl Parameterized for GlovePoseNet {
    fn params(&self) -> Vec<&Param> {
        let mut v: Vec<&Param> = self.lstm.iter().flat_map(|l| l.params()).collect();
        v.extend(self.fc1.params());
        v.extend(self.fc2.params());
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v: Vec<&mut Param> = self.lstm.iter_mut().flat_map(|l| l.params_mut()).collect();
        v.extend(self.fc1.params_mut());
        v.extend(self.fc2.params_mut());
        v
    }
}
