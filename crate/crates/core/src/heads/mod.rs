//! Classification heads on frozen pose cores: two dense layers with a ReLU
//! between them and a softmax output, fed with the concatenated joint-angle
//! outputs of one or two hand models. Also tap-gated key emission.

mod keyboard;

pub use keyboard::{keyboard_emit, read_label_map, write_label_map, KeyEvent, KeyMap, KeyboardOutput};

use std::path::Path;
use std::sync::Arc;

use ndarray::{Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{epoch_order, ModelBundle};
use crate::nncore::{softmax_cross_entropy, softmax_rows, Adam, AdamConfig, Dense, Param, Parameterized};
use crate::{Error, Result, NUM_JOINTS};

pub const DYNAMIC_GESTURE_CLASSES: usize = 50;
pub const STATIC_GESTURE_CLASSES: usize = 48;
pub const OBJECT_CLASSES: usize = 34;
pub const KEYBOARD_CLASSES: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeadConfig {
    pub num_classes: usize,
    #[serde(default = "default_hidden")]
    pub hidden_width: usize,
    #[serde(default)]
    pub uses_both_hands: bool,
}

fn default_hidden() -> usize {
    64
}

impl HeadConfig {
    pub fn new(num_classes: usize, uses_both_hands: bool) -> Self {
        Self {
            num_classes,
            hidden_width: default_hidden(),
            uses_both_hands,
        }
    }

    pub fn hands(&self) -> usize {
        if self.uses_both_hands {
            2
        } else {
            1
        }
    }

    pub fn input_dim(&self) -> usize {
        NUM_JOINTS * self.hands()
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::Config("a head needs at least two classes".into()));
        }
        if self.hidden_width == 0 {
            return Err(Error::Config("head hidden width must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassPrediction {
    pub class: usize,
    pub probs: Vec<f64>,
    pub timestamp_ms: Option<i64>,
}

/// Trainable part of a classifier. Core outputs are standardized with
/// statistics taken from the head's training features before the first layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassHead {
    pub config: HeadConfig,
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    pub fc1: Dense,
    pub fc2: Dense,
}

impl Parameterized for ClassHead {
    fn params(&self) -> Vec<&Param> {
        let mut p = self.fc1.params();
        p.extend(self.fc2.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.fc1.params_mut();
        p.extend(self.fc2.params_mut());
        p
    }
}

impl ClassHead {
    pub fn new(config: HeadConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = config.input_dim();
        Ok(Self {
            fc1: Dense::new("head.fc1", d, config.hidden_width, &mut rng),
            fc2: Dense::new("head.fc2", config.hidden_width, config.num_classes, &mut rng),
            feature_mean: vec![0.0; d],
            feature_std: vec![1.0; d],
            config,
        })
    }

    fn standardize(&self, features: ArrayView2<f64>) -> Result<Array2<f64>> {
        if features.ncols() != self.config.input_dim() {
            return Err(Error::Shape(format!(
                "head expects {} features, got {}",
                self.config.input_dim(),
                features.ncols()
            )));
        }
        let mut x = features.to_owned();
        for (mut col, (m, s)) in x.columns_mut().into_iter().zip(self.feature_mean.iter().zip(&self.feature_std)) {
            col.mapv_inplace(|v| (v - m) / s);
        }
        Ok(x)
    }

    /// Class logits for `M x input_dim` core outputs.
    pub fn logits(&self, features: ArrayView2<f64>) -> Result<Array2<f64>> {
        let x = self.standardize(features)?;
        let h = self.fc1.forward(x.view())?.mapv(|v| v.max(0.0));
        self.fc2.forward(h.view())
    }

    /// One Adam step on a minibatch; returns the mean cross-entropy.
    fn step(&mut self, adam: &mut Adam, features: ArrayView2<f64>, labels: &[usize]) -> Result<f64> {
        let x = self.standardize(features)?;
        let pre = self.fc1.forward(x.view())?;
        let h = pre.mapv(|v| v.max(0.0));
        let logits = self.fc2.forward(h.view())?;
        let (loss, d_logits) = softmax_cross_entropy(logits.view(), labels)?;
        let mut dh = self.fc2.backward(h.view(), d_logits.view());
        dh.zip_mut_with(&pre, |g, &p| {
            if p <= 0.0 {
                *g = 0.0
            }
        });
        self.fc1.backward(x.view(), dh.view());
        adam.step(&mut self.params_mut())?;
        Ok(loss)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = HeadFile {
            config: self.config.clone(),
            feature_mean: self.feature_mean.clone(),
            feature_std: self.feature_std.clone(),
            params: self.params().iter().map(|p| rows(&p.value)).collect(),
        };
        std::fs::write(path, serde_json::to_string(&file)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file: HeadFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let mut head = ClassHead::new(file.config, 0)?;
        if file.params.len() != 4
            || file.feature_mean.len() != head.config.input_dim()
            || file.feature_std.len() != head.config.input_dim()
        {
            return Err(Error::Shape("head file does not match its config".into()));
        }
        head.feature_mean = file.feature_mean;
        head.feature_std = file.feature_std;
        for (p, v) in head.params_mut().into_iter().zip(file.params) {
            let (r, c) = p.shape();
            let flat: Vec<f64> = v.into_iter().flatten().collect();
            p.value = Array2::from_shape_vec((r, c), flat)
                .map_err(|_| Error::Shape(format!("parameter {} has the wrong shape", p.name)))?;
        }
        Ok(head)
    }
}

fn rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeadFile {
    config: HeadConfig,
    feature_mean: Vec<f64>,
    feature_std: Vec<f64>,
    params: Vec<Vec<Vec<f64>>>,
}

/// One or two frozen pose cores with a classification head on top.
#[derive(Debug, Clone)]
pub struct Classifier {
    pub cores: Vec<Arc<ModelBundle>>,
    pub head: ClassHead,
}

/// Builds a classifier whose head input is the concatenation of the cores'
/// joint-angle outputs (22 per hand).
pub fn attach_head(cores: Vec<Arc<ModelBundle>>, config: HeadConfig, seed: u64) -> Result<Classifier> {
    config.validate()?;
    if cores.len() != config.hands() {
        return Err(Error::Config(format!(
            "head expects {} core model(s), got {}",
            config.hands(),
            cores.len()
        )));
    }
    if let Some(c) = cores.iter().find(|c| c.config.output_dim != NUM_JOINTS) {
        return Err(Error::Config(format!("core outputs {} angles, head needs 22", c.config.output_dim)));
    }
    Ok(Classifier {
        cores,
        head: ClassHead::new(config, seed)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeadTrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for HeadTrainOptions {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 64,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

impl Classifier {
    /// Core outputs for raw windows, `M x 22·hands`. `hands[h][i]` is window
    /// `i` of hand `h`.
    pub fn core_features(&self, hands: &[&[Array2<f64>]]) -> Result<Array2<f64>> {
        if hands.len() != self.cores.len() {
            return Err(Error::Shape(format!("{} hands for {} cores", hands.len(), self.cores.len())));
        }
        let m = hands[0].len();
        let mut out = Array2::zeros((m, NUM_JOINTS * hands.len()));
        for (h, (core, windows)) in self.cores.iter().zip(hands).enumerate() {
            if windows.len() != m {
                return Err(Error::Shape("hands have different window counts".into()));
            }
            let normalized = windows
                .iter()
                .map(|w| core.stats.normalize(w.view()))
                .collect::<Result<Vec<_>>>()?;
            let angles = core.predict_angles(&normalized, 256)?;
            out.slice_mut(ndarray::s![.., h * NUM_JOINTS..(h + 1) * NUM_JOINTS])
                .assign(&angles);
        }
        Ok(out)
    }

    /// Prediction from already computed core outputs (one row).
    pub fn classify_features(&self, features: ArrayView2<f64>, timestamp_ms: Option<i64>) -> Result<Vec<ClassPrediction>> {
        let probs = softmax_rows(self.head.logits(features)?.view());
        Ok(probs
            .rows()
            .into_iter()
            .map(|p| ClassPrediction {
                class: argmax(p.as_slice().expect("standard layout")),
                probs: p.to_vec(),
                timestamp_ms,
            })
            .collect())
    }

    /// Classifies one raw window per hand.
    pub fn classify(&self, windows: &[ArrayView2<f64>], timestamp_ms: Option<i64>) -> Result<ClassPrediction> {
        let owned: Vec<[Array2<f64>; 1]> = windows.iter().map(|w| [w.to_owned()]).collect();
        let refs: Vec<&[Array2<f64>]> = owned.iter().map(|w| &w[..]).collect();
        let f = self.core_features(&refs)?;
        Ok(self.classify_features(f.view(), timestamp_ms)?.remove(0))
    }

    /// Trains only the head on frozen core outputs with cross-entropy and
    /// Adam. Returns the mean loss per epoch.
    pub fn train_head(
        &mut self,
        hands: &[&[Array2<f64>]],
        labels: &[usize],
        opts: &HeadTrainOptions,
    ) -> Result<Vec<f64>> {
        let features = self.core_features(hands)?;
        self.train_head_on_features(features.view(), labels, opts)
    }

    pub fn train_head_on_features(
        &mut self,
        features: ArrayView2<f64>,
        labels: &[usize],
        opts: &HeadTrainOptions,
    ) -> Result<Vec<f64>> {
        let n = features.nrows();
        if n == 0 || labels.len() != n {
            return Err(Error::Shape(format!("{} labels for {n} samples", labels.len())));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= self.head.config.num_classes) {
            return Err(Error::InvalidInput(format!("label {bad} outside the head's classes")));
        }
        if labels.iter().all(|&l| l == labels[0]) {
            log::warn!("all training samples carry class {}; the head cannot learn to separate classes", labels[0]);
        }
        if opts.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        let mean = features.mean_axis(Axis(0)).expect("non-empty");
        let std = features.std_axis(Axis(0), 0.0);
        self.head.feature_mean = mean.to_vec();
        self.head.feature_std = std.iter().map(|&s| if s > 0.0 { s } else { 1.0 }).collect();
        let mut adam = Adam::new(opts.adam);
        let mut curve = Vec::with_capacity(opts.epochs);
        for epoch in 0..opts.epochs {
            let order = epoch_order(n, opts.seed, epoch);
            let mut total = 0.0;
            for chunk in order.chunks(opts.batch_size) {
                let x = features.select(Axis(0), chunk);
                let y: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
                total += self.head.step(&mut adam, x.view(), &y)? * chunk.len() as f64;
            }
            let loss = total / n as f64;
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged {
                    epoch,
                    reason: format!("head loss {loss}"),
                    last_good: None,
                });
            }
            curve.push(loss);
        }
        Ok(curve)
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
