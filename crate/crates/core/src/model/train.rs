use ndarray::{s, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{GlovePoseNet, ModelBundle, ModelConfig, TrainingMeta};
use crate::nncore::{bce_with_logits, smooth_l1_with_grad, Adam, AdamConfig, Parameterized, SMOOTH_L1_BETA};
use crate::signal::{ChannelStats, WindowDataset};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Seeds both parameter initialization and per-epoch shuffling.
    pub seed: u64,
    /// Knee of the smooth L1 regression loss.
    pub beta: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 64,
            adam: AdamConfig::default(),
            seed: 0,
            beta: SMOOTH_L1_BETA,
        }
    }
}

/// Mean losses over one epoch. `loss = regression + transform`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub regression: f64,
    pub transform: f64,
}

/// Visiting order for `epoch`: a seeded permutation of `0..n`.
pub fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64 + 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

/// Trains a fresh model on raw (unnormalized) windows. Channel statistics come
/// from `data` itself, which must therefore hold training windows only.
pub fn train(data: &WindowDataset, config: &ModelConfig, opts: &TrainOptions) -> Result<ModelBundle> {
    if data.is_empty() {
        return Err(Error::InvalidInput("training set is empty".into()));
    }
    let stats = ChannelStats::from_windows(&data.windows)?;
    let mut normalized = data.clone();
    for w in &mut normalized.windows {
        stats.normalize_in_place(w)?;
    }
    let mut bundle = ModelBundle::new(config.clone(), stats, opts.seed)?;
    fit(&mut bundle, &normalized, opts)?;
    Ok(bundle)
}

/// Runs `opts.epochs` epochs of minibatch Adam on already-normalized windows,
/// appending to the bundle's loss curve. With transformation flags enabled
/// the loss is smooth L1 on the angles plus binary cross-entropy on the flags.
/// With `standardize_targets` the angles are z-scored with statistics taken
/// from `data` on the first call.
///
/// A non-finite loss or gradient restores the parameters from the end of the
/// previous epoch and returns [`Error::TrainingDiverged`] carrying them.
pub fn fit(bundle: &mut ModelBundle, data: &WindowDataset, opts: &TrainOptions) -> Result<()> {
    let cfg = bundle.config.clone();
    check_dataset(data, &cfg)?;
    if opts.batch_size == 0 {
        return Err(Error::Config("batch_size must be >= 1".into()));
    }
    if cfg.standardize_targets && bundle.target_stats.is_none() {
        bundle.target_stats = Some(ChannelStats::from_rows(data.targets.view())?);
    }
    let targets = match &bundle.target_stats {
        Some(t) => t.normalize(data.targets.view())?,
        None => data.targets.clone(),
    };
    let mut adam = Adam::new(opts.adam);
    let n = data.len();
    let base_epoch = bundle.meta.loss_curve.len();
    for epoch in 0..opts.epochs {
        let snapshot = bundle.net.clone();
        let order = epoch_order(n, opts.seed, base_epoch + epoch);
        let (mut reg_sum, mut tr_sum) = (0.0, 0.0);
        let mut failure = None;
        for chunk in order.chunks(opts.batch_size) {
            match train_step(&mut bundle.net, &mut adam, data, targets.view(), chunk, opts.beta) {
                Ok((reg, tr)) => {
                    reg_sum += reg * chunk.len() as f64;
                    tr_sum += tr * chunk.len() as f64;
                }
                Err(e) => {
                    failure = Some(e.to_string());
                    break;
                }
            }
        }
        let log = EpochLog {
            epoch: base_epoch + epoch,
            loss: (reg_sum + tr_sum) / n as f64,
            regression: reg_sum / n as f64,
            transform: tr_sum / n as f64,
        };
        if failure.is_none() && !log.loss.is_finite() {
            failure = Some(format!("loss {}", log.loss));
        }
        if let Some(reason) = failure {
            bundle.net = snapshot;
            return Err(Error::TrainingDiverged {
                epoch: log.epoch,
                reason,
                last_good: Some(Box::new(bundle.clone())),
            });
        }
        log::info!(
            "epoch {} loss {:.6} (regression {:.6}, transform {:.6})",
            log.epoch,
            log.loss,
            log.regression,
            log.transform
        );
        bundle.meta.loss_curve.push(log);
    }
    bundle.meta.epochs += opts.epochs;
    bundle.meta.seed = opts.seed;
    bundle.meta.batch_size = opts.batch_size;
    bundle.meta.lr = opts.adam.lr;
    Ok(())
}

fn check_dataset(data: &WindowDataset, cfg: &ModelConfig) -> Result<()> {
    if data.is_empty() {
        return Err(Error::InvalidInput("training set is empty".into()));
    }
    if data.targets.dim() != (data.len(), cfg.output_dim) {
        return Err(Error::Shape(format!(
            "targets {:?} for {} windows",
            data.targets.dim(),
            data.len()
        )));
    }
    if data.targets.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training labels".into()));
    }
    if cfg.multitask_flags_dim > 0 {
        match &data.flags {
            Some(f) if f.dim() == (data.len(), cfg.multitask_flags_dim) => {}
            _ => {
                return Err(Error::Shape(
                    "multitask model needs a flag column per transformation".into(),
                ))
            }
        }
    }
    Ok(())
}

/// One minibatch update; returns (regression loss, transform loss).
fn train_step(
    net: &mut GlovePoseNet,
    adam: &mut Adam,
    data: &WindowDataset,
    targets: ArrayView2<f64>,
    idx: &[usize],
    beta: f64,
) -> Result<(f64, f64)> {
    let views: Vec<ArrayView2<f64>> = idx.iter().map(|&i| data.windows[i].view()).collect();
    let targets = targets.select(Axis(0), idx);
    let flags = data.flags.as_ref().map(|f| f.select(Axis(0), idx));
    let (out, cache) = net.forward_batch(&views)?;
    let (reg, tr, grad) = composite_loss(&net.config, out.view(), targets.view(), flags.as_ref().map(|f| f.view()), beta)?;
    net.backward(&cache, grad.view())?;
    adam.step(&mut net.params_mut())?;
    Ok((reg, tr))
}

/// Smooth L1 on the angle columns plus, for multitask models, binary
/// cross-entropy on the flag columns. Returns both terms and the gradient with
/// respect to `out`.
pub fn composite_loss(
    cfg: &ModelConfig,
    out: ArrayView2<f64>,
    targets: ArrayView2<f64>,
    flags: Option<ArrayView2<f64>>,
    beta: f64,
) -> Result<(f64, f64, Array2<f64>)> {
    let d = cfg.output_dim;
    let (reg, g_reg) = smooth_l1_with_grad(out.slice(s![.., ..d]), targets, beta)?;
    let mut grad = Array2::zeros(out.raw_dim());
    grad.slice_mut(s![.., ..d]).assign(&g_reg);
    let mut tr = 0.0;
    if cfg.multitask_flags_dim > 0 {
        let flags = flags.ok_or_else(|| Error::Shape("missing transformation flags".into()))?;
        let (l, g) = bce_with_logits(out.slice(s![.., d..]), flags)?;
        tr = l;
        grad.slice_mut(s![.., d..]).assign(&g);
    }
    Ok((reg, tr, grad))
}

impl ModelBundle {
    /// Freshly initialized model with the given normalization.
    pub fn new(config: ModelConfig, stats: ChannelStats, seed: u64) -> Result<Self> {
        if stats.channels() != config.input_channels {
            return Err(Error::Shape(format!(
                "statistics cover {} channels, model has {}",
                stats.channels(),
                config.input_channels
            )));
        }
        let net = GlovePoseNet::new(&config, seed)?;
        Ok(Self {
            config,
            stats,
            target_stats: None,
            net,
            meta: TrainingMeta {
                seed,
                ..TrainingMeta::default()
            },
        })
    }
}
