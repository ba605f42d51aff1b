//! Fold plans, regression and classification metrics, cross-validated
//! training, robustness sweeps, a ridge baseline and report writers.

mod folds;
mod metrics;
mod report;
mod ridge;
mod sweep;

pub use folds::{split, FoldPlan, FoldScheme, GroupId};
pub use metrics::{
    r2, regression_metrics, rmse, sensitivity_and_confusion, ClassificationMetrics, JointMetrics,
    RegressionMetrics,
};
pub use report::{confusion_csv, mean_metrics, sensitivity_csv, EvalReport, FoldReport};
pub use ridge::RidgeRegression;
pub use sweep::{robustness_sweep, SweepAxis, SweepCell, SweepConfig, SweepReport};

use crate::model::{frame_features, train, ModelBundle, ModelConfig, TrainOptions};
use crate::signal::{make_windows, WindowDataset};
use crate::synth::DatasetFile;
use crate::{Error, Result};

/// Windows of several recordings with the recording of each window and,
/// when the files carry them, the class label at each window's last frame.
#[derive(Debug, Clone, Default)]
pub struct GroupedWindows {
    pub data: WindowDataset,
    pub groups: Vec<GroupId>,
    pub labels: Option<Vec<u32>>,
}

/// Cuts every file into raw (unnormalized) windows. Windows never span two
/// files.
pub fn windows_from_files(
    files: &[DatasetFile],
    length: usize,
    stride: usize,
    baseline_window: Option<usize>,
) -> Result<GroupedWindows> {
    let mut out = GroupedWindows::default();
    let mut labels = Some(Vec::new());
    for f in files {
        let feats = frame_features(&f.frames(), baseline_window)?;
        let angles = f.angles();
        let w = make_windows(feats.view(), Some(angles.view()), length, stride)?;
        let group = GroupId {
            subject: f.header.subject,
            session: f.header.session,
        };
        out.groups.extend(std::iter::repeat_n(group, w.len()));
        match (f.labels(), labels.as_mut()) {
            (Some(l), Some(acc)) => acc.extend(w.end_frames.iter().map(|&e| l[e])),
            _ => labels = None,
        }
        if out.data.windows.is_empty() {
            out.data = w;
        } else {
            out.data.extend(w)?;
        }
    }
    out.labels = labels;
    Ok(out)
}

/// Trains a fresh model on each training split and scores it on the held-out
/// fold.
pub fn cross_validate(
    data: &WindowDataset,
    plan: &FoldPlan,
    config: &ModelConfig,
    opts: &TrainOptions,
) -> Result<EvalReport> {
    evaluate_folds(data, plan, |fold, train_set| {
        log::info!("fold {fold}: training on {} windows", train_set.len());
        train(train_set, config, opts)
    })
}

/// Scores one fixed model on every test fold of `plan`.
pub fn evaluate_bundle(data: &WindowDataset, plan: &FoldPlan, bundle: &ModelBundle) -> Result<EvalReport> {
    evaluate_folds(data, plan, |_, _| Ok(bundle.clone()))
}

fn evaluate_folds(
    data: &WindowDataset,
    plan: &FoldPlan,
    mut model_for: impl FnMut(usize, &WindowDataset) -> Result<ModelBundle>,
) -> Result<EvalReport> {
    if plan.assignments.len() != data.len() {
        return Err(Error::Shape(format!(
            "fold plan covers {} windows, dataset has {}",
            plan.assignments.len(),
            data.len()
        )));
    }
    let mut folds = Vec::with_capacity(plan.num_folds);
    for fold in 0..plan.num_folds {
        let train_idx = plan.train_indices(fold);
        let test_idx = plan.test_indices(fold);
        let bundle = model_for(fold, &data.subset(&train_idx))?;
        let test = data.subset(&test_idx);
        let normalized = test
            .windows
            .iter()
            .map(|w| bundle.stats.normalize(w.view()))
            .collect::<Result<Vec<_>>>()?;
        let pred = bundle.predict_angles(&normalized, 256)?;
        folds.push(FoldReport {
            fold,
            group: plan.fold_groups[fold],
            train_size: train_idx.len(),
            test_size: test_idx.len(),
            regression: regression_metrics(pred.view(), test.targets.view())?,
        });
    }
    let mean = mean_metrics(&folds.iter().map(|f| f.regression.clone()).collect::<Vec<_>>());
    Ok(EvalReport {
        scheme: plan.scheme,
        seed: plan.seed,
        folds,
        mean,
        classification: None,
    })
}
