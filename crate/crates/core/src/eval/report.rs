use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{ClassificationMetrics, RegressionMetrics};
use super::{FoldScheme, GroupId};
use crate::model::JOINT_NAMES;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub group: Option<GroupId>,
    pub train_size: usize,
    pub test_size: usize,
    pub regression: RegressionMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scheme: FoldScheme,
    pub seed: u64,
    pub folds: Vec<FoldReport>,
    /// Per-joint metrics averaged over folds.
    pub mean: RegressionMetrics,
    pub classification: Option<ClassificationMetrics>,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.4}"))
}

impl EvalReport {
    /// Per-joint table: one RMSE row and one R² row per fold, then the means,
    /// with joints as columns and an `average` column at the end.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("fold,group,metric");
        for j in JOINT_NAMES {
            s.push(',');
            s.push_str(j);
        }
        s.push_str(",average\n");
        let mut row = |fold: &str, group: &str, m: &RegressionMetrics| {
            let _ = write!(s, "{fold},{group},rmse_deg");
            for j in &m.joints {
                let _ = write!(s, ",{:.4}", j.rmse);
            }
            let _ = writeln!(s, ",{:.4}", m.avg_rmse);
            let _ = write!(s, "{fold},{group},r2_pct");
            for j in &m.joints {
                let _ = write!(s, ",{}", opt(j.r2));
            }
            let _ = writeln!(s, ",{}", opt(m.avg_r2));
        };
        for f in &self.folds {
            let group = f
                .group
                .map_or_else(String::new, |g| format!("s{}-{}", g.subject, g.session));
            row(&f.fold.to_string(), &group, &f.regression);
        }
        row("mean", "", &self.mean);
        s
    }

    pub fn write(&self, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{stem}.csv")), self.to_csv())?;
        std::fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(self)?)?;
        if let Some(c) = &self.classification {
            std::fs::write(dir.join(format!("{stem}_confusion.csv")), confusion_csv(c))?;
            std::fs::write(dir.join(format!("{stem}_sensitivity.csv")), sensitivity_csv(c))?;
        }
        Ok(())
    }
}

/// Square grid with true classes as rows and predictions as columns.
pub fn confusion_csv(c: &ClassificationMetrics) -> String {
    let mut s = String::from("true\\pred");
    for j in 0..c.num_classes {
        let _ = write!(s, ",{j}");
    }
    s.push('\n');
    for (i, row) in c.confusion.iter().enumerate() {
        let _ = write!(s, "{i}");
        for v in row {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

pub fn sensitivity_csv(c: &ClassificationMetrics) -> String {
    let mut s = String::from("class,count,sensitivity_pct\n");
    for (i, (row, sens)) in c.confusion.iter().zip(&c.sensitivity).enumerate() {
        let _ = writeln!(s, "{i},{},{}", row.iter().sum::<u64>(), opt(*sens));
    }
    s
}

/// Averages per-joint metrics over folds.
pub fn mean_metrics(folds: &[RegressionMetrics]) -> RegressionMetrics {
    let n = folds.len().max(1) as f64;
    let first = &folds[0];
    let joints = (0..first.joints.len())
        .map(|j| {
            let r2s: Vec<f64> = folds.iter().filter_map(|f| f.joints[j].r2).collect();
            super::metrics::JointMetrics {
                joint: first.joints[j].joint.clone(),
                rmse: folds.iter().map(|f| f.joints[j].rmse).sum::<f64>() / n,
                r2: (!r2s.is_empty()).then(|| r2s.iter().sum::<f64>() / r2s.len() as f64),
            }
        })
        .collect::<Vec<_>>();
    let avg_rmse = joints.iter().map(|j| j.rmse).sum::<f64>() / joints.len().max(1) as f64;
    let defined: Vec<f64> = joints.iter().filter_map(|j| j.r2).collect();
    RegressionMetrics {
        avg_r2: (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64),
        joints,
        avg_rmse,
    }
}
