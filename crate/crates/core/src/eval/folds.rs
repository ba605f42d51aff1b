use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Recording a window came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupId {
    pub subject: u32,
    pub session: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FoldScheme {
    KFold { k: usize },
    LeaveOneSubjectOut,
    LeaveOneSessionOut,
}

impl fmt::Display for FoldScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FoldScheme::KFold { k } => write!(f, "kfold{k}"),
            FoldScheme::LeaveOneSubjectOut => f.write_str("loso"),
            FoldScheme::LeaveOneSessionOut => f.write_str("loso-session"),
        }
    }
}

impl FromStr for FoldScheme {
    type Err = Error;

    /// Accepts `kfold<k>`, `loso` and `loso-session`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "loso" => Ok(FoldScheme::LeaveOneSubjectOut),
            "loso-session" => Ok(FoldScheme::LeaveOneSessionOut),
            _ => s
                .strip_prefix("kfold")
                .and_then(|k| k.parse().ok())
                .map(|k| FoldScheme::KFold { k })
                .ok_or_else(|| Error::Config(format!("unknown fold scheme `{s}`"))),
        }
    }
}

/// Assignment of every window to exactly one test fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub scheme: FoldScheme,
    pub seed: u64,
    pub num_folds: usize,
    /// `assignments[i]` is the test fold of window `i`.
    pub assignments: Vec<usize>,
    /// For leave-one-out schemes, the held-out group of each fold.
    pub fold_groups: Vec<Option<GroupId>>,
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_folds];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

/// Deterministic fold plan over `n` windows. Leave-one-out schemes need a
/// group id per window; k-fold shuffles with `seed` and deals windows
/// round-robin, so fold sizes differ by at most one.
pub fn split(n: usize, scheme: FoldScheme, seed: u64, groups: Option<&[GroupId]>) -> Result<FoldPlan> {
    match scheme {
        FoldScheme::KFold { k } => {
            if k < 2 {
                return Err(Error::Config(format!("k-fold needs k >= 2, got {k}")));
            }
            if k > n {
                return Err(Error::InvalidInput(format!("k = {k} exceeds dataset size {n}")));
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let mut assignments = vec![0; n];
            for (pos, &i) in order.iter().enumerate() {
                assignments[i] = pos % k;
            }
            Ok(FoldPlan {
                scheme,
                seed,
                num_folds: k,
                assignments,
                fold_groups: vec![None; k],
            })
        }
        FoldScheme::LeaveOneSubjectOut | FoldScheme::LeaveOneSessionOut => {
            let groups = groups.ok_or_else(|| {
                Error::InvalidInput(format!("{scheme} needs subject/session ids"))
            })?;
            if groups.len() != n {
                return Err(Error::Shape(format!("{} group ids for {n} windows", groups.len())));
            }
            let key = |g: &GroupId| match scheme {
                FoldScheme::LeaveOneSubjectOut => GroupId { subject: g.subject, session: 0 },
                _ => *g,
            };
            let mut ids = BTreeMap::new();
            for g in groups {
                let next = ids.len();
                ids.entry(key(g)).or_insert(next);
            }
            if ids.len() < 2 {
                return Err(Error::InvalidInput(format!("{scheme} needs at least two groups")));
            }
            // Renumber in sorted group order.
            let sorted: Vec<GroupId> = ids.keys().cloned().collect();
            let index: BTreeMap<GroupId, usize> =
                sorted.iter().enumerate().map(|(i, g)| (*g, i)).collect();
            Ok(FoldPlan {
                scheme,
                seed,
                num_folds: sorted.len(),
                assignments: groups.iter().map(|g| index[&key(g)]).collect(),
                fold_groups: sorted.into_iter().map(Some).collect(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hundred_windows_ten_folds() {
        let p = split(100, FoldScheme::KFold { k: 10 }, 1, None).unwrap();
        assert_eq!(p.fold_sizes(), vec![10; 10]);
    }

    #[test]
    fn remainder_is_spread() {
        let p = split(101, FoldScheme::KFold { k: 10 }, 1, None).unwrap();
        let mut sizes = p.fold_sizes();
        sizes.sort();
        assert_eq!(sizes, [vec![10; 9], vec![11]].concat());
    }

    #[test]
    fn loso_makes_one_fold_per_subject() {
        let groups: Vec<GroupId> = (0..50)
            .map(|i| GroupId { subject: (i % 5) as u32 + 1, session: (i % 2) as u32 })
            .collect();
        let p = split(50, FoldScheme::LeaveOneSubjectOut, 0, Some(&groups)).unwrap();
        assert_eq!(p.num_folds, 5);
        for f in 0..5 {
            let subject = p.fold_groups[f].unwrap().subject;
            let expected = groups.iter().filter(|g| g.subject == subject).count();
            assert_eq!(p.test_indices(f).len(), expected);
        }
        let s = split(50, FoldScheme::LeaveOneSessionOut, 0, Some(&groups)).unwrap();
        assert_eq!(s.num_folds, 10);
    }

    #[test]
    fn errors() {
        assert!(split(5, FoldScheme::KFold { k: 10 }, 0, None).is_err());
        assert!(split(5, FoldScheme::LeaveOneSubjectOut, 0, None).is_err());
        assert_eq!("kfold10".parse::<FoldScheme>().unwrap(), FoldScheme::KFold { k: 10 });
        assert!("kfoldx".parse::<FoldScheme>().is_err());
    }
}
