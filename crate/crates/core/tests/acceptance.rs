//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL line
//! each and exits nonzero if any criterion fails.
//!
//! The expensive criteria share one synthetic corpus (five subjects, twelve
//! minutes each) and one trained regressor.
//!
//! Set `GLOVEPOSE_REAL_DATA` to a directory of recordings (and optionally
//! `GLOVEPOSE_REAL_MAPPING` to a column-mapping JSON) to run the real-data
//! track; it is skipped otherwise.

use std::io::Cursor;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::AtomicBool;
use std::sync::Arc;
use std::time::Instant;

use glovepose::augment::{build_augmented_dataset, multitask_train, AugmentConfig};
use glovepose::eval::{
    cross_validate, r2, regression_metrics, rmse, robustness_sweep, sensitivity_and_confusion, split,
    windows_from_files, FoldScheme, GroupId, GroupedWindows, RidgeRegression, SweepConfig,
};
use glovepose::heads::{attach_head, HeadConfig, HeadTrainOptions};
use glovepose::model::{
    composite_loss, predict_stream, train, GlovePoseNet, ModelBundle, ModelConfig, TrainOptions,
    NUM_TRANSFORM_FLAGS,
};
use glovepose::nncore::{grad_check, smooth_l1, AdamConfig};
use glovepose::signal::{detect_taps, BaselineCorrector, ChannelStats, WindowDataset};
use glovepose::stream::{parse_events, replay_frames, serve_session, DropPolicy, ServeConfig};
use glovepose::synth::{
    adapt_external, class_prototypes, generate_corpus, generate_labeled_session, generate_session, read_dataset,
    ColumnMapping, DatasetFile, LabeledConfig, SubjectModel, SynthConfig,
};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)*) => {
        if !$cond {
            return Err(format!($($msg)*));
        }
    };
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Corpus, split and regressor shared by the end-to-end criteria.
struct Shared {
    corpus: Vec<DatasetFile>,
    train: WindowDataset,
    test: WindowDataset,
    model: Option<Arc<ModelBundle>>,
}

/// Training windows are taken every this many frames.
const STRIDE: usize = 8;

impl Shared {
    fn new() -> Self {
        let corpus = generate_corpus(&SynthConfig::default()).expect("corpus");
        let (train, test) = split_fold0(&corpus, STRIDE);
        Self {
            corpus,
            train,
            test,
            model: None,
        }
    }
}

/// Windows of `files` split by fold 0 of a seeded 10-fold plan.
fn split_fold0(files: &[DatasetFile], stride: usize) -> (WindowDataset, WindowDataset) {
    let w = windows_from_files(files, 40, stride, None).expect("windows");
    let plan = split(w.data.len(), FoldScheme::KFold { k: 10 }, 0, None).expect("plan");
    (w.data.subset(&plan.train_indices(0)), w.data.subset(&plan.test_indices(0)))
}

fn normalized(stats: &ChannelStats, windows: &[Array2<f64>]) -> Vec<Array2<f64>> {
    windows.iter().map(|w| stats.normalize(w.view()).unwrap()).collect()
}

fn gradient_fidelity() -> Outcome {
    let start = Instant::now();
    let cfg = ModelConfig {
        hidden_size: 8,
        fc1_width: 16,
        ..ModelConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut net = GlovePoseNet::new(&cfg, 1).map_err(err)?;
    let windows: Vec<Array2<f64>> = (0..2)
        .map(|_| Array2::from_shape_simple_fn((40, 28), || rng.random_range(-1.5..1.5)))
        .collect();
    let targets = Array2::from_shape_simple_fn((2, 22), || rng.random_range(-1.0..1.0));
    let eval = |m: &GlovePoseNet| {
        let views: Vec<_> = windows.iter().map(|w| w.view()).collect();
        let (out, cache) = m.forward_batch(&views).unwrap();
        let (reg, _, g) = composite_loss(&m.config, out.view(), targets.view(), None, 0.5).unwrap();
        (reg, g, cache)
    };
    let report = grad_check(
        &mut net,
        |m| eval(m).0,
        |m| {
            let (l, g, cache) = eval(m);
            m.backward(&cache, g.view()).unwrap();
            l
        },
        1e-5,
        Some(300),
        7,
    );
    let secs = start.elapsed().as_secs_f64();
    let detail = format!(
        "{} coordinates, max relative error {:.2e}, {secs:.1} s",
        report.coords_checked, report.max_rel_error
    );
    ensure!(report.coords_checked >= 200, "{detail}");
    ensure!(report.max_rel_error < 1e-4, "{detail}");
    ensure!(secs < 60.0, "{detail}");
    Ok(detail)
}

fn loss_correctness() -> Outcome {
    let f = |d: f64| smooth_l1(Array2::from_elem((1, 1), d).view(), Array2::zeros((1, 1)).view(), 0.5).unwrap();
    for (d, want) in [(0.0, 0.0), (0.25, 0.0625), (0.5, 0.25), (1.0, 0.75)] {
        ensure!(f(d) == want && f(-d) == want, "smooth_l1({d}) = {} (want {want})", f(d));
    }
    let mut worst: f64 = 0.0;
    for knee in [0.5, -0.5] {
        for delta in [1e-13, 1e-14] {
            worst = worst.max((f(knee + delta) - f(knee - delta)).abs());
        }
    }
    ensure!(worst <= 1e-12, "jump of {worst:e} across the knee");
    Ok(format!("closed-form values exact, knee jump {worst:.1e}"))
}

fn synthetic_end_to_end(shared: &mut Shared) -> Outcome {
    let start = Instant::now();
    let (train_set, test) = (&shared.train, &shared.test);
    let stats = ChannelStats::from_windows(&train_set.windows).map_err(err)?;
    let (xtr, xte) = (normalized(&stats, &train_set.windows), normalized(&stats, &test.windows));
    let ridge = RidgeRegression::fit(&xtr, train_set.targets.view(), 10.0).map_err(err)?;
    let ridge_rmse = regression_metrics(ridge.predict(&xte).map_err(err)?.view(), test.targets.view())
        .map_err(err)?
        .avg_rmse;

    let cfg = ModelConfig {
        hidden_size: 32,
        fc1_width: 64,
        standardize_targets: true,
        ..ModelConfig::default()
    };
    let opts = TrainOptions {
        epochs: 30,
        adam: AdamConfig {
            lr: 1e-3,
            ..AdamConfig::default()
        },
        seed: 0,
        ..TrainOptions::default()
    };
    let model = train(train_set, &cfg, &opts).map_err(err)?;
    let pred = model.predict_angles(&normalized(&model.stats, &test.windows), 256).map_err(err)?;
    let model_rmse = regression_metrics(pred.view(), test.targets.view()).map_err(err)?.avg_rmse;
    shared.model = Some(Arc::new(model));
    let secs = start.elapsed().as_secs_f64();
    let frames: usize = shared.corpus.iter().map(|f| f.rows.len()).sum();
    let detail = format!(
        "{frames} frames, {} train / {} test windows; model {model_rmse:.3} deg vs ridge {ridge_rmse:.3} deg; {secs:.0} s",
        train_set.len(),
        test.len()
    );
    ensure!(frames == 72_000, "{detail}");
    ensure!(model_rmse < ridge_rmse && model_rmse <= 5.0, "{detail}");
    ensure!(secs < 1800.0, "{detail}");
    Ok(detail)
}

fn augmentation_benefit(shared: &Shared) -> Outcome {
    let (train_set, test) = split_fold0(&shared.corpus, 2 * STRIDE);
    let base = ModelConfig {
        hidden_size: 16,
        fc1_width: 32,
        standardize_targets: true,
        ..ModelConfig::default()
    };
    let multitask = ModelConfig {
        multitask_flags_dim: NUM_TRANSFORM_FLAGS,
        ..base.clone()
    };
    let (mut plain_sum, mut aug_sum) = (0.0, 0.0);
    let mut per_seed = Vec::new();
    for seed in 1..=3u64 {
        let opts = TrainOptions {
            epochs: 30,
            adam: AdamConfig {
                lr: 3e-3,
                ..AdamConfig::default()
            },
            seed,
            ..TrainOptions::default()
        };
        let aug_cfg = AugmentConfig {
            seed,
            ..AugmentConfig::default()
        };
        let plain = train(&train_set, &base, &opts).map_err(err)?;
        let aug = multitask_train(&train_set, &multitask, &aug_cfg, &opts).map_err(err)?;
        let sweep = SweepConfig {
            seed,
            ..SweepConfig::default()
        };
        let report = robustness_sweep(
            &[("plain", &plain), ("augmented", &aug)],
            &test.windows,
            test.targets.view(),
            &sweep,
        )
        .map_err(err)?;
        let p = report.perturbed_average("plain").ok_or("no perturbed cells")?;
        let a = report.perturbed_average("augmented").ok_or("no perturbed cells")?;
        per_seed.push(format!("{a:.3}/{p:.3}"));
        plain_sum += p;
        aug_sum += a;
    }
    let ratio = aug_sum / plain_sum;
    let detail = format!(
        "perturbed-average RMSE augmented/plain per seed [{}], mean ratio {ratio:.3}",
        per_seed.join(", ")
    );
    ensure!(ratio <= 0.85, "{detail}");
    Ok(detail)
}

fn augmentation_bookkeeping() -> Outcome {
    for n in [1usize, 10, 1000] {
        let d = WindowDataset {
            windows: (0..n)
                .map(|i| Array2::from_shape_fn((40, 28), |(t, c)| (i + t * c) as f64 * 0.01))
                .collect(),
            targets: Array2::from_shape_fn((n, 22), |(i, j)| (i * 22 + j) as f64),
            flags: None,
            end_frames: (0..n).collect(),
        };
        let aug = build_augmented_dataset(&d, &AugmentConfig::default()).map_err(err)?;
        ensure!(aug.len() == 4 * n, "|D|={n}: |D_aug|={}", aug.len());
        let flags = aug.flags.as_ref().ok_or("no flag block")?;
        let mut counts = [0usize; 4];
        for row in flags.rows() {
            let pattern = match (row[0], row[1], row[2]) {
                (0.0, 0.0, 0.0) => 0,
                (1.0, 0.0, 0.0) => 1,
                (0.0, 1.0, 0.0) => 2,
                (0.0, 0.0, 1.0) => 3,
                other => return Err(format!("flag row {other:?}")),
            };
            counts[pattern] += 1;
        }
        ensure!(counts == [n; 4], "|D|={n}: pattern counts {counts:?}");
    }
    Ok("|D_aug| = 4|D| and |D| rows per flag pattern for |D| in {1, 10, 1000}".into())
}

/// Counts runs of at least two above-threshold samples that follow at least
/// two below-threshold samples.
fn rising_edge_oracle(flags: &[bool]) -> usize {
    let mut count = 0;
    let mut t = 0;
    while t < flags.len() {
        if !flags[t] {
            t += 1;
            continue;
        }
        let start = t;
        while t < flags.len() && flags[t] {
            t += 1;
        }
        let len = t - start;
        if len >= 2 && start >= 2 && !flags[start - 1] && !flags[start - 2] {
            count += 1;
        }
    }
    count
}

fn tap_detection() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (rest, threshold): (f64, f64) = (1.0, 0.04);
    let mut total = 0;
    for trial in 0..10_000 {
        let single_only = trial % 10 == 0;
        let mut series = Vec::new();
        while series.len() < 200 {
            let gap = rng.random_range(0..6);
            series.extend((0..gap).map(|_| rest + rng.random_range(-0.15..0.15)));
            let len = if single_only { 1 } else { rng.random_range(1..6) };
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            series.extend((0..len).map(|_| rest + sign * rng.random_range(0.21..0.8)));
            if single_only {
                series.extend((0..2).map(|_| rest));
            }
        }
        let flags: Vec<bool> = series.iter().map(|s| (s / rest - 1.0).powi(2) >= threshold).collect();
        let taps = detect_taps(&series, rest, threshold).map_err(err)?;
        let want = rising_edge_oracle(&flags);
        ensure!(taps.len() == want, "trial {trial}: detected {} taps, oracle {want}", taps.len());
        ensure!(
            taps.iter().all(|&t| flags[t] && flags[t - 1]),
            "trial {trial}: a tap fired on a single above-threshold sample"
        );
        ensure!(!single_only || taps.is_empty(), "trial {trial}: single-sample pulses detected");
        total += want;
    }
    Ok(format!("10000 pulse trains, {total} taps, all counts match the oracle"))
}

fn baseline_correction() -> Outcome {
    let mut c = BaselineCorrector::new(400, 2).map_err(err)?;
    for t in 0..1000 {
        let out = c.push(&[3.25, -7.5]).map_err(err)?;
        ensure!(out == vec![0.0, 0.0], "constant input gave {out:?} at sample {t}");
    }
    let a = 0.37;
    let mut c = BaselineCorrector::new(400, 1).map_err(err)?;
    let mut worst: f64 = 0.0;
    for t in 0..2000 {
        let out = c.push(&[a * t as f64]).map_err(err)?[0];
        if t >= 399 {
            worst = worst.max((out - a * 399.0 / 2.0).abs());
        }
    }
    ensure!(worst <= 1e-9, "ramp deviates by {worst:e}");
    Ok(format!("constant input exactly 0; ramp within {worst:.1e} of a(n-1)/2"))
}

fn head_transfer(shared: &Shared) -> Outcome {
    let core = shared.model.clone().ok_or("regressor from the end-to-end criterion is unavailable")?;
    let hash = core.param_hash();
    let lc = LabeledConfig::default();
    let protos = class_prototypes(lc.num_classes, lc.separation_factor * lc.intra_class_std, 5).map_err(err)?;
    let subject = SubjectModel::nominal(1).with_noise(0.002, 0.0);
    let train_file = generate_labeled_session(&subject, 1, &protos, &lc, 100).map_err(err)?;
    let test_file = generate_labeled_session(&subject, 2, &protos, &lc, 200).map_err(err)?;
    let labelled = |f: DatasetFile| -> Result<(GroupedWindows, Vec<usize>), String> {
        let w = windows_from_files(&[f], 40, 4, None).map_err(err)?;
        let y = w.labels.clone().ok_or("missing labels")?.iter().map(|&l| l as usize).collect();
        Ok((w, y))
    };
    let (tr, ytr) = labelled(train_file)?;
    let (te, yte) = labelled(test_file)?;
    let mut clf = attach_head(vec![core.clone()], HeadConfig::new(lc.num_classes, false), 1).map_err(err)?;
    clf.train_head(&[&tr.data.windows[..]], &ytr, &HeadTrainOptions::default()).map_err(err)?;
    let features = clf.core_features(&[&te.data.windows[..]]).map_err(err)?;
    let pred: Vec<usize> = clf.classify_features(features.view(), None).map_err(err)?.iter().map(|p| p.class).collect();
    let m = sensitivity_and_confusion(&pred, &yte, lc.num_classes).map_err(err)?;
    let detail = format!(
        "{} classes, {} train / {} test windows from separate sessions, accuracy {:.2}%",
        lc.num_classes,
        ytr.len(),
        yte.len(),
        100.0 * m.accuracy
    );
    ensure!(core.param_hash() == hash, "core parameters changed; {detail}");
    ensure!(m.accuracy >= 0.95, "{detail}");
    Ok(detail + ", core hash unchanged")
}

fn cv_harness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for trial in 0..1000 {
        let n = rng.random_range(10..400);
        let subjects = rng.random_range(2..8u32);
        let groups: Vec<GroupId> = (0..n)
            .map(|_| GroupId {
                subject: rng.random_range(1..=subjects),
                session: 1,
            })
            .collect();
        let present: std::collections::BTreeSet<u32> = groups.iter().map(|g| g.subject).collect();
        if present.len() < 2 {
            continue;
        }
        for scheme in [FoldScheme::KFold { k: 10 }, FoldScheme::LeaveOneSubjectOut] {
            let plan = split(n, scheme, trial, Some(&groups)).map_err(err)?;
            let mut seen = vec![0usize; n];
            for fold in 0..plan.num_folds {
                let test = plan.test_indices(fold);
                let train = plan.train_indices(fold);
                ensure!(test.len() + train.len() == n, "trial {trial} {scheme}: fold {fold} loses items");
                ensure!(!test.is_empty(), "trial {trial} {scheme}: empty fold {fold}");
                for &i in &test {
                    seen[i] += 1;
                }
                if scheme == FoldScheme::LeaveOneSubjectOut {
                    let s = groups[test[0]].subject;
                    ensure!(
                        test.iter().all(|&i| groups[i].subject == s) && train.iter().all(|&i| groups[i].subject != s),
                        "trial {trial}: fold {fold} mixes subjects"
                    );
                }
            }
            ensure!(seen.iter().all(|&c| c == 1), "trial {trial} {scheme}: not a partition");
        }
    }
    let truth: Vec<f64> = (0..50).map(|i| ((i * 37) % 23) as f64 * 1.7 - 9.0).collect();
    ensure!(rmse(&truth, &truth).map_err(err)? == 0.0, "perfect RMSE nonzero");
    ensure!(r2(&truth, &truth).map_err(err)? == Some(100.0), "perfect R2 not 100");
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let constant = vec![mean; truth.len()];
    ensure!(r2(&constant, &truth).map_err(err)? == Some(0.0), "constant predictor R2 not 0");
    let pred: Vec<usize> = (0..500).map(|i| (i * 7 + i / 3) % 6).collect();
    let truth_c: Vec<usize> = (0..500).map(|i| i % 6).collect();
    let m = sensitivity_and_confusion(&pred, &truth_c, 6).map_err(err)?;
    let trace: u64 = (0..6).map(|k| m.confusion[k][k]).sum();
    let total: u64 = m.confusion.iter().flatten().sum();
    ensure!(trace as f64 / total as f64 == m.accuracy, "trace/total != accuracy");
    Ok("1000 randomized 10-fold and leave-one-subject-out plans are exact partitions; metric identities exact".into())
}

fn online_offline(shared: &Shared) -> Outcome {
    let model = shared.model.clone().ok_or("regressor from the end-to-end criterion is unavailable")?;
    let file = generate_session(&SubjectModel::nominal(1), 1, 10_000.0 / 1200.0, 1.0, 0.5, 77).map_err(err)?;
    let frames = file.frames();
    ensure!(frames.len() == 10_000, "{} frames", frames.len());
    let offline = predict_stream(&frames, &model).map_err(err)?;
    let mut wire = Vec::new();
    replay_frames(frames.iter().cloned().map(Ok), 0.0, &mut wire).map_err(err)?;
    let mut out = Vec::new();
    let cfg = ServeConfig {
        drop_policy: DropPolicy::Block,
        ..ServeConfig::default()
    };
    let stats = serve_session(Cursor::new(wire), &mut out, &model, None, &cfg, &AtomicBool::new(false)).map_err(err)?;
    let events = parse_events(std::str::from_utf8(&out).map_err(err)?).map_err(err)?;
    let online: Vec<Vec<f64>> = events.iter().filter_map(|e| e.angles()).collect();
    ensure!(
        online.len() == offline.predictions.len(),
        "{} online vs {} offline predictions",
        online.len(),
        offline.predictions.len()
    );
    for (k, (a, b)) in online.iter().zip(&offline.predictions).enumerate() {
        let same = a.len() == b.angles.len() && a.iter().zip(&b.angles).all(|(x, y)| x.to_bits() == y.to_bits());
        ensure!(same, "prediction {k} differs");
    }
    let p50_ms = stats.latency.p50_us / 1000.0;
    let detail = format!(
        "{} angle events bit-identical; median latency {p50_ms:.3} ms served, {:.3} ms offline",
        online.len(),
        offline.latency.p50_us / 1000.0
    );
    ensure!(p50_ms < 50.0, "{detail}");
    Ok(detail)
}

fn checkpoint_round_trip(shared: &Shared) -> Outcome {
    let model = shared.model.clone().ok_or("regressor from the end-to-end criterion is unavailable")?;
    let dir = tempfile::tempdir().map_err(err)?;
    let path = dir.path().join("model.gpml");
    model.save(&path).map_err(err)?;
    let loaded = ModelBundle::load(&path).map_err(err)?;
    for w in shared.test.windows.iter().take(20) {
        let a = model.forward_raw(w.view()).map_err(err)?;
        let b = loaded.forward_raw(w.view()).map_err(err)?;
        ensure!(
            a.angles.iter().zip(&b.angles).all(|(x, y)| x.to_bits() == y.to_bits()),
            "forward differs after reload"
        );
    }
    let bytes = std::fs::read(&path).map_err(err)?;
    let mut cases = vec![
        ("truncated", bytes[..bytes.len() - 100].to_vec(), "corrupt-checkpoint"),
        ("empty", Vec::new(), "corrupt-checkpoint"),
    ];
    let mut flipped = bytes.clone();
    let mid = bytes.len() / 2;
    flipped[mid] ^= 0x10;
    cases.push(("bit flip", flipped, "corrupt-checkpoint"));
    let mut foreign = bytes.clone();
    foreign[8..12].copy_from_slice(&7u32.to_le_bytes());
    cases.push(("foreign version", foreign, "unsupported-version"));
    for (name, data, want) in cases {
        match ModelBundle::from_bytes(&data) {
            Err(e) => ensure!(e.category() == want, "{name}: category {} (want {want})", e.category()),
            Ok(_) => return Err(format!("{name} file accepted")),
        }
    }
    Ok("save/load/forward bit-identical; truncated, empty, bit-flipped and foreign-version files rejected".into())
}

fn real_data_track() -> Option<Outcome> {
    let dir = std::env::var_os("GLOVEPOSE_REAL_DATA")?;
    Some((|| {
        let mapping = match std::env::var_os("GLOVEPOSE_REAL_MAPPING") {
            Some(p) => Some(ColumnMapping::load(p).map_err(err)?),
            None => None,
        };
        let mut paths: Vec<_> = std::fs::read_dir(&dir)
            .map_err(err)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        paths.sort();
        let files = paths
            .iter()
            .map(|p| match &mapping {
                Some(m) => adapt_external(p, m),
                None => read_dataset(p),
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(err)?;
        let subject = files.first().ok_or("no recordings")?.header.subject;
        let own: Vec<DatasetFile> = files.into_iter().filter(|f| f.header.subject == subject).collect();
        // Every tenth window: a 10% subsample.
        let w = windows_from_files(&own, 40, 10, None).map_err(err)?;
        let plan = split(w.data.len(), FoldScheme::KFold { k: 10 }, 0, None).map_err(err)?;
        let cfg = ModelConfig {
            hidden_size: 32,
            fc1_width: 64,
            standardize_targets: true,
            ..ModelConfig::default()
        };
        let opts = TrainOptions {
            epochs: 10,
            adam: AdamConfig {
                lr: 1e-3,
                ..AdamConfig::default()
            },
            ..TrainOptions::default()
        };
        let report = cross_validate(&w.data, &plan, &cfg, &opts).map_err(err)?;
        let out = tempfile::tempdir().map_err(err)?;
        report.write(out.path(), "real").map_err(err)?;
        let csv = std::fs::read_to_string(out.path().join("real.csv")).map_err(err)?;
        let widths: std::collections::BTreeSet<usize> = csv.lines().map(|l| l.split(',').count()).collect();
        ensure!(widths.len() == 1, "ragged report CSV");
        print!("{csv}");
        Ok(format!(
            "subject {subject}: {} windows, 10 folds, average RMSE {:.3} deg",
            w.data.len(),
            report.mean.avg_rmse
        ))
    })())
}

fn run(name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into()))
    });
    let secs = start.elapsed().as_secs_f64();
    match outcome {
        Ok(detail) => {
            println!("PASS {name}: {detail} [{secs:.1} s]");
            true
        }
        Err(detail) => {
            println!("FAIL {name}: {detail} [{secs:.1} s]");
            false
        }
    }
}

fn main() {
    // `cargo test -- --list` and filters are not supported; run everything.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut ok = true;
    ok &= run("1 gradient fidelity", gradient_fidelity);
    ok &= run("2 loss correctness", loss_correctness);
    let mut shared = Shared::new();
    ok &= run("3 synthetic end-to-end", || synthetic_end_to_end(&mut shared));
    ok &= run("4 augmentation benefit", || augmentation_benefit(&shared));
    ok &= run("5 augmented dataset bookkeeping", augmentation_bookkeeping);
    ok &= run("6 tap detection", tap_detection);
    ok &= run("7 baseline correction", baseline_correction);
    ok &= run("8 head transfer", || head_transfer(&shared));
    ok &= run("9 cross-validation harness", cv_harness);
    ok &= run("10 online/offline equivalence", || online_offline(&shared));
    ok &= run("11 checkpoint round trip", || checkpoint_round_trip(&shared));
    match real_data_track() {
        Some(outcome) => ok &= run("12 real-data track", || outcome),
        None => println!("SKIP 12 real-data track: set GLOVEPOSE_REAL_DATA to a directory of recordings"),
    }
    if !ok {
        std::process::exit(1);
    }
}
