//! The `glovepose` command line.
//!
//! Every subcommand reads an optional JSON run configuration (`--config`),
//! applies flag overrides on top of it, writes the resolved configuration to
//! its output directory and never modifies its inputs. Flags take precedence
//! over the config file, which takes precedence over built-in defaults.
//!
//! Failures print one line `error[<category>]: <message>` to stderr and exit
//! with status 1; usage errors exit with status 2.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::augment::{multitask_train, AugmentConfig};
use crate::eval::{
    cross_validate, evaluate_bundle, sensitivity_and_confusion, split, windows_from_files, EvalReport, FoldScheme,
    GroupedWindows, SweepConfig,
};
use crate::heads::{attach_head, read_label_map, write_label_map, ClassHead, Classifier, HeadConfig, HeadTrainOptions};
use crate::model::{predict_stream, train, ModelBundle, ModelConfig, TrainOptions, NUM_TRANSFORM_FLAGS};
use crate::signal::{detect_tap_events, select_color, touch_flag, DEFAULT_TAP_THRESHOLD, FINGERTIP_CHANNELS, REST_SAMPLES};
use crate::stream::{install_shutdown_handler, replay, serve_session, serve_tcp, DropPolicy, ServeConfig};
use crate::synth::{
    class_prototypes, generate_corpus, generate_labeled_session, read_dataset, write_dataset, DatasetFile,
    LabeledConfig, SubjectModel, SynthConfig,
};

/// Structured run configuration. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainOptions,
    pub augment: AugmentConfig,
    pub synth: SynthConfig,
    pub labeled: LabeledConfig,
    pub head: Option<HeadConfig>,
    pub head_train: HeadTrainOptions,
    pub sweep: SweepConfig,
    pub serve: ServeConfig,
    /// Frames between consecutive training windows.
    pub window_stride: usize,
    pub scheme: FoldScheme,
    pub fold_seed: u64,
    pub tap_threshold: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            train: TrainOptions::default(),
            augment: AugmentConfig::default(),
            synth: SynthConfig::default(),
            labeled: LabeledConfig::default(),
            head: None,
            head_train: HeadTrainOptions::default(),
            sweep: SweepConfig::default(),
            serve: ServeConfig::default(),
            window_stride: 1,
            scheme: FoldScheme::KFold { k: 10 },
            fold_seed: 0,
            tap_threshold: DEFAULT_TAP_THRESHOLD,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text)
            .map_err(|e| crate::Error::Config(format!("{}: {e}", path.display())).into())
    }
}

#[derive(Parser, Debug)]
#[command(name = "glovepose", version, about = "Glove sensor-stream hand pose estimation")]
pub struct Cli {
    /// Log filter, e.g. `info` or `glovepose=debug`.
    #[arg(long, global = true, default_value = "warn")]
    pub log: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output run directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides every seed in the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Clone)]
pub struct TrainFlags {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub hidden_size: Option<usize>,
    #[arg(long)]
    pub fc1_width: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic corpus in the canonical dataset format.
    SynthGen {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        subjects: Option<u32>,
        #[arg(long)]
        sessions: Option<u32>,
        #[arg(long)]
        minutes: Option<f64>,
        /// Generate class-labelled hold-pose sessions with this many classes.
        #[arg(long)]
        classes: Option<usize>,
    },
    /// Train the pose regressor.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        flags: TrainFlags,
        /// Dataset files or directories of them.
        #[arg(long, required = true, num_args = 1..)]
        data: Vec<PathBuf>,
    },
    /// Train a multitask model on the augmented dataset and a plain model on
    /// the same windows.
    PretrainAug {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        flags: TrainFlags,
        #[arg(long, required = true, num_args = 1..)]
        data: Vec<PathBuf>,
        /// Skip the plain comparison model.
        #[arg(long)]
        no_plain: bool,
    },
    /// Train a classification head on frozen core models.
    TrainHead {
        #[command(flatten)]
        common: Common,
        /// Core model checkpoint; pass twice for a two-hand head.
        #[arg(long, required = true, num_args = 1..=2)]
        core: Vec<PathBuf>,
        /// Labelled dataset(s); for two hands, `--data` and `--data2` pair up file by file.
        #[arg(long, required = true, num_args = 1..)]
        data: Vec<PathBuf>,
        #[arg(long, num_args = 1..)]
        data2: Vec<PathBuf>,
        #[arg(long)]
        classes: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        /// Class names file (`<index> <name>` lines), copied into the run.
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Fraction of windows held out for the reported test accuracy.
        #[arg(long, default_value_t = 0.2)]
        test_fraction: f64,
    },
    /// Cross-validated evaluation with per-joint RMSE and R².
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long, required = true, num_args = 1..)]
        data: Vec<PathBuf>,
        /// `kfold<k>`, `loso` or `loso-session`.
        #[arg(long)]
        scheme: Option<String>,
        /// Train a fresh model per fold with the bundle's configuration
        /// instead of scoring the bundle itself.
        #[arg(long)]
        retrain: bool,
        #[command(flatten)]
        flags: TrainFlags,
        /// Also score a classification head on labelled data.
        #[arg(long)]
        head: Option<PathBuf>,
    },
    /// Paired robustness sweep of a plain and an augmented model.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        plain: PathBuf,
        #[arg(long)]
        augmented: PathBuf,
        #[arg(long, required = true, num_args = 1..)]
        data: Vec<PathBuf>,
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Offline streaming inference over a dataset file.
    Infer {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Newline-delimited JSON inference service.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        head: Option<PathBuf>,
        /// TCP address to listen on; without it the service reads stdin and
        /// writes stdout.
        #[arg(long)]
        listen: Option<String>,
        #[arg(long)]
        taps: bool,
        #[arg(long)]
        queue: Option<usize>,
        /// `drop-oldest` or `block`.
        #[arg(long)]
        policy: Option<String>,
    },
    /// Stream a dataset file as wire frames.
    Replay {
        #[arg(long)]
        data: PathBuf,
        /// Multiple of real time; 0 sends as fast as possible.
        #[arg(long, default_value_t = 1.0)]
        rate: f64,
        /// Send to a TCP server instead of stdout and print its replies.
        #[arg(long)]
        connect: Option<String>,
    },
    /// Tap detection and touch colour selection on fingertip channels.
    Taps {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
        /// Hand number for finger indices (0 or 1).
        #[arg(long, default_value_t = 0)]
        hand: u8,
    },
}

/// Parses `args` and runs the command. Returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let _ = env_logger::Builder::new().parse_filters(&cli.log).try_init();
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error[{}]: {}", category(&e), one_line(&e));
            1
        }
    }
}

/// Stable category of an error chain: the library category when one is
/// present, else `io` or `other`.
pub fn category(e: &anyhow::Error) -> &'static str {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<crate::Error>() {
            return err.category();
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return "io";
        }
    }
    "other"
}

fn one_line(e: &anyhow::Error) -> String {
    e.chain().map(|c| c.to_string()).collect::<Vec<_>>().join(": ").replace('\n', " ")
}

fn prepare(common: &Common) -> anyhow::Result<RunConfig> {
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        cfg.train.seed = seed;
        cfg.augment.seed = seed;
        cfg.synth.seed = seed;
        cfg.labeled.seed = seed;
        cfg.head_train.seed = seed;
        cfg.sweep.seed = seed;
        cfg.fold_seed = seed;
    }
    fs::create_dir_all(&common.out).with_context(|| format!("creating {}", common.out.display()))?;
    Ok(cfg)
}

fn apply_train_flags(cfg: &mut RunConfig, f: &TrainFlags) {
    if let Some(v) = f.epochs {
        cfg.train.epochs = v;
    }
    if let Some(v) = f.batch_size {
        cfg.train.batch_size = v;
    }
    if let Some(v) = f.lr {
        cfg.train.adam.lr = v;
    }
    if let Some(v) = f.hidden_size {
        cfg.model.hidden_size = v;
    }
    if let Some(v) = f.fc1_width {
        cfg.model.fc1_width = v;
    }
    if let Some(v) = f.stride {
        cfg.window_stride = v;
    }
}

fn save_resolved(out: &Path, cfg: &RunConfig) -> anyhow::Result<()> {
    fs::write(out.join("config.resolved.json"), serde_json::to_string_pretty(cfg)?)?;
    Ok(())
}

/// Expands directories into their sorted `.csv` files.
fn dataset_paths(inputs: &[PathBuf]) -> anyhow::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "csv"))
                .collect();
            files.sort();
            if files.is_empty() {
                bail!(crate::Error::InvalidInput(format!("no .csv datasets in {}", p.display())));
            }
            out.extend(files);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn load_files(inputs: &[PathBuf]) -> anyhow::Result<Vec<DatasetFile>> {
    dataset_paths(inputs)?
        .iter()
        .map(|p| read_dataset(p).map_err(anyhow::Error::from))
        .collect()
}

fn load_windows(inputs: &[PathBuf], cfg: &RunConfig) -> anyhow::Result<GroupedWindows> {
    let files = load_files(inputs)?;
    let w = windows_from_files(&files, cfg.model.window_length, cfg.window_stride, cfg.model.baseline_window)?;
    if w.data.is_empty() {
        bail!(crate::Error::InvalidInput("datasets are shorter than one window".into()));
    }
    Ok(w)
}

fn write_loss_curve(path: &Path, bundle: &ModelBundle) -> anyhow::Result<()> {
    let mut s = String::from("epoch,loss,regression,transform\n");
    for e in &bundle.meta.loss_curve {
        s.push_str(&format!("{},{:.9e},{:.9e},{:.9e}\n", e.epoch, e.loss, e.regression, e.transform));
    }
    fs::write(path, s)?;
    Ok(())
}

fn load_bundle(path: &Path) -> anyhow::Result<ModelBundle> {
    ModelBundle::load(path).with_context(|| format!("loading {}", path.display()))
}

pub fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::SynthGen {
            common,
            subjects,
            sessions,
            minutes,
            classes,
        } => {
            let mut cfg = prepare(&common)?;
            if let Some(v) = subjects {
                cfg.synth.subjects = v;
            }
            if let Some(v) = sessions {
                cfg.synth.sessions = v;
            }
            if let Some(v) = minutes {
                cfg.synth.minutes_per_session = v;
            }
            if let Some(v) = classes {
                cfg.labeled.num_classes = v;
            }
            save_resolved(&common.out, &cfg)?;
            if classes.is_some() {
                let l = &cfg.labeled;
                let protos = class_prototypes(l.num_classes, l.separation_factor * l.intra_class_std, l.seed)?;
                for s in 1..=cfg.synth.subjects {
                    let subject = SubjectModel::sample(s, cfg.synth.subject_variation, cfg.synth.seed)
                        .with_noise(cfg.synth.sensor_noise_std, cfg.synth.drift_per_s);
                    for session in 1..=cfg.synth.sessions {
                        let seed = l.seed ^ (u64::from(s) << 20) ^ u64::from(session);
                        let f = generate_labeled_session(&subject, session, &protos, l, seed)?;
                        write_dataset(common.out.join(format!("subject{s:02}_session{session:02}.csv")), &f)?;
                    }
                }
            } else {
                for f in generate_corpus(&cfg.synth)? {
                    let name = format!("subject{:02}_session{:02}.csv", f.header.subject, f.header.session);
                    write_dataset(common.out.join(name), &f)?;
                }
            }
            println!("wrote synthetic datasets to {}", common.out.display());
        }
        Command::Train { common, flags, data } => {
            let mut cfg = prepare(&common)?;
            apply_train_flags(&mut cfg, &flags);
            save_resolved(&common.out, &cfg)?;
            let w = load_windows(&data, &cfg)?;
            let bundle = train(&w.data, &cfg.model, &cfg.train)?;
            bundle.save(common.out.join("model.gpml"))?;
            write_loss_curve(&common.out.join("loss_curve.csv"), &bundle)?;
            println!(
                "trained on {} windows; final loss {:.6}",
                w.data.len(),
                bundle.meta.loss_curve.last().map_or(f64::NAN, |e| e.loss)
            );
        }
        Command::PretrainAug {
            common,
            flags,
            data,
            no_plain,
        } => {
            let mut cfg = prepare(&common)?;
            apply_train_flags(&mut cfg, &flags);
            save_resolved(&common.out, &cfg)?;
            let w = load_windows(&data, &cfg)?;
            let multitask = ModelConfig {
                multitask_flags_dim: NUM_TRANSFORM_FLAGS,
                ..cfg.model.clone()
            };
            let aug = multitask_train(&w.data, &multitask, &cfg.augment, &cfg.train)?;
            aug.save(common.out.join("model_aug.gpml"))?;
            write_loss_curve(&common.out.join("loss_curve_aug.csv"), &aug)?;
            if !no_plain {
                let plain_cfg = ModelConfig {
                    multitask_flags_dim: 0,
                    ..cfg.model.clone()
                };
                let plain = train(&w.data, &plain_cfg, &cfg.train)?;
                plain.save(common.out.join("model_plain.gpml"))?;
                write_loss_curve(&common.out.join("loss_curve_plain.csv"), &plain)?;
            }
            println!("trained on {} windows ({} augmented)", w.data.len(), 4 * w.data.len());
        }
        Command::TrainHead {
            common,
            core,
            data,
            data2,
            classes,
            epochs,
            lr,
            labels,
            test_fraction,
        } => {
            let mut cfg = prepare(&common)?;
            if let Some(v) = epochs {
                cfg.head_train.epochs = v;
            }
            if let Some(v) = lr {
                cfg.head_train.adam.lr = v;
            }
            let both = core.len() == 2;
            if both != !data2.is_empty() {
                bail!(crate::Error::Config("two cores need --data2 and one core must not have it".into()));
            }
            let cores: Vec<Arc<ModelBundle>> =
                core.iter().map(|p| load_bundle(p).map(Arc::new)).collect::<anyhow::Result<_>>()?;
            let window = cores[0].config.window_length;
            let baseline = cores[0].config.baseline_window;
            let files = load_files(&data)?;
            let hand0 = windows_from_files(&files, window, cfg.window_stride, baseline)?;
            let labels_vec: Vec<usize> = hand0
                .labels
                .clone()
                .ok_or_else(|| crate::Error::MissingColumn("label".into()))?
                .into_iter()
                .map(|l| l as usize)
                .collect();
            let mut hands = vec![hand0.data.windows];
            if both {
                let w2 = windows_from_files(&load_files(&data2)?, window, cfg.window_stride, baseline)?;
                if w2.data.len() != labels_vec.len() {
                    bail!(crate::Error::Shape("the two hands' datasets differ in length".into()));
                }
                hands.push(w2.data.windows);
            }
            let num_classes = classes
                .or(cfg.head.as_ref().map(|h| h.num_classes))
                .unwrap_or_else(|| labels_vec.iter().max().map_or(0, |m| m + 1));
            let head_cfg = HeadConfig {
                num_classes,
                uses_both_hands: both,
                hidden_width: cfg.head.as_ref().map_or(64, |h| h.hidden_width),
            };
            cfg.head = Some(head_cfg.clone());
            save_resolved(&common.out, &cfg)?;
            let mut clf = attach_head(cores, head_cfg, cfg.head_train.seed)?;
            let refs: Vec<&[ndarray::Array2<f64>]> = hands.iter().map(|h| &h[..]).collect();
            let features = clf.core_features(&refs)?;
            let n_test = ((labels_vec.len() as f64) * test_fraction.clamp(0.0, 0.9)).round() as usize;
            let mut shuffled = crate::model::epoch_order(labels_vec.len(), cfg.fold_seed, 0);
            let test_idx: Vec<usize> = shuffled.drain(..n_test).collect();
            let train_idx = shuffled;
            let pick = |idx: &[usize]| features.select(ndarray::Axis(0), idx);
            let train_labels: Vec<usize> = train_idx.iter().map(|&i| labels_vec[i]).collect();
            let curve = clf.train_head_on_features(pick(&train_idx).view(), &train_labels, &cfg.head_train)?;
            clf.head.save(common.out.join("head.json"))?;
            let mut report = String::from("epoch,loss\n");
            for (e, l) in curve.iter().enumerate() {
                report.push_str(&format!("{e},{l:.9e}\n"));
            }
            fs::write(common.out.join("head_loss.csv"), report)?;
            if !test_idx.is_empty() {
                let preds: Vec<usize> = clf
                    .classify_features(pick(&test_idx).view(), None)?
                    .iter()
                    .map(|p| p.class)
                    .collect();
                let truth: Vec<usize> = test_idx.iter().map(|&i| labels_vec[i]).collect();
                let m = sensitivity_and_confusion(&preds, &truth, num_classes)?;
                fs::write(common.out.join("head_confusion.csv"), crate::eval::confusion_csv(&m))?;
                fs::write(common.out.join("head_sensitivity.csv"), crate::eval::sensitivity_csv(&m))?;
                println!("held-out accuracy {:.2}% on {} windows", 100.0 * m.accuracy, test_idx.len());
            }
            if let Some(l) = labels {
                write_label_map(common.out.join("labels.txt"), &read_label_map(&l)?)?;
            }
        }
        Command::Eval {
            common,
            bundle,
            data,
            scheme,
            retrain,
            flags,
            head,
        } => {
            let mut cfg = prepare(&common)?;
            let b = load_bundle(&bundle)?;
            cfg.model = b.config.clone();
            apply_train_flags(&mut cfg, &flags);
            if let Some(s) = scheme {
                cfg.scheme = s.parse()?;
            }
            save_resolved(&common.out, &cfg)?;
            let w = load_windows(&data, &cfg)?;
            let plan = split(w.data.len(), cfg.scheme, cfg.fold_seed, Some(&w.groups))?;
            let mut report: EvalReport = if retrain {
                cross_validate(&w.data, &plan, &cfg.model, &cfg.train)?
            } else {
                evaluate_bundle(&w.data, &plan, &b)?
            };
            if let Some(h) = head {
                let labels = w.labels.clone().ok_or_else(|| crate::Error::MissingColumn("label".into()))?;
                let clf = Classifier {
                    cores: vec![Arc::new(b.clone())],
                    head: ClassHead::load(&h)?,
                };
                let f = clf.core_features(&[&w.data.windows[..]])?;
                let preds: Vec<usize> = clf.classify_features(f.view(), None)?.iter().map(|p| p.class).collect();
                let truth: Vec<usize> = labels.iter().map(|&l| l as usize).collect();
                report.classification = Some(sensitivity_and_confusion(&preds, &truth, clf.head.config.num_classes)?);
            }
            report.write(&common.out, "eval")?;
            println!(
                "{} folds; average RMSE {:.3} deg, average R2 {}",
                report.folds.len(),
                report.mean.avg_rmse,
                report.mean.avg_r2.map_or("n/a".into(), |v| format!("{v:.2}%"))
            );
        }
        Command::Sweep {
            common,
            plain,
            augmented,
            data,
            stride,
        } => {
            let mut cfg = prepare(&common)?;
            let p = load_bundle(&plain)?;
            let a = load_bundle(&augmented)?;
            cfg.model = p.config.clone();
            if let Some(s) = stride {
                cfg.window_stride = s;
            }
            save_resolved(&common.out, &cfg)?;
            let w = load_windows(&data, &cfg)?;
            let report = crate::eval::robustness_sweep(
                &[("plain", &p), ("augmented", &a)],
                &w.data.windows,
                w.data.targets.view(),
                &cfg.sweep,
            )?;
            fs::write(common.out.join("sweep.csv"), report.to_csv())?;
            fs::write(common.out.join("sweep.json"), serde_json::to_string_pretty(&report)?)?;
            println!(
                "perturbed-average RMSE: plain {:.3} deg, augmented {:.3} deg",
                report.perturbed_average("plain").unwrap_or(f64::NAN),
                report.perturbed_average("augmented").unwrap_or(f64::NAN)
            );
        }
        Command::Infer { common, bundle, data } => {
            let cfg = prepare(&common)?;
            save_resolved(&common.out, &cfg)?;
            let b = load_bundle(&bundle)?;
            let file = read_dataset(&data)?;
            let out = predict_stream(&file.frames(), &b)?;
            let mut s = String::from("t_ms");
            for j in crate::model::JOINT_NAMES {
                s.push(',');
                s.push_str(j);
            }
            s.push('\n');
            for p in &out.predictions {
                s.push_str(&p.timestamp_ms.unwrap_or_default().to_string());
                for a in &p.angles {
                    s.push_str(&format!(",{a:.8e}"));
                }
                s.push('\n');
            }
            fs::write(common.out.join("predictions.csv"), s)?;
            fs::write(common.out.join("latency.json"), serde_json::to_string_pretty(&out.latency)?)?;
            println!(
                "{} predictions; median latency {:.1} us (p95 {:.1} us)",
                out.predictions.len(),
                out.latency.p50_us,
                out.latency.p95_us
            );
        }
        Command::Serve {
            config,
            bundle,
            head,
            listen,
            taps,
            queue,
            policy,
        } => {
            let mut cfg = RunConfig::load(config.as_deref())?;
            if taps {
                cfg.serve.taps = true;
            }
            if let Some(q) = queue {
                cfg.serve.queue_capacity = q;
            }
            if let Some(p) = policy {
                cfg.serve.drop_policy = match p.as_str() {
                    "drop-oldest" => DropPolicy::DropOldest,
                    "block" => DropPolicy::Block,
                    _ => bail!(crate::Error::Config(format!("unknown drop policy `{p}`"))),
                };
            }
            let b = load_bundle(&bundle)?;
            let clf = match head {
                Some(h) => Some(Classifier {
                    cores: vec![Arc::new(b.clone())],
                    head: ClassHead::load(&h)?,
                }),
                None => None,
            };
            let shutdown = install_shutdown_handler()?;
            match listen {
                Some(addr) => {
                    let sessions = serve_tcp(addr.as_str(), &b, clf.as_ref(), &cfg.serve, &shutdown, |a| {
                        eprintln!("listening on {a}");
                    })?;
                    eprintln!("served {} session(s)", sessions.len());
                }
                None => {
                    let stats = serve_session(
                        std::io::stdin(),
                        std::io::stdout().lock(),
                        &b,
                        clf.as_ref(),
                        &cfg.serve,
                        &shutdown,
                    )?;
                    eprintln!(
                        "frames {} events {} malformed {} dropped {} latency p50 {:.1} us p95 {:.1} us max {:.1} us",
                        stats.frames,
                        stats.events,
                        stats.malformed,
                        stats.dropped,
                        stats.latency.p50_us,
                        stats.latency.p95_us,
                        stats.latency.max_us
                    );
                }
            }
        }
        Command::Replay { data, rate, connect } => match connect {
            Some(addr) => {
                let stream = std::net::TcpStream::connect(&addr).with_context(|| format!("connecting to {addr}"))?;
                let mut reader = stream.try_clone()?;
                let printer = std::thread::spawn(move || std::io::copy(&mut reader, &mut std::io::stdout()));
                replay(&data, rate, &stream)?;
                stream.shutdown(std::net::Shutdown::Write)?;
                printer.join().map_err(|_| anyhow::anyhow!("output thread panicked"))??;
            }
            None => {
                let stats = replay(&data, rate, std::io::stdout().lock())?;
                log::info!("replayed {} frames in {:.2} s", stats.frames, stats.elapsed_s);
            }
        },
        Command::Taps {
            common,
            data,
            threshold,
            hand,
        } => {
            let mut cfg = prepare(&common)?;
            if let Some(t) = threshold {
                cfg.tap_threshold = t;
            }
            save_resolved(&common.out, &cfg)?;
            let file = read_dataset(&data)?;
            let frames = file.frames();
            let events = detect_tap_events(&frames, hand, REST_SAMPLES, cfg.tap_threshold)?;
            let mut s = String::from("t_ms,finger\n");
            for e in &events {
                s.push_str(&format!("{},{}\n", e.timestamp_ms, e.finger_index));
            }
            fs::write(common.out.join("taps.csv"), s)?;
            let rests = FINGERTIP_CHANNELS
                .iter()
                .map(|&ch| {
                    let series: Vec<f64> = frames.iter().map(|f| 1.0 + f.hsy[ch]).collect();
                    crate::signal::rest_value(&series, REST_SAMPLES)
                })
                .collect::<crate::Result<Vec<f64>>>()?;
            let mut colors = String::from("t_ms,color\n");
            let mut last = None;
            for f in &frames {
                let flag = |d: usize| touch_flag(1.0 + f.hsy[FINGERTIP_CHANNELS[d]], rests[d], cfg.tap_threshold);
                let c = select_color(flag(0), [flag(1), flag(2), flag(3), flag(4)]);
                if last != Some(c) {
                    colors.push_str(&format!("{},{}\n", f.timestamp_ms, serde_json::to_value(c)?.as_str().unwrap_or("")));
                    last = Some(c);
                }
            }
            fs::write(common.out.join("colors.csv"), colors)?;
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{} taps detected", events.len())?;
        }
    }
    Ok(())
}
