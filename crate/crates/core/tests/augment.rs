use glovepose::augment::{build_augmented_dataset, multitask_train, AugmentConfig};
use glovepose::model::{composite_loss, frame_features, ModelConfig, TrainOptions, NUM_TRANSFORM_FLAGS};
use glovepose::nncore::SMOOTH_L1_BETA;
use glovepose::signal::{make_windows, ChannelStats, WindowDataset};
use glovepose::synth::{generate_session, SubjectModel};
use ndarray::{Array2, Axis};

fn windows(stride: usize) -> WindowDataset {
    let f = generate_session(&SubjectModel::nominal(1), 1, 0.5, 1.0, 0.5, 21).unwrap();
    let feats = frame_features(&f.frames(), None).unwrap();
    make_windows(feats.view(), Some(f.angles().view()), 40, stride).unwrap()
}

fn multitask() -> ModelConfig {
    ModelConfig {
        hidden_size: 4,
        fc1_width: 8,
        multitask_flags_dim: NUM_TRANSFORM_FLAGS,
        ..ModelConfig::default()
    }
}

#[test]
fn all_original_rows_drive_flag_logits_negative() {
    let mut data = windows(5);
    let stats = ChannelStats::from_windows(&data.windows).unwrap();
    for w in &mut data.windows {
        stats.normalize_in_place(w).unwrap();
    }
    data.flags = Some(Array2::zeros((data.len(), NUM_TRANSFORM_FLAGS)));
    let mut bundle = glovepose::model::ModelBundle::new(multitask(), stats, 3).unwrap();
    let opts = TrainOptions {
        epochs: 30,
        adam: glovepose::nncore::AdamConfig {
            lr: 1e-2,
            ..Default::default()
        },
        ..TrainOptions::default()
    };
    glovepose::model::fit(&mut bundle, &data, &opts).unwrap();
    let curve = &bundle.meta.loss_curve;
    assert!(curve.last().unwrap().transform < 0.25 * curve[0].transform);
    let logits = bundle.forward(data.windows[0].view()).unwrap().flag_logits.unwrap();
    assert!(logits.iter().all(|&l| l < 0.0), "{logits:?}");
}

#[test]
fn epoch_loss_terms_sum_to_the_total() {
    let raw = windows(10);
    let opts = TrainOptions {
        epochs: 3,
        ..TrainOptions::default()
    };
    let bundle = multitask_train(&raw, &multitask(), &AugmentConfig::default(), &opts).unwrap();
    assert_eq!(bundle.meta.loss_curve.len(), 3);
    for e in &bundle.meta.loss_curve {
        assert!((e.regression + e.transform - e.loss).abs() <= 1e-9 * e.loss.abs().max(1.0));
        assert!(e.transform > 0.0);
    }
}

#[test]
fn composite_loss_decomposes_into_its_terms() {
    let cfg = multitask();
    let out = Array2::from_shape_fn((4, 25), |(i, j)| (i as f64 - 1.5) * 0.3 + j as f64 * 0.01);
    let targets = Array2::from_shape_fn((4, 22), |(i, j)| ((i + j) % 3) as f64 * 0.2);
    let flags = Array2::from_shape_fn((4, 3), |(i, j)| f64::from(i == j + 1));
    let (reg, tr, grad) = composite_loss(&cfg, out.view(), targets.view(), Some(flags.view()), SMOOTH_L1_BETA).unwrap();
    let reg_only = glovepose::nncore::smooth_l1(
        out.slice(ndarray::s![.., ..22]),
        targets.view(),
        SMOOTH_L1_BETA,
    )
    .unwrap();
    assert_eq!(reg, reg_only);
    let (bce, _) = glovepose::nncore::bce_with_logits(out.slice(ndarray::s![.., 22..]), flags.view()).unwrap();
    assert_eq!(tr, bce);
    assert_eq!(grad.dim(), (4, 25));
}

#[test]
fn augmented_dataset_bookkeeping() {
    for n in [1usize, 10, 1000] {
        let windows: Vec<Array2<f64>> = (0..n)
            .map(|i| Array2::from_shape_fn((40, 28), |(t, c)| ((i * 7 + t * 3 + c) % 11) as f64 - 5.0))
            .collect();
        let d = WindowDataset {
            windows,
            targets: Array2::from_shape_fn((n, 22), |(i, j)| (i + j) as f64),
            flags: None,
            end_frames: (0..n).collect(),
        };
        let aug = build_augmented_dataset(&d, &AugmentConfig::default()).unwrap();
        assert_eq!(aug.len(), 4 * n);
        let flags = aug.flags.as_ref().unwrap();
        let mut counts = [0usize; 4];
        for row in flags.axis_iter(Axis(0)) {
            let set: Vec<usize> = (0..3).filter(|&j| row[j] == 1.0).collect();
            assert!(set.len() <= 1);
            counts[set.first().map_or(0, |j| j + 1)] += 1;
        }
        assert_eq!(counts, [n; 4]);
        for i in 0..n {
            assert_eq!(aug.windows[i], d.windows[i]);
            for block in 0..4 {
                assert_eq!(aug.targets.row(block * n + i), d.targets.row(i));
            }
        }
    }
}
