use std::collections::VecDeque;
use std::time::Instant;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::ModelBundle;
use crate::signal::{BaselineCorrector, SensorFrame};
use crate::{Result, NUM_CHANNELS, NUM_SENSORS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub timestamp_ms: Option<i64>,
    /// 22 joint angles in degrees.
    pub angles: Vec<f64>,
    /// Transformation-detection logits of multitask models.
    pub flag_logits: Option<Vec<f64>>,
}

/// Per-frame processing time summary in microseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub count: usize,
    pub p50_us: f64,
    pub p95_us: f64,
    pub max_us: f64,
}

impl LatencyStats {
    pub fn from_samples(samples: &[f64]) -> Self {
        if samples.is_empty() {
            return Self::default();
        }
        let mut s = samples.to_vec();
        s.sort_by(|a, b| a.total_cmp(b));
        let pick = |q: f64| s[((q * (s.len() - 1) as f64).round() as usize).min(s.len() - 1)];
        Self {
            count: s.len(),
            p50_us: pick(0.5),
            p95_us: pick(0.95),
            max_us: s[s.len() - 1],
        }
    }
}

/// Model input rows for a frame stream: sensors (baseline-corrected when
/// `baseline_window` is set) followed by IMU wrist angles.
pub fn frame_features(frames: &[SensorFrame], baseline_window: Option<usize>) -> Result<Array2<f64>> {
    let mut corrector = baseline_window
        .map(|n| BaselineCorrector::new(n, NUM_SENSORS))
        .transpose()?;
    let mut m = Array2::zeros((frames.len(), NUM_CHANNELS));
    for (mut row, f) in m.rows_mut().into_iter().zip(frames) {
        let mut feats = f.features()?;
        if let Some(c) = corrector.as_mut() {
            let corrected = c.push(&f.hsy)?;
            feats[..NUM_SENSORS].copy_from_slice(&corrected);
        }
        row.assign(&ndarray::ArrayView1::from(&feats));
    }
    Ok(m)
}

/// Sliding-window (stride 1) inference over a live frame stream. Holds the
/// last `window_length` normalized feature rows; yields nothing until the
/// window is full.
pub struct StreamPredictor<'a> {
    bundle: &'a ModelBundle,
    baseline: Option<BaselineCorrector>,
    rows: VecDeque<[f64; NUM_CHANNELS]>,
}

impl<'a> StreamPredictor<'a> {
    pub fn new(bundle: &'a ModelBundle) -> Result<Self> {
        let baseline = bundle
            .config
            .baseline_window
            .map(|n| BaselineCorrector::new(n, NUM_SENSORS))
            .transpose()?;
        Ok(Self {
            bundle,
            baseline,
            rows: VecDeque::with_capacity(bundle.config.window_length),
        })
    }

    pub fn push(&mut self, frame: &SensorFrame) -> Result<Option<Prediction>> {
        frame.validate()?;
        let mut feats = frame.features()?;
        if let Some(c) = self.baseline.as_mut() {
            let corrected = c.push(&frame.hsy)?;
            feats[..NUM_SENSORS].copy_from_slice(&corrected);
        }
        self.bundle.stats.normalize_row(&mut feats)?;
        let len = self.bundle.config.window_length;
        if self.rows.len() == len {
            self.rows.pop_front();
        }
        self.rows.push_back(feats);
        if self.rows.len() < len {
            return Ok(None);
        }
        let mut window = Array2::zeros((len, NUM_CHANNELS));
        for (mut dst, src) in window.rows_mut().into_iter().zip(&self.rows) {
            dst.assign(&ndarray::ArrayView1::from(src));
        }
        let (out, _) = self.bundle.net.forward_batch(&[window.view()])?;
        Ok(Some(
            self.bundle
                .split_output(out.row(0).to_vec(), Some(frame.timestamp_ms)),
        ))
    }
}

#[derive(Debug, Clone)]
pub struct StreamOutput {
    pub predictions: Vec<Prediction>,
    pub latency: LatencyStats,
}

/// Offline run of [`StreamPredictor`] over a recorded stream.
pub fn predict_stream(frames: &[SensorFrame], bundle: &ModelBundle) -> Result<StreamOutput> {
    let mut predictor = StreamPredictor::new(bundle)?;
    let mut predictions = Vec::new();
    let mut latencies = Vec::with_capacity(frames.len());
    for f in frames {
        let start = Instant::now();
        let p = predictor.push(f)?;
        latencies.push(start.elapsed().as_secs_f64() * 1e6);
        predictions.extend(p);
    }
    let latency = LatencyStats::from_samples(&latencies);
    log::info!(
        "predict_stream: {} frames, median latency {:.1} us",
        frames.len(),
        latency.p50_us
    );
    Ok(StreamOutput {
        predictions,
        latency,
    })
}
