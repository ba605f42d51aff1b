//! Frame-level preprocessing: baseline correction, wrist angles from the two
//! IMUs, windowing, normalization and tap/touch detection.

mod baseline;
mod quat;
mod taps;
mod window;

pub use baseline::{baseline_correct, BaselineCorrector, BASELINE_WINDOW};
pub use quat::Quat;
pub use taps::{
    detect_tap_events, detect_taps, rest_value, select_color, touch_flag, Color, TapDetector,
    TapEvent, DEFAULT_TAP_THRESHOLD, FINGERTIP_CHANNELS, REST_SAMPLES,
};
pub use window::{make_windows, ChannelStats, WindowDataset};

use crate::{Error, Result, NUM_CHANNELS, NUM_SENSORS};

/// Quaternion norm tolerance for frames entering the pipeline.
pub const FRAME_QUAT_TOLERANCE: f64 = 1e-6;
/// Quaternion norm tolerance for wrist angle derivation.
pub const WRIST_QUAT_TOLERANCE: f64 = 1e-3;

/// One 20 Hz sample from a glove.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorFrame {
    pub timestamp_ms: i64,
    /// Relative resistance change ΔR/R₀ of each sensor yarn.
    pub hsy: [f64; NUM_SENSORS],
    pub quat_hand: Quat,
    pub quat_forearm: Quat,
}

impl SensorFrame {
    pub fn validate(&self) -> Result<()> {
        if let Some(i) = self.hsy.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "sensor {i} at t={} ms",
                self.timestamp_ms
            )));
        }
        for (name, q) in [("hand", self.quat_hand), ("forearm", self.quat_forearm)] {
            let n = q.norm();
            if !n.is_finite() || (n - 1.0).abs() > FRAME_QUAT_TOLERANCE {
                return Err(Error::InvalidInput(format!(
                    "{name} quaternion norm {n} at t={} ms",
                    self.timestamp_ms
                )));
            }
        }
        Ok(())
    }

    /// The 28 model input channels: 25 sensors then wrist flex, abd, sup.
    pub fn features(&self) -> Result<[f64; NUM_CHANNELS]> {
        let wrist = relative_wrist_angles(self.quat_hand, self.quat_forearm)?;
        let mut out = [0.0; NUM_CHANNELS];
        out[..NUM_SENSORS].copy_from_slice(&self.hsy);
        out[NUM_SENSORS..].copy_from_slice(&[wrist.flex, wrist.abd, wrist.sup]);
        Ok(out)
    }
}

/// Checks every frame and that timestamps strictly increase.
pub fn validate_stream(frames: &[SensorFrame]) -> Result<()> {
    for (i, f) in frames.iter().enumerate() {
        f.validate()?;
        if i > 0 && f.timestamp_ms <= frames[i - 1].timestamp_ms {
            return Err(Error::InvalidInput(format!(
                "timestamps not increasing at frame {i} ({} after {})",
                f.timestamp_ms,
                frames[i - 1].timestamp_ms
            )));
        }
    }
    Ok(())
}

/// Stacks per-frame model features into an `N x 28` matrix.
pub fn feature_matrix(frames: &[SensorFrame]) -> Result<ndarray::Array2<f64>> {
    let mut m = ndarray::Array2::zeros((frames.len(), NUM_CHANNELS));
    for (mut row, f) in m.rows_mut().into_iter().zip(frames) {
        row.assign(&ndarray::ArrayView1::from(&f.features()?));
    }
    Ok(m)
}

/// Wrist orientation of the hand relative to the forearm, degrees.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WristAngles {
    pub flex: f64,
    pub abd: f64,
    pub sup: f64,
}

/// `conj(forearm) ⊗ hand` decomposed as intrinsic X-Y-Z Euler angles mapped
/// to (flex, abd, sup).
pub fn relative_wrist_angles(quat_hand: Quat, quat_forearm: Quat) -> Result<WristAngles> {
    for (name, q) in [("hand", quat_hand), ("forearm", quat_forearm)] {
        let n = q.norm();
        if !n.is_finite() || (n - 1.0).abs() > WRIST_QUAT_TOLERANCE {
            return Err(Error::InvalidInput(format!(
                "{name} quaternion is not unit norm ({n})"
            )));
        }
    }
    let rel = quat_forearm
        .normalized()
        .conj()
        .mul(quat_hand.normalized());
    let [a, b, c] = rel.to_euler_xyz();
    Ok(WristAngles {
        flex: a.to_degrees(),
        abd: b.to_degrees(),
        sup: c.to_degrees(),
    })
}

/// Zero-order hold of a faster sample stream onto output ticks: each tick
/// takes the latest sample at or before it, or the earliest sample when the
/// tick precedes all samples. `samples` must be time-ordered.
pub fn downsample_hold<T: Clone>(
    samples: &[(i64, T)],
    source_rate_hz: f64,
    ticks_ms: &[i64],
) -> Result<Vec<T>> {
    if !(source_rate_hz >= crate::SAMPLE_RATE_HZ) {
        return Err(Error::Config(format!(
            "source rate {source_rate_hz} Hz is below the {} Hz output rate",
            crate::SAMPLE_RATE_HZ
        )));
    }
    if samples.is_empty() {
        return Err(Error::InvalidInput("no samples to hold".into()));
    }
    let mut out = Vec::with_capacity(ticks_ms.len());
    let mut j = 0;
    for &tick in ticks_ms {
        while j + 1 < samples.len() && samples[j + 1].0 <= tick {
            j += 1;
        }
        out.push(samples[j].1.clone());
    }
    Ok(out)
}

/// Output tick times at 20 Hz starting from `start_ms`.
pub fn ticks_20hz(start_ms: i64, count: usize) -> Vec<i64> {
    (0..count as i64).map(|k| start_ms + 50 * k).collect()
}
