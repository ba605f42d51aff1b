use serde::{Deserialize, Serialize};

use super::SensorFrame;
use crate::{Error, Result};

/// Default threshold on the squared relative sensor change.
pub const DEFAULT_TAP_THRESHOLD: f64 = 0.04;
/// Rest-pose calibration length: 10 s at 20 Hz.
pub const REST_SAMPLES: usize = 200;
/// Fingertip sensor channels in thumb, index, middle, ring, pinky order.
pub const FINGERTIP_CHANNELS: [usize; 5] = [19, 20, 21, 22, 23];

/// A detected tap. `finger_index` is 1..=10: digits thumb..pinky of the
/// first hand are 1..=5, of the second hand 6..=10.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TapEvent {
    pub finger_index: u8,
    pub timestamp_ms: i64,
}

/// Touch flag: `(s / rest - 1)^2 >= threshold`.
pub fn touch_flag(s: f64, rest: f64, threshold: f64) -> bool {
    let r = s / rest - 1.0;
    r * r >= threshold
}

fn check_tap_args(rest: f64, threshold: f64) -> Result<()> {
    if rest == 0.0 || !rest.is_finite() {
        return Err(Error::RestCalibration);
    }
    if !(threshold > 0.0) {
        return Err(Error::Config(format!("tap threshold must be > 0, got {threshold}")));
    }
    Ok(())
}

/// Streaming tap detector over one channel. A tap fires at `t` when the
/// touch flags of the last four samples read `0, 0, 1, 1`.
#[derive(Debug, Clone)]
pub struct TapDetector {
    rest: f64,
    threshold: f64,
    /// Flags at t-3, t-2, t-1, t (newest last).
    recent: [bool; 4],
    seen: usize,
}

impl TapDetector {
    pub fn new(rest: f64, threshold: f64) -> Result<Self> {
        check_tap_args(rest, threshold)?;
        Ok(Self {
            rest,
            threshold,
            recent: [false; 4],
            seen: 0,
        })
    }

    /// Feeds one sample; returns whether a tap fires at it.
    pub fn push(&mut self, s: f64) -> bool {
        self.recent.rotate_left(1);
        self.recent[3] = touch_flag(s, self.rest, self.threshold);
        self.seen += 1;
        self.seen >= 4 && self.recent == [false, false, true, true]
    }

    /// Touch flag of the latest sample.
    pub fn touching(&self) -> bool {
        self.seen > 0 && self.recent[3]
    }
}

/// Sample indices at which taps fire in `series`.
pub fn detect_taps(series: &[f64], rest: f64, threshold: f64) -> Result<Vec<usize>> {
    let mut det = TapDetector::new(rest, threshold)?;
    Ok(series
        .iter()
        .enumerate()
        .filter_map(|(t, &s)| det.push(s).then_some(t))
        .collect())
}

/// Mean of the first `rest_samples` values (fewer if the series is shorter).
pub fn rest_value(series: &[f64], rest_samples: usize) -> Result<f64> {
    let k = rest_samples.min(series.len());
    if k == 0 {
        return Err(Error::RestCalibration);
    }
    let v = series[..k].iter().sum::<f64>() / k as f64;
    if v == 0.0 {
        return Err(Error::RestCalibration);
    }
    Ok(v)
}

/// Runs a tap detector on each fingertip channel of one hand. Detection sees
/// relative resistance `R/R₀ = 1 + ΔR/R₀`, calibrated on the first
/// `rest_samples` frames. `hand` is 0 or 1.
pub fn detect_tap_events(
    frames: &[SensorFrame],
    hand: u8,
    rest_samples: usize,
    threshold: f64,
) -> Result<Vec<TapEvent>> {
    if hand > 1 {
        return Err(Error::InvalidInput(format!("hand must be 0 or 1, got {hand}")));
    }
    let mut events = Vec::new();
    for (digit, &ch) in FINGERTIP_CHANNELS.iter().enumerate() {
        let series: Vec<f64> = frames.iter().map(|f| 1.0 + f.hsy[ch]).collect();
        let rest = rest_value(&series, rest_samples)?;
        for t in detect_taps(&series, rest, threshold)? {
            events.push(TapEvent {
                finger_index: hand * 5 + digit as u8 + 1,
                timestamp_ms: frames[t].timestamp_ms,
            });
        }
    }
    events.sort_by_key(|e| (e.timestamp_ms, e.finger_index));
    Ok(events)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    Purple,
    Red,
    Blue,
    Green,
    None,
}

/// Pinch color selection. `fingers` are index, middle, ring, pinky touch
/// flags; simultaneous contacts resolve in that priority order.
pub fn select_color(thumb: bool, fingers: [bool; 4]) -> Color {
    if !thumb {
        return Color::None;
    }
    const COLORS: [Color; 4] = [Color::Purple, Color::Red, Color::Blue, Color::Green];
    fingers
        .iter()
        .position(|&f| f)
        .map_or(Color::None, |i| COLORS[i])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series_from_flags(flags: &[u8]) -> Vec<f64> {
        // rest 1.0, threshold 0.04: 1.5 is above, 1.0 below.
        flags.iter().map(|&f| if f == 1 { 1.5 } else { 1.0 }).collect()
    }

    #[test]
    fn constant_series_never_taps() {
        assert!(detect_taps(&[2.0; 50], 2.0, 0.04).unwrap().is_empty());
    }

    #[test]
    fn rising_pattern_fires_once() {
        let s = series_from_flags(&[0, 0, 1, 1, 1, 1, 0]);
        assert_eq!(detect_taps(&s, 1.0, 0.04).unwrap(), vec![3]);
    }

    #[test]
    fn single_sample_spike_is_ignored() {
        let s = series_from_flags(&[0, 0, 0, 1, 0, 0]);
        assert!(detect_taps(&s, 1.0, 0.04).unwrap().is_empty());
    }

    #[test]
    fn nothing_before_four_samples() {
        // 1,1 at t=0,1 has no two-zero history.
        let s = series_from_flags(&[1, 1, 1, 0, 0, 1, 1]);
        assert_eq!(detect_taps(&s, 1.0, 0.04).unwrap(), vec![6]);
    }

    #[test]
    fn threshold_applies_to_squared_relative_change() {
        assert!(touch_flag(0.75, 1.0, 0.04));
        assert!(!touch_flag(0.85, 1.0, 0.04));
        assert!(touch_flag(1.25, 1.0, 0.04));
        assert!(touch_flag(2.5, 2.0, 0.04));
    }

    #[test]
    fn zero_rest_is_a_calibration_error() {
        assert!(matches!(detect_taps(&[1.0], 0.0, 0.04), Err(Error::RestCalibration)));
        assert!(matches!(rest_value(&[0.0, 0.0], 10), Err(Error::RestCalibration)));
    }

    #[test]
    fn color_protocol() {
        assert_eq!(select_color(true, [true, false, false, false]), Color::Purple);
        assert_eq!(select_color(true, [false, true, false, false]), Color::Red);
        assert_eq!(select_color(true, [false, false, true, false]), Color::Blue);
        assert_eq!(select_color(true, [false, false, false, true]), Color::Green);
        assert_eq!(select_color(false, [true; 4]), Color::None);
        assert_eq!(select_color(true, [false; 4]), Color::None);
        assert_eq!(select_color(true, [true, true, false, false]), Color::Purple);
    }
}
