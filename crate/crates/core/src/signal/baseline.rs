use std::collections::VecDeque;

use super::SensorFrame;
use crate::{Error, Result, NUM_SENSORS};

/// Rolling baseline length: 400 samples, 20 s at 20 Hz.
pub const BASELINE_WINDOW: usize = 400;

/// Subtracts from each channel its mean over the last `min(t + 1, n)`
/// samples, current sample included.
///
/// The mean is accumulated relative to the oldest sample in the window, so a
/// window of identical values produces exactly zero.
#[derive(Debug, Clone)]
pub struct BaselineCorrector {
    window: usize,
    channels: usize,
    history: VecDeque<Vec<f64>>,
}

impl BaselineCorrector {
    pub fn new(window: usize, channels: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::Config("baseline window must be >= 1".into()));
        }
        Ok(Self {
            window,
            channels,
            history: VecDeque::with_capacity(window),
        })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn push(&mut self, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.channels {
            return Err(Error::Shape(format!(
                "baseline expects {} channels, got {}",
                self.channels,
                values.len()
            )));
        }
        if self.history.len() == self.window {
            self.history.pop_front();
        }
        self.history.push_back(values.to_vec());
        let k = self.history.len() as f64;
        let oldest = &self.history[0];
        let mut out = Vec::with_capacity(self.channels);
        for (c, &v) in values.iter().enumerate() {
            let reference = oldest[c];
            let shift: f64 = self.history.iter().map(|row| row[c] - reference).sum();
            let mean = reference + shift / k;
            out.push(v - mean);
        }
        Ok(out)
    }
}

/// Baseline-corrects the sensor channels of a time-ordered stream;
/// quaternions and timestamps pass through.
pub fn baseline_correct(stream: &[SensorFrame], n: usize) -> Result<Vec<SensorFrame>> {
    let mut corrector = BaselineCorrector::new(n, NUM_SENSORS)?;
    let mut out = Vec::with_capacity(stream.len());
    for (i, frame) in stream.iter().enumerate() {
        if i > 0 && frame.timestamp_ms <= stream[i - 1].timestamp_ms {
            return Err(Error::InvalidInput(format!(
                "stream not time-ordered at frame {i}"
            )));
        }
        let corrected = corrector.push(&frame.hsy)?;
        let mut f = frame.clone();
        f.hsy.copy_from_slice(&corrected);
        out.push(f);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Quat;
    use proptest::prelude::*;

    fn stream(values: impl Fn(usize) -> f64, len: usize) -> Vec<SensorFrame> {
        (0..len)
            .map(|t| SensorFrame {
                timestamp_ms: 50 * t as i64,
                hsy: [values(t); NUM_SENSORS],
                quat_hand: Quat::IDENTITY,
                quat_forearm: Quat::from_axis_angle([0.0, 1.0, 0.0], 0.3),
            })
            .collect()
    }

    #[test]
    fn constant_input_is_zero_from_the_start() {
        let out = baseline_correct(&stream(|_| 0.1, 900), BASELINE_WINDOW).unwrap();
        assert!(out.iter().all(|f| f.hsy.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn ramp_settles_to_closed_form() {
        let a = 0.37;
        let n = BASELINE_WINDOW;
        let out = baseline_correct(&stream(|t| a * t as f64, 1000), n).unwrap();
        let expected = a * (n as f64 - 1.0) / 2.0;
        for f in &out[n - 1..] {
            assert!((f.hsy[0] - expected).abs() < 1e-9);
        }
        // During warmup the mean covers t + 1 samples: a * t / 2.
        assert!((out[9].hsy[3] - a * 9.0 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn quaternions_pass_through_and_empty_is_empty() {
        let s = stream(|t| t as f64, 5);
        let out = baseline_correct(&s, 3).unwrap();
        assert_eq!(out[4].quat_forearm, s[4].quat_forearm);
        assert!(baseline_correct(&[], 400).unwrap().is_empty());
        assert!(baseline_correct(&s, 0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn constant_segment_after_noise_is_zero(
            noise in prop::collection::vec(-5.0f64..5.0, 1..60),
            c in -10.0f64..10.0,
            n in 1usize..20,
        ) {
            let mut c_ = BaselineCorrector::new(n, 1).unwrap();
            for v in &noise { c_.push(&[*v]).unwrap(); }
            for k in 0..(2 * n) {
                let out = c_.push(&[c]).unwrap()[0];
                if k + 1 >= n { prop_assert_eq!(out, 0.0); }
            }
        }

        #[test]
        fn shift_equivariant_after_warmup(
            xs in prop::collection::vec(-5.0f64..5.0, 30..60),
            shift in -100.0f64..100.0,
        ) {
            let n = 10;
            let mut a = BaselineCorrector::new(n, 1).unwrap();
            let mut b = BaselineCorrector::new(n, 1).unwrap();
            for (t, x) in xs.iter().enumerate() {
                let ya = a.push(&[*x]).unwrap()[0];
                let yb = b.push(&[*x + shift]).unwrap()[0];
                if t + 1 >= n { prop_assert!((ya - yb).abs() < 1e-9); }
            }
        }
    }
}
