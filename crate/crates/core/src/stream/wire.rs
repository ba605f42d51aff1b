use serde::{Deserialize, Serialize};

use crate::signal::{Quat, SensorFrame};
use crate::{Error, Result, NUM_SENSORS};

/// One frame on the wire: `{"t":..,"s":[25],"qh":[w,x,y,z],"qf":[w,x,y,z]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireFrame {
    pub t: i64,
    pub s: Vec<f64>,
    pub qh: [f64; 4],
    pub qf: [f64; 4],
}

impl WireFrame {
    pub fn from_frame(f: &SensorFrame) -> Self {
        Self {
            t: f.timestamp_ms,
            s: f.hsy.to_vec(),
            qh: f.quat_hand.to_array(),
            qf: f.quat_forearm.to_array(),
        }
    }

    pub fn into_frame(self) -> Result<SensorFrame> {
        let hsy: [f64; NUM_SENSORS] = self
            .s
            .try_into()
            .map_err(|s: Vec<f64>| Error::Shape(format!("frame has {} sensor values", s.len())))?;
        let frame = SensorFrame {
            timestamp_ms: self.t,
            hsy,
            quat_hand: Quat::from_array(self.qh),
            quat_forearm: Quat::from_array(self.qf),
        };
        frame.validate()?;
        Ok(frame)
    }

    pub fn parse_line(line: &str) -> Result<SensorFrame> {
        serde_json::from_str::<WireFrame>(line)?.into_frame()
    }

    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("wire frames serialize");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Angles,
    Tap,
    Class,
}

/// One output line. `payload` is the angle vector, the tap
/// (`{"finger": i}`) or the class prediction (`{"class": c, "probs": [..]}`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventRecord {
    pub kind: EventKind,
    pub t: i64,
    pub latency_us: f64,
    pub payload: serde_json::Value,
}

impl EventRecord {
    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("events serialize");
        s.push('\n');
        s
    }

    /// Angle vector of an `angles` event.
    pub fn angles(&self) -> Option<Vec<f64>> {
        if self.kind != EventKind::Angles {
            return None;
        }
        serde_json::from_value(self.payload.clone()).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frames_round_trip_exactly() {
        let f = SensorFrame {
            timestamp_ms: 1234,
            hsy: std::array::from_fn(|i| (i as f64).sqrt() * 0.1234567891234),
            quat_hand: Quat::from_euler_xyz(0.1, -0.2, 0.3),
            quat_forearm: Quat::IDENTITY,
        };
        let line = WireFrame::from_frame(&f).to_line();
        assert!(line.ends_with('\n') && !line[..line.len() - 1].contains('\n'));
        assert_eq!(WireFrame::parse_line(line.trim_end()).unwrap(), f);
    }

    #[test]
    fn wrong_lengths_are_rejected() {
        assert!(WireFrame::parse_line(r#"{"t":0,"s":[1,2],"qh":[1,0,0,0],"qf":[1,0,0,0]}"#).is_err());
        assert!(WireFrame::parse_line(r#"{"t":0,"s":[],"qh":[1,0,0],"qf":[1,0,0,0]}"#).is_err());
        assert!(WireFrame::parse_line("not json").is_err());
    }
}
