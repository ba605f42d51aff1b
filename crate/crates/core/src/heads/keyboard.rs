use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ClassPrediction;
use crate::signal::TapEvent;
use crate::{Error, Result};

/// Class index to key text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyMap {
    pub keys: Vec<String>,
}

impl Default for KeyMap {
    /// Home-row layout for ten key classes.
    fn default() -> Self {
        Self {
            keys: ["a", "s", "d", "f", "g", "h", "j", "k", "l", ";"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }
}

impl KeyMap {
    pub fn key(&self, class: usize) -> Option<&str> {
        self.keys.get(class).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyEvent {
    pub timestamp_ms: i64,
    pub finger_index: u8,
    pub class: usize,
    pub key: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyboardOutput {
    pub keys: Vec<KeyEvent>,
    /// Taps with no classifier output at or before their time.
    pub dropped: Vec<TapEvent>,
}

/// One key per tap: the class of the most recent prediction at or before the
/// tap's timestamp. Predictions must be in timestamp order. Without taps no
/// key is ever emitted.
pub fn keyboard_emit(taps: &[TapEvent], predictions: &[ClassPrediction], map: &KeyMap) -> Result<KeyboardOutput> {
    let times: Vec<i64> = predictions
        .iter()
        .map(|p| {
            p.timestamp_ms
                .ok_or_else(|| Error::InvalidInput("class prediction without timestamp".into()))
        })
        .collect::<Result<_>>()?;
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput("class predictions are not in time order".into()));
    }
    let mut out = KeyboardOutput::default();
    for tap in taps {
        let n = times.partition_point(|&t| t <= tap.timestamp_ms);
        if n == 0 {
            log::warn!(
                "tap of finger {} at {} ms precedes the first complete window; dropped",
                tap.finger_index,
                tap.timestamp_ms
            );
            out.dropped.push(*tap);
            continue;
        }
        let class = predictions[n - 1].class;
        let key = map
            .key(class)
            .ok_or_else(|| Error::Config(format!("key map has no entry for class {class}")))?;
        out.keys.push(KeyEvent {
            timestamp_ms: tap.timestamp_ms,
            finger_index: tap.finger_index,
            class,
            key: key.to_string(),
        });
    }
    Ok(out)
}

/// Reads `<index> <name>` lines; `#` starts a comment. Indices must be
/// `0..n` in order.
pub fn read_label_map(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mut names = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let perr = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            msg,
        };
        let (idx, name) = line
            .split_once(char::is_whitespace)
            .ok_or_else(|| perr("expected `<index> <name>`".into()))?;
        let idx: usize = idx.parse().map_err(|_| perr(format!("bad class index `{idx}`")))?;
        if idx != names.len() {
            return Err(perr(format!("class index {idx} out of sequence")));
        }
        names.push(name.trim().to_string());
    }
    Ok(names)
}

pub fn write_label_map(path: impl AsRef<Path>, names: &[String]) -> Result<()> {
    let mut s = String::new();
    for (i, n) in names.iter().enumerate() {
        s.push_str(&format!("{i} {n}\n"));
    }
    std::fs::write(path, s)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pred(t: i64, class: usize) -> ClassPrediction {
        ClassPrediction {
            class,
            probs: vec![],
            timestamp_ms: Some(t),
        }
    }

    #[test]
    fn no_taps_no_keys() {
        let preds: Vec<_> = (0..50).map(|i| pred(i * 50, i as usize % 10)).collect();
        let out = keyboard_emit(&[], &preds, &KeyMap::default()).unwrap();
        assert!(out.keys.is_empty());
    }

    #[test]
    fn every_tap_yields_a_key_with_the_latest_class() {
        let preds: Vec<_> = (0..200).map(|i| pred(2000 + i * 50, (i / 7) as usize % 10)).collect();
        let taps: Vec<TapEvent> = (0..100)
            .map(|i| TapEvent {
                finger_index: (i % 10 + 1) as u8,
                timestamp_ms: 2000 + i * 75 + 10,
            })
            .collect();
        let out = keyboard_emit(&taps, &preds, &KeyMap::default()).unwrap();
        assert_eq!(out.keys.len(), 100);
        for (k, t) in out.keys.iter().zip(&taps) {
            let expected = preds.iter().filter(|p| p.timestamp_ms.unwrap() <= t.timestamp_ms).last().unwrap();
            assert_eq!(k.class, expected.class);
        }
    }

    #[test]
    fn early_tap_is_dropped() {
        let tap = TapEvent {
            finger_index: 2,
            timestamp_ms: 100,
        };
        let out = keyboard_emit(&[tap], &[pred(1950, 3)], &KeyMap::default()).unwrap();
        assert!(out.keys.is_empty());
        assert_eq!(out.dropped, vec![tap]);
    }

    #[test]
    fn label_map_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("labels.txt");
        let names: Vec<String> = ["fist", "open palm", "pinch"].iter().map(|s| s.to_string()).collect();
        write_label_map(&p, &names).unwrap();
        assert_eq!(read_label_map(&p).unwrap(), names);
        std::fs::write(&p, "0 a\n2 b\n").unwrap();
        assert!(matches!(read_label_map(&p), Err(Error::Parse { line: 2, .. })));
    }
}
