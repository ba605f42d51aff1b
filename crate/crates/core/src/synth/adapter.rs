//! Mapping external CSV recordings onto the canonical dataset.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dataset::{canonical_columns, DatasetFile, DatasetHeader, DatasetReader, DatasetRow};
use crate::signal::{Quat, SensorFrame};
use crate::{Error, Result, NUM_JOINTS, NUM_SENSORS, SAMPLE_RATE_HZ};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngleUnits {
    #[default]
    Degrees,
    Radians,
}

/// How the columns of an external recording map onto canonical columns.
/// Canonical names absent from `columns` are looked up under their own name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ColumnMapping {
    /// canonical name -> source column name
    pub columns: BTreeMap<String, String>,
    pub angle_units: AngleUnits,
    /// Source column holding class labels, if any.
    pub label: Option<String>,
    pub subject: u32,
    pub session: u32,
    pub sample_rate_hz: f64,
    pub delimiter: char,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self {
            columns: BTreeMap::new(),
            angle_units: AngleUnits::Degrees,
            label: None,
            subject: 0,
            session: 0,
            sample_rate_hz: SAMPLE_RATE_HZ,
            delimiter: ',',
        }
    }
}

impl ColumnMapping {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Reads an external CSV (or a canonical file) and converts it to the
/// canonical layout. Unmapped source columns are kept as extra columns.
pub fn adapt_external(path: impl AsRef<Path>, mapping: &ColumnMapping) -> Result<DatasetFile> {
    let path = path.as_ref();
    adapt_reader(std::fs::File::open(path)?, path, mapping)
}

pub fn adapt_reader<R: Read>(source: R, path: &Path, mapping: &ColumnMapping) -> Result<DatasetFile> {
    let mut text = String::new();
    BufReader::new(source).read_to_string(&mut text)?;
    // A canonical file with an identity mapping is passed through the
    // canonical reader so that its header survives unchanged.
    if text.starts_with(super::DATASET_MAGIC) && mapping.columns.is_empty() && mapping.label.is_none()
    {
        let reader = DatasetReader::new(text.as_bytes(), path)?;
        let header = reader.header().clone();
        let rows = reader.collect::<Result<Vec<_>>>()?;
        let mut file = DatasetFile { header, rows };
        if mapping.angle_units == AngleUnits::Radians {
            for r in &mut file.rows {
                r.angles.iter_mut().for_each(|a| *a = a.to_degrees());
            }
        }
        return Ok(file);
    }
    let perr = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut lines = text.as_bytes().lines().enumerate().filter(|(_, l)| {
        l.as_ref().map(|l| !l.trim().is_empty() && !l.starts_with('#')).unwrap_or(true)
    });
    let (_, head) = lines.next().ok_or_else(|| perr(0, "empty source".into()))?;
    let head = head?;
    let names: Vec<&str> = head.split(mapping.delimiter).map(str::trim).collect();
    let index: HashMap<&str, usize> = names.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    let mut used = vec![false; names.len()];
    let mut positions = Vec::new();
    for canon in canonical_columns() {
        let source = mapping.columns.get(&canon).map(String::as_str).unwrap_or(&canon);
        let &i = index.get(source).ok_or(Error::MissingColumn(canon.clone()))?;
        used[i] = true;
        positions.push(i);
    }
    let label = match &mapping.label {
        Some(l) => {
            let &i = index.get(l.as_str()).ok_or_else(|| Error::MissingColumn(l.clone()))?;
            used[i] = true;
            Some(i)
        }
        None => None,
    };
    let mut header = DatasetHeader::new(mapping.subject, mapping.session);
    header.sample_rate_hz = mapping.sample_rate_hz;
    header.has_label = label.is_some();
    let extra: Vec<usize> = (0..names.len()).filter(|&i| !used[i]).collect();
    header.extra_columns = extra.iter().map(|&i| names[i].to_string()).collect();
    let scale = match mapping.angle_units {
        AngleUnits::Degrees => 1.0,
        AngleUnits::Radians => 180.0 / std::f64::consts::PI,
    };
    let mut rows = Vec::new();
    for (n, line) in lines {
        let line = line?;
        let line_no = n + 1;
        let fields: Vec<&str> = line.split(mapping.delimiter).map(str::trim).collect();
        if fields.len() != names.len() {
            return Err(perr(line_no, format!("expected {} fields, found {}", names.len(), fields.len())));
        }
        let num = |k: usize| -> Result<f64> {
            fields[positions[k]]
                .parse()
                .map_err(|_| perr(line_no, format!("bad number `{}`", fields[positions[k]])))
        };
        let t = num(0)?;
        let quat = |b: usize| -> Result<Quat> {
            Ok(Quat::from_array([num(b)?, num(b + 1)?, num(b + 2)?, num(b + 3)?]))
        };
        rows.push(DatasetRow {
            frame: SensorFrame {
                timestamp_ms: t.round() as i64,
                hsy: std::array::from_fn(|i| num(1 + i).unwrap_or(f64::NAN)),
                quat_hand: quat(1 + NUM_SENSORS)?,
                quat_forearm: quat(5 + NUM_SENSORS)?,
            },
            angles: std::array::from_fn(|j| num(9 + NUM_SENSORS + j).unwrap_or(f64::NAN) * scale),
            label: match label {
                Some(i) => Some(
                    fields[i]
                        .parse()
                        .map_err(|_| perr(line_no, format!("bad label `{}`", fields[i])))?,
                ),
                None => None,
            },
            tap: None,
            extra: extra.iter().map(|&i| fields[i].to_string()).collect(),
        });
        let r = rows.last().expect("just pushed");
        if r.frame.hsy.iter().chain(&r.angles).any(|v| v.is_nan()) {
            return Err(perr(line_no, "unparsable sensor or angle value".into()));
        }
    }
    debug_assert_eq!(NUM_JOINTS, 22);
    Ok(DatasetFile { header, rows })
}
