//! Canonical text dataset.
//!
//! ```text
//! #glovepose-dataset 1
//! #sample_rate_hz=20
//! #subject=3
//! #session=1
//! #meta.<key>=<value>          (zero or more)
//! t_ms,s00,..,s24,qh_w,qh_x,qh_y,qh_z,qf_w,qf_x,qf_y,qf_z,<22 joints>[,label][,tap][,x:<name>..]
//! <rows>
//! ```
//!
//! Reals are written with 9 significant digits. Columns are located by
//! name, so readers accept any column order; writers always emit the order
//! above.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView2};

use crate::model::JOINT_NAMES;
use crate::signal::{Quat, SensorFrame};
use crate::{Error, Result, NUM_JOINTS, NUM_SENSORS, SAMPLE_RATE_HZ};

pub const DATASET_MAGIC: &str = "#glovepose-dataset";
const FORMAT_VERSION: u32 = 1;
const EXTRA_PREFIX: &str = "x:";

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetHeader {
    pub version: u32,
    pub sample_rate_hz: f64,
    pub subject: u32,
    pub session: u32,
    pub has_label: bool,
    pub has_tap: bool,
    /// Columns carried through from an external source, without the `x:`
    /// prefix.
    pub extra_columns: Vec<String>,
    pub meta: BTreeMap<String, String>,
}

impl DatasetHeader {
    pub fn new(subject: u32, session: u32) -> Self {
        Self {
            version: FORMAT_VERSION,
            sample_rate_hz: SAMPLE_RATE_HZ,
            subject,
            session,
            has_label: false,
            has_tap: false,
            extra_columns: Vec::new(),
            meta: BTreeMap::new(),
        }
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut cols = canonical_columns();
        if self.has_label {
            cols.push("label".into());
        }
        if self.has_tap {
            cols.push("tap".into());
        }
        cols.extend(self.extra_columns.iter().map(|c| format!("{EXTRA_PREFIX}{c}")));
        cols
    }
}

/// The required columns in canonical order.
pub fn canonical_columns() -> Vec<String> {
    let mut cols = vec!["t_ms".to_string()];
    cols.extend((0..NUM_SENSORS).map(|i| format!("s{i:02}")));
    for q in ["qh", "qf"] {
        cols.extend(["w", "x", "y", "z"].iter().map(|c| format!("{q}_{c}")));
    }
    cols.extend(JOINT_NAMES.iter().map(|s| s.to_string()));
    cols
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRow {
    pub frame: SensorFrame,
    /// Ground-truth joint angles, degrees.
    pub angles: [f64; NUM_JOINTS],
    pub label: Option<u32>,
    /// Tapping finger index (1..=10), 0 for none.
    pub tap: Option<u8>,
    pub extra: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetFile {
    pub header: DatasetHeader,
    pub rows: Vec<DatasetRow>,
}

impl DatasetFile {
    pub fn from_frames(
        subject: u32,
        session: u32,
        frames: Vec<SensorFrame>,
        angles: ArrayView2<f64>,
        labels: Option<&[u32]>,
    ) -> Self {
        let mut header = DatasetHeader::new(subject, session);
        header.has_label = labels.is_some();
        let rows = frames
            .into_iter()
            .enumerate()
            .map(|(t, frame)| DatasetRow {
                frame,
                angles: std::array::from_fn(|j| angles[[t, j]]),
                label: labels.map(|l| l[t]),
                tap: None,
                extra: Vec::new(),
            })
            .collect();
        Self { header, rows }
    }

    pub fn frames(&self) -> Vec<SensorFrame> {
        self.rows.iter().map(|r| r.frame.clone()).collect()
    }

    /// `rows x 22` ground-truth angles.
    pub fn angles(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.rows.len(), NUM_JOINTS), |(t, j)| self.rows[t].angles[j])
    }

    pub fn labels(&self) -> Option<Vec<u32>> {
        self.rows.iter().map(|r| r.label).collect()
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        write_header(&mut w, &self.header)?;
        let mut line = String::with_capacity(1024);
        for row in &self.rows {
            format_row(&mut line, &self.header, row)?;
            w.write_all(line.as_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_string_lossless(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::InvalidInput(e.to_string()))
    }
}

pub fn write_dataset(path: impl AsRef<Path>, file: &DatasetFile) -> Result<()> {
    file.write_to(File::create(path)?)
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<DatasetFile> {
    let reader = DatasetReader::open(path)?;
    let header = reader.header().clone();
    let rows = reader.collect::<Result<Vec<_>>>()?;
    Ok(DatasetFile { header, rows })
}

fn write_header<W: Write>(w: &mut W, h: &DatasetHeader) -> Result<()> {
    writeln!(w, "{DATASET_MAGIC} {}", h.version)?;
    writeln!(w, "#sample_rate_hz={}", h.sample_rate_hz)?;
    writeln!(w, "#subject={}", h.subject)?;
    writeln!(w, "#session={}", h.session)?;
    for (k, v) in &h.meta {
        if k.contains('=') || k.contains('\n') || v.contains('\n') {
            return Err(Error::InvalidInput(format!("metadata entry `{k}` is not writable")));
        }
        writeln!(w, "#meta.{k}={v}")?;
    }
    writeln!(w, "{}", h.column_names().join(","))?;
    Ok(())
}

fn real(out: &mut String, v: f64) {
    let _ = write!(out, ",{v:.8e}");
}

fn format_row(line: &mut String, h: &DatasetHeader, row: &DatasetRow) -> Result<()> {
    if row.extra.len() != h.extra_columns.len() {
        return Err(Error::Shape(format!(
            "row has {} extra fields, header declares {}",
            row.extra.len(),
            h.extra_columns.len()
        )));
    }
    line.clear();
    let _ = write!(line, "{}", row.frame.timestamp_ms);
    for &v in &row.frame.hsy {
        real(line, v);
    }
    for q in [row.frame.quat_hand, row.frame.quat_forearm] {
        for v in q.to_array() {
            real(line, v);
        }
    }
    for &v in &row.angles {
        real(line, v);
    }
    if h.has_label {
        let label = row
            .label
            .ok_or_else(|| Error::InvalidInput("row without label in labelled dataset".into()))?;
        let _ = write!(line, ",{label}");
    }
    if h.has_tap {
        let _ = write!(line, ",{}", row.tap.unwrap_or(0));
    }
    for e in &row.extra {
        if e.contains(',') || e.contains('\n') {
            return Err(Error::InvalidInput(format!("extra field `{e}` contains a separator")));
        }
        let _ = write!(line, ",{e}");
    }
    line.push('\n');
    Ok(())
}

/// Column positions of a parsed header line.
struct Layout {
    width: usize,
    names: Vec<String>,
    /// Source index of each canonical column.
    canonical: Vec<usize>,
    label: Option<usize>,
    tap: Option<usize>,
    extra: Vec<usize>,
}

/// Streaming reader: parses the header eagerly and yields rows one at a
/// time, so memory use does not grow with file length.
pub struct DatasetReader<R: Read = File> {
    lines: std::io::Lines<BufReader<R>>,
    path: PathBuf,
    line_no: usize,
    header: DatasetHeader,
    layout: Layout,
}

impl DatasetReader<File> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::new(File::open(path)?, path)
    }
}

impl<R: Read> DatasetReader<R> {
    pub fn new(source: R, path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let mut lines = BufReader::with_capacity(1 << 16, source).lines();
        let mut line_no = 0;
        let perr = |line: usize, msg: String| Error::Parse {
            path: path.clone(),
            line,
            msg,
        };
        let mut header = DatasetHeader::new(0, 0);
        let (mut saw_magic, mut saw_subject, mut saw_session) = (false, false, false);
        let columns_line = loop {
            let Some(line) = lines.next() else {
                return Err(perr(line_no, "file ends before the column line".into()));
            };
            let line = line?;
            line_no += 1;
            let Some(body) = line.strip_prefix('#') else {
                break line;
            };
            if let Some(v) = line.strip_prefix(DATASET_MAGIC) {
                header.version = v
                    .trim()
                    .parse()
                    .map_err(|_| perr(line_no, format!("bad format version `{}`", v.trim())))?;
                if header.version != FORMAT_VERSION {
                    return Err(perr(line_no, format!("unsupported format version {}", header.version)));
                }
                saw_magic = true;
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| perr(line_no, format!("header line without `=`: `{line}`")))?;
            let num = |what: &str| {
                value
                    .trim()
                    .parse::<u32>()
                    .map_err(|_| perr(line_no, format!("bad {what} `{value}`")))
            };
            match key {
                "sample_rate_hz" => {
                    header.sample_rate_hz = value
                        .trim()
                        .parse()
                        .map_err(|_| perr(line_no, format!("bad sample rate `{value}`")))?;
                    if !(header.sample_rate_hz > 0.0) {
                        return Err(perr(line_no, "sample rate must be positive".into()));
                    }
                }
                "subject" => {
                    header.subject = num("subject id")?;
                    saw_subject = true;
                }
                "session" => {
                    header.session = num("session id")?;
                    saw_session = true;
                }
                _ => match key.strip_prefix("meta.") {
                    Some(k) => {
                        header.meta.insert(k.to_string(), value.to_string());
                    }
                    None => return Err(perr(line_no, format!("unknown header key `{key}`"))),
                },
            }
        };
        if !saw_magic {
            return Err(perr(1, format!("missing `{DATASET_MAGIC}` line")));
        }
        if !(saw_subject && saw_session) {
            return Err(perr(line_no, "header needs subject and session".into()));
        }
        let names: Vec<&str> = columns_line.split(',').map(str::trim).collect();
        let find = |name: &str| names.iter().position(|&n| n == name);
        let mut canonical = Vec::new();
        for name in canonical_columns() {
            canonical.push(find(&name).ok_or(Error::MissingColumn(name))?);
        }
        let label = find("label");
        let tap = find("tap");
        let mut extra = Vec::new();
        for (i, n) in names.iter().enumerate() {
            if let Some(e) = n.strip_prefix(EXTRA_PREFIX) {
                header.extra_columns.push(e.to_string());
                extra.push(i);
            } else if !canonical.contains(&i) && Some(i) != label && Some(i) != tap {
                return Err(perr(line_no, format!("unknown column `{n}`")));
            }
        }
        header.has_label = label.is_some();
        header.has_tap = tap.is_some();
        let layout = Layout {
            width: names.len(),
            names: canonical_columns(),
            canonical,
            label,
            tap,
            extra,
        };
        Ok(Self {
            lines,
            path,
            line_no,
            header,
            layout,
        })
    }

    pub fn header(&self) -> &DatasetHeader {
        &self.header
    }

    fn parse_row(&self, line: &str) -> Result<DatasetRow> {
        let perr = |msg: String| Error::Parse {
            path: self.path.clone(),
            line: self.line_no,
            msg,
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != self.layout.width {
            return Err(perr(format!(
                "expected {} fields, found {}",
                self.layout.width,
                fields.len()
            )));
        }
        let names = &self.layout.names;
        let real = |k: usize| -> Result<f64> {
            let s = fields[self.layout.canonical[k]].trim();
            s.parse::<f64>()
                .map_err(|_| perr(format!("column `{}`: bad number `{s}`", names[k])))
        };
        let ts = fields[self.layout.canonical[0]].trim();
        let timestamp_ms = ts
            .parse::<i64>()
            .map_err(|_| perr(format!("column `t_ms`: bad timestamp `{ts}`")))?;
        let mut hsy = [0.0; NUM_SENSORS];
        for (i, v) in hsy.iter_mut().enumerate() {
            *v = real(1 + i)?;
        }
        let q = |base: usize| -> Result<Quat> {
            Ok(Quat::from_array([real(base)?, real(base + 1)?, real(base + 2)?, real(base + 3)?]))
        };
        let quat_hand = q(1 + NUM_SENSORS)?;
        let quat_forearm = q(5 + NUM_SENSORS)?;
        let mut angles = [0.0; NUM_JOINTS];
        for (j, a) in angles.iter_mut().enumerate() {
            *a = real(9 + NUM_SENSORS + j)?;
        }
        let label = match self.layout.label {
            Some(i) => Some(
                fields[i]
                    .trim()
                    .parse::<u32>()
                    .map_err(|_| perr(format!("column `label`: bad class `{}`", fields[i])))?,
            ),
            None => None,
        };
        let tap = match self.layout.tap {
            Some(i) => Some(
                fields[i]
                    .trim()
                    .parse::<u8>()
                    .ok()
                    .filter(|&f| f <= 10)
                    .ok_or_else(|| perr(format!("column `tap`: bad finger `{}`", fields[i])))?,
            ),
            None => None,
        };
        Ok(DatasetRow {
            frame: SensorFrame {
                timestamp_ms,
                hsy,
                quat_hand,
                quat_forearm,
            },
            angles,
            label,
            tap,
            extra: self.layout.extra.iter().map(|&i| fields[i].to_string()).collect(),
        })
    }
}

impl<R: Read> Iterator for DatasetReader<R> {
    type Item = Result<DatasetRow>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(e.into())),
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            return Some(self.parse_row(&line));
        }
    }
}
