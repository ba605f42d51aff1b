//! Text serialization of window-level (augmented) datasets: one line per
//! window time step, with the window's angles and transformation flags
//! repeated on each of its lines.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array2;

use crate::model::JOINT_NAMES;
use crate::signal::WindowDataset;
use crate::{Error, Result};

const MAGIC: &str = "#glovepose-windows 1";

pub fn write_augmented(path: impl AsRef<Path>, d: &WindowDataset) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let (len, channels) = d
        .windows
        .first()
        .map(|w| w.dim())
        .ok_or_else(|| Error::InvalidInput("empty window dataset".into()))?;
    let nflags = d.flags.as_ref().map_or(0, |f| f.ncols());
    writeln!(w, "{MAGIC}")?;
    writeln!(w, "#window_length={len}")?;
    writeln!(w, "#channels={channels}")?;
    writeln!(w, "#outputs={}", d.targets.ncols())?;
    writeln!(w, "#flags={nflags}")?;
    let mut cols = vec!["window".to_string(), "step".into(), "end_frame".into()];
    cols.extend((0..channels).map(|c| format!("c{c:02}")));
    cols.extend((0..d.targets.ncols()).map(|j| {
        JOINT_NAMES.get(j).map_or_else(|| format!("y{j}"), |s| s.to_string())
    }));
    cols.extend(["y_mask", "y_noise", "y_scale"].iter().take(nflags).map(|s| s.to_string()));
    writeln!(w, "{}", cols.join(","))?;
    let mut line = String::new();
    for (i, win) in d.windows.iter().enumerate() {
        if win.dim() != (len, channels) {
            return Err(Error::Shape(format!("window {i} has shape {:?}", win.dim())));
        }
        for (t, row) in win.rows().into_iter().enumerate() {
            line.clear();
            let _ = write!(line, "{i},{t},{}", d.end_frames[i]);
            for v in row.iter().chain(d.targets.row(i).iter()) {
                let _ = write!(line, ",{v:.8e}");
            }
            if let Some(f) = &d.flags {
                for v in f.row(i) {
                    let _ = write!(line, ",{}", *v as u8);
                }
            }
            line.push('\n');
            w.write_all(line.as_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_augmented(path: impl AsRef<Path>) -> Result<WindowDataset> {
    let path = path.as_ref();
    let perr = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let reader = BufReader::new(File::open(path)?);
    let mut dims = [None::<usize>; 4];
    let mut windows = Vec::new();
    let mut targets = Vec::new();
    let mut flags = Vec::new();
    let mut end_frames = Vec::new();
    let mut current: Vec<f64> = Vec::new();
    let mut saw_columns = false;
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let no = n + 1;
        if n == 0 {
            if line != MAGIC {
                return Err(perr(no, "not a window dataset".into()));
            }
            continue;
        }
        if let Some(h) = line.strip_prefix('#') {
            let (k, v) = h.split_once('=').ok_or_else(|| perr(no, "bad header".into()))?;
            let v: usize = v.parse().map_err(|_| perr(no, format!("bad value `{v}`")))?;
            let slot = ["window_length", "channels", "outputs", "flags"]
                .iter()
                .position(|&x| x == k)
                .ok_or_else(|| perr(no, format!("unknown header key `{k}`")))?;
            dims[slot] = Some(v);
            continue;
        }
        let [Some(len), Some(ch), Some(outs), Some(nf)] = dims else {
            return Err(perr(no, "incomplete header".into()));
        };
        if !saw_columns {
            saw_columns = true;
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 + ch + outs + nf {
            return Err(perr(no, format!("expected {} fields, found {}", 3 + ch + outs + nf, f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| perr(no, format!("bad number `{s}`")));
        let step: usize = f[1].parse().map_err(|_| perr(no, "bad step".into()))?;
        if step != current.len() / ch {
            return Err(perr(no, format!("step {step} out of order")));
        }
        for s in &f[3..3 + ch] {
            current.push(num(s)?);
        }
        if step + 1 == len {
            windows.push(
                Array2::from_shape_vec((len, ch), std::mem::take(&mut current))
                    .map_err(|e| Error::Shape(e.to_string()))?,
            );
            end_frames.push(f[2].parse().map_err(|_| perr(no, "bad end_frame".into()))?);
            for s in &f[3 + ch..3 + ch + outs] {
                targets.push(num(s)?);
            }
            for s in &f[3 + ch + outs..] {
                flags.push(num(s)?);
            }
        }
    }
    if !current.is_empty() {
        return Err(Error::InvalidInput("file ends inside a window".into()));
    }
    let m = windows.len();
    let outs = dims[2].unwrap_or(0);
    let nf = dims[3].unwrap_or(0);
    Ok(WindowDataset {
        windows,
        targets: Array2::from_shape_vec((m, outs), targets).map_err(|e| Error::Shape(e.to_string()))?,
        flags: if nf > 0 {
            Some(Array2::from_shape_vec((m, nf), flags).map_err(|e| Error::Shape(e.to_string()))?)
        } else {
            None
        },
        end_frames,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::{build_augmented_dataset, AugmentConfig};

    #[test]
    fn augmented_file_round_trips() {
        let d = WindowDataset {
            windows: (0..3).map(|i| Array2::from_elem((40, 28), i as f64 + 0.125)).collect(),
            targets: Array2::from_elem((3, 22), 7.5),
            flags: None,
            end_frames: vec![39, 40, 41],
        };
        let aug = build_augmented_dataset(&d, &AugmentConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("aug.txt");
        write_augmented(&p, &aug).unwrap();
        let back = read_augmented(&p).unwrap();
        assert_eq!(back.len(), 12);
        assert_eq!(back.flags, aug.flags);
        assert_eq!(back.end_frames, aug.end_frames);
        for (a, b) in aug.windows.iter().zip(&back.windows) {
            assert!(a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-8 * x.abs().max(1.0)));
        }
    }
}
