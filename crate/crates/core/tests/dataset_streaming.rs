//! Reads a 3,000,000-row dataset produced lazily by an in-memory generator
//! and checks that peak resident memory stays bounded.

use std::io::Read;

use glovepose::synth::{generate_session, DatasetReader, SubjectModel};

const ROWS: usize = 3_000_000;

/// Emits a header followed by `rows` copies of a template row with
/// increasing timestamps, without ever holding the file in memory.
struct LazyDataset {
    header: Vec<u8>,
    row_tail: String,
    rows: usize,
    next_row: usize,
    buf: Vec<u8>,
    pos: usize,
}

impl Read for LazyDataset {
    fn read(&mut self, out: &mut [u8]) -> std::io::Result<usize> {
        if self.pos == self.buf.len() {
            self.buf.clear();
            self.pos = 0;
            if !self.header.is_empty() {
                self.buf = std::mem::take(&mut self.header);
            } else {
                for _ in 0..256 {
                    if self.next_row == self.rows {
                        break;
                    }
                    let line = format!("{}{}", 50 * self.next_row, self.row_tail);
                    self.buf.extend_from_slice(line.as_bytes());
                    self.next_row += 1;
                }
                if self.buf.is_empty() {
                    return Ok(0);
                }
            }
        }
        let n = out.len().min(self.buf.len() - self.pos);
        out[..n].copy_from_slice(&self.buf[self.pos..self.pos + n]);
        self.pos += n;
        Ok(n)
    }
}

fn peak_rss_kib() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    status
        .lines()
        .find(|l| l.starts_with("VmHWM:"))?
        .split_whitespace()
        .nth(1)?
        .parse()
        .ok()
}

#[test]
fn three_million_rows_stream_in_bounded_memory() {
    let sample = generate_session(&SubjectModel::nominal(1), 1, 0.05, 1.0, 0.5, 1).unwrap();
    let text = sample.to_string_lossless().unwrap();
    let split = text.find("\nt_ms,").unwrap() + 1;
    let columns_end = split + text[split..].find('\n').unwrap() + 1;
    let first_row = &text[columns_end..];
    let first_row = &first_row[..first_row.find('\n').unwrap() + 1];
    let row_tail = first_row[first_row.find(',').unwrap()..].to_string();

    let before = peak_rss_kib();
    let source = LazyDataset {
        header: text[..columns_end].as_bytes().to_vec(),
        row_tail,
        rows: ROWS,
        next_row: 0,
        buf: Vec::new(),
        pos: 0,
    };
    let reader = DatasetReader::new(source, "generated").unwrap();
    let mut count = 0usize;
    let mut last_t = -1;
    for row in reader {
        let row = row.unwrap();
        assert!(row.frame.timestamp_ms > last_t);
        last_t = row.frame.timestamp_ms;
        count += 1;
    }
    assert_eq!(count, ROWS);
    if let (Some(before), Some(after)) = (before, peak_rss_kib()) {
        // The full text is about 2.7 GB; streaming must stay far below that.
        let grown = after.saturating_sub(before);
        println!("peak RSS grew by {grown} KiB over {ROWS} rows");
        assert!(grown < 64 * 1024, "peak RSS grew by {grown} KiB");
    }
}
