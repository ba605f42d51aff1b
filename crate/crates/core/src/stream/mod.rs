//! Newline-delimited JSON inference service and dataset replay.
//!
//! Input lines are [`WireFrame`]s; output lines are [`EventRecord`]s. A reader
//! thread parses frames into a bounded queue, the calling thread runs
//! sliding-window inference and writes events in frame order.

mod wire;

pub use wire::{EventKind, EventRecord, WireFrame};

use std::collections::VecDeque;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, ToSocketAddrs};
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::heads::Classifier;
use crate::model::{LatencyStats, ModelBundle, StreamPredictor};
use crate::signal::{SensorFrame, TapDetector, DEFAULT_TAP_THRESHOLD, FINGERTIP_CHANNELS, REST_SAMPLES};
use crate::synth::DatasetReader;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropPolicy {
    /// A full queue discards its oldest frame to admit the new one.
    #[default]
    DropOldest,
    /// A full queue stalls the reader until inference catches up.
    Block,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServeConfig {
    pub queue_capacity: usize,
    pub drop_policy: DropPolicy,
    pub taps: bool,
    pub tap_threshold: f64,
}

impl Default for ServeConfig {
    fn default() -> Self {
        Self {
            queue_capacity: 256,
            drop_policy: DropPolicy::DropOldest,
            taps: false,
            tap_threshold: DEFAULT_TAP_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionStats {
    pub frames: usize,
    pub events: usize,
    pub malformed: usize,
    pub dropped: usize,
    pub latency: LatencyStats,
}

enum Item {
    Frame(SensorFrame),
    End,
}

struct Queue {
    items: Mutex<VecDeque<Item>>,
    not_empty: Condvar,
    not_full: Condvar,
    capacity: usize,
    policy: DropPolicy,
    dropped: AtomicUsize,
    closed: AtomicBool,
}

impl Queue {
    fn push(&self, item: Item) {
        let mut q = self.items.lock().expect("queue lock");
        let is_end = matches!(item, Item::End);
        if !is_end {
            match self.policy {
                DropPolicy::DropOldest => {
                    if q.len() >= self.capacity {
                        q.pop_front();
                        self.dropped.fetch_add(1, Ordering::Relaxed);
                    }
                }
                DropPolicy::Block => {
                    while q.len() >= self.capacity && !self.closed.load(Ordering::Relaxed) {
                        q = self.not_full.wait(q).expect("queue lock");
                    }
                }
            }
        }
        q.push_back(item);
        self.not_empty.notify_one();
    }

    /// Next item, or `None` after `timeout` with an empty queue.
    fn pop(&self, timeout: Duration) -> Option<Item> {
        let mut q = self.items.lock().expect("queue lock");
        loop {
            if let Some(item) = q.pop_front() {
                self.not_full.notify_one();
                return Some(item);
            }
            let (guard, res) = self.not_empty.wait_timeout(q, timeout).expect("queue lock");
            q = guard;
            if res.timed_out() && q.is_empty() {
                return None;
            }
        }
    }

    fn close(&self) {
        self.closed.store(true, Ordering::Relaxed);
        self.not_full.notify_all();
    }
}

/// Per-session tap detection on the fingertip channels: the first
/// `REST_SAMPLES` frames calibrate the rest value, then those frames and all
/// later ones run through the detectors, as offline detection does.
struct TapStage {
    threshold: f64,
    warmup: Vec<SensorFrame>,
    detectors: Option<Vec<TapDetector>>,
}

impl TapStage {
    fn push(&mut self, frame: &SensorFrame) -> Result<Vec<(i64, u8)>> {
        let mut out = Vec::new();
        match &mut self.detectors {
            Some(dets) => run_detectors(dets, frame, &mut out),
            None => {
                self.warmup.push(frame.clone());
                if self.warmup.len() == REST_SAMPLES {
                    let mut dets = FINGERTIP_CHANNELS
                        .iter()
                        .map(|&ch| {
                            let rest = self.warmup.iter().map(|f| 1.0 + f.hsy[ch]).sum::<f64>()
                                / REST_SAMPLES as f64;
                            TapDetector::new(rest, self.threshold)
                        })
                        .collect::<Result<Vec<_>>>()?;
                    for f in std::mem::take(&mut self.warmup) {
                        run_detectors(&mut dets, &f, &mut out);
                    }
                    self.detectors = Some(dets);
                }
            }
        }
        Ok(out)
    }
}

fn run_detectors(dets: &mut [TapDetector], frame: &SensorFrame, out: &mut Vec<(i64, u8)>) {
    for (digit, (det, &ch)) in dets.iter_mut().zip(&FINGERTIP_CHANNELS).enumerate() {
        if det.push(1.0 + frame.hsy[ch]) {
            out.push((frame.timestamp_ms, digit as u8 + 1));
        }
    }
}

/// Serves one input stream until end of input or `shutdown`. The reader side
/// runs on its own thread so `input` must be `'static`.
pub fn serve_session<R, W>(
    input: R,
    mut output: W,
    bundle: &ModelBundle,
    classifier: Option<&Classifier>,
    cfg: &ServeConfig,
    shutdown: &AtomicBool,
) -> Result<SessionStats>
where
    R: Read + Send + 'static,
    W: Write,
{
    if cfg.queue_capacity == 0 {
        return Err(Error::Config("queue capacity must be >= 1".into()));
    }
    if let Some(c) = classifier {
        if c.cores.len() != 1 {
            return Err(Error::Config("a served classifier must use a single hand".into()));
        }
    }
    let queue = Arc::new(Queue {
        items: Mutex::new(VecDeque::new()),
        not_empty: Condvar::new(),
        not_full: Condvar::new(),
        capacity: cfg.queue_capacity,
        policy: cfg.drop_policy,
        dropped: AtomicUsize::new(0),
        closed: AtomicBool::new(false),
    });
    let malformed = Arc::new(AtomicUsize::new(0));
    let reader = {
        let queue = Arc::clone(&queue);
        let malformed = Arc::clone(&malformed);
        std::thread::spawn(move || {
            let mut last_t = i64::MIN;
            for line in BufReader::new(input).lines() {
                if queue.closed.load(Ordering::Relaxed) {
                    break;
                }
                let Ok(line) = line else { break };
                if line.trim().is_empty() {
                    continue;
                }
                match WireFrame::parse_line(&line) {
                    Ok(f) if f.timestamp_ms > last_t => {
                        last_t = f.timestamp_ms;
                        queue.push(Item::Frame(f));
                    }
                    Ok(f) => {
                        log::warn!("frame at {} ms is not after {last_t} ms; skipped", f.timestamp_ms);
                        malformed.fetch_add(1, Ordering::Relaxed);
                    }
                    Err(e) => {
                        log::warn!("skipping malformed line: {e}");
                        malformed.fetch_add(1, Ordering::Relaxed);
                    }
                }
            }
            queue.push(Item::End);
        })
    };

    let mut predictor = StreamPredictor::new(bundle)?;
    let mut taps = cfg.taps.then(|| TapStage {
        threshold: cfg.tap_threshold,
        warmup: Vec::new(),
        detectors: None,
    });
    let mut stats = SessionStats::default();
    let mut latencies = Vec::new();
    let mut finished = false;
    let result = (|| -> Result<()> {
        while !shutdown.load(Ordering::Relaxed) {
            let Some(item) = queue.pop(Duration::from_millis(50)) else {
                continue;
            };
            let frame = match item {
                Item::Frame(f) => f,
                Item::End => {
                    finished = true;
                    break;
                }
            };
            stats.frames += 1;
            let start = Instant::now();
            let mut lines = String::new();
            if let Some(pred) = predictor.push(&frame)? {
                let latency_us = start.elapsed().as_secs_f64() * 1e6;
                latencies.push(latency_us);
                lines.push_str(
                    &EventRecord {
                        kind: EventKind::Angles,
                        t: frame.timestamp_ms,
                        latency_us,
                        payload: serde_json::to_value(&pred.angles)?,
                    }
                    .to_line(),
                );
                stats.events += 1;
                if let Some(c) = classifier {
                    let row = ndarray::Array2::from_shape_vec((1, pred.angles.len()), pred.angles)
                        .map_err(|e| Error::Shape(e.to_string()))?;
                    let p = c.classify_features(row.view(), Some(frame.timestamp_ms))?.remove(0);
                    lines.push_str(
                        &EventRecord {
                            kind: EventKind::Class,
                            t: frame.timestamp_ms,
                            latency_us: start.elapsed().as_secs_f64() * 1e6,
                            payload: serde_json::json!({"class": p.class, "probs": p.probs}),
                        }
                        .to_line(),
                    );
                    stats.events += 1;
                }
            }
            if let Some(stage) = taps.as_mut() {
                for (t, finger) in stage.push(&frame)? {
                    lines.push_str(
                        &EventRecord {
                            kind: EventKind::Tap,
                            t,
                            latency_us: start.elapsed().as_secs_f64() * 1e6,
                            payload: serde_json::json!({"finger": finger}),
                        }
                        .to_line(),
                    );
                    stats.events += 1;
                }
            }
            if !lines.is_empty() {
                output.write_all(lines.as_bytes())?;
                output.flush()?;
            }
        }
        Ok(())
    })();
    queue.close();
    if finished {
        let _ = reader.join();
    }
    output.flush()?;
    stats.malformed = malformed.load(Ordering::Relaxed);
    stats.dropped = queue.dropped.load(Ordering::Relaxed);
    stats.latency = LatencyStats::from_samples(&latencies);
    log::info!(
        "session closed: {} frames, {} events, {} malformed, {} dropped, latency p50 {:.0} us p95 {:.0} us max {:.0} us",
        stats.frames,
        stats.events,
        stats.malformed,
        stats.dropped,
        stats.latency.p50_us,
        stats.latency.p95_us,
        stats.latency.max_us
    );
    result.map(|_| stats)
}

/// Accepts TCP clients one at a time and serves each as a session until
/// `shutdown` is set. Returns the stats of every finished session.
pub fn serve_tcp(
    addr: impl ToSocketAddrs,
    bundle: &ModelBundle,
    classifier: Option<&Classifier>,
    cfg: &ServeConfig,
    shutdown: &AtomicBool,
    mut on_bind: impl FnMut(std::net::SocketAddr),
) -> Result<Vec<SessionStats>> {
    let listener = TcpListener::bind(addr)?;
    listener.set_nonblocking(true)?;
    on_bind(listener.local_addr()?);
    let mut sessions = Vec::new();
    while !shutdown.load(Ordering::Relaxed) {
        match listener.accept() {
            Ok((stream, peer)) => {
                log::info!("client {peer} connected");
                stream.set_nonblocking(false)?;
                let input = stream.try_clone()?;
                match serve_session(input, &stream, bundle, classifier, cfg, shutdown) {
                    Ok(s) => sessions.push(s),
                    Err(Error::Io(e)) => log::warn!("client {peer} dropped: {e}"),
                    Err(e) => return Err(e),
                }
                let _ = stream.shutdown(std::net::Shutdown::Both);
            }
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                std::thread::sleep(Duration::from_millis(20));
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(sessions)
}

/// Flag set by SIGINT/SIGTERM.
pub fn install_shutdown_handler() -> Result<Arc<AtomicBool>> {
    let flag = Arc::new(AtomicBool::new(false));
    for sig in [signal_hook::consts::SIGINT, signal_hook::consts::SIGTERM] {
        signal_hook::flag::register(sig, Arc::clone(&flag))?;
    }
    Ok(flag)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplayStats {
    pub frames: usize,
    pub elapsed_s: f64,
}

/// Writes the frames of a dataset file as wire lines, paced at 20 Hz times
/// `multiplier` (0 = as fast as possible). The header is parsed before the
/// first frame is written.
pub fn replay(path: impl AsRef<Path>, multiplier: f64, out: impl Write) -> Result<ReplayStats> {
    let reader = DatasetReader::open(path)?;
    replay_frames(reader.map(|r| r.map(|row| row.frame)), multiplier, out)
}

pub fn replay_frames(
    frames: impl Iterator<Item = Result<SensorFrame>>,
    multiplier: f64,
    out: impl Write,
) -> Result<ReplayStats> {
    if !(multiplier >= 0.0 && multiplier.is_finite()) {
        return Err(Error::Config(format!("replay rate multiplier {multiplier} must be >= 0")));
    }
    let mut out = std::io::BufWriter::new(out);
    let start = Instant::now();
    let period = (multiplier > 0.0).then(|| Duration::from_secs_f64(0.05 / multiplier));
    let mut n = 0usize;
    for frame in frames {
        let frame = frame?;
        if let Some(p) = period {
            let due = start + p * n as u32;
            let now = Instant::now();
            if due > now {
                std::thread::sleep(due - now);
            }
        }
        out.write_all(WireFrame::from_frame(&frame).to_line().as_bytes())?;
        if period.is_some() {
            out.flush()?;
        }
        n += 1;
    }
    out.flush()?;
    Ok(ReplayStats {
        frames: n,
        elapsed_s: start.elapsed().as_secs_f64(),
    })
}

/// Parses event lines, failing on any line that is not a complete record.
pub fn parse_events(text: &str) -> Result<Vec<EventRecord>> {
    text.lines()
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}
