//! Synthetic glove: band-limited joint trajectories, a piecewise-linear
//! strain gauge per sensor, a joint-to-sensor coupling matrix and IMU
//! quaternions. Also the canonical dataset file format and an adapter for
//! external recordings.

mod adapter;
mod dataset;

pub use adapter::{adapt_external, AngleUnits, ColumnMapping};
pub use dataset::{
    read_dataset, write_dataset, DatasetFile, DatasetHeader, DatasetReader, DatasetRow,
    DATASET_MAGIC,
};

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::signal::{Quat, SensorFrame, FINGERTIP_CHANNELS};
use crate::{Error, Result, NUM_JOINTS, NUM_SENSORS, SAMPLE_RATE_HZ};

/// Default anatomical limits in degrees, in joint-angle order. Modeling
/// defaults for the simulator, not measured ranges.
pub const JOINT_LIMITS: [(f64, f64); NUM_JOINTS] = {
    const MCP: (f64, f64) = (0.0, 90.0);
    const ABD: (f64, f64) = (-20.0, 20.0);
    const PIP: (f64, f64) = (0.0, 110.0);
    const DIP: (f64, f64) = (0.0, 80.0);
    [
        MCP, ABD, PIP, DIP, // pinky
        MCP, ABD, PIP, DIP, // ring
        MCP, ABD, PIP, DIP, // middle
        MCP, ABD, PIP, DIP, // index
        MCP, ABD, (0.0, 80.0), // thumb
        (-70.0, 80.0), (-25.0, 35.0), (-85.0, 90.0), // wrist
    ]
};

/// Distal flexion joint under each fingertip sensor (thumb..pinky).
const FINGERTIP_JOINTS: [usize; 5] = [18, 15, 11, 7, 3];
/// Joint whose strain the dorsal wrist sensor picks up.
const WRIST_SENSOR_JOINT: usize = 19;
/// Default strain per degree of flexion, in percent.
pub const STRAIN_PER_DEGREE: f64 = 0.3;

/// Random joint trajectories at 20 Hz, `round(duration_s * 20) x 22`.
///
/// Each joint is its range midpoint plus a sum of five sinusoids with random
/// phases and weights, frequencies below `2 Hz / (1 + smoothness)`, scaled to
/// stay inside [`JOINT_LIMITS`]. Large `smoothness` approaches a constant pose.
pub fn generate_trajectory(seed: u64, duration_s: f64, smoothness: f64) -> Result<Array2<f64>> {
    if !(duration_s >= 2.0) {
        return Err(Error::InvalidInput(format!(
            "trajectory duration must be >= 2 s, got {duration_s}"
        )));
    }
    if !(smoothness >= 0.0) {
        return Err(Error::InvalidInput("smoothness must be >= 0".into()));
    }
    let n = (duration_s * SAMPLE_RATE_HZ).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f_max = 2.0 / (1.0 + smoothness);
    let mut out = Array2::zeros((n, NUM_JOINTS));
    for (j, &(lo, hi)) in JOINT_LIMITS.iter().enumerate() {
        let centre = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo) * 0.95;
        let mut weights = [0.0; 5];
        let mut freqs = [0.0; 5];
        let mut phases = [0.0; 5];
        for k in 0..5 {
            weights[k] = rng.random_range(0.2..1.0);
            freqs[k] = f_max * rng.random_range(0.02..1.0);
            phases[k] = rng.random_range(0.0..std::f64::consts::TAU);
        }
        let total: f64 = weights.iter().sum();
        for t in 0..n {
            let time = t as f64 / SAMPLE_RATE_HZ;
            let s: f64 = (0..5)
                .map(|k| weights[k] * (std::f64::consts::TAU * freqs[k] * time + phases[k]).sin())
                .sum();
            out[[t, j]] = (centre + half * s / total).clamp(lo, hi);
        }
    }
    Ok(out)
}

/// `frames x 22` of one pose held with Gaussian jitter (degrees), clipped to
/// the joint limits.
pub fn hold_pose(pose: &[f64; NUM_JOINTS], frames: usize, jitter_std: f64, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, jitter_std.max(0.0)).expect("finite std");
    Array2::from_shape_fn((frames, NUM_JOINTS), |(_, j)| {
        let (lo, hi) = JOINT_LIMITS[j];
        (pose[j] + noise.sample(&mut rng)).clamp(lo, hi)
    })
}

/// Monotone piecewise-linear strain-to-response map of one sensor yarn:
/// steeper below `knee_strain`, shallower up to the 155 % domain end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaugeModel {
    pub knee_strain: f64,
    /// ΔR/R₀ per percent strain below the knee.
    pub slope_low: f64,
    /// ΔR/R₀ per percent strain above the knee.
    pub slope_high: f64,
    /// Additive drift in ΔR/R₀ per second.
    pub drift_per_s: f64,
    pub noise_std: f64,
}

impl GaugeModel {
    /// Smallest resolvable strain, percent.
    pub const MIN_STRAIN: f64 = 0.005;
    /// Largest strain in the response domain, percent.
    pub const MAX_STRAIN: f64 = 155.0;

    pub fn validate(&self) -> Result<()> {
        if !(self.slope_low > 0.0 && self.slope_high > 0.0) {
            return Err(Error::Config("gauge slopes must be positive".into()));
        }
        if !(self.knee_strain > 0.0 && self.knee_strain < Self::MAX_STRAIN) {
            return Err(Error::Config("gauge knee must lie inside (0, 155)".into()));
        }
        if !(self.noise_std >= 0.0) || !self.drift_per_s.is_finite() {
            return Err(Error::Config("gauge noise/drift must be finite, noise >= 0".into()));
        }
        Ok(())
    }

    /// Response for a strain already inside `[0, 155]`.
    pub fn response(&self, strain: f64) -> f64 {
        let s = strain.clamp(0.0, Self::MAX_STRAIN);
        if s <= self.knee_strain {
            self.slope_low * s
        } else {
            self.slope_low * self.knee_strain + self.slope_high * (s - self.knee_strain)
        }
    }

    pub fn max_slope(&self) -> f64 {
        self.slope_low.max(self.slope_high)
    }
}

impl Default for GaugeModel {
    fn default() -> Self {
        Self {
            knee_strain: 20.0,
            slope_low: 0.05,
            slope_high: 0.0125,
            drift_per_s: 0.0,
            noise_std: 0.002,
        }
    }
}

/// `25 x 22` nonnegative map from per-joint strain to per-sensor strain.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix(pub Array2<f64>);

impl CouplingMatrix {
    /// Sensors 0..19 sit on the matching finger joint with weak coupling to
    /// adjacent joints of the same digit; 19..24 are fingertip sensors over
    /// the distal joints; 24 is a dorsal wrist sensor.
    pub fn standard() -> Self {
        let mut m = Array2::zeros((NUM_SENSORS, NUM_JOINTS));
        let digits: [std::ops::Range<usize>; 5] = [0..4, 4..8, 8..12, 12..16, 16..19];
        for digit in digits {
            for j in digit.clone() {
                m[[j, j]] = 1.0;
                if j > digit.start {
                    m[[j, j - 1]] = 0.1;
                }
                if j + 1 < digit.end {
                    m[[j, j + 1]] = 0.1;
                }
            }
        }
        for (&ch, &joint) in FINGERTIP_CHANNELS.iter().zip(&FINGERTIP_JOINTS) {
            m[[ch, joint]] = 0.3;
        }
        m[[24, WRIST_SENSOR_JOINT]] = 0.5;
        Self(m)
    }

    /// Scales every entry by an independent factor in `1 ± variation`.
    pub fn perturbed(&self, variation: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self(self.0.mapv(|v| {
            if v == 0.0 {
                0.0
            } else {
                v * (1.0 + rng.random_range(-variation..=variation))
            }
        }))
    }

    /// Largest row sum: bounds how much any sensor strain moves per unit of
    /// joint strain.
    pub fn row_norm(&self) -> f64 {
        self.0
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Per-joint strain in percent: `k * max(θ - θ_min, 0)`, measured from the
/// joint's lower anatomical limit so the yarn is slack at the limit.
pub fn joint_strain(angle: f64, joint: usize, per_degree: f64) -> f64 {
    per_degree * (angle - JOINT_LIMITS[joint].0).max(0.0)
}

/// A fingertip press: extra strain on one sensor for a run of frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contact {
    pub channel: usize,
    pub start_frame: usize,
    pub frames: usize,
    pub strain: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimOptions {
    pub seed: u64,
    /// Orientation noise on the hand IMU, degrees.
    pub imu_noise_deg: f64,
    pub start_ms: i64,
    pub strain_per_degree: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            imu_noise_deg: 0.5,
            start_ms: 0,
            strain_per_degree: STRAIN_PER_DEGREE,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub frames: Vec<SensorFrame>,
    /// Sensor samples whose strain fell outside `[0, 155]` and was clipped.
    pub clipped: usize,
}

/// Turns joint trajectories into sensor frames:
/// `response_i(t) = gauge_i(Σ_j coupling[i][j] g(θ_j(t))) + drift_i t + noise`,
/// with the forearm IMU slowly wandering and the hand IMU carrying the wrist
/// angles plus orientation noise.
pub fn simulate_sensors(
    trajectory: ArrayView2<f64>,
    gauges: &[GaugeModel],
    coupling: &CouplingMatrix,
    contacts: &[Contact],
    opts: &SimOptions,
) -> Result<SimOutput> {
    if trajectory.ncols() != NUM_JOINTS {
        return Err(Error::Shape(format!("trajectory has {} joints", trajectory.ncols())));
    }
    if gauges.len() != NUM_SENSORS || coupling.0.dim() != (NUM_SENSORS, NUM_JOINTS) {
        return Err(Error::Shape("need 25 gauges and a 25x22 coupling matrix".into()));
    }
    for g in gauges {
        g.validate()?;
    }
    if coupling.0.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::Config("coupling entries must be finite and >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let n = trajectory.nrows();
    let mut extra = Array2::<f64>::zeros((n, NUM_SENSORS));
    for c in contacts {
        if c.channel >= NUM_SENSORS {
            return Err(Error::InvalidInput(format!("contact channel {}", c.channel)));
        }
        for t in c.start_frame..(c.start_frame + c.frames).min(n) {
            extra[[t, c.channel]] += c.strain;
        }
    }
    // Slow forearm wander, fixed per run.
    let wander: [(f64, f64); 3] = std::array::from_fn(|_| {
        (rng.random_range(0.01..0.05), rng.random_range(0.0..std::f64::consts::TAU))
    });
    let mut frames = Vec::with_capacity(n);
    let mut clipped = 0;
    let mut joint_strains = [0.0; NUM_JOINTS];
    for t in 0..n {
        let time = t as f64 / SAMPLE_RATE_HZ;
        let angles = trajectory.row(t);
        for j in 0..NUM_JOINTS {
            joint_strains[j] = joint_strain(angles[j], j, opts.strain_per_degree);
        }
        let mut hsy = [0.0; NUM_SENSORS];
        for (i, gauge) in gauges.iter().enumerate() {
            let mut strain: f64 = coupling
                .0
                .row(i)
                .iter()
                .zip(&joint_strains)
                .map(|(c, s)| c * s)
                .sum::<f64>()
                + extra[[t, i]];
            if !(0.0..=GaugeModel::MAX_STRAIN).contains(&strain) {
                clipped += 1;
                strain = strain.clamp(0.0, GaugeModel::MAX_STRAIN);
            }
            let noise = if gauge.noise_std > 0.0 {
                gauge.noise_std * unit.sample(&mut rng)
            } else {
                0.0
            };
            hsy[i] = gauge.response(strain) + gauge.drift_per_s * time + noise;
        }
        let forearm = Quat::from_euler_xyz(
            0.3 * (std::f64::consts::TAU * wander[0].0 * time + wander[0].1).sin(),
            0.2 * (std::f64::consts::TAU * wander[1].0 * time + wander[1].1).sin(),
            0.5 * (std::f64::consts::TAU * wander[2].0 * time + wander[2].1).sin(),
        );
        let jitter = |rng: &mut ChaCha8Rng| {
            if opts.imu_noise_deg > 0.0 {
                opts.imu_noise_deg * unit.sample(rng)
            } else {
                0.0
            }
        };
        let (wf, wa, ws) = (
            angles[19] + jitter(&mut rng),
            angles[20] + jitter(&mut rng),
            angles[21] + jitter(&mut rng),
        );
        let relative = Quat::from_euler_xyz(wf.to_radians(), wa.to_radians(), ws.to_radians());
        frames.push(SensorFrame {
            timestamp_ms: opts.start_ms + 50 * t as i64,
            hsy,
            quat_hand: forearm.mul(relative).normalized(),
            quat_forearm: forearm.normalized(),
        });
    }
    Ok(SimOutput { frames, clipped })
}

/// One simulated wearer: per-sensor gauges and coupling with individual
/// variation around the nominal glove.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectModel {
    pub id: u32,
    pub gauges: Vec<GaugeModel>,
    pub coupling: CouplingMatrix,
}

impl SubjectModel {
    pub fn nominal(id: u32) -> Self {
        Self {
            id,
            gauges: vec![GaugeModel::default(); NUM_SENSORS],
            coupling: CouplingMatrix::standard(),
        }
    }

    /// Gauge slopes and coupling entries vary by up to `variation` (relative).
    pub fn sample(id: u32, variation: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (u64::from(id) << 32));
        let gauges = (0..NUM_SENSORS)
            .map(|_| {
                let mut g = GaugeModel::default();
                g.slope_low *= 1.0 + rng.random_range(-variation..=variation);
                g.slope_high *= 1.0 + rng.random_range(-variation..=variation);
                g
            })
            .collect();
        Self {
            id,
            gauges,
            coupling: CouplingMatrix::standard().perturbed(variation, rng.random()),
        }
    }

    pub fn with_noise(mut self, noise_std: f64, drift_per_s: f64) -> Self {
        for g in &mut self.gauges {
            g.noise_std = noise_std;
            g.drift_per_s = drift_per_s;
        }
        self
    }
}

/// Settings for a multi-subject synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub subjects: u32,
    pub sessions: u32,
    pub minutes_per_session: f64,
    pub seed: u64,
    pub subject_variation: f64,
    pub sensor_noise_std: f64,
    pub drift_per_s: f64,
    pub smoothness: f64,
    pub imu_noise_deg: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            subjects: 5,
            sessions: 1,
            minutes_per_session: 12.0,
            seed: 0,
            subject_variation: 0.1,
            sensor_noise_std: 0.002,
            drift_per_s: 0.0,
            smoothness: 1.0,
            imu_noise_deg: 0.5,
        }
    }
}

/// Simulates one recording session of a subject as a dataset file.
pub fn generate_session(
    subject: &SubjectModel,
    session: u32,
    minutes: f64,
    smoothness: f64,
    imu_noise_deg: f64,
    seed: u64,
) -> Result<DatasetFile> {
    let traj = generate_trajectory(seed, minutes * 60.0, smoothness)?;
    let sim = simulate_sensors(
        traj.view(),
        &subject.gauges,
        &subject.coupling,
        &[],
        &SimOptions {
            seed: seed.wrapping_add(1),
            imu_noise_deg,
            ..SimOptions::default()
        },
    )?;
    if sim.clipped > 0 {
        log::warn!("subject {} session {session}: {} strain samples clipped", subject.id, sim.clipped);
    }
    Ok(DatasetFile::from_frames(subject.id, session, sim.frames, traj.view(), None))
}

/// Generates every subject/session of `cfg`, seeded reproducibly.
pub fn generate_corpus(cfg: &SynthConfig) -> Result<Vec<DatasetFile>> {
    let mut files = Vec::new();
    for s in 1..=cfg.subjects {
        let subject = SubjectModel::sample(s, cfg.subject_variation, cfg.seed)
            .with_noise(cfg.sensor_noise_std, cfg.drift_per_s);
        for session in 1..=cfg.sessions {
            let seed = cfg.seed.wrapping_mul(1_000_003) ^ (u64::from(s) << 20) ^ u64::from(session);
            files.push(generate_session(
                &subject,
                session,
                cfg.minutes_per_session,
                cfg.smoothness,
                cfg.imu_noise_deg,
                seed,
            )?);
        }
    }
    Ok(files)
}

/// Root-mean-square difference between two poses, degrees.
pub fn pose_distance(a: &[f64; NUM_JOINTS], b: &[f64; NUM_JOINTS]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / NUM_JOINTS as f64).sqrt()
}

/// `n` random class poses inside the middle 80% of each joint range, every
/// pair at least `min_separation` apart by [`pose_distance`].
pub fn class_prototypes(n: usize, min_separation: f64, seed: u64) -> Result<Vec<[f64; NUM_JOINTS]>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<[f64; NUM_JOINTS]> = Vec::with_capacity(n);
    let mut attempts = 0;
    while out.len() < n {
        attempts += 1;
        if attempts > 1000 * n.max(1) {
            return Err(Error::InvalidInput(format!(
                "cannot place {n} poses {min_separation} degrees apart"
            )));
        }
        let pose: [f64; NUM_JOINTS] = std::array::from_fn(|j| {
            let (lo, hi) = JOINT_LIMITS[j];
            let margin = 0.1 * (hi - lo);
            rng.random_range(lo + margin..hi - margin)
        });
        if out.iter().all(|p| pose_distance(p, &pose) >= min_separation) {
            out.push(pose);
        }
    }
    Ok(out)
}

/// Settings for class-labelled recordings: each segment holds one class
/// pose, offset per segment by `intra_class_std` and jittered per frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LabeledConfig {
    pub num_classes: usize,
    pub segments_per_class: usize,
    pub segment_s: f64,
    /// Per-segment pose offset, degrees.
    pub intra_class_std: f64,
    /// Per-frame tremor, degrees.
    pub jitter_std: f64,
    /// Minimum prototype separation as a multiple of `intra_class_std`.
    pub separation_factor: f64,
    pub seed: u64,
}

impl Default for LabeledConfig {
    fn default() -> Self {
        Self {
            num_classes: 34,
            segments_per_class: 6,
            segment_s: 4.0,
            intra_class_std: 3.0,
            jitter_std: 0.5,
            separation_factor: 3.0,
            seed: 0,
        }
    }
}

/// A labelled session: class segments in random order, labels per frame.
pub fn generate_labeled_session(
    subject: &SubjectModel,
    session: u32,
    prototypes: &[[f64; NUM_JOINTS]],
    cfg: &LabeledConfig,
    seed: u64,
) -> Result<DatasetFile> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offset = Normal::new(0.0, cfg.intra_class_std.max(0.0)).map_err(|e| Error::Config(e.to_string()))?;
    let seg_frames = (cfg.segment_s * SAMPLE_RATE_HZ).round() as usize;
    if seg_frames == 0 || prototypes.is_empty() {
        return Err(Error::Config("labelled sessions need classes and segments".into()));
    }
    let mut order: Vec<usize> = (0..prototypes.len())
        .flat_map(|c| std::iter::repeat_n(c, cfg.segments_per_class))
        .collect();
    rand::seq::SliceRandom::shuffle(&mut order[..], &mut rng);
    let mut traj = Array2::zeros((order.len() * seg_frames, NUM_JOINTS));
    let mut labels = Vec::with_capacity(traj.nrows());
    for (k, &c) in order.iter().enumerate() {
        let pose: [f64; NUM_JOINTS] = std::array::from_fn(|j| prototypes[c][j] + offset.sample(&mut rng));
        let seg = hold_pose(&pose, seg_frames, cfg.jitter_std, rng.random());
        traj.slice_mut(ndarray::s![k * seg_frames..(k + 1) * seg_frames, ..]).assign(&seg);
        labels.extend(std::iter::repeat_n(c as u32, seg_frames));
    }
    let sim = simulate_sensors(
        traj.view(),
        &subject.gauges,
        &subject.coupling,
        &[],
        &SimOptions {
            seed: rng.random(),
            ..SimOptions::default()
        },
    )?;
    Ok(DatasetFile::from_frames(subject.id, session, sim.frames, traj.view(), Some(&labels)))
}
