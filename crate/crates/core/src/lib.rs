//! Glove sensor-stream hand pose estimation.
//!
//! The crate turns 20 Hz frames from a strain-sensor glove (25 yarn sensors
//! plus two wrist IMUs) into 22 hand joint angles with a windowed, stacked
//! bidirectional LSTM, and layers on top of that core:
//!
//! * [`signal`]: baseline correction, wrist angles from quaternions, windowing,
//!   normalization, tap and touch detection.
//! * [`nncore`]: dense layers, LSTM cells, losses and Adam with hand-written
//!   reverse-mode gradients.
//! * [`model`]: the pose regressor, its training loop, streaming prediction and
//!   the checkpoint container.
//! * [`augment`]: channel masking, noise and scaling transforms and the
//!   multitask pretraining that detects them.
//! * [`heads`]: frozen-core classification heads and tap-gated key emission.
//! * [`eval`]: fold plans, regression and classification metrics, robustness
//!   sweeps and report writers.
//! * [`synth`]: a synthetic glove simulator and the canonical dataset format.
//! * [`stream`]: newline-delimited JSON inference service and replay.
//! * [`cli`]: the `glovepose` command line.

pub mod augment;
pub mod cli;
pub mod error;
pub mod eval;
pub mod heads;
pub mod model;
pub mod nncore;
pub mod signal;
pub mod stream;
pub mod synth;

pub use error::{Error, Result};

/// Frame rate of the glove acquisition pipeline.
pub const SAMPLE_RATE_HZ: f64 = 20.0;
/// Number of strain sensor channels per glove.
pub const NUM_SENSORS: usize = 25;
/// Model input channels: strain sensors plus three wrist angles.
pub const NUM_CHANNELS: usize = NUM_SENSORS + 3;
/// Number of regressed joint angles.
pub const NUM_JOINTS: usize = 22;
/// Two seconds of history at 20 Hz.
pub const WINDOW_LENGTH: usize = 40;
