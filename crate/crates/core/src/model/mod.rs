//! The pose regressor: normalization, stacked bidirectional LSTM, two fully
//! connected layers. Maps a normalized `40 x 28` window to 22 joint angles in
//! degrees, plus optional transformation-detection logits for multitask
//! pretraining.

mod bundle;
mod net;
mod predict;
mod train;

pub use bundle::{ModelBundle, TrainingMeta, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use net::{GlovePoseNet, NetCache};
pub use predict::{frame_features, predict_stream, LatencyStats, Prediction, StreamOutput, StreamPredictor};
pub use train::{composite_loss, epoch_order, fit, train, EpochLog, TrainOptions};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result, NUM_CHANNELS, NUM_JOINTS, WINDOW_LENGTH};

/// Number of transformation flags (mask, noise, scale).
pub const NUM_TRANSFORM_FLAGS: usize = 3;

/// Names of the 22 regressed angles, in output order.
pub const JOINT_NAMES: [&str; NUM_JOINTS] = [
    "pinky_mcp_flex",
    "pinky_mcp_abd",
    "pinky_pip_flex",
    "pinky_dip_flex",
    "ring_mcp_flex",
    "ring_mcp_abd",
    "ring_pip_flex",
    "ring_dip_flex",
    "middle_mcp_flex",
    "middle_mcp_abd",
    "middle_pip_flex",
    "middle_dip_flex",
    "index_mcp_flex",
    "index_mcp_abd",
    "index_pip_flex",
    "index_dip_flex",
    "thumb_mcp_flex",
    "thumb_mcp_abd",
    "thumb_ip_flex",
    "wrist_flex",
    "wrist_abd",
    "wrist_sup",
];

/// How the `T x 2H` top-layer sequence becomes one vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// Concatenated hidden state at the final time step.
    #[default]
    Last,
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub input_channels: usize,
    pub window_length: usize,
    pub hidden_size: usize,
    pub num_stacked_layers: usize,
    pub fc1_width: usize,
    pub output_dim: usize,
    /// 3 enables the transformation-detection outputs, 0 disables them.
    pub multitask_flags_dim: usize,
    pub pooling: Pooling,
    /// Rolling baseline subtraction on sensor channels before windowing.
    pub baseline_window: Option<usize>,
    /// Regress z-scored angles and map outputs back to degrees. Off trains
    /// directly in degrees.
    pub standardize_targets: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            input_channels: NUM_CHANNELS,
            window_length: WINDOW_LENGTH,
            hidden_size: 64,
            num_stacked_layers: 2,
            fc1_width: 128,
            output_dim: NUM_JOINTS,
            multitask_flags_dim: 0,
            pooling: Pooling::Last,
            baseline_window: None,
            standardize_targets: false,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("input_channels", self.input_channels),
            ("window_length", self.window_length),
            ("hidden_size", self.hidden_size),
            ("num_stacked_layers", self.num_stacked_layers),
            ("fc1_width", self.fc1_width),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if self.output_dim != NUM_JOINTS {
            return Err(Error::Config(format!(
                "output_dim must be {NUM_JOINTS}, got {}",
                self.output_dim
            )));
        }
        if self.multitask_flags_dim != 0 && self.multitask_flags_dim != NUM_TRANSFORM_FLAGS {
            return Err(Error::Config(format!(
                "multitask_flags_dim must be 0 or {NUM_TRANSFORM_FLAGS}"
            )));
        }
        if self.baseline_window == Some(0) {
            return Err(Error::Config("baseline_window must be >= 1".into()));
        }
        Ok(())
    }

    /// Width of the final layer: angles followed by flag logits.
    pub fn total_outputs(&self) -> usize {
        self.output_dim + self.multitask_flags_dim
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex(&Sha256::digest(json))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
