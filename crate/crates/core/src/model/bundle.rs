use std::fs;
use std::path::Path;

use ndarray::{s, Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{hex, EpochLog, GlovePoseNet, ModelConfig, Prediction};
use crate::nncore::Parameterized;
use crate::signal::ChannelStats;
use crate::{Error, Result};

/// File signature of the checkpoint container.
pub const CHECKPOINT_MAGIC: &[u8; 8] = b"GPMLBNDL";
pub const CHECKPOINT_VERSION: u32 = 1;
const PREFIX_LEN: usize = 16;
const DIGEST_LEN: usize = 32;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingMeta {
    pub epochs: usize,
    pub seed: u64,
    pub batch_size: usize,
    pub lr: f64,
    pub loss_curve: Vec<EpochLog>,
}

/// Everything needed to run the model: configuration, input normalization,
/// parameters and training history.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub config: ModelConfig,
    pub stats: ChannelStats,
    /// Per-joint angle statistics when the model regresses z-scored angles.
    pub target_stats: Option<ChannelStats>,
    pub net: GlovePoseNet,
    pub meta: TrainingMeta,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    config: ModelConfig,
    config_hash: String,
    stats: ChannelStats,
    #[serde(default)]
    target_stats: Option<ChannelStats>,
    meta: TrainingMeta,
    params: Vec<BlobEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BlobEntry {
    name: String,
    shape: [usize; 2],
    /// Offset into the blob section, in f64 elements.
    offset: usize,
}

impl ModelBundle {
    /// Runs one normalized window through the network.
    pub fn forward(&self, window: ArrayView2<f64>) -> Result<Prediction> {
        let (out, _) = self.net.forward_batch(&[window])?;
        Ok(self.split_output(out.row(0).to_vec(), None))
    }

    /// Normalizes a raw window with the bundle's statistics, then forwards it.
    pub fn forward_raw(&self, window: ArrayView2<f64>) -> Result<Prediction> {
        let w = self.stats.normalize(window)?;
        self.forward(w.view())
    }

    pub(crate) fn split_output(&self, mut row: Vec<f64>, timestamp_ms: Option<i64>) -> Prediction {
        let flags = row.split_off(self.config.output_dim);
        if let Some(t) = &self.target_stats {
            for ((v, m), s) in row.iter_mut().zip(&t.mean).zip(&t.std) {
                *v = *v * s + m;
            }
        }
        Prediction {
            timestamp_ms,
            angles: row,
            flag_logits: (!flags.is_empty()).then_some(flags),
        }
    }

    /// Joint angles for many normalized windows, `M x 22`, evaluated in
    /// chunks of `chunk` windows.
    pub fn predict_angles(&self, windows: &[Array2<f64>], chunk: usize) -> Result<Array2<f64>> {
        let d = self.config.output_dim;
        let mut out = Array2::zeros((windows.len(), d));
        for (c, block) in windows.chunks(chunk.max(1)).enumerate() {
            let views: Vec<_> = block.iter().map(|w| w.view()).collect();
            let (y, _) = self.net.forward_batch(&views)?;
            let start = c * chunk.max(1);
            out.slice_mut(s![start..start + block.len(), ..])
                .assign(&y.slice(s![.., ..d]));
        }
        match &self.target_stats {
            Some(t) => t.denormalize(out.view()),
            None => Ok(out),
        }
    }

    /// Hex SHA-256 over all parameter values in visiting order.
    pub fn param_hash(&self) -> String {
        let mut h = Sha256::new();
        for p in self.net.params() {
            for v in p.value.iter() {
                h.update(v.to_le_bytes());
            }
        }
        hex(&h.finalize())
    }

    /// Serializes into the checkpoint container:
    ///
    /// ```text
    /// magic "GPMLBNDL" | u32 LE version | u32 LE header length L
    /// header: L bytes of UTF-8 JSON (config, config_hash, stats, meta, blob table)
    /// blobs: f64 LE parameter values, row-major, in blob-table order
    /// SHA-256 of everything above (32 bytes)
    /// ```
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut params = Vec::new();
        let mut offset = 0;
        for p in self.net.params() {
            let (r, c) = p.shape();
            params.push(BlobEntry {
                name: p.name.clone(),
                shape: [r, c],
                offset,
            });
            offset += r * c;
        }
        let header = Header {
            config: self.config.clone(),
            config_hash: self.config.hash(),
            stats: self.stats.clone(),
            target_stats: self.target_stats.clone(),
            meta: self.meta.clone(),
            params,
        };
        let header = serde_json::to_vec(&header)?;
        let header_len = u32::try_from(header.len())
            .map_err(|_| Error::InvalidInput("checkpoint header too large".into()))?;
        let mut buf = Vec::with_capacity(PREFIX_LEN + header.len() + 8 * offset + DIGEST_LEN);
        buf.extend_from_slice(CHECKPOINT_MAGIC);
        buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        buf.extend_from_slice(&header_len.to_le_bytes());
        buf.extend_from_slice(&header);
        for p in self.net.params() {
            for v in p.value.iter() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        let digest = Sha256::digest(&buf);
        buf.extend_from_slice(&digest);
        Ok(buf)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let corrupt = |m: &str| Error::CorruptCheckpoint(m.to_string());
        if bytes.len() < PREFIX_LEN {
            return Err(corrupt("truncated before header"));
        }
        if &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(corrupt("bad magic"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != CHECKPOINT_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        if bytes.len() < PREFIX_LEN + DIGEST_LEN {
            return Err(corrupt("truncated"));
        }
        let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
        if Sha256::digest(body).as_slice() != digest {
            return Err(corrupt("checksum mismatch (truncated or modified)"));
        }
        let header_len = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
        let header_end = PREFIX_LEN
            .checked_add(header_len)
            .filter(|&e| e <= body.len())
            .ok_or_else(|| corrupt("header length exceeds file"))?;
        let header: Header = serde_json::from_slice(&body[PREFIX_LEN..header_end])
            .map_err(|e| corrupt(&format!("header: {e}")))?;
        let computed = header.config.hash();
        if computed != header.config_hash {
            return Err(Error::ConfigHashMismatch {
                stored: header.config_hash,
                computed,
            });
        }
        let blobs = &body[header_end..];
        if blobs.len() % 8 != 0 {
            return Err(corrupt("blob section is not a whole number of f64"));
        }
        let values: Vec<f64> = blobs
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();

        let mut net = GlovePoseNet::new(&header.config, 0)?;
        let mut params = net.params_mut();
        if params.len() != header.params.len() {
            return Err(Error::ConfigHashMismatch {
                stored: header.config_hash,
                computed: format!("{} blobs for {} parameters", header.params.len(), params.len()),
            });
        }
        for (p, entry) in params.iter_mut().zip(&header.params) {
            let (r, c) = p.shape();
            if entry.name != p.name || entry.shape != [r, c] {
                return Err(corrupt(&format!(
                    "blob {} {:?} does not match parameter {} {:?}",
                    entry.name,
                    entry.shape,
                    p.name,
                    (r, c)
                )));
            }
            let end = entry.offset + r * c;
            if end > values.len() {
                return Err(corrupt(&format!("blob {} runs past end of data", entry.name)));
            }
            p.value = Array2::from_shape_vec((r, c), values[entry.offset..end].to_vec())
                .expect("shape checked");
        }
        if header.stats.channels() != header.config.input_channels {
            return Err(corrupt("normalization statistics do not match input channels"));
        }
        if header
            .target_stats
            .as_ref()
            .is_some_and(|t| t.channels() != header.config.output_dim)
        {
            return Err(corrupt("angle statistics do not match output dimension"));
        }
        Ok(Self {
            config: header.config,
            stats: header.stats,
            target_stats: header.target_stats,
            net,
            meta: header.meta,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;

    fn tiny() -> ModelBundle {
        let cfg = ModelConfig {
            hidden_size: 3,
            fc1_width: 5,
            window_length: 4,
            ..ModelConfig::default()
        };
        let mut b = ModelBundle::new(cfg, ChannelStats::identity(28), 5).unwrap();
        b.meta.loss_curve.push(EpochLog {
            epoch: 0,
            loss: 0.1 + 0.2,
            regression: 0.3,
            transform: 0.0,
        });
        b
    }

    #[test]
    fn bytes_round_trip_exactly() {
        let b = tiny();
        let bytes = b.to_bytes().unwrap();
        let back = ModelBundle::from_bytes(&bytes).unwrap();
        assert_eq!(back, b);
        assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn rejects_damage() {
        let bytes = tiny().to_bytes().unwrap();
        let truncated = &bytes[..bytes.len() - 100];
        assert!(matches!(ModelBundle::from_bytes(truncated), Err(Error::CorruptCheckpoint(_))));
        assert!(matches!(ModelBundle::from_bytes(&bytes[..10]), Err(Error::CorruptCheckpoint(_))));
        let mut flipped = bytes.clone();
        let mid = flipped.len() - 64;
        flipped[mid] ^= 0x10;
        assert!(matches!(ModelBundle::from_bytes(&flipped), Err(Error::CorruptCheckpoint(_))));
        let mut foreign = bytes.clone();
        foreign[8..12].copy_from_slice(&7u32.to_le_bytes());
        assert!(matches!(ModelBundle::from_bytes(&foreign), Err(Error::UnsupportedVersion(7))));
        let mut magic = bytes;
        magic[0] = b'X';
        assert!(matches!(ModelBundle::from_bytes(&magic), Err(Error::CorruptCheckpoint(_))));
    }

    #[test]
    fn config_hash_is_checked() {
        let b = tiny();
        let bytes = b.to_bytes().unwrap();
        // Rewrite the stored hash and re-seal the checksum.
        let header_len = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        let header = std::str::from_utf8(&bytes[16..16 + header_len]).unwrap();
        let hash = b.config.hash();
        let forged = header.replace(&hash, &"0".repeat(hash.len()));
        let mut body = bytes[..16].to_vec();
        body.extend_from_slice(forged.as_bytes());
        body.extend_from_slice(&bytes[16 + header_len..bytes.len() - 32]);
        let digest = Sha256::digest(&body);
        body.extend_from_slice(&digest);
        assert!(matches!(
            ModelBundle::from_bytes(&body),
            Err(Error::ConfigHashMismatch { .. })
        ));
    }
}
