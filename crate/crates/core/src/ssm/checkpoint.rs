//! `MPCK` checkpoint files.
//!
//! Little-endian layout: magic `"MPCK"`, version u16 = 1, u32 length of a
//! UTF-8 JSON metadata block, the metadata, then every parameter as f64 in
//! the group order documented in [`super::params`].

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::{ModelConfig, Params};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MPCK";
pub const VERSION: u16 = 1;

/// Provenance of the features a checkpoint was trained on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineTag {
    pub mask: bool,
    pub classes: String,
    pub t_bins: usize,
    pub channels: usize,
    pub config_hash: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub config: ModelConfig,
    /// Epoch (1-based) that produced these parameters; 0 before training.
    pub epoch: usize,
    pub best_val_loss: Option<f64>,
    pub seed: u64,
    #[serde(default)]
    pub pipeline: Option<PipelineTag>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SsmCheckpoint {
    pub meta: CheckpointMeta,
    pub params: Params,
}

impl SsmCheckpoint {
    pub fn config(&self) -> &ModelConfig {
        &self.meta.config
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let json = serde_json::to_vec(&self.meta)?;
        let json_len = u32::try_from(json.len())
            .map_err(|_| Error::Config("checkpoint metadata too large".into()))?;
        let mut out = Vec::with_capacity(10 + json.len() + 8 * self.params.values().len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&json_len.to_le_bytes());
        out.extend_from_slice(&json);
        for v in self.params.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 10 || &bytes[0..4] != MAGIC {
            return Err(Error::Header("bad magic, expected \"MPCK\"".into()));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(Error::Header(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let json_len = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
        let json = bytes
            .get(10..10 + json_len)
            .ok_or(Error::TruncatedPayload {
                expected: 10 + json_len,
                found: bytes.len(),
            })?;
        let meta: CheckpointMeta = serde_json::from_slice(json)?;
        meta.config.validate()?;
        let payload = &bytes[10 + json_len..];
        let expected = super::params::Layout::new(&meta.config).total * 8;
        if payload.len() != expected {
            return Err(Error::TruncatedPayload {
                expected,
                found: payload.len(),
            });
        }
        let values = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let params = Params::from_values(&meta.config, values)?;
        Ok(SsmCheckpoint { meta, params })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ssm::params::TemporalPooling;

    fn checkpoint() -> SsmCheckpoint {
        let config = ModelConfig {
            input_dim: 4,
            hidden_dim: 6,
            n_blocks: 2,
            n_classes: 3,
            dropout_rate: 0.2,
            focal_gamma: 2.0,
            pooling: TemporalPooling::Mean,
        };
        SsmCheckpoint {
            params: Params::init(&config, 77),
            meta: CheckpointMeta {
                config,
                epoch: 12,
                best_val_loss: Some(0.1 + 0.2),
                seed: 77,
                pipeline: Some(PipelineTag {
                    mask: true,
                    classes: "3".into(),
                    t_bins: 4,
                    channels: 4,
                    config_hash: "abc".into(),
                    version: "0.1.0".into(),
                }),
            },
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ck = checkpoint();
        let bytes = ck.to_bytes().unwrap();
        let back = SsmCheckpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, ck);
        assert_eq!(
            back.meta.best_val_loss.unwrap().to_bits(),
            (0.1f64 + 0.2).to_bits()
        );
        assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn truncated_or_foreign_files_rejected() {
        let bytes = checkpoint().to_bytes().unwrap();
        assert!(SsmCheckpoint::from_bytes(&bytes[..bytes.len() - 8]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(
            SsmCheckpoint::from_bytes(&bad),
            Err(Error::Header(_))
        ));
    }
}
