use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EpsilonSchedule, PolicyParams};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to resume training bit-identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub seed: u64,
    /// Episodes completed so far.
    pub episode: u64,
    pub epsilon: EpsilonSchedule,
    pub baseline: Option<f64>,
    pub params: PolicyParams,
}

impl Checkpoint {
    pub fn new(params: PolicyParams, seed: u64, episode: u64, epsilon: EpsilonSchedule, baseline: Option<f64>) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            embed_dim: params.embed_dim(),
            hidden_dim: params.hidden_dim(),
            seed,
            episode,
            epsilon,
            baseline,
            params,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::CorruptCheckpoint(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            version: u32,
        }
        let header: Header =
            serde_json::from_str(text).map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
        if header.version != CHECKPOINT_VERSION {
            return Err(Error::CheckpointVersion {
                found: header.version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let ck: Checkpoint =
            serde_json::from_str(text).map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
        ck.params.validate().map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
        if ck.params.embed_dim() != ck.embed_dim || ck.params.hidden_dim() != ck.hidden_dim {
            return Err(Error::CorruptCheckpoint("declared dims do not match weights".into()));
        }
        if ck.baseline.is_some_and(|b| !b.is_finite()) {
            return Err(Error::CorruptCheckpoint("non-finite baseline".into()));
        }
        Ok(ck)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.is_file() {
            return Err(Error::FileNotFound(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_round_trip() {
        let p = PolicyParams::init(8, 32, 11).unwrap();
        let ck = Checkpoint::new(p, 7, 160, EpsilonSchedule::new(2000), Some(0.612345678901234));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck/latest.json");
        ck.save(&path).unwrap();
        assert_eq!(Checkpoint::load(&path).unwrap(), ck);
    }

    #[test]
    fn rejects_other_versions_and_garbage() {
        let ck = Checkpoint::new(PolicyParams::zeros(2, 3), 0, 0, EpsilonSchedule::new(10), None);
        let text = ck.to_json().unwrap().replacen("\"version\":1", "\"version\":2", 1);
        assert!(matches!(
            Checkpoint::from_json(&text),
            Err(Error::CheckpointVersion { found: 2, expected: 1 })
        ));
        assert!(matches!(Checkpoint::from_json("{\"version\":1}"), Err(Error::CorruptCheckpoint(_))));
        assert!(matches!(Checkpoint::from_json("nope"), Err(Error::CorruptCheckpoint(_))));
    }
}
