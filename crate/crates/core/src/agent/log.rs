use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::EpisodeRecord;
use crate::error::{Error, Result};
use crate::policy::Checkpoint;

/// Receives episode records in step order and periodic checkpoints.
pub trait TrainObserver {
    fn episode(&mut self, _record: &EpisodeRecord) -> Result<()> {
        Ok(())
    }

    fn checkpoint(&mut self, _checkpoint: &Checkpoint) -> Result<()> {
        Ok(())
    }
}

pub struct NullObserver;

impl TrainObserver for NullObserver {}

/// Keeps records and checkpoints in memory.
#[derive(Debug, Default)]
pub struct EpisodeLog {
    pub records: Vec<EpisodeRecord>,
    pub checkpoints: Vec<Checkpoint>,
}

impl TrainObserver for EpisodeLog {
    fn episode(&mut self, record: &EpisodeRecord) -> Result<()> {
        self.records.push(record.clone());
        Ok(())
    }

    fn checkpoint(&mut self, checkpoint: &Checkpoint) -> Result<()> {
        self.checkpoints.push(checkpoint.clone());
        Ok(())
    }
}

/// JSON-lines episode log plus `ckpt-<episode>.json` files in a directory.
pub struct FileObserver {
    log_path: PathBuf,
    log: BufWriter<File>,
    checkpoint_dir: PathBuf,
}

impl FileObserver {
    /// Appends to an existing log so resumed runs continue one file.
    pub fn new(log_path: impl AsRef<Path>, checkpoint_dir: impl AsRef<Path>, append: bool) -> Result<Self> {
        let log_path = log_path.as_ref().to_path_buf();
        if let Some(dir) = log_path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let file = std::fs::OpenOptions::new()
            .create(true)
            .write(true)
            .append(append)
            .truncate(!append)
            .open(&log_path)
            .map_err(|e| Error::io(&log_path, e))?;
        Ok(Self {
            log: BufWriter::new(file),
            log_path,
            checkpoint_dir: checkpoint_dir.as_ref().to_path_buf(),
        })
    }

    pub fn checkpoint_path(dir: impl AsRef<Path>, episode: u64) -> PathBuf {
        dir.as_ref().join(format!("ckpt-{episode:06}.json"))
    }

    pub fn flush(&mut self) -> Result<()> {
        self.log.flush().map_err(|e| Error::io(&self.log_path, e))
    }
}

impl TrainObserver for FileObserver {
    fn episode(&mut self, record: &EpisodeRecord) -> Result<()> {
        let line = serde_json::to_string(record).map_err(|e| Error::json(&self.log_path, e))?;
        writeln!(self.log, "{line}").map_err(|e| Error::io(&self.log_path, e))
    }

    fn checkpoint(&mut self, checkpoint: &Checkpoint) -> Result<()> {
        self.flush()?;
        checkpoint.save(Self::checkpoint_path(&self.checkpoint_dir, checkpoint.episode))
    }
}

impl Drop for FileObserver {
    fn drop(&mut self) {
        let _ = self.log.flush();
    }
}
