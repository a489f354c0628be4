use std::path::{Path, PathBuf};

use adaptive_enhance::agent::TrainConfig;
use adaptive_enhance::degrade::{DegradationKind, DegradationSpec};
use adaptive_enhance::eval::{QualityConfig, RewardWeights};
use adaptive_enhance::perception::Calibration;
use adaptive_enhance::{Error, Result};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum PerceptionChoice {
    #[default]
    Builtin,
    External,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SegmenterChoice {
    /// Classical color-threshold segmenter.
    #[default]
    Oracle,
    /// Precomputed masks named `<id>__<variant>.png`.
    External,
}

/// Everything a run needs. Loaded from `--config`, then overridden by flags.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub dataset: Option<PathBuf>,
    /// Embedding file for the external perception backend.
    pub embeddings: Option<PathBuf>,
    /// Mask directory for the external segmenter backend.
    pub masks: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub perception: PerceptionChoice,
    pub segmenter: SegmenterChoice,
    /// Resize every sample to `[width, height]` on load.
    pub resize: Option<[usize; 2]>,
    pub perception_temperature: f64,
    pub reward: RewardWeights,
    pub calibration: Option<Calibration>,
    /// Explicit quality thresholds. Takes precedence over `quality_reference`.
    pub quality: Option<QualityConfig>,
    /// Dataset of clean images to calibrate quality thresholds from.
    pub quality_reference: Option<PathBuf>,
    /// Benchmark degradations. Empty means every kind at strength 0.6.
    pub degradations: Vec<DegradationSpec>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            dataset: None,
            embeddings: None,
            masks: None,
            out: None,
            perception: PerceptionChoice::default(),
            segmenter: SegmenterChoice::default(),
            resize: None,
            perception_temperature: 1.0,
            reward: RewardWeights::default(),
            calibration: None,
            quality: None,
            quality_reference: None,
            degradations: Vec::new(),
        }
    }
}

pub const DEFAULT_STRENGTH: f64 = 0.6;

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        if !path.is_file() {
            return Err(Error::FileNotFound(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.reward.validate()?;
        if !(self.perception_temperature > 0.0) {
            return Err(Error::Config("perception_temperature must be positive".into()));
        }
        if let Some([w, h]) = self.resize {
            if w == 0 || h == 0 {
                return Err(Error::Config(format!("resize {w}x{h} is empty")));
            }
        }
        if self.perception == PerceptionChoice::External && self.embeddings.is_none() {
            return Err(Error::Config("external perception needs `embeddings`".into()));
        }
        if self.segmenter == SegmenterChoice::External && self.masks.is_none() {
            return Err(Error::Config("external segmenter needs `masks`".into()));
        }
        for p in [&self.embeddings, &self.quality_reference].into_iter().flatten() {
            if !p.exists() {
                return Err(Error::FileNotFound(p.clone()));
            }
        }
        for s in &self.degradations {
            DegradationSpec::new(s.kind, s.strength, s.seed)?;
        }
        Ok(())
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn dataset(&self) -> Result<&Path> {
        self.dataset
            .as_deref()
            .ok_or_else(|| Error::Config("no dataset given (use --dataset or `dataset`)".into()))
    }

    pub fn size(&self) -> Option<(usize, usize)> {
        self.resize.map(|[w, h]| (w, h))
    }

    pub fn degradation_specs(&self) -> Result<Vec<DegradationSpec>> {
        if !self.degradations.is_empty() {
            return Ok(self.degradations.clone());
        }
        DegradationKind::ALL
            .iter()
            .map(|&k| DegradationSpec::new(k, DEFAULT_STRENGTH, self.train.seed))
            .collect()
    }
}

/// Parses `kind:strength`.
pub fn parse_degradation(s: &str, seed: u64) -> Result<DegradationSpec> {
    let (kind, strength) = s
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("expected kind:strength, got `{s}`")))?;
    let strength = strength
        .parse()
        .map_err(|_| Error::Config(format!("bad strength `{strength}`")))?;
    DegradationSpec::new(kind.parse()?, strength, seed)
}

pub fn parse_theta(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad theta value `{v}`")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_config_fills_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"train": {"episodes": 5}, "segmenter": "external"}"#).unwrap();
        assert_eq!(c.train.episodes, 5);
        assert_eq!(c.train.batch_size, 16);
        assert_eq!(c.segmenter, SegmenterChoice::External);
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"episodes": 5}"#).is_err());
    }

    #[test]
    fn theta_and_spec_parsing() {
        assert_eq!(parse_theta("0.5, 0.25").unwrap(), [0.5, 0.25]);
        assert!(parse_theta("x").is_err());
        let s = parse_degradation("dim_gamma:0.8", 3).unwrap();
        assert_eq!((s.kind, s.strength, s.seed), (DegradationKind::DimGamma, 0.8, 3));
        assert!(parse_degradation("dim_gamma", 0).is_err());
        assert!(parse_degradation("nope:0.5", 0).is_err());
    }

    #[test]
    fn default_specs_cover_every_kind() {
        let specs = RunConfig::default().degradation_specs().unwrap();
        assert_eq!(specs.len(), DegradationKind::ALL.len());
    }
}
