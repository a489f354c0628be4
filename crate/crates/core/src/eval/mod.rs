//! Segmentation, mask metrics, perceptual quality, and the scalar reward.

mod metrics;
mod quality;
mod segment;

use serde::{Deserialize, Serialize};

pub use metrics::{dice, miou};
pub use quality::{quality, quality_from_descriptor, QualityConfig, QualityScore};
pub use segment::{
    largest_component, otsu_threshold, ClassicalSegmenter, ExternalMasks, Segmenter,
};

use crate::error::{Error, Result};

/// Mixing weight of segmentation overlap against perceptual quality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub dice: f64,
    pub quality: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            dice: 0.9,
            quality: 0.1,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..=1.0).contains(&self.dice)
            && (0.0..=1.0).contains(&self.quality)
            && (self.dice + self.quality - 1.0).abs() < 1e-9;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "reward weights must be in [0,1] and sum to 1, got ({}, {})",
                self.dice, self.quality
            )))
        }
    }
}

/// `R = w_d * dice + w_q * Q`, evaluated as `Q + w_d * (dice - Q)` since the weights sum to one.
pub fn reward(dice_value: f64, q: &QualityScore, weights: &RewardWeights) -> Result<f64> {
    weights.validate()?;
    for (what, v) in [("dice", dice_value), ("quality", q.value)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Unit { what, value: v });
        }
    }
    Ok((q.value + weights.dice * (dice_value - q.value)).clamp(0.0, 1.0))
}
