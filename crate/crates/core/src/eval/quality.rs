//! Handcrafted no-reference quality score in `[0,1]`.

use serde::{Deserialize, Serialize};

use crate::image::ImageTensor;
use crate::perception::{extract_descriptor, DegradationDescriptor};

/// Normalizing thresholds for the sharpness, contrast and noise components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityConfig {
    pub tau_sharpness: f64,
    pub tau_contrast: f64,
    pub tau_noise: f64,
}

impl Default for QualityConfig {
    fn default() -> Self {
        Self {
            tau_sharpness: 0.002,
            tau_contrast: 0.2,
            tau_noise: 0.05,
        }
    }
}

const CALIBRATION_PERCENTILE: f64 = 0.95;

fn percentile(mut v: Vec<f64>, q: f64) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = ((v.len() - 1) as f64 * q).round() as usize;
    v[k]
}

impl QualityConfig {
    /// 95th percentile of each statistic over a set of clean images.
    /// Falls back to the default for a statistic whose percentile is not positive.
    pub fn calibrate<'a>(clean: impl IntoIterator<Item = &'a ImageTensor>) -> Self {
        let ds: Vec<DegradationDescriptor> = clean.into_iter().map(extract_descriptor).collect();
        let def = Self::default();
        if ds.is_empty() {
            return def;
        }
        let pick = |f: fn(&DegradationDescriptor) -> f64, fallback: f64| {
            let p = percentile(ds.iter().map(f).collect(), CALIBRATION_PERCENTILE);
            if p > 1e-12 {
                p
            } else {
                fallback
            }
        };
        Self {
            tau_sharpness: pick(|d| d.blur_score, def.tau_sharpness),
            tau_contrast: pick(|d| d.rms_contrast, def.tau_contrast),
            tau_noise: pick(|d| d.noise_sigma, def.tau_noise),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityScore {
    pub value: f64,
    pub sharpness: f64,
    pub contrast: f64,
    pub noise_penalty: f64,
    pub exposure: f64,
}

pub fn quality_from_descriptor(d: &DegradationDescriptor, cfg: &QualityConfig) -> QualityScore {
    let unit = |v: f64| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    let sharpness = unit(d.blur_score / cfg.tau_sharpness);
    let contrast = unit(d.rms_contrast / cfg.tau_contrast);
    let noise_penalty = 1.0 - unit(d.noise_sigma / cfg.tau_noise);
    let exposure = unit(1.0 - (d.mean_luminance - 0.5).abs() * 2.0);
    QualityScore {
        value: (sharpness + contrast + noise_penalty + exposure) / 4.0,
        sharpness,
        contrast,
        noise_penalty,
        exposure,
    }
}

pub fn quality(img: &ImageTensor, cfg: &QualityConfig) -> QualityScore {
    quality_from_descriptor(&extract_descriptor(img), cfg)
}
