//! Known, parameterized corruptions for building verifiable benchmarks.

mod synth;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use synth::{disc_scene, write_synthetic_corpus, SceneParams};

use crate::dataset::{load_dataset, DatasetIndex};
use crate::enhance::OperatorId;
use crate::error::{Error, Result};
use crate::filter::gaussian_blur_image;
use crate::image::{load_image, save_mask, save_png, load_mask, ImageTensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegradationKind {
    GaussianBlur,
    DimGamma,
    OverexposeGain,
    AdditiveNoise,
    SpecularBlobs,
    ColorCast,
}

impl DegradationKind {
    pub const ALL: [DegradationKind; 6] = [
        DegradationKind::GaussianBlur,
        DegradationKind::DimGamma,
        DegradationKind::OverexposeGain,
        DegradationKind::AdditiveNoise,
        DegradationKind::SpecularBlobs,
        DegradationKind::ColorCast,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DegradationKind::GaussianBlur => "gaussian_blur",
            DegradationKind::DimGamma => "dim_gamma",
            DegradationKind::OverexposeGain => "overexpose_gain",
            DegradationKind::AdditiveNoise => "additive_noise",
            DegradationKind::SpecularBlobs => "specular_blobs",
            DegradationKind::ColorCast => "color_cast",
        }
    }

    /// Operators expected to (approximately) undo this corruption.
    pub fn intended_inverse(self) -> &'static [OperatorId] {
        use OperatorId::*;
        match self {
            DegradationKind::GaussianBlur => &[UnsharpMask],
            DegradationKind::DimGamma => &[GammaCorrection, MultiScaleRetinex],
            DegradationKind::OverexposeGain => &[GammaCorrection, WhiteBalanceGain],
            DegradationKind::AdditiveNoise => &[WaveletDenoise, BilateralDenoise],
            DegradationKind::SpecularBlobs => &[MultiScaleRetinex],
            DegradationKind::ColorCast => &[WhiteBalanceGain],
        }
    }
}

impl fmt::Display for DegradationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DegradationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown degradation kind `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegradationSpec {
    pub kind: DegradationKind,
    pub strength: f64,
    pub seed: u64,
}

impl DegradationSpec {
    pub fn new(kind: DegradationKind, strength: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&strength) {
            return Err(Error::Unit {
                what: "strength",
                value: strength,
            });
        }
        Ok(Self {
            kind,
            strength,
            seed,
        })
    }

    /// Kind-specific physical magnitude for this strength.
    pub fn magnitude(&self) -> f64 {
        let s = self.strength;
        match self.kind {
            DegradationKind::GaussianBlur => 6.0 * s,
            DegradationKind::DimGamma => 1.0 + 1.8 * s,
            DegradationKind::OverexposeGain => 1.0 + 1.2 * s,
            DegradationKind::AdditiveNoise => 0.12 * s,
            DegradationKind::SpecularBlobs => (8.0 * s).round(),
            DegradationKind::ColorCast => 1.0 + 0.5 * s,
        }
    }
}

fn map_pixels(img: &ImageTensor, f: impl Fn(f32, usize) -> f32) -> ImageTensor {
    let data = img
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| f(v, i % 3))
        .collect();
    ImageTensor::from_vec_clamped(img.width(), img.height(), data).expect("same dims")
}

/// Applies a corruption. Strength 0 is the identity for every kind.
pub fn degrade(img: &ImageTensor, spec: &DegradationSpec) -> ImageTensor {
    if spec.strength <= 0.0 {
        return img.clone();
    }
    let m = spec.magnitude();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    match spec.kind {
        DegradationKind::GaussianBlur => gaussian_blur_image(img, m as f32),
        DegradationKind::DimGamma => map_pixels(img, |v, _| (v as f64).powf(m) as f32),
        DegradationKind::OverexposeGain => map_pixels(img, |v, _| (v as f64 * m) as f32),
        DegradationKind::AdditiveNoise => {
            let normal = Normal::new(0.0f32, m as f32).expect("positive sigma");
            let data = img
                .data()
                .iter()
                .map(|&v| v + normal.sample(&mut rng))
                .collect();
            ImageTensor::from_vec_clamped(img.width(), img.height(), data).expect("same dims")
        }
        DegradationKind::SpecularBlobs => {
            let (w, h) = (img.width() as f32, img.height() as f32);
            let side = w.min(h);
            let blobs: Vec<(f32, f32, f32)> = (0..m as usize)
                .map(|_| {
                    (
                        rng.random_range(0.0..w),
                        rng.random_range(0.0..h),
                        rng.random_range(0.015..0.04) * side,
                    )
                })
                .collect();
            ImageTensor::from_fn_clamped(img.width(), img.height(), |x, y, c| {
                let (px, py) = (x as f32 + 0.5, y as f32 + 0.5);
                let hit = blobs
                    .iter()
                    .any(|&(bx, by, r)| (px - bx).powi(2) + (py - by).powi(2) <= r * r);
                if hit {
                    1.0
                } else {
                    img.get(x, y, c)
                }
            })
            .expect("same dims")
        }
        DegradationKind::ColorCast => {
            let dominant = rng.random_range(0..3usize);
            let mut gains = [1.0 + 0.4 * (m - 1.0); 3];
            gains[dominant] = m;
            gains[(dominant + 2) % 3] = 1.0;
            map_pixels(img, |v, c| (v as f64 * gains[c]) as f32)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub source_id: String,
    pub kind: DegradationKind,
    pub strength: f64,
    pub seed: u64,
    pub intended_inverse: Vec<String>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

fn sample_seed(base: u64, index: usize) -> u64 {
    base.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

pub fn degraded_id(source: &str, spec: &DegradationSpec) -> String {
    format!(
        "{source}-{}-{:03}",
        spec.kind.name(),
        (spec.strength * 100.0).round() as u32
    )
}

/// Writes every (clean sample × spec) pair under `out`, plus masks and a manifest.
pub fn build_benchmark(
    clean: &DatasetIndex,
    specs: &[DegradationSpec],
    out: impl AsRef<Path>,
) -> Result<(DatasetIndex, Vec<ManifestEntry>)> {
    let out = out.as_ref();
    let (img_dir, mask_dir) = (out.join("images"), out.join("masks"));
    for d in [&img_dir, &mask_dir] {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let mut manifest = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, entry) in clean.iter().enumerate() {
        let mask_path = entry
            .mask
            .as_ref()
            .ok_or_else(|| Error::MissingMask(entry.id.clone()))?;
        let image = load_image(&entry.image)?;
        let mask = load_mask(mask_path)?;
        for spec in specs {
            let id = degraded_id(&entry.id, spec);
            if !seen.insert(id.clone()) {
                return Err(Error::DuplicateId(id));
            }
            let seed = sample_seed(spec.seed, i);
            let applied = DegradationSpec { seed, ..*spec };
            save_png(&degrade(&image, &applied), img_dir.join(format!("{id}.png")))?;
            save_mask(&mask, mask_dir.join(format!("{id}.png")))?;
            manifest.push(ManifestEntry {
                id,
                source_id: entry.id.clone(),
                kind: spec.kind,
                strength: spec.strength,
                seed,
                intended_inverse: spec
                    .kind
                    .intended_inverse()
                    .iter()
                    .map(|o| o.name().to_string())
                    .collect(),
            });
        }
    }
    write_manifest(out.join(MANIFEST_FILE), &manifest)?;
    Ok((load_dataset(out)?, manifest))
}

pub fn write_manifest(path: impl AsRef<Path>, entries: &[ManifestEntry]) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(entries).map_err(|e| Error::json(path, e))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}
