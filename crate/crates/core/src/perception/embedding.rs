use serde::{Deserialize, Serialize};

use super::descriptor::{DegradationDescriptor, DESCRIPTOR_DIM, STAT_NAMES};
use crate::error::{Error, Result};

/// Unit-norm real vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    values: Vec<f64>,
}

impl Embedding {
    /// L2-normalizes `values`. Fails on empty, non-finite or zero input.
    pub fn normalized(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmbeddingDim {
                expected: 1,
                actual: 0,
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("embedding component".into()));
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return Err(Error::ZeroVector);
        }
        Ok(Self {
            values: values.into_iter().map(|v| v / norm).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cosine(&self, other: &Embedding) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::EmbeddingDim {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum())
    }
}

/// Per-statistic `(min, max)` ranges that map descriptors onto `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub ranges: [(f64, f64); DESCRIPTOR_DIM],
}

impl Default for Calibration {
    fn default() -> Self {
        Self {
            ranges: [
                (0.0, 1.0),     // mean_luminance
                (0.0, 0.14),    // rms_contrast
                (0.0, 0.0008),  // blur_score
                (0.0, 0.04),    // noise_sigma
                (0.0, 0.02),    // specular_fraction
                (0.0, 0.02),    // overexposed_fraction
                (0.0, 0.32),    // colorfulness
                (4.5, 6.5),     // entropy
            ],
        }
    }
}

impl Calibration {
    pub fn validate(&self) -> Result<()> {
        for (i, &(lo, hi)) in self.ranges.iter().enumerate() {
            if !lo.is_finite() || !hi.is_finite() || (hi - lo).abs() < f64::EPSILON {
                return Err(Error::DegenerateCalibration {
                    stat: STAT_NAMES[i],
                    value: lo,
                });
            }
        }
        Ok(())
    }

    /// Affine map of each statistic onto `[-1,1]`, clamped, before normalization.
    pub fn scale(&self, d: &DegradationDescriptor) -> Result<[f64; DESCRIPTOR_DIM]> {
        self.validate()?;
        let raw = d.to_array();
        let mut out = [0.0; DESCRIPTOR_DIM];
        for i in 0..DESCRIPTOR_DIM {
            let (lo, hi) = self.ranges[i];
            out[i] = (2.0 * (raw[i] - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0);
        }
        Ok(out)
    }

    pub fn midpoint(&self) -> DegradationDescriptor {
        let mut a = [0.0; DESCRIPTOR_DIM];
        for (v, (lo, hi)) in a.iter_mut().zip(self.ranges) {
            *v = 0.5 * (lo + hi);
        }
        DegradationDescriptor::from_array(a)
    }
}

pub fn descriptor_to_embedding(d: &DegradationDescriptor, cal: &Calibration) -> Result<Embedding> {
    Embedding::normalized(cal.scale(d)?.to_vec())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub text: String,
    pub embedding: Embedding,
}

/// Ordered, nonempty set of text templates sharing one embedding dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateBank {
    templates: Vec<Template>,
}

impl TemplateBank {
    pub fn new(templates: Vec<Template>) -> Result<Self> {
        let first = templates.first().ok_or(Error::EmptyBank)?;
        let dim = first.embedding.dim();
        let mut seen = std::collections::HashSet::new();
        for t in &templates {
            if t.embedding.dim() != dim {
                return Err(Error::EmbeddingDim {
                    expected: dim,
                    actual: t.embedding.dim(),
                });
            }
            if !seen.insert(t.text.as_str()) {
                return Err(Error::DuplicateTemplate(t.text.clone()));
            }
        }
        Ok(Self { templates })
    }

    pub fn dim(&self) -> usize {
        self.templates[0].embedding.dim()
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn templates(&self) -> &[Template] {
        &self.templates
    }

    pub fn get(&self, i: usize) -> Option<&Template> {
        self.templates.get(i)
    }
}

/// Result of matching an image embedding against the bank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub index: usize,
    pub text: String,
    pub scores: Vec<f64>,
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Picks the template maximizing `softmax(cos(F_I, F_T) / temperature)`; ties go to the lowest index.
pub fn select_description(
    image: &Embedding,
    bank: &TemplateBank,
    temperature: f64,
) -> Result<Selection> {
    if bank.is_empty() {
        return Err(Error::EmptyBank);
    }
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::Temperature(temperature));
    }
    let cosines = bank
        .templates
        .iter()
        .map(|t| image.cosine(&t.embedding))
        .collect::<Result<Vec<_>>>()?;
    let mut index = 0;
    for (i, &c) in cosines.iter().enumerate() {
        if c > cosines[index] {
            index = i;
        }
    }
    let scaled: Vec<f64> = cosines.iter().map(|c| c / temperature).collect();
    Ok(Selection {
        index,
        text: bank.templates[index].text.clone(),
        scores: softmax(&scaled),
    })
}

/// Default template texts, in bank order.
pub const DEFAULT_TEMPLATE_TEXTS: [&str; 7] = [
    "low-contrast polyp with vascular texture",
    "blurry lesion under uneven illumination",
    "dim underexposed polyp in a dark lumen",
    "overexposed mucosa with washed-out polyp",
    "noisy grainy endoscopic frame",
    "polyp with specular highlights on wet mucosa",
    "clean well-exposed polyp with sharp detail",
];

/// Prototype descriptors for the default templates: mean descriptors of simulated
/// degradations at strength 0.6 over synthetic scenes, except the hand-set low-contrast entry.
pub fn default_prototypes() -> [DegradationDescriptor; 7] {
    let proto = |a: [f64; DESCRIPTOR_DIM]| DegradationDescriptor::from_array(a);
    [
        // mean, rms, blur, noise, spec, over, color, entropy
        proto([0.50, 0.02, 0.0001, 0.0003, 0.0, 0.0, 0.08, 4.6]),
        proto([0.544, 0.060, 0.00003, 0.0001, 0.0, 0.0, 0.158, 5.42]),
        proto([0.302, 0.059, 0.0003, 0.0003, 0.0, 0.0, 0.173, 5.64]),
        proto([0.866, 0.100, 0.0008, 0.0003, 0.064, 0.0055, 0.219, 5.63]),
        proto([0.544, 0.084, 0.046, 0.072, 0.0, 0.0, 0.241, 6.31]),
        proto([0.550, 0.085, 0.0044, 0.0003, 0.0126, 0.0126, 0.166, 5.57]),
        proto([0.544, 0.068, 0.0004, 0.0003, 0.0, 0.0, 0.160, 5.54]),
    ]
}

pub fn default_bank(cal: &Calibration) -> Result<TemplateBank> {
    let templates = DEFAULT_TEMPLATE_TEXTS
        .iter()
        .zip(default_prototypes())
        .map(|(text, proto)| {
            Ok(Template {
                text: (*text).to_string(),
                embedding: descriptor_to_embedding(&proto, cal)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    TemplateBank::new(templates)
}
