//! Semantic degradation perception: image embedding, template bank, and
//! softmax-over-templates selection of the best-matching description.

mod descriptor;
mod embedding;
mod file;

pub use descriptor::{
    blur_score, extract_descriptor, noise_sigma, noise_sigma_plane, DegradationDescriptor,
    DESCRIPTOR_DIM, STAT_NAMES,
};
pub use embedding::{
    default_bank, default_prototypes, descriptor_to_embedding, select_description, Calibration,
    Embedding, Selection, Template, TemplateBank, DEFAULT_TEMPLATE_TEXTS,
};
pub use file::{
    load_embedding_file, parse_embedding_file, write_embedding_file, ImageEmbeddings,
    EMBEDDING_FILE_VERSION,
};

use crate::error::{Error, Result};
use crate::image::ImageTensor;

/// Source of image embeddings plus the bank they are matched against.
pub trait PerceptionBackend: Send + Sync {
    fn bank(&self) -> &TemplateBank;

    /// Embeds an image. `id` identifies the sample for lookup-based backends.
    fn embed(&self, id: &str, img: &ImageTensor) -> Result<Embedding>;

    fn dim(&self) -> usize {
        self.bank().dim()
    }
}

/// Descriptor statistics embedded through a calibration.
#[derive(Debug, Clone)]
pub struct BuiltinPerception {
    calibration: Calibration,
    bank: TemplateBank,
}

impl BuiltinPerception {
    pub fn new(calibration: Calibration) -> Result<Self> {
        let bank = default_bank(&calibration)?;
        Ok(Self { calibration, bank })
    }

    pub fn with_bank(calibration: Calibration, bank: TemplateBank) -> Result<Self> {
        calibration.validate()?;
        if bank.dim() != DESCRIPTOR_DIM {
            return Err(Error::EmbeddingDim {
                expected: DESCRIPTOR_DIM,
                actual: bank.dim(),
            });
        }
        Ok(Self { calibration, bank })
    }

    pub fn calibration(&self) -> &Calibration {
        &self.calibration
    }
}

impl PerceptionBackend for BuiltinPerception {
    fn bank(&self) -> &TemplateBank {
        &self.bank
    }

    fn embed(&self, _id: &str, img: &ImageTensor) -> Result<Embedding> {
        let d = extract_descriptor(img);
        match descriptor_to_embedding(&d, &self.calibration) {
            // an image sitting exactly at the calibration midpoint has no direction
            Err(Error::ZeroVector) => {
                let mut v = vec![0.0; DESCRIPTOR_DIM];
                v[0] = 1.0;
                Embedding::normalized(v)
            }
            other => other,
        }
    }
}

/// Embeddings precomputed by an external encoder, keyed by sample id.
#[derive(Debug, Clone)]
pub struct ExternalPerception {
    images: ImageEmbeddings,
    bank: TemplateBank,
}

impl ExternalPerception {
    pub fn new(images: ImageEmbeddings, bank: TemplateBank) -> Self {
        Self { images, bank }
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let (images, bank) = load_embedding_file(path)?;
        Ok(Self { images, bank })
    }

    pub fn images(&self) -> &ImageEmbeddings {
        &self.images
    }
}

impl PerceptionBackend for ExternalPerception {
    fn bank(&self) -> &TemplateBank {
        &self.bank
    }

    fn embed(&self, id: &str, _img: &ImageTensor) -> Result<Embedding> {
        self.images
            .get(id)
            .cloned()
            .ok_or_else(|| Error::Schema(format!("no embedding for image id `{id}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backends_share_the_embedding_contract() {
        let builtin = BuiltinPerception::new(Calibration::default()).unwrap();
        let img = ImageTensor::from_fn_clamped(32, 32, |x, y, c| {
            0.2 + 0.5 * ((x * y + c) % 7) as f32 / 7.0
        })
        .unwrap();
        let e = builtin.embed("a", &img).unwrap();
        let norm: f64 = e.values().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-6);
        select_description(&e, builtin.bank(), 1.0).unwrap();

        let mut images = ImageEmbeddings::new();
        images.insert("a".into(), e.clone());
        let external = ExternalPerception::new(images, builtin.bank().clone());
        assert_eq!(external.embed("a", &img).unwrap(), e);
        assert!(external.embed("missing", &img).is_err());
    }
}
