//! JSON exchange format for precomputed image and template embeddings.
//!
//! ```text
//! {"version":1, "dim":D,
//!  "templates":[{"text":"...", "embedding":[...]}, ...],
//!  "images":{"<id>":[...], ...}}
//! ```
//! Vectors may arrive unnormalized; they are normalized on load. Extra
//! top-level keys (exporter metadata) are ignored.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};

use super::embedding::{Embedding, Template, TemplateBank};
use crate::error::{Error, Result};

pub const EMBEDDING_FILE_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct RawTemplate {
    text: String,
    embedding: Vec<f64>,
}

/// Map entries kept in file order so duplicate keys can be detected.
#[derive(Debug, Default)]
struct Entries(Vec<(String, Vec<f64>)>);

impl<'de> Deserialize<'de> for Entries {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Entries;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map from image id to float array")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut m: A) -> std::result::Result<Entries, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = m.next_entry::<String, Vec<f64>>()? {
                    out.push((k, v));
                }
                Ok(Entries(out))
            }
        }
        d.deserialize_map(V)
    }
}

#[derive(Debug, Deserialize)]
struct RawFile {
    version: u32,
    dim: usize,
    templates: Vec<RawTemplate>,
    #[serde(default)]
    images: Entries,
}

#[derive(Serialize)]
struct RawFileOut<'a> {
    version: u32,
    dim: usize,
    templates: Vec<RawTemplate>,
    images: BTreeMap<&'a str, &'a [f64]>,
}

pub type ImageEmbeddings = BTreeMap<String, Embedding>;

fn checked(dim: usize, v: Vec<f64>, what: &str) -> Result<Embedding> {
    if v.len() != dim {
        return Err(Error::EmbeddingDim {
            expected: dim,
            actual: v.len(),
        });
    }
    Embedding::normalized(v).map_err(|e| match e {
        Error::ZeroVector | Error::NonFinite(_) => Error::Schema(format!("{what}: {e}")),
        other => other,
    })
}

pub fn parse_embedding_file(text: &str) -> Result<(ImageEmbeddings, TemplateBank)> {
    let raw: RawFile = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    if raw.version != EMBEDDING_FILE_VERSION {
        return Err(Error::Schema(format!(
            "version {} (expected {EMBEDDING_FILE_VERSION})",
            raw.version
        )));
    }
    if raw.dim == 0 {
        return Err(Error::Schema("dim must be positive".into()));
    }
    let templates = raw
        .templates
        .into_iter()
        .map(|t| {
            let embedding = checked(raw.dim, t.embedding, &format!("template `{}`", t.text))?;
            Ok(Template {
                text: t.text,
                embedding,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let bank = TemplateBank::new(templates)?;
    let mut seen = HashSet::new();
    let mut images = BTreeMap::new();
    for (id, v) in raw.images.0 {
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId(id));
        }
        let e = checked(raw.dim, v, &format!("image `{id}`"))?;
        images.insert(id, e);
    }
    Ok((images, bank))
}

pub fn load_embedding_file(path: impl AsRef<Path>) -> Result<(ImageEmbeddings, TemplateBank)> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_embedding_file(&text)
}

pub fn write_embedding_file(
    path: impl AsRef<Path>,
    images: &ImageEmbeddings,
    bank: &TemplateBank,
) -> Result<()> {
    let path = path.as_ref();
    let dim = bank.dim();
    for e in images.values() {
        if e.dim() != dim {
            return Err(Error::EmbeddingDim {
                expected: dim,
                actual: e.dim(),
            });
        }
    }
    let out = RawFileOut {
        version: EMBEDDING_FILE_VERSION,
        dim,
        templates: bank
            .templates()
            .iter()
            .map(|t| RawTemplate {
                text: t.text.clone(),
                embedding: t.embedding.values().to_vec(),
            })
            .collect(),
        images: images
            .iter()
            .map(|(k, v)| (k.as_str(), v.values()))
            .collect(),
    };
    let text = serde_json::to_string_pretty(&out).map_err(|e| Error::json(path, e))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
