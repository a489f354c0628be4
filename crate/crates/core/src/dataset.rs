//! Dataset discovery for the `<root>/images`, `<root>/masks` layout.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::image::{load_image, load_mask, resize_bilinear, resize_mask, BinaryMask, ImageTensor};

const IMAGE_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetEntry {
    pub id: String,
    pub image: PathBuf,
    pub mask: Option<PathBuf>,
}

/// Sample listing sorted lexicographically by id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetIndex {
    pub entries: Vec<DatasetEntry>,
}

impl DatasetIndex {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &DatasetEntry> {
        self.entries.iter()
    }

    pub fn with_masks(&self) -> impl Iterator<Item = &DatasetEntry> {
        self.entries.iter().filter(|e| e.mask.is_some())
    }

    /// Loads every entry with a mask, resizing to `size` when given.
    pub fn load_samples(&self, size: Option<(usize, usize)>) -> Result<Vec<Sample>> {
        self.with_masks()
            .map(|e| Sample::load(e, size))
            .collect()
    }
}

/// An image with its ground-truth mask, already in memory.
#[derive(Debug, Clone)]
pub struct Sample {
    pub id: String,
    pub image: ImageTensor,
    pub mask: BinaryMask,
}

impl Sample {
    pub fn load(entry: &DatasetEntry, size: Option<(usize, usize)>) -> Result<Self> {
        let mask_path = entry
            .mask
            .as_ref()
            .ok_or_else(|| Error::MissingMask(entry.id.clone()))?;
        let mut image = load_image(&entry.image)?;
        let mut mask = load_mask(mask_path)?;
        let (w, h) = size.unwrap_or((image.width(), image.height()));
        if (image.width(), image.height()) != (w, h) {
            image = resize_bilinear(&image, w, h)?;
        }
        if (mask.width(), mask.height()) != (w, h) {
            mask = resize_mask(&mask, w, h)?;
        }
        Ok(Self {
            id: entry.id.clone(),
            image,
            mask,
        })
    }
}

fn stems(dir: &Path, extensions: &[&str]) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    let rd = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in rd {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if !path.is_file() {
            continue;
        }
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        if !ext.is_some_and(|e| extensions.contains(&e.as_str())) {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()).map(String::from) else {
            continue;
        };
        if out.insert(stem.clone(), path).is_some() {
            return Err(Error::DuplicateId(stem));
        }
    }
    Ok(out)
}

/// Indexes `<root>/images/<id>.(png|jpg)` with optional `<root>/masks/<id>.png`.
pub fn load_dataset(root: impl AsRef<Path>) -> Result<DatasetIndex> {
    let root = root.as_ref();
    let images_dir = root.join("images");
    if !images_dir.is_dir() {
        return Err(Error::MissingImagesDir(root.to_path_buf()));
    }
    let images = stems(&images_dir, IMAGE_EXTENSIONS)?;
    let masks_dir = root.join("masks");
    let masks = if masks_dir.is_dir() {
        stems(&masks_dir, &["png"])?
    } else {
        BTreeMap::new()
    };
    let entries = images
        .into_iter()
        .map(|(id, image)| {
            let mask = masks.get(&id).cloned();
            DatasetEntry { id, image, mask }
        })
        .collect();
    Ok(DatasetIndex { entries })
}
