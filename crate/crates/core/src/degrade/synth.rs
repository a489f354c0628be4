//! Synthetic "polyp" scenes: a shaded red disc on textured mucosa-colored
//! background, with the analytic disc as ground truth.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{load_dataset, DatasetIndex};
use crate::error::{Error, Result};
use crate::filter::gaussian_blur_image;
use crate::image::{save_mask, save_png, BinaryMask, ImageTensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneParams {
    /// Disc radius range as a fraction of the shorter side.
    pub radius: (f32, f32),
    pub disc_rgb: [f32; 3],
    pub background_rgb: [f32; 3],
    /// Brightness falloff from disc center to rim (`1 - falloff` at the rim).
    pub dome_falloff: f32,
    pub texture_amplitude: f32,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            radius: (0.14, 0.22),
            disc_rgb: [0.92, 0.34, 0.30],
            background_rgb: [0.80, 0.56, 0.50],
            dome_falloff: 0.45,
            texture_amplitude: 0.05,
        }
    }
}

struct Wave {
    fx: f32,
    fy: f32,
    phase: f32,
    amp: f32,
}

impl Wave {
    fn eval(&self, x: f32, y: f32) -> f32 {
        self.amp * (self.fx * x + self.fy * y + self.phase).sin()
    }
}

pub fn disc_scene(seed: u64, width: usize, height: usize, p: &SceneParams) -> (ImageTensor, BinaryMask) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = width.min(height) as f32;
    let r = rng.random_range(p.radius.0..p.radius.1) * side;
    let margin = r + 0.05 * side;
    let cx = rng.random_range(margin..(width as f32 - margin).max(margin + 1.0));
    let cy = rng.random_range(margin..(height as f32 - margin).max(margin + 1.0));

    // slow illumination field plus finer mucosal texture, frequencies in cycles per side
    let mut waves = Vec::new();
    for (n, amp, fmin, fmax) in [(2, 0.08, 0.5, 1.5), (4, p.texture_amplitude, 6.0, 14.0)] {
        for _ in 0..n {
            let f = rng.random_range(fmin..fmax) * std::f32::consts::TAU / side;
            let angle: f32 = rng.random_range(0.0..std::f32::consts::TAU);
            waves.push(Wave {
                fx: f * angle.cos(),
                fy: f * angle.sin(),
                phase: rng.random_range(0.0..std::f32::consts::TAU),
                amp: amp / n as f32,
            });
        }
    }

    let inside = |x: usize, y: usize| {
        let (dx, dy) = (x as f32 + 0.5 - cx, y as f32 + 0.5 - cy);
        dx * dx + dy * dy <= r * r
    };
    let raw = ImageTensor::from_fn_clamped(width, height, |x, y, c| {
        let (px, py) = (x as f32 + 0.5, y as f32 + 0.5);
        let field: f32 = waves.iter().map(|w| w.eval(px, py)).sum();
        let vignette = 1.0 - 0.25 * (((px - width as f32 / 2.0).powi(2) + (py - height as f32 / 2.0).powi(2)).sqrt() / side);
        if inside(x, y) {
            let d2 = ((px - cx).powi(2) + (py - cy).powi(2)) / (r * r);
            let dome = 1.0 - p.dome_falloff * d2;
            p.disc_rgb[c] * dome * vignette + 0.5 * field
        } else {
            p.background_rgb[c] * (vignette + field)
        }
    })
    .expect("positive dims");
    let img = gaussian_blur_image(&raw, 0.6);
    let mask = BinaryMask::from_fn(width, height, inside).expect("positive dims");
    (img, mask)
}

/// Writes `count` square scenes of side `size` as a `<root>/images`, `<root>/masks` dataset.
pub fn write_synthetic_corpus(root: impl AsRef<Path>, count: usize, size: usize, seed: u64) -> Result<DatasetIndex> {
    let root = root.as_ref();
    let (img_dir, mask_dir) = (root.join("images"), root.join("masks"));
    for d in [&img_dir, &mask_dir] {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let params = SceneParams::default();
    for i in 0..count {
        let (img, mask) = disc_scene(seed.wrapping_mul(1_000_003).wrapping_add(i as u64), size, size, &params);
        let id = format!("disc{i:04}");
        save_png(&img, img_dir.join(format!("{id}.png")))?;
        save_mask(&mask, mask_dir.join(format!("{id}.png")))?;
    }
    load_dataset(root)
}
