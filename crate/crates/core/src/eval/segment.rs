//! Segmentation backends.
//!
//! The classical backend thresholds a redness channel with Otsu's method,
//! ignoring pixels too dark or too glary to carry color, cleans the result
//! with 3x3 morphology and keeps the largest 8-connected component.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{load_mask, luminance, BinaryMask, ImageTensor};

pub trait Segmenter: Send + Sync {
    /// Segments `img`. `id` and `variant` identify the input for lookup-based backends.
    fn segment(&self, img: &ImageTensor, id: &str, variant: &str) -> Result<BinaryMask>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalSegmenter {
    /// Pixels with luminance below this carry no usable color.
    pub dark_floor: f32,
    /// Pixels with luminance above this are treated as glare.
    pub glare_ceiling: f32,
    pub morph_iterations: usize,
}

impl Default for ClassicalSegmenter {
    fn default() -> Self {
        Self {
            dark_floor: 0.12,
            glare_ceiling: 0.95,
            morph_iterations: 2,
        }
    }
}

/// Otsu threshold over values in `[0,1]` using 256 bins. Returns the bin edge.
pub fn otsu_threshold(values: &[f32]) -> f32 {
    let mut hist = [0f64; 256];
    for &v in values {
        hist[((v * 255.0).round() as usize).min(255)] += 1.0;
    }
    let total: f64 = hist.iter().sum();
    let sum_all: f64 = hist.iter().enumerate().map(|(i, h)| i as f64 * h).sum();
    let (mut w0, mut sum0) = (0.0, 0.0);
    let (mut best, mut best_t) = (-1.0, 0usize);
    for (t, &h) in hist.iter().enumerate() {
        w0 += h;
        sum0 += t as f64 * h;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let m0 = sum0 / w0;
        let m1 = (sum_all - sum0) / w1;
        let between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if between > best {
            best = between;
            best_t = t;
        }
    }
    (best_t as f32 + 0.5) / 255.0
}

fn morph(src: &[bool], w: usize, h: usize, dilate: bool) -> Vec<bool> {
    let mut out = vec![false; src.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = !dilate;
            'n: for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    let xx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                    let yy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                    let v = src[yy * w + xx];
                    if dilate && v {
                        acc = true;
                        break 'n;
                    }
                    if !dilate && !v {
                        acc = false;
                        break 'n;
                    }
                }
            }
            out[y * w + x] = acc;
        }
    }
    out
}

fn repeat(mut m: Vec<bool>, w: usize, h: usize, dilate: bool, n: usize) -> Vec<bool> {
    for _ in 0..n {
        m = morph(&m, w, h, dilate);
    }
    m
}

/// Keeps the largest 8-connected component; ties go to the first found in raster order.
pub fn largest_component(m: &[bool], w: usize, h: usize) -> Vec<bool> {
    let mut label = vec![0u32; m.len()];
    let mut best = (0u32, 0usize);
    let mut next = 0u32;
    let mut stack = Vec::new();
    for start in 0..m.len() {
        if !m[start] || label[start] != 0 {
            continue;
        }
        next += 1;
        label[start] = next;
        stack.push(start);
        let mut size = 0usize;
        while let Some(i) = stack.pop() {
            size += 1;
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if m[j] && label[j] == 0 {
                        label[j] = next;
                        stack.push(j);
                    }
                }
            }
        }
        if size > best.1 {
            best = (next, size);
        }
    }
    label.iter().map(|&l| l != 0 && l == best.0).collect()
}

impl ClassicalSegmenter {
    pub fn run(&self, img: &ImageTensor) -> Result<BinaryMask> {
        let (w, h) = (img.width(), img.height());
        if w * h == 0 {
            return Err(Error::EmptyImage);
        }
        let lum = luminance(img);
        let valid: Vec<bool> = lum
            .data
            .iter()
            .map(|&l| l >= self.dark_floor && l <= self.glare_ceiling)
            .collect();
        let redness: Vec<f32> = img
            .data()
            .chunks_exact(3)
            .map(|p| p[0] - 0.5 * (p[1] + p[2]))
            .collect();
        let (lo, hi) = redness
            .iter()
            .zip(&valid)
            .filter(|(_, &v)| v)
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), (&r, _)| {
                (lo.min(r), hi.max(r))
            });
        if !(hi - lo > 1e-4) {
            return BinaryMask::empty(w, h);
        }
        let norm: Vec<f32> = redness.iter().map(|r| ((r - lo) / (hi - lo)).clamp(0.0, 1.0)).collect();
        let sample: Vec<f32> = norm
            .iter()
            .zip(&valid)
            .filter(|(_, &v)| v)
            .map(|(&r, _)| r)
            .collect();
        let t = otsu_threshold(&sample);
        let fg: Vec<bool> = norm
            .iter()
            .zip(&valid)
            .map(|(&r, &v)| v && r > t)
            .collect();
        let n = self.morph_iterations;
        let opened = repeat(repeat(fg, w, h, false, n), w, h, true, n);
        let closed = repeat(repeat(opened, w, h, true, n), w, h, false, n);
        BinaryMask::new(w, h, largest_component(&closed, w, h))
    }
}

impl Segmenter for ClassicalSegmenter {
    fn segment(&self, img: &ImageTensor, _id: &str, _variant: &str) -> Result<BinaryMask> {
        self.run(img)
    }
}

/// Precomputed masks at `<dir>/<id>__<variant>.png`.
#[derive(Debug, Clone)]
pub struct ExternalMasks {
    dir: PathBuf,
}

impl ExternalMasks {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn path_for(&self, id: &str, variant: &str) -> PathBuf {
        self.dir.join(format!("{id}__{variant}.png"))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

impl Segmenter for ExternalMasks {
    fn segment(&self, _img: &ImageTensor, id: &str, variant: &str) -> Result<BinaryMask> {
        let p = self.path_for(id, variant);
        if !p.is_file() {
            return Err(Error::ExternalMaskMissing {
                id: id.to_string(),
                variant: variant.to_string(),
            });
        }
        load_mask(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::metrics::miou;
    use crate::image::save_mask;

    #[test]
    fn red_disc_on_gray() {
        let (w, h, cx, cy, r) = (96usize, 80usize, 40.0f32, 42.0f32, 18.0f32);
        let inside = |x: usize, y: usize| {
            let (dx, dy) = (x as f32 + 0.5 - cx, y as f32 + 0.5 - cy);
            dx * dx + dy * dy <= r * r
        };
        let img = ImageTensor::from_fn_clamped(w, h, |x, y, c| {
            if inside(x, y) {
                [0.9, 0.3, 0.25][c]
            } else {
                0.5
            }
        })
        .unwrap();
        let truth = BinaryMask::from_fn(w, h, inside).unwrap();
        let pred = ClassicalSegmenter::default().run(&img).unwrap();
        assert!(miou(&pred, &truth).unwrap() > 0.9);
        // any disagreement lies within two pixels of the analytic boundary
        for y in 0..h {
            for x in 0..w {
                if pred.get(x, y) != truth.get(x, y) {
                    let d = ((x as f32 + 0.5 - cx).powi(2) + (y as f32 + 0.5 - cy).powi(2)).sqrt();
                    assert!((d - r).abs() <= 2.0, "({x},{y}) at distance {d}");
                }
            }
        }
    }

    #[test]
    fn constant_image_yields_empty_mask() {
        let img = ImageTensor::filled(20, 20, [0.6, 0.4, 0.4]).unwrap();
        assert_eq!(ClassicalSegmenter::default().run(&img).unwrap().count(), 0);
    }

    #[test]
    fn deterministic() {
        let img = ImageTensor::from_fn_clamped(40, 40, |x, y, c| {
            ((x * 7 + y * 3 + c * 11) % 23) as f32 / 22.0
        })
        .unwrap();
        let s = ClassicalSegmenter::default();
        assert_eq!(s.run(&img).unwrap(), s.run(&img).unwrap());
    }

    #[test]
    fn largest_component_wins() {
        #[rustfmt::skip]
        let m = [
            true, false, false, false,
            false, false, true, true,
            false, false, true, false,
        ];
        let out = largest_component(&m, 4, 3);
        assert_eq!(out.iter().filter(|&&b| b).count(), 3);
        assert!(!out[0]);
    }

    #[test]
    fn external_masks_pass_through() {
        let dir = tempfile::tempdir().unwrap();
        let m = BinaryMask::from_fn(5, 4, |x, y| (x + y) % 3 == 0).unwrap();
        save_mask(&m, dir.path().join("s1__gamma_correction.png")).unwrap();
        let ext = ExternalMasks::new(dir.path());
        let img = ImageTensor::filled(5, 4, [0.0; 3]).unwrap();
        assert_eq!(ext.segment(&img, "s1", "gamma_correction").unwrap(), m);
        assert!(matches!(
            ext.segment(&img, "s1", "clahe"),
            Err(Error::ExternalMaskMissing { .. })
        ));
    }
}
