//! Orthonormal 2-D Haar transform in Mallat layout.
//!
//! Planes whose sides are not multiples of `2^levels` are edge-padded before
//! the forward pass and cropped after the inverse, so the round trip is exact
//! up to floating-point rounding.

use crate::image::Plane;

const INV_SQRT2: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Clone)]
pub struct HaarPyramid {
    width: usize,
    height: usize,
    levels: usize,
    orig_width: usize,
    orig_height: usize,
    coeffs: Vec<f64>,
}

fn forward_line(buf: &mut [f64], scratch: &mut [f64]) {
    let half = buf.len() / 2;
    for i in 0..half {
        let (a, b) = (buf[2 * i], buf[2 * i + 1]);
        scratch[i] = (a + b) * INV_SQRT2;
        scratch[half + i] = (a - b) * INV_SQRT2;
    }
    buf.copy_from_slice(&scratch[..buf.len()]);
}

fn inverse_line(buf: &mut [f64], scratch: &mut [f64]) {
    let half = buf.len() / 2;
    for i in 0..half {
        let (s, d) = (buf[i], buf[half + i]);
        scratch[2 * i] = (s + d) * INV_SQRT2;
        scratch[2 * i + 1] = (s - d) * INV_SQRT2;
    }
    buf.copy_from_slice(&scratch[..buf.len()]);
}

impl HaarPyramid {
    pub fn forward(plane: &Plane, levels: usize) -> Self {
        let block = 1usize << levels;
        let width = plane.width.div_ceil(block) * block;
        let height = plane.height.div_ceil(block) * block;
        let mut coeffs = Vec::with_capacity(width * height);
        for y in 0..height as isize {
            for x in 0..width as isize {
                coeffs.push(plane.get_clamped(x, y) as f64);
            }
        }
        let mut scratch = vec![0.0; width.max(height)];
        let mut col = vec![0.0; height];
        for level in 0..levels {
            let (cw, ch) = (width >> level, height >> level);
            for y in 0..ch {
                forward_line(&mut coeffs[y * width..y * width + cw], &mut scratch);
            }
            for x in 0..cw {
                for y in 0..ch {
                    col[y] = coeffs[y * width + x];
                }
                forward_line(&mut col[..ch], &mut scratch);
                for y in 0..ch {
                    coeffs[y * width + x] = col[y];
                }
            }
        }
        Self {
            width,
            height,
            levels,
            orig_width: plane.width,
            orig_height: plane.height,
            coeffs,
        }
    }

    pub fn inverse(&self) -> Plane {
        let (width, height) = (self.width, self.height);
        let mut coeffs = self.coeffs.clone();
        let mut scratch = vec![0.0; width.max(height)];
        let mut col = vec![0.0; height];
        for level in (0..self.levels).rev() {
            let (cw, ch) = (width >> level, height >> level);
            for x in 0..cw {
                for y in 0..ch {
                    col[y] = coeffs[y * width + x];
                }
                inverse_line(&mut col[..ch], &mut scratch);
                for y in 0..ch {
                    coeffs[y * width + x] = col[y];
                }
            }
            for y in 0..ch {
                inverse_line(&mut coeffs[y * width..y * width + cw], &mut scratch);
            }
        }
        let mut out = Vec::with_capacity(self.orig_width * self.orig_height);
        for y in 0..self.orig_height {
            for x in 0..self.orig_width {
                out.push(coeffs[y * width + x] as f32);
            }
        }
        Plane::new(self.orig_width, self.orig_height, out)
    }

    /// Soft-thresholds every detail coefficient, leaving the coarsest approximation band.
    pub fn soft_threshold(&mut self, t: f64) {
        if t <= 0.0 {
            return;
        }
        let (aw, ah) = (self.width >> self.levels, self.height >> self.levels);
        for y in 0..self.height {
            for x in 0..self.width {
                if x < aw && y < ah {
                    continue;
                }
                let c = &mut self.coeffs[y * self.width + x];
                *c = c.signum() * (c.abs() - t).max(0.0);
            }
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }
}

/// Level-1 diagonal (HH) coefficients over complete 2x2 blocks, no padding.
pub fn finest_diagonal(plane: &Plane) -> Vec<f64> {
    let (w2, h2) = (plane.width / 2, plane.height / 2);
    let mut out = Vec::with_capacity(w2 * h2);
    for by in 0..h2 {
        for bx in 0..w2 {
            let (x, y) = (2 * bx, 2 * by);
            let a = plane.get(x, y) as f64;
            let b = plane.get(x + 1, y) as f64;
            let c = plane.get(x, y + 1) as f64;
            let d = plane.get(x + 1, y + 1) as f64;
            out.push((a - b - c + d) * 0.5);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn energy_is_preserved() {
        let p = Plane::new(8, 8, (0..64).map(|i| ((i * 13) % 17) as f32 / 16.0).collect());
        let pyr = HaarPyramid::forward(&p, 3);
        let e_in: f64 = p.data.iter().map(|&v| (v as f64).powi(2)).sum();
        let e_out: f64 = pyr.coeffs().iter().map(|v| v * v).sum();
        assert!((e_in - e_out).abs() < 1e-9);
    }

    #[test]
    fn diagonal_band_of_checkerboard() {
        let p = Plane::new(4, 2, vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
        assert_eq!(finest_diagonal(&p), vec![1.0, 1.0]);
    }

    proptest! {
        #[test]
        fn round_trip_exact(w in 1usize..40, h in 1usize..40, levels in 1usize..4, seed in any::<u32>()) {
            let data: Vec<f32> = (0..w * h)
                .map(|i| ((i as u32).wrapping_mul(2654435761).wrapping_add(seed) % 1000) as f32 / 999.0)
                .collect();
            let p = Plane::new(w, h, data);
            let back = HaarPyramid::forward(&p, levels).inverse();
            prop_assert_eq!((back.width, back.height), (w, h));
            for (a, b) in p.data.iter().zip(&back.data) {
                prop_assert!((a - b).abs() <= 1e-6);
            }
        }
    }
}
