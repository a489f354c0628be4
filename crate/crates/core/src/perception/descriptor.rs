//! Handcrafted degradation statistics used as the built-in image embedding.

use serde::{Deserialize, Serialize};

use crate::filter::laplacian;
use crate::haar::finest_diagonal;
use crate::image::{luminance, ImageTensor, Plane};

pub const DESCRIPTOR_DIM: usize = 8;

pub const STAT_NAMES: [&str; DESCRIPTOR_DIM] = [
    "mean_luminance",
    "rms_contrast",
    "blur_score",
    "noise_sigma",
    "specular_fraction",
    "overexposed_fraction",
    "colorfulness",
    "entropy",
];

/// Gaussian MAD-to-sigma factor.
const MAD_SCALE: f64 = 0.6745;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegradationDescriptor {
    pub mean_luminance: f64,
    pub rms_contrast: f64,
    /// Variance of the 3x3 Laplacian of luminance.
    pub blur_score: f64,
    /// Robust noise estimate from the finest diagonal Haar band, averaged over channels.
    pub noise_sigma: f64,
    pub specular_fraction: f64,
    pub overexposed_fraction: f64,
    pub colorfulness: f64,
    /// Shannon entropy of the 256-bin luminance histogram, in bits.
    pub entropy: f64,
}

impl DegradationDescriptor {
    pub fn to_array(&self) -> [f64; DESCRIPTOR_DIM] {
        [
            self.mean_luminance,
            self.rms_contrast,
            self.blur_score,
            self.noise_sigma,
            self.specular_fraction,
            self.overexposed_fraction,
            self.colorfulness,
            self.entropy,
        ]
    }

    pub fn from_array(a: [f64; DESCRIPTOR_DIM]) -> Self {
        Self {
            mean_luminance: a[0],
            rms_contrast: a[1],
            blur_score: a[2],
            noise_sigma: a[3],
            specular_fraction: a[4],
            overexposed_fraction: a[5],
            colorfulness: a[6],
            entropy: a[7],
        }
    }
}

fn median_in_place(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let mid = v.len() / 2;
    let (_, m, _) = v.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    *m
}

/// Median absolute deviation of the level-1 HH band, scaled to a Gaussian sigma.
pub fn noise_sigma_plane(plane: &Plane) -> f64 {
    let mut band = finest_diagonal(plane);
    if band.is_empty() {
        return 0.0;
    }
    let med = median_in_place(&mut band);
    band.iter_mut().for_each(|v| *v = (*v - med).abs());
    median_in_place(&mut band) / MAD_SCALE
}

pub fn noise_sigma(img: &ImageTensor) -> f64 {
    (0..3).map(|c| noise_sigma_plane(&img.channel(c))).sum::<f64>() / 3.0
}

pub fn blur_score(lum: &Plane) -> f64 {
    laplacian(lum).variance()
}

/// Hasler–Süsstrunk colorfulness on `[0,1]` values.
fn colorfulness(img: &ImageTensor) -> f64 {
    let n = img.pixel_count() as f64;
    let (mut s_rg, mut s_yb, mut ss_rg, mut ss_yb) = (0.0, 0.0, 0.0, 0.0);
    for p in img.data().chunks_exact(3) {
        let (r, g, b) = (p[0] as f64, p[1] as f64, p[2] as f64);
        let rg = r - g;
        let yb = 0.5 * (r + g) - b;
        s_rg += rg;
        s_yb += yb;
        ss_rg += rg * rg;
        ss_yb += yb * yb;
    }
    let (m_rg, m_yb) = (s_rg / n, s_yb / n);
    let var_rg = (ss_rg / n - m_rg * m_rg).max(0.0);
    let var_yb = (ss_yb / n - m_yb * m_yb).max(0.0);
    (var_rg + var_yb).sqrt() + 0.3 * (m_rg * m_rg + m_yb * m_yb).sqrt()
}

fn entropy(lum: &Plane) -> f64 {
    let mut hist = [0usize; 256];
    for &v in &lum.data {
        hist[((v * 256.0) as usize).min(255)] += 1;
    }
    let n = lum.data.len() as f64;
    hist.iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum::<f64>()
        .max(0.0)
}

pub fn extract_descriptor(img: &ImageTensor) -> DegradationDescriptor {
    let lum = luminance(img);
    let n = lum.data.len() as f64;
    let frac_above = |t: f32| lum.data.iter().filter(|&&v| v > t).count() as f64 / n;
    DegradationDescriptor {
        mean_luminance: lum.mean(),
        rms_contrast: lum.variance().sqrt(),
        blur_score: blur_score(&lum),
        noise_sigma: noise_sigma(img),
        specular_fraction: frac_above(0.95),
        overexposed_fraction: frac_above(0.98),
        colorfulness: colorfulness(img),
        entropy: entropy(&lum),
    }
}
