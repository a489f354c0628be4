//! Multi-scale Retinex with a percentile stretch and blend back onto the input.

use crate::filter::gaussian_blur;
use crate::image::{ImageTensor, Plane};

/// Surround scales at the 352-pixel reference resolution.
pub const REFERENCE_SCALES: [f32; 3] = [15.0, 80.0, 250.0];
const REFERENCE_SIDE: f32 = 352.0;
const LOG_OFFSET: f32 = 0.01;
const LOW_PERCENTILE: f64 = 0.01;
const HIGH_PERCENTILE: f64 = 0.99;

fn percentile(sorted_sample: &mut [f32], q: f64) -> f32 {
    let k = ((sorted_sample.len() - 1) as f64 * q).round() as usize;
    let (_, v, _) = sorted_sample.select_nth_unstable_by(k, |a, b| a.total_cmp(b));
    *v
}

/// Log-ratio of a channel to its blurred surrounds, averaged over scales.
fn msr_channel(plane: &Plane, sigmas: &[f32]) -> Plane {
    let log_in: Vec<f32> = plane.data.iter().map(|&v| (v + LOG_OFFSET).ln()).collect();
    let mut acc = vec![0.0f32; plane.data.len()];
    for &s in sigmas {
        let surround = gaussian_blur(plane, s);
        for ((a, &li), &sv) in acc.iter_mut().zip(&log_in).zip(&surround.data) {
            *a += li - (sv + LOG_OFFSET).ln();
        }
    }
    let n = sigmas.len() as f32;
    acc.iter_mut().for_each(|a| *a /= n);
    Plane::new(plane.width, plane.height, acc)
}

/// Stretches 1st..99th percentiles onto `[0,1]`; a flat response passes the input through.
fn stretch(msr: &Plane, original: &Plane) -> Plane {
    let mut scratch = msr.data.clone();
    let lo = percentile(&mut scratch, LOW_PERCENTILE);
    let hi = percentile(&mut scratch, HIGH_PERCENTILE);
    if hi - lo < 1e-6 {
        return original.clone();
    }
    let span = hi - lo;
    Plane::new(
        msr.width,
        msr.height,
        msr.data.iter().map(|&v| ((v - lo) / span).clamp(0.0, 1.0)).collect(),
    )
}

pub fn multi_scale_retinex(img: &ImageTensor, blend: f64, gain: f64) -> ImageTensor {
    let scale = img.width().min(img.height()) as f32 / REFERENCE_SIDE;
    let sigmas: Vec<f32> = REFERENCE_SCALES.iter().map(|s| s * scale).collect();
    let (w, g) = (blend as f32, gain as f32);
    let planes: Vec<Plane> = (0..3)
        .map(|c| {
            let ch = img.channel(c);
            let stretched = stretch(&msr_channel(&ch, &sigmas), &ch);
            let data = ch
                .data
                .iter()
                .zip(&stretched.data)
                .map(|(&v, &m)| (1.0 - w) * v + w * (g * m).clamp(0.0, 1.0))
                .collect();
            Plane::new(ch.width, ch.height, data)
        })
        .collect();
    ImageTensor::from_planes([&planes[0], &planes[1], &planes[2]]).expect("same dims")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brightens_dark_scene() {
        let img = ImageTensor::from_fn_clamped(64, 64, |x, y, _| {
            0.02 + 0.1 * ((x as f32 * 0.2).sin().abs() + (y as f32 * 0.15).cos().abs()) / 2.0
        })
        .unwrap();
        let out = multi_scale_retinex(&img, 1.0, 1.0);
        let mean = |i: &ImageTensor| i.data().iter().sum::<f32>() / i.data().len() as f32;
        assert!(mean(&out) > 3.0 * mean(&img));
    }

    #[test]
    fn zero_blend_is_identity() {
        let img = ImageTensor::from_fn_clamped(20, 10, |x, y, c| (x + 2 * y + c) as f32 / 60.0)
            .unwrap();
        assert_eq!(multi_scale_retinex(&img, 0.0, 1.3), img);
    }
}
