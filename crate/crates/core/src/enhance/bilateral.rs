//! Edge-preserving bilateral smoothing.
//!
//! Runs as a horizontal pass followed by a vertical pass (separable
//! approximation), each over a `2*ceil(2*sigma_s)+1` window with a Gaussian
//! spatial weight and a Gaussian weight on RGB distance.

use crate::image::ImageTensor;

fn pass(src: &[f32], w: usize, h: usize, horizontal: bool, spatial: &[f32], inv_2sr2: f32) -> Vec<f32> {
    let r = (spatial.len() / 2) as isize;
    let mut out = vec![0.0f32; src.len()];
    let (outer, inner) = if horizontal { (h, w) } else { (w, h) };
    let at = |o: usize, i: usize| -> usize {
        if horizontal {
            (o * w + i) * 3
        } else {
            (i * w + o) * 3
        }
    };
    for o in 0..outer {
        for i in 0..inner {
            let ci = at(o, i);
            let (c0, c1, c2) = (src[ci], src[ci + 1], src[ci + 2]);
            let (mut a0, mut a1, mut a2, mut wsum) = (0.0f32, 0.0f32, 0.0f32, 0.0f32);
            for (k, &ws) in spatial.iter().enumerate() {
                let j = (i as isize + k as isize - r).clamp(0, inner as isize - 1) as usize;
                let cj = at(o, j);
                let (d0, d1, d2) = (src[cj] - c0, src[cj + 1] - c1, src[cj + 2] - c2);
                let wt = ws * (-(d0 * d0 + d1 * d1 + d2 * d2) * inv_2sr2).exp();
                a0 += wt * src[cj];
                a1 += wt * src[cj + 1];
                a2 += wt * src[cj + 2];
                wsum += wt;
            }
            out[ci] = a0 / wsum;
            out[ci + 1] = a1 / wsum;
            out[ci + 2] = a2 / wsum;
        }
    }
    out
}

pub fn bilateral_denoise(img: &ImageTensor, sigma_spatial: f64, sigma_range: f64) -> ImageTensor {
    let radius = (2.0 * sigma_spatial).ceil() as isize;
    let two_ss2 = 2.0 * sigma_spatial * sigma_spatial;
    let spatial: Vec<f32> = (-radius..=radius)
        .map(|d| (-(d * d) as f64 / two_ss2).exp() as f32)
        .collect();
    let inv_2sr2 = (1.0 / (2.0 * sigma_range * sigma_range)) as f32;
    let (w, h) = (img.width(), img.height());
    let horiz = pass(img.data(), w, h, true, &spatial, inv_2sr2);
    let both = pass(&horiz, w, h, false, &spatial, inv_2sr2);
    ImageTensor::from_vec_clamped(w, h, both).expect("same dims")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keeps_strong_edges() {
        let img = ImageTensor::from_fn_clamped(20, 4, |x, _, _| if x < 10 { 0.1 } else { 0.9 }).unwrap();
        let out = bilateral_denoise(&img, 3.0, 0.05);
        assert!(out.get(9, 1, 0) < 0.12);
        assert!(out.get(10, 1, 0) > 0.88);
    }
}
