//! Separable filters on single-channel planes. All borders use edge replication.

use crate::image::{ImageTensor, Plane};

/// Above this sigma the Gaussian is approximated by three box passes.
const EXACT_GAUSSIAN_MAX_SIGMA: f32 = 12.0;

pub fn gaussian_kernel(sigma: f32) -> Vec<f32> {
    let radius = (4.0 * sigma).ceil().max(1.0) as usize;
    let two_s2 = 2.0 * sigma as f64 * sigma as f64;
    let raw: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let d = i as f64 - radius as f64;
            (-d * d / two_s2).exp()
        })
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|v| (v / sum) as f32).collect()
}

fn convolve_line(src: &[f32], dst: &mut [f32], kernel: &[f32]) {
    let n = src.len() as isize;
    let r = (kernel.len() / 2) as isize;
    for (i, out) in dst.iter_mut().enumerate() {
        let i = i as isize;
        let mut acc = 0.0f32;
        if i - r >= 0 && i + r < n {
            let start = (i - r) as usize;
            for (k, &w) in kernel.iter().enumerate() {
                acc += w * src[start + k];
            }
        } else {
            for (k, &w) in kernel.iter().enumerate() {
                let j = (i + k as isize - r).clamp(0, n - 1) as usize;
                acc += w * src[j];
            }
        }
        *out = acc;
    }
}

/// Applies a symmetric 1-D kernel along rows then columns.
pub fn separable(plane: &Plane, kernel: &[f32]) -> Plane {
    let (w, h) = (plane.width, plane.height);
    let mut tmp = vec![0.0f32; w * h];
    for y in 0..h {
        convolve_line(
            &plane.data[y * w..(y + 1) * w],
            &mut tmp[y * w..(y + 1) * w],
            kernel,
        );
    }
    let mut out = vec![0.0f32; w * h];
    let mut col = vec![0.0f32; h];
    let mut col_out = vec![0.0f32; h];
    for x in 0..w {
        for y in 0..h {
            col[y] = tmp[y * w + x];
        }
        convolve_line(&col, &mut col_out, kernel);
        for y in 0..h {
            out[y * w + x] = col_out[y];
        }
    }
    Plane::new(w, h, out)
}

/// Running-mean box filter of half-width `radius` over an edge-extended line.
fn box_line(src: &[f32], dst: &mut [f32], radius: usize, prefix: &mut Vec<f64>) {
    let n = src.len();
    let ext = n + 2 * radius;
    prefix.clear();
    prefix.push(0.0);
    let mut acc = 0.0f64;
    for j in 0..ext {
        let idx = (j as isize - radius as isize).clamp(0, n as isize - 1) as usize;
        acc += src[idx] as f64;
        prefix.push(acc);
    }
    let width = (2 * radius + 1) as f64;
    for (i, out) in dst.iter_mut().enumerate() {
        *out = ((prefix[i + 2 * radius + 1] - prefix[i]) / width) as f32;
    }
}

fn box_blur(plane: &Plane, radius: usize) -> Plane {
    if radius == 0 {
        return plane.clone();
    }
    let (w, h) = (plane.width, plane.height);
    let mut prefix = Vec::with_capacity(w.max(h) + 2 * radius + 1);
    let mut tmp = vec![0.0f32; w * h];
    for y in 0..h {
        box_line(
            &plane.data[y * w..(y + 1) * w],
            &mut tmp[y * w..(y + 1) * w],
            radius,
            &mut prefix,
        );
    }
    let mut out = vec![0.0f32; w * h];
    let mut col = vec![0.0f32; h];
    let mut col_out = vec![0.0f32; h];
    for x in 0..w {
        for y in 0..h {
            col[y] = tmp[y * w + x];
        }
        box_line(&col, &mut col_out, radius, &mut prefix);
        for y in 0..h {
            out[y * w + x] = col_out[y];
        }
    }
    Plane::new(w, h, out)
}

/// Box radii whose three-pass cascade matches the variance of a Gaussian.
fn box_radii(sigma: f32) -> [usize; 3] {
    let n = 3.0f64;
    let s = sigma as f64;
    let w_ideal = (12.0 * s * s / n + 1.0).sqrt();
    let mut wl = w_ideal.floor() as i64;
    if wl % 2 == 0 {
        wl -= 1;
    }
    let wu = wl + 2;
    let wl_f = wl as f64;
    let m = ((12.0 * s * s - n * wl_f * wl_f - 4.0 * n * wl_f - 3.0 * n) / (-4.0 * wl_f - 4.0))
        .round() as i64;
    let mut out = [0usize; 3];
    for (i, r) in out.iter_mut().enumerate() {
        let width = if (i as i64) < m { wl } else { wu };
        *r = ((width - 1) / 2).max(0) as usize;
    }
    out
}

pub fn gaussian_blur(plane: &Plane, sigma: f32) -> Plane {
    if sigma <= 1e-3 {
        return plane.clone();
    }
    if sigma <= EXACT_GAUSSIAN_MAX_SIGMA {
        return separable(plane, &gaussian_kernel(sigma));
    }
    box_radii(sigma)
        .iter()
        .fold(plane.clone(), |acc, &r| box_blur(&acc, r))
}

pub fn gaussian_blur_image(img: &ImageTensor, sigma: f32) -> ImageTensor {
    let planes: Vec<Plane> = (0..3).map(|c| gaussian_blur(&img.channel(c), sigma)).collect();
    ImageTensor::from_planes([&planes[0], &planes[1], &planes[2]]).expect("same-sized planes")
}

/// 4-neighbour Laplacian `[0 1 0; 1 -4 1; 0 1 0]`.
pub fn laplacian(plane: &Plane) -> Plane {
    let (w, h) = (plane.width, plane.height);
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let c = plane.get_clamped(x, y);
            let v = plane.get_clamped(x - 1, y)
                + plane.get_clamped(x + 1, y)
                + plane.get_clamped(x, y - 1)
                + plane.get_clamped(x, y + 1)
                - 4.0 * c;
            out.push(v);
        }
    }
    Plane::new(w, h, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn impulse(w: usize, h: usize) -> Plane {
        let mut p = Plane::zeros(w, h);
        p.data[(h / 2) * w + w / 2] = 1.0;
        p
    }

    fn second_moment_x(p: &Plane) -> f64 {
        let cx = (p.width / 2) as f64;
        let mass: f64 = p.data.iter().map(|&v| v as f64).sum();
        let mut m = 0.0;
        for y in 0..p.height {
            for x in 0..p.width {
                let d = x as f64 - cx;
                m += d * d * p.get(x, y) as f64;
            }
        }
        m / mass
    }

    #[test]
    fn kernel_normalized() {
        for s in [0.5, 1.0, 3.3] {
            let k = gaussian_kernel(s);
            assert!((k.iter().sum::<f32>() - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn blur_preserves_constants() {
        let p = Plane::new(9, 7, vec![0.42; 63]);
        for s in [0.8, 5.0, 40.0] {
            let b = gaussian_blur(&p, s);
            assert!(b.data.iter().all(|v| (v - 0.42).abs() < 1e-5));
        }
    }

    #[test]
    fn exact_blur_variance_matches_sigma() {
        let b = gaussian_blur(&impulse(81, 81), 4.0);
        assert!((second_moment_x(&b) - 16.0).abs() < 0.1);
    }

    #[test]
    fn box_cascade_variance_close_to_sigma() {
        let b = gaussian_blur(&impulse(401, 3), 20.0);
        let var = second_moment_x(&b);
        assert!((var - 400.0).abs() / 400.0 < 0.05, "variance {var}");
    }

    #[test]
    fn laplacian_of_linear_ramp_is_zero_inside() {
        let p = Plane::new(5, 5, (0..25).map(|i| (i % 5) as f32 * 0.1).collect());
        let l = laplacian(&p);
        for y in 0..5 {
            for x in 1..4 {
                assert!(l.get(x, y).abs() < 1e-6);
            }
        }
    }
}
