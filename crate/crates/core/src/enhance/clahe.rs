//! Contrast-limited adaptive histogram equalization on luminance.
//!
//! Each tile gets a clipped, redistributed 256-bin histogram whose CDF is the
//! tile's tone map; pixels blend the four nearest tile maps bilinearly. The
//! RGB channels are then scaled by the luminance ratio so hue is kept.

use crate::image::{luminance, ImageTensor, Plane};

const BINS: usize = 256;

#[inline]
fn bin_of(v: f32) -> usize {
    ((v * (BINS - 1) as f32).round() as usize).min(BINS - 1)
}

fn tile_map(plane: &Plane, x0: usize, x1: usize, y0: usize, y1: usize, clip: f64) -> [f32; BINS] {
    let mut hist = [0f64; BINS];
    for y in y0..y1 {
        for x in x0..x1 {
            hist[bin_of(plane.get(x, y))] += 1.0;
        }
    }
    let total = ((x1 - x0) * (y1 - y0)) as f64;
    let limit = (clip * total / BINS as f64).max(1.0);
    let mut excess = 0.0;
    for h in hist.iter_mut() {
        if *h > limit {
            excess += *h - limit;
            *h = limit;
        }
    }
    let share = excess / BINS as f64;
    hist.iter_mut().for_each(|h| *h += share);

    let mut map = [0f32; BINS];
    let mut cdf = 0.0;
    for (m, h) in map.iter_mut().zip(hist) {
        cdf += h;
        *m = (cdf / total).clamp(0.0, 1.0) as f32;
    }
    map
}

/// Tile boundaries splitting `len` into `n` near-equal spans.
fn bounds(len: usize, n: usize) -> Vec<usize> {
    (0..=n).map(|i| i * len / n).collect()
}

pub fn clahe_plane(plane: &Plane, clip_limit: f64, grid: usize) -> Plane {
    let (w, h) = (plane.width, plane.height);
    let nx = grid.clamp(1, w);
    let ny = grid.clamp(1, h);
    let bx = bounds(w, nx);
    let by = bounds(h, ny);
    let mut maps = Vec::with_capacity(nx * ny);
    for ty in 0..ny {
        for tx in 0..nx {
            maps.push(tile_map(plane, bx[tx], bx[tx + 1], by[ty], by[ty + 1], clip_limit));
        }
    }
    let centers = |b: &[usize]| -> Vec<f32> {
        b.windows(2).map(|s| (s[0] + s[1]) as f32 * 0.5 - 0.5).collect()
    };
    let (cx, cy) = (centers(&bx), centers(&by));
    // neighbouring tile pair and blend weight along one axis
    let locate = |c: &[f32], p: f32| -> (usize, usize, f32) {
        if p <= c[0] {
            return (0, 0, 0.0);
        }
        let last = c.len() - 1;
        if p >= c[last] {
            return (last, last, 0.0);
        }
        let i = c.partition_point(|&v| v <= p) - 1;
        (i, i + 1, (p - c[i]) / (c[i + 1] - c[i]))
    };
    let xs: Vec<_> = (0..w).map(|x| locate(&cx, x as f32)).collect();
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let (y0, y1, fy) = locate(&cy, y as f32);
        for (x, &(x0, x1, fx)) in xs.iter().enumerate() {
            let b = bin_of(plane.get(x, y));
            let m00 = maps[y0 * nx + x0][b];
            let m01 = maps[y0 * nx + x1][b];
            let m10 = maps[y1 * nx + x0][b];
            let m11 = maps[y1 * nx + x1][b];
            let top = m00 * (1.0 - fx) + m01 * fx;
            let bot = m10 * (1.0 - fx) + m11 * fx;
            out.push(top * (1.0 - fy) + bot * fy);
        }
    }
    Plane::new(w, h, out)
}

pub fn clahe(img: &ImageTensor, clip_limit: f64, grid: usize) -> ImageTensor {
    let lum = luminance(img);
    let eq = clahe_plane(&lum, clip_limit, grid);
    let mut data = Vec::with_capacity(img.data().len());
    for (i, p) in img.data().chunks_exact(3).enumerate() {
        let (l, l2) = (lum.data[i], eq.data[i]);
        if l > 1e-4 {
            let r = l2 / l;
            data.extend([p[0] * r, p[1] * r, p[2] * r]);
        } else {
            data.extend([l2; 3]);
        }
    }
    ImageTensor::from_vec_clamped(img.width(), img.height(), data).expect("same dims")
}
