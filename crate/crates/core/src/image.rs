//! Image and mask rasters plus PNG/JPEG ingestion.
//!
//! Pixels are stored row-major and channel-interleaved as `f32` in `[0, 1]`.
//! Every constructor that accepts external data validates that contract;
//! operators that compute new values go through [`ImageTensor::from_fn_clamped`]
//! or [`ImageTensor::from_vec_clamped`] so the range invariant cannot be broken.

use std::path::Path;

use image::{ColorType, DynamicImage, ImageReader, RgbImage};

use crate::error::{Error, Result};

pub const CHANNELS: usize = 3;

/// Normalized RGB raster.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl ImageTensor {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        check_dims(width, height)?;
        let expected = width * height * CHANNELS;
        if data.len() != expected {
            return Err(Error::BufferLength {
                expected,
                actual: data.len(),
            });
        }
        if let Some((index, &value)) = data
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::OutOfRange { index, value });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Builds an image from arbitrary values, clamping into `[0,1]`. NaN maps to 0.
    pub fn from_vec_clamped(width: usize, height: usize, mut data: Vec<f32>) -> Result<Self> {
        check_dims(width, height)?;
        let expected = width * height * CHANNELS;
        if data.len() != expected {
            return Err(Error::BufferLength {
                expected,
                actual: data.len(),
            });
        }
        data.iter_mut().for_each(|v| *v = clamp_unit(*v));
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Builds an image by evaluating `f(x, y, channel)` and clamping.
    pub fn from_fn_clamped(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        check_dims(width, height)?;
        let mut data = Vec::with_capacity(width * height * CHANNELS);
        for y in 0..height {
            for x in 0..width {
                for c in 0..CHANNELS {
                    data.push(clamp_unit(f(x, y, c)));
                }
            }
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [f32; 3]) -> Result<Self> {
        Self::from_fn_clamped(width, height, |_, _, c| rgb[c])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * CHANNELS + c]
    }

    #[inline]
    pub fn rgb(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.width + x) * CHANNELS;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Copies one channel out as a plane.
    pub fn channel(&self, c: usize) -> Plane {
        let data = self.data.iter().skip(c).step_by(CHANNELS).copied().collect();
        Plane {
            width: self.width,
            height: self.height,
            data,
        }
    }

    /// Reassembles an image from three planes of identical size, clamping.
    pub fn from_planes(planes: [&Plane; 3]) -> Result<Self> {
        let (w, h) = (planes[0].width, planes[0].height);
        for p in &planes[1..] {
            if p.width != w || p.height != h {
                return Err(Error::DimensionMismatch {
                    expected: format!("{w}x{h}"),
                    actual: format!("{}x{}", p.width, p.height),
                });
            }
        }
        let mut data = Vec::with_capacity(w * h * CHANNELS);
        for i in 0..w * h {
            for p in &planes {
                data.push(clamp_unit(p.data[i]));
            }
        }
        Ok(Self {
            width: w,
            height: h,
            data,
        })
    }

    pub fn dims_match(&self, mask: &BinaryMask) -> bool {
        self.width == mask.width && self.height == mask.height
    }
}

/// Single-channel real raster. Values are not range-restricted.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), width * height, "plane buffer length");
        Self {
            width,
            height,
            data,
        }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::new(width, height, vec![0.0; width * height])
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    /// Edge-replicated access.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f32 {
        let xc = x.clamp(0, self.width as isize - 1) as usize;
        let yc = y.clamp(0, self.height as isize - 1) as usize;
        self.data[yc * self.width + xc]
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.data
            .iter()
            .map(|&v| {
                let d = v as f64 - m;
                d * d
            })
            .sum::<f64>()
            / self.data.len() as f64
    }
}

/// Binary segmentation mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width * height {
            return Err(Error::BufferLength {
                expected: width * height,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn empty(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![false; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self> {
        check_dims(width, height)?;
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn same_dims(&self, other: &BinaryMask) -> bool {
        self.width == other.width && self.height == other.height
    }
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidDimensions { width, height });
    }
    Ok(())
}

#[inline]
pub(crate) fn clamp_unit(v: f32) -> f32 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

fn decode(path: &Path) -> Result<DynamicImage> {
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    let img = reader.decode().map_err(|e| Error::Undecodable {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    match img.color() {
        ColorType::L8 | ColorType::La8 | ColorType::Rgb8 | ColorType::Rgba8 => Ok(img),
        other => Err(Error::UnsupportedBitDepth {
            path: path.to_path_buf(),
            color: format!("{other:?}"),
        }),
    }
}

/// Loads an 8-bit PNG or JPEG, mapping `[0,255]` onto `[0,1]`.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageTensor> {
    let path = path.as_ref();
    let rgb = decode(path)?.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let data = rgb.into_raw().into_iter().map(|v| v as f32 / 255.0).collect();
    ImageTensor::new(w, h, data)
}

/// Loads a mask, binarizing at 128/255 on the grayscale value.
pub fn load_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let path = path.as_ref();
    let luma = decode(path)?.to_luma8();
    let (w, h) = (luma.width() as usize, luma.height() as usize);
    let data = luma.into_raw().into_iter().map(|v| v >= 128).collect();
    BinaryMask::new(w, h, data)
}

pub fn to_rgb8(img: &ImageTensor) -> RgbImage {
    let raw = img
        .data
        .iter()
        .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    RgbImage::from_raw(img.width as u32, img.height as u32, raw).expect("buffer sized by tensor")
}

/// Writes an 8-bit RGB PNG.
pub fn save_png(img: &ImageTensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    to_rgb8(img)
        .save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Encode {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
}

/// Writes a mask as 8-bit grayscale PNG with values 0/255.
pub fn save_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let raw = mask.data.iter().map(|&b| if b { 255u8 } else { 0 }).collect();
    image::GrayImage::from_raw(mask.width as u32, mask.height as u32, raw)
        .expect("buffer sized by mask")
        .save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Encode {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
}

/// Bilinear resize with half-pixel center alignment and edge clamping.
pub fn resize_bilinear(img: &ImageTensor, width: usize, height: usize) -> Result<ImageTensor> {
    check_dims(width, height)?;
    if width == img.width && height == img.height {
        return Ok(img.clone());
    }
    let taps = |dst: usize, src: usize| -> Vec<(usize, usize, f32)> {
        let scale = src as f64 / dst as f64;
        (0..dst)
            .map(|i| {
                let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
                let i0 = s.floor() as usize;
                let i1 = (i0 + 1).min(src - 1);
                (i0, i1, (s - i0 as f64) as f32)
            })
            .collect()
    };
    let xs = taps(width, img.width);
    let ys = taps(height, img.height);
    let mut data = Vec::with_capacity(width * height * CHANNELS);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            for c in 0..CHANNELS {
                let top = img.get(x0, y0, c) * (1.0 - fx) + img.get(x1, y0, c) * fx;
                let bot = img.get(x0, y1, c) * (1.0 - fx) + img.get(x1, y1, c) * fx;
                data.push(top * (1.0 - fy) + bot * fy);
            }
        }
    }
    ImageTensor::from_vec_clamped(width, height, data)
}

/// Nearest-neighbor resize, which keeps masks binary.
pub fn resize_mask(mask: &BinaryMask, width: usize, height: usize) -> Result<BinaryMask> {
    check_dims(width, height)?;
    let sx = mask.width as f64 / width as f64;
    let sy = mask.height as f64 / height as f64;
    BinaryMask::from_fn(width, height, |x, y| {
        let xs = (((x as f64 + 0.5) * sx) as usize).min(mask.width - 1);
        let ys = (((y as f64 + 0.5) * sy) as usize).min(mask.height - 1);
        mask.get(xs, ys)
    })
}

pub const LUMA_WEIGHTS: [f32; 3] = [0.299, 0.587, 0.114];

/// Rec.601 luma.
pub fn luminance(img: &ImageTensor) -> Plane {
    let data = img
        .data
        .chunks_exact(CHANNELS)
        .map(|p| {
            (LUMA_WEIGHTS[0] * p[0] + LUMA_WEIGHTS[1] * p[1] + LUMA_WEIGHTS[2] * p[2])
                .clamp(0.0, 1.0)
        })
        .collect();
    Plane::new(img.width, img.height, data)
}

/// Tints mask pixels red over the image, for visual inspection.
pub fn overlay(img: &ImageTensor, mask: &BinaryMask, alpha: f32) -> Result<ImageTensor> {
    if !img.dims_match(mask) {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", img.width, img.height),
            actual: format!("{}x{}", mask.width, mask.height),
        });
    }
    const RED: [f32; 3] = [1.0, 0.0, 0.0];
    ImageTensor::from_fn_clamped(img.width, img.height, |x, y, c| {
        let v = img.get(x, y, c);
        if mask.get(x, y) {
            (1.0 - alpha) * v + alpha * RED[c]
        } else {
            v
        }
    })
}

/// Places two images of equal height next to each other.
pub fn side_by_side(left: &ImageTensor, right: &ImageTensor) -> Result<ImageTensor> {
    if left.height != right.height {
        return Err(Error::DimensionMismatch {
            expected: format!("height {}", left.height),
            actual: format!("height {}", right.height),
        });
    }
    let w = left.width + right.width;
    ImageTensor::from_fn_clamped(w, left.height, |x, y, c| {
        if x < left.width {
            left.get(x, y, c)
        } else {
            right.get(x - left.width, y, c)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn write_gray_png(dir: &Path, name: &str, w: u32, h: u32, v: u8) -> std::path::PathBuf {
        let p = dir.join(name);
        image::GrayImage::from_pixel(w, h, image::Luma([v]))
            .save(&p)
            .unwrap();
        p
    }

    #[test]
    fn black_and_white_pngs_map_to_unit_extremes() {
        let dir = tempfile::tempdir().unwrap();
        let black = load_image(write_gray_png(dir.path(), "b.png", 3, 2, 0)).unwrap();
        assert!(black.data().iter().all(|&v| v == 0.0));
        let white = load_image(write_gray_png(dir.path(), "w.png", 3, 2, 255)).unwrap();
        assert!(white.data().iter().all(|&v| v == 1.0));
        assert_eq!((white.width(), white.height()), (3, 2));
    }

    #[test]
    fn mid_gray_png_maps_to_128_over_255() {
        let dir = tempfile::tempdir().unwrap();
        let img = load_image(write_gray_png(dir.path(), "g.png", 2, 2, 128)).unwrap();
        for &v in img.data() {
            assert!((v - 0.501_96).abs() < 1e-5);
        }
    }

    #[test]
    fn load_errors_are_distinct() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_image(dir.path().join("nope.png")),
            Err(Error::FileNotFound(_))
        ));
        let junk = dir.path().join("junk.png");
        std::fs::write(&junk, b"definitely not an image").unwrap();
        assert!(matches!(load_image(&junk), Err(Error::Undecodable { .. })));
        let deep = dir.path().join("deep.png");
        image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::from_pixel(2, 2, image::Luma([40000]))
            .save(&deep)
            .unwrap();
        assert!(matches!(
            load_image(&deep),
            Err(Error::UnsupportedBitDepth { .. })
        ));
    }

    #[test]
    fn png_round_trip_within_one_level() {
        let dir = tempfile::tempdir().unwrap();
        let img = ImageTensor::from_fn_clamped(7, 5, |x, y, c| {
            ((x * 37 + y * 11 + c * 5) % 97) as f32 / 96.0
        })
        .unwrap();
        let p = dir.path().join("rt.png");
        save_png(&img, &p).unwrap();
        let back = load_image(&p).unwrap();
        save_png(&back, &p).unwrap();
        let again = load_image(&p).unwrap();
        for (a, b) in img.data().iter().zip(again.data()) {
            assert!((a - b).abs() <= 1.0 / 255.0 + 1e-6);
        }
    }

    #[test]
    fn masks_binarize_at_128() {
        let dir = tempfile::tempdir().unwrap();
        let raw = vec![0u8, 127, 128, 255];
        let p = dir.path().join("m.png");
        image::GrayImage::from_raw(4, 1, raw).unwrap().save(&p).unwrap();
        let m = load_mask(&p).unwrap();
        assert_eq!(m.data(), &[false, false, true, true]);
    }

    #[test]
    fn resize_identity_and_constant() {
        let img = ImageTensor::from_fn_clamped(5, 4, |x, y, c| (x + y + c) as f32 / 12.0).unwrap();
        assert_eq!(resize_bilinear(&img, 5, 4).unwrap(), img);
        let flat = ImageTensor::filled(6, 3, [0.3; 3]).unwrap();
        let r = resize_bilinear(&flat, 11, 17).unwrap();
        assert!(r.data().iter().all(|&v| (v - 0.3).abs() < 1e-6));
        assert!(matches!(
            resize_bilinear(&img, 0, 4),
            Err(Error::InvalidDimensions { .. })
        ));
    }

    #[test]
    fn upsampled_step_is_monotone() {
        let img = ImageTensor::new(2, 1, vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        let r = resize_bilinear(&img, 4, 1).unwrap();
        let row: Vec<f32> = (0..4).map(|x| r.get(x, 0, 0)).collect();
        // half-pixel centers: source positions -0.25, 0.25, 0.75, 1.25
        assert_eq!(row, vec![0.0, 0.25, 0.75, 1.0]);
    }

    #[test]
    fn resize_round_trip_on_smooth_gradient() {
        let (w, h) = (32, 24);
        let img = ImageTensor::from_fn_clamped(w, h, |x, y, c| {
            0.2 + 0.6 * (x as f32 / w as f32) * (0.5 + 0.5 * y as f32 / h as f32) - 0.05 * c as f32
        })
        .unwrap();
        let up = resize_bilinear(&img, 2 * w, 2 * h).unwrap();
        let down = resize_bilinear(&up, w, h).unwrap();
        for (a, b) in img.data().iter().zip(down.data()) {
            assert!((a - b).abs() <= 0.05);
        }
    }

    #[test]
    fn luminance_weights() {
        let img = ImageTensor::new(
            3,
            1,
            vec![1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.5, 0.5, 0.5],
        )
        .unwrap();
        let l = luminance(&img);
        assert!((l.data[0] - 1.0).abs() < 1e-6);
        assert!((l.data[1] - 0.299).abs() < 1e-7);
        assert!((l.data[2] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn nearest_mask_resize_stays_binary_and_sized() {
        let m = BinaryMask::from_fn(4, 4, |x, y| x < 2 && y < 2).unwrap();
        let up = resize_mask(&m, 8, 8).unwrap();
        assert_eq!(up.count(), 16);
        let down = resize_mask(&up, 4, 4).unwrap();
        assert_eq!(down, m);
    }

    #[test]
    fn constructor_rejects_out_of_range() {
        assert!(matches!(
            ImageTensor::new(1, 1, vec![0.0, 1.5, 0.0]),
            Err(Error::OutOfRange { index: 1, .. })
        ));
        assert!(matches!(
            ImageTensor::new(1, 1, vec![0.0]),
            Err(Error::BufferLength { .. })
        ));
    }

    proptest! {
        #[test]
        fn resize_preserves_range(w in 1usize..9, h in 1usize..9, tw in 1usize..20, th in 1usize..20, seed in any::<u64>()) {
            let img = ImageTensor::from_fn_clamped(w, h, |x, y, c| {
                let v = (seed.wrapping_mul(31).wrapping_add((x * 7 + y * 13 + c) as u64) % 1000) as f32;
                v / 999.0
            }).unwrap();
            let r = resize_bilinear(&img, tw, th).unwrap();
            prop_assert_eq!((r.width(), r.height()), (tw, th));
            prop_assert!(r.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
