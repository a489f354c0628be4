use crate::haar::HaarPyramid;
use crate::image::ImageTensor;

pub const WAVELET_LEVELS: usize = 3;

/// Per-channel soft thresholding of 3-level Haar detail coefficients.
pub fn wavelet_denoise(img: &ImageTensor, threshold: f64) -> ImageTensor {
    let planes: Vec<_> = (0..3)
        .map(|c| {
            let mut pyr = HaarPyramid::forward(&img.channel(c), WAVELET_LEVELS);
            pyr.soft_threshold(threshold);
            pyr.inverse()
        })
        .collect();
    ImageTensor::from_planes([&planes[0], &planes[1], &planes[2]]).expect("same dims")
}
