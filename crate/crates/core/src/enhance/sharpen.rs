use crate::filter::gaussian_blur_image;
use crate::image::ImageTensor;

/// `out = img + amount * (img - blur(img, sigma))`.
pub fn unsharp_mask(img: &ImageTensor, amount: f64, sigma: f64) -> ImageTensor {
    let blurred = gaussian_blur_image(img, sigma as f32);
    let a = amount as f32;
    let data = img
        .data()
        .iter()
        .zip(blurred.data())
        .map(|(&v, &b)| v + a * (v - b))
        .collect();
    ImageTensor::from_vec_clamped(img.width(), img.height(), data).expect("same dims")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::luminance;
    use crate::perception::blur_score;

    #[test]
    fn sharpening_raises_laplacian_energy() {
        let img = ImageTensor::from_fn_clamped(32, 32, |x, _, _| if x < 16 { 0.3 } else { 0.6 })
            .unwrap();
        let soft = gaussian_blur_image(&img, 2.0);
        let sharp = unsharp_mask(&soft, 1.5, 2.0);
        assert!(blur_score(&luminance(&sharp)) > blur_score(&luminance(&soft)));
    }
}
