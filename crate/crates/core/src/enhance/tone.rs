use crate::image::ImageTensor;

/// Pointwise power law `out = in^gamma`.
pub fn gamma_correction(img: &ImageTensor, gamma: f64) -> ImageTensor {
    let data = img
        .data()
        .iter()
        .map(|&v| (v as f64).powf(gamma) as f32)
        .collect();
    ImageTensor::from_vec_clamped(img.width(), img.height(), data).expect("same dims")
}

/// Per-channel multiplicative gains.
pub fn white_balance_gain(img: &ImageTensor, gains: [f64; 3]) -> ImageTensor {
    let data = img
        .data()
        .chunks_exact(3)
        .flat_map(|p| {
            [
                (p[0] as f64 * gains[0]) as f32,
                (p[1] as f64 * gains[1]) as f32,
                (p[2] as f64 * gains[2]) as f32,
            ]
        })
        .collect();
    ImageTensor::from_vec_clamped(img.width(), img.height(), data).expect("same dims")
}
