use crate::error::{Error, Result};
use crate::image::BinaryMask;

fn counts(a: &BinaryMask, b: &BinaryMask) -> Result<(usize, usize, usize)> {
    if !a.same_dims(b) {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", a.width(), a.height()),
            actual: format!("{}x{}", b.width(), b.height()),
        });
    }
    let (mut inter, mut na, mut nb) = (0, 0, 0);
    for (&x, &y) in a.data().iter().zip(b.data()) {
        inter += (x && y) as usize;
        na += x as usize;
        nb += y as usize;
    }
    Ok((inter, na, nb))
}

/// `2|A∩B| / (|A|+|B|)`; two empty masks score 1.
pub fn dice(pred: &BinaryMask, truth: &BinaryMask) -> Result<f64> {
    let (inter, na, nb) = counts(pred, truth)?;
    if na + nb == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (na + nb) as f64)
}

/// `|A∩B| / |A∪B|`; two empty masks score 1.
pub fn miou(pred: &BinaryMask, truth: &BinaryMask) -> Result<f64> {
    let (inter, na, nb) = counts(pred, truth)?;
    let union = na + nb - inter;
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mask(bits: &[u8], w: usize) -> BinaryMask {
        BinaryMask::new(w, bits.len() / w, bits.iter().map(|&b| b == 1).collect()).unwrap()
    }

    #[test]
    fn identical_and_disjoint() {
        let a = mask(&[1, 1, 0, 0], 2);
        let b = mask(&[0, 0, 1, 1], 2);
        assert_eq!(dice(&a, &a).unwrap(), 1.0);
        assert_eq!(miou(&a, &a).unwrap(), 1.0);
        assert_eq!(dice(&a, &b).unwrap(), 0.0);
        assert_eq!(miou(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn formula_arithmetic() {
        let a = mask(&[1, 1, 1, 1, 0, 0, 0, 0], 4);
        let b = mask(&[0, 0, 1, 1, 1, 1, 0, 0], 4);
        assert_eq!(dice(&a, &b).unwrap(), 0.5);
        assert!((miou(&a, &b).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn both_empty_scores_one() {
        let e = BinaryMask::empty(3, 3).unwrap();
        assert_eq!(dice(&e, &e).unwrap(), 1.0);
        assert_eq!(miou(&e, &e).unwrap(), 1.0);
    }

    #[test]
    fn dimension_mismatch() {
        let a = BinaryMask::empty(3, 3).unwrap();
        let b = BinaryMask::empty(3, 4).unwrap();
        assert!(dice(&a, &b).is_err());
        assert!(miou(&a, &b).is_err());
    }

    proptest! {
        #[test]
        fn symmetric_bounded_and_linked(bits in prop::collection::vec(0u8..4, 128)) {
            let a = BinaryMask::new(8, 8, bits[..64].iter().map(|&v| v & 1 == 1).collect()).unwrap();
            let b = BinaryMask::new(8, 8, bits[64..].iter().map(|&v| v & 2 == 2).collect()).unwrap();
            let d = dice(&a, &b).unwrap();
            let j = miou(&a, &b).unwrap();
            prop_assert_eq!(d, dice(&b, &a).unwrap());
            prop_assert_eq!(j, miou(&b, &a).unwrap());
            prop_assert!((0.0..=1.0).contains(&d) && (0.0..=1.0).contains(&j));
            prop_assert!((j - d / (2.0 - d)).abs() < 1e-12);
            prop_assert_eq!(d == 1.0, a == b);
        }
    }
}
