use super::{sign, LossReport};
use crate::error::Result;
use crate::image::{BinaryMask, LinearImage};
use crate::ssim::masked_mean_ssim;

/// Masked-mean L1 plus `1 − masked-mean SSIM`. Without a mask every pixel
/// counts; an empty mask yields 0. The gradient covers the L1 term only.
pub fn reconstruction_loss(pred: &LinearImage, reference: &LinearImage, sup_mask: Option<&BinaryMask>) -> Result<LossReport> {
    pred.ensure_same_dims(reference.dims())?;
    if let Some(m) = sup_mask {
        pred.ensure_same_dims(m.dims())?;
    }
    let (p, r) = (pred.as_slice(), reference.as_slice());
    let mut grad = vec![0.0; p.len()];
    let Some(ssim) = masked_mean_ssim(pred, reference, sup_mask)? else {
        return Ok(LossReport::from_terms(&[("l1", 1.0, 0.0), ("ssim", 1.0, 0.0)], Some(grad)));
    };
    let selected = |i: usize| sup_mask.is_none_or(|m| m.as_slice()[i]);
    let count = (0..pred.pixel_count()).filter(|&i| selected(i)).count() as f64 * 3.0;
    let mut l1 = 0.0;
    for i in (0..pred.pixel_count()).filter(|&i| selected(i)) {
        for c in 3 * i..3 * i + 3 {
            let d = p[c] as f64 - r[c] as f64;
            l1 += d.abs();
            grad[c] = sign(d) / count;
        }
    }
    Ok(LossReport::from_terms(&[("l1", 1.0, l1 / count), ("ssim", 1.0, 1.0 - ssim)], Some(grad)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_is_zero() {
        let a = LinearImage::from_fn(8, 6, |x, y| [x as f32 / 8.0, y as f32 / 6.0, 0.3]);
        let r = reconstruction_loss(&a, &a, None).unwrap();
        assert!(r.total.abs() < 1e-12);
    }

    #[test]
    fn constant_example() {
        let a = LinearImage::filled(4, 4, [0.0; 3]);
        let b = LinearImage::filled(4, 4, [0.5; 3]);
        let r = reconstruction_loss(&a, &b, None).unwrap();
        assert!((r.term("l1").unwrap() - 0.5).abs() < 1e-12);
        assert!((r.total - 1.4996).abs() < 1e-4);
        assert!((r.total - (1.5 - 1e-4 / 0.2501)).abs() < 1e-9);
    }

    #[test]
    fn garbage_outside_mask_is_ignored() {
        let b = LinearImage::from_fn(12, 12, |x, y| [0.1 + 0.05 * (x % 3) as f32, 0.2, 0.05 * (y % 4) as f32]);
        let mask = BinaryMask::from_fn(12, 12, |x, y| !(3..7).contains(&x) || !(2..9).contains(&y));
        let mut garbage = b.clone();
        for y in 2..9 {
            for x in 3..7 {
                garbage.set_pixel(x, y, [1.0, 0.0, 1.0]);
            }
        }
        let clean = reconstruction_loss(&b, &b, Some(&mask)).unwrap();
        let dirty = reconstruction_loss(&garbage, &b, Some(&mask)).unwrap();
        assert_eq!(clean.total, dirty.total);
        assert!(dirty.total.abs() < 1e-12);
    }

    #[test]
    fn empty_mask_is_zero() {
        let a = LinearImage::filled(3, 3, [0.0; 3]);
        let b = LinearImage::filled(3, 3, [1.0; 3]);
        let r = reconstruction_loss(&a, &b, Some(&BinaryMask::empty(3, 3))).unwrap();
        assert_eq!(r.total, 0.0);
    }
}
