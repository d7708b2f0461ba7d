use super::{sign, LossReport};
use crate::error::{Error, Result};
use crate::image::{BinaryMask, LinearImage};

/// `dilate(mask, square of side 2r+1) − mask`.
pub fn seam_ring(mask: &BinaryMask, radius: usize) -> Result<BinaryMask> {
    if radius == 0 {
        return Err(Error::InvalidArgument("seam ring radius must be ≥ 1".into()));
    }
    let (w, h) = mask.dims();
    let src = mask.as_slice();
    let mut horiz = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let (lo, hi) = (x.saturating_sub(radius), (x + radius).min(w - 1));
            horiz[y * w + x] = (lo..=hi).any(|xx| src[y * w + xx]);
        }
    }
    Ok(BinaryMask::from_fn(w, h, |x, y| {
        let (lo, hi) = (y.saturating_sub(radius), (y + radius).min(h - 1));
        !src[y * w + x] && (lo..=hi).any(|yy| horiz[yy * w + x])
    }))
}

/// Mean colour difference on the ring plus `lambda_g` times the mean forward
/// difference mismatch, each normalized by ring size.
pub fn seam_loss(pred: &LinearImage, input: &LinearImage, ring: &BinaryMask, lambda_g: f64) -> Result<LossReport> {
    pred.ensure_same_dims(input.dims())?;
    pred.ensure_same_dims(ring.dims())?;
    let (w, h) = pred.dims();
    let (p, q) = (pred.as_slice(), input.as_slice());
    let mut g_color = vec![0.0; p.len()];
    let mut g_grad = vec![0.0; p.len()];
    let n = ring.count();
    if n == 0 {
        return Ok(LossReport::from_terms(&[("color", 1.0, 0.0), ("gradient", lambda_g, 0.0)], Some(g_color)));
    }
    let scale = 1.0 / (3.0 * n as f64);
    let (mut color, mut gradient) = (0.0, 0.0);
    let val = |s: &[f32], i: usize| s[i] as f64;
    for y in 0..h {
        for x in 0..w {
            if !ring.get(x, y) {
                continue;
            }
            let base = (y * w + x) * 3;
            let mut neighbours = Vec::with_capacity(2);
            if x + 1 < w {
                neighbours.push(base + 3);
            }
            if y + 1 < h {
                neighbours.push(base + 3 * w);
            }
            for c in 0..3 {
                let i = base + c;
                let d = val(p, i) - val(q, i);
                color += d.abs();
                g_color[i] += sign(d) * scale;
                for &nb in &neighbours {
                    let j = nb + c;
                    let dd = (val(p, j) - val(p, i)) - (val(q, j) - val(q, i));
                    gradient += dd.abs();
                    g_grad[j] += sign(dd) * scale;
                    g_grad[i] -= sign(dd) * scale;
                }
            }
        }
    }
    let grad = g_color.iter().zip(&g_grad).map(|(a, b)| a + lambda_g * b).collect();
    Ok(LossReport::from_terms(&[("color", 1.0, color * scale), ("gradient", lambda_g, gradient * scale)], Some(grad)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_examples() {
        assert!(seam_ring(&BinaryMask::empty(5, 5), 1).unwrap().is_empty());
        assert!(seam_ring(&BinaryMask::full(5, 5), 2).unwrap().is_empty());
        let dot = BinaryMask::from_fn(5, 5, |x, y| x == 2 && y == 2);
        let ring = seam_ring(&dot, 1).unwrap();
        assert_eq!(ring.count(), 8);
        for y in 0..5 {
            for x in 0..5 {
                let expect = (1..=3).contains(&x) && (1..=3).contains(&y) && !(x == 2 && y == 2);
                assert_eq!(ring.get(x, y), expect);
            }
        }
        assert!(seam_ring(&dot, 0).is_err());
    }

    #[test]
    fn ring_matches_brute_force_dilation() {
        let m = BinaryMask::from_fn(13, 9, |x, y| (x * 7 + y * 3) % 11 == 0);
        for r in 1..4 {
            let ring = seam_ring(&m, r).unwrap();
            for y in 0..9i64 {
                for x in 0..13i64 {
                    let mut hit = false;
                    for yy in 0..9i64 {
                        for xx in 0..13i64 {
                            if (xx - x).abs() <= r as i64 && (yy - y).abs() <= r as i64 && m.get(xx as usize, yy as usize) {
                                hit = true;
                            }
                        }
                    }
                    assert_eq!(ring.get(x as usize, y as usize), hit && !m.get(x as usize, y as usize));
                }
            }
        }
    }

    #[test]
    fn offset_and_fixed_points() {
        let input = LinearImage::from_fn(6, 6, |x, y| [0.1 * x as f32, 0.05 * y as f32, 0.3]);
        let ring = BinaryMask::from_fn(6, 6, |x, y| x == 1 || y == 4);
        assert_eq!(seam_loss(&input, &input, &ring, 1.0).unwrap().total, 0.0);
        let shifted = input.map(|v| v + 0.1);
        let r = seam_loss(&shifted, &input, &ring, 3.0).unwrap();
        assert!((r.total - 0.1).abs() < 1e-6);
        assert!(r.term("gradient").unwrap() < 1e-6);
        assert_eq!(seam_loss(&shifted, &input, &BinaryMask::empty(6, 6), 1.0).unwrap().total, 0.0);
    }
}
