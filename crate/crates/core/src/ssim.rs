//! Windowed SSIM shared by the metric and the reconstruction loss.
//!
//! Gaussian window 11×11, σ = 1.5, K1 = 0.01, K2 = 0.03, dynamic range 1.
//! Window weights are clipped at the image border (and, when a mask is given,
//! restricted to masked pixels) and renormalized, so every pixel gets a value.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{BinaryMask, LinearImage};

pub const WINDOW: usize = 11;
pub const SIGMA: f64 = 1.5;
pub const K1: f64 = 0.01;
pub const K2: f64 = 0.03;
pub const C1: f64 = K1 * K1;
pub const C2: f64 = K2 * K2;

const RADIUS: usize = WINDOW / 2;

fn kernel() -> [f64; WINDOW] {
    let mut k = [0.0; WINDOW];
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - RADIUS as f64;
        *v = (-d * d / (2.0 * SIGMA * SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

#[inline]
fn ssim_from_moments(mu_a: f64, mu_b: f64, aa: f64, bb: f64, ab: f64) -> f64 {
    let va = aa - mu_a * mu_a;
    let vb = bb - mu_b * mu_b;
    let cov = ab - mu_a * mu_b;
    ((2.0 * mu_a * mu_b + C1) * (2.0 * cov + C2)) / ((mu_a * mu_a + mu_b * mu_b + C1) * (va + vb + C2))
}

/// Per-pixel SSIM averaged over channels, row-major.
/// With a mask, pixels outside it are set to 0 and never enter any window.
pub fn ssim_map(a: &LinearImage, b: &LinearImage, mask: Option<&BinaryMask>) -> Result<Vec<f64>> {
    a.ensure_same_dims(b.dims())?;
    if let Some(m) = mask {
        a.ensure_same_dims(m.dims())?;
        return Ok(masked_map(a, b, m));
    }
    Ok(separable_map(a, b))
}

fn separable_map(a: &LinearImage, b: &LinearImage) -> Vec<f64> {
    let (w, h) = a.dims();
    let k = kernel();
    let (sa, sb) = (a.as_slice(), b.as_slice());
    // 5 moments × 3 channels, blurred horizontally then vertically
    let n = w * h;
    let mut horiz = vec![[0.0f64; 15]; n];
    horiz.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, out) in row.iter_mut().enumerate() {
            let lo = x.saturating_sub(RADIUS);
            let hi = (x + RADIUS).min(w - 1);
            let mut norm = 0.0;
            for xx in lo..=hi {
                let wt = k[xx + RADIUS - x];
                norm += wt;
                let i = (y * w + xx) * 3;
                for c in 0..3 {
                    let (va, vb) = (sa[i + c] as f64, sb[i + c] as f64);
                    out[c * 5] += wt * va;
                    out[c * 5 + 1] += wt * vb;
                    out[c * 5 + 2] += wt * va * va;
                    out[c * 5 + 3] += wt * vb * vb;
                    out[c * 5 + 4] += wt * va * vb;
                }
            }
            out.iter_mut().for_each(|v| *v /= norm);
        }
    });
    let mut map = vec![0.0; n];
    map.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let lo = y.saturating_sub(RADIUS);
        let hi = (y + RADIUS).min(h - 1);
        for (x, out) in row.iter_mut().enumerate() {
            let mut acc = [0.0f64; 15];
            let mut norm = 0.0;
            for yy in lo..=hi {
                let wt = k[yy + RADIUS - y];
                norm += wt;
                for (s, v) in acc.iter_mut().zip(&horiz[yy * w + x]) {
                    *s += wt * v;
                }
            }
            let mut total = 0.0;
            for c in 0..3 {
                let m = &acc[c * 5..c * 5 + 5];
                total += ssim_from_moments(m[0] / norm, m[1] / norm, m[2] / norm, m[3] / norm, m[4] / norm);
            }
            *out = total / 3.0;
        }
    });
    map
}

fn masked_map(a: &LinearImage, b: &LinearImage, mask: &BinaryMask) -> Vec<f64> {
    let (w, h) = a.dims();
    let k = kernel();
    let (sa, sb, sm) = (a.as_slice(), b.as_slice(), mask.as_slice());
    let mut map = vec![0.0; w * h];
    map.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let (ylo, yhi) = (y.saturating_sub(RADIUS), (y + RADIUS).min(h - 1));
        for (x, out) in row.iter_mut().enumerate() {
            if !sm[y * w + x] {
                continue;
            }
            let (xlo, xhi) = (x.saturating_sub(RADIUS), (x + RADIUS).min(w - 1));
            let mut acc = [0.0f64; 15];
            let mut norm = 0.0;
            for yy in ylo..=yhi {
                let wy = k[yy + RADIUS - y];
                for xx in xlo..=xhi {
                    if !sm[yy * w + xx] {
                        continue;
                    }
                    let wt = wy * k[xx + RADIUS - x];
                    norm += wt;
                    let i = (yy * w + xx) * 3;
                    for c in 0..3 {
                        let (va, vb) = (sa[i + c] as f64, sb[i + c] as f64);
                        acc[c * 5] += wt * va;
                        acc[c * 5 + 1] += wt * vb;
                        acc[c * 5 + 2] += wt * va * va;
                        acc[c * 5 + 3] += wt * vb * vb;
                        acc[c * 5 + 4] += wt * va * vb;
                    }
                }
            }
            let mut total = 0.0;
            for c in 0..3 {
                let m = &acc[c * 5..c * 5 + 5];
                total += ssim_from_moments(m[0] / norm, m[1] / norm, m[2] / norm, m[3] / norm, m[4] / norm);
            }
            *out = total / 3.0;
        }
    });
    map
}

/// Canonical SSIM: mean over pixels whose window lies fully inside the image.
pub fn ssim(a: &LinearImage, b: &LinearImage) -> Result<f64> {
    a.ensure_same_dims(b.dims())?;
    let (w, h) = a.dims();
    if w < WINDOW || h < WINDOW {
        return Err(Error::ImageTooSmall { width: w, height: h, min: WINDOW });
    }
    let map = separable_map(a, b);
    let mut sum = 0.0;
    for y in RADIUS..h - RADIUS {
        sum += map[y * w + RADIUS..y * w + w - RADIUS].iter().sum::<f64>();
    }
    Ok(sum / ((w - 2 * RADIUS) * (h - 2 * RADIUS)) as f64)
}

/// Mean of the SSIM map over `mask` (or every pixel). `None` when the mask is empty.
pub fn masked_mean_ssim(a: &LinearImage, b: &LinearImage, mask: Option<&BinaryMask>) -> Result<Option<f64>> {
    let map = ssim_map(a, b, mask)?;
    match mask {
        None => Ok(Some(map.iter().sum::<f64>() / map.len() as f64)),
        Some(m) => {
            let n = m.count();
            if n == 0 {
                return Ok(None);
            }
            Ok(Some(map.iter().zip(m.as_slice()).filter(|(_, &s)| s).map(|(v, _)| v).sum::<f64>() / n as f64))
        }
    }
}
