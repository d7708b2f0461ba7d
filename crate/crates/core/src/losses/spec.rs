use super::LossReport;
use crate::error::{Error, Result};
use crate::image::LinearImage;

/// Charbonnier penalty on the channel-mean brightness of pixels above `tau_m`,
/// averaged over those pixels.
pub fn spec_penalty(pred: &LinearImage, tau_m: f64, eps: f64) -> Result<LossReport> {
    if !(tau_m > 0.0 && tau_m < 1.0) || !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("spec penalty needs tau_m in (0,1) and eps > 0, got {tau_m}, {eps}")));
    }
    let p = pred.as_slice();
    let bright: Vec<(usize, f64)> = p
        .chunks_exact(3)
        .enumerate()
        .map(|(i, c)| (i, (c[0] as f64 + c[1] as f64 + c[2] as f64) / 3.0))
        .filter(|&(_, b)| b > tau_m)
        .collect();
    let mut grad = vec![0.0; p.len()];
    if bright.is_empty() {
        return Ok(LossReport::from_terms(&[("spec", 1.0, 0.0)], Some(grad)));
    }
    let n = bright.len() as f64;
    let mut sum = 0.0;
    for &(i, b) in &bright {
        let r = ((b - tau_m).powi(2) + eps * eps).sqrt();
        sum += r;
        let g = (b - tau_m) / r / (3.0 * n);
        grad[3 * i..3 * i + 3].iter_mut().for_each(|v| *v = g);
    }
    Ok(LossReport::from_terms(&[("spec", 1.0, sum / n)], Some(grad)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let dim = LinearImage::filled(4, 4, [0.849; 3]);
        assert_eq!(spec_penalty(&dim, 0.85, 1e-6).unwrap().total, 0.0);

        let mut one = LinearImage::filled(3, 3, [0.2; 3]);
        one.set_pixel(1, 1, [0.95; 3]);
        let v = spec_penalty(&one, 0.85, 1e-6).unwrap().total;
        let b = (0.95f32 as f64 * 3.0) / 3.0;
        assert!((v - ((b - 0.85).powi(2) + 1e-12).sqrt()).abs() < 1e-12);
        assert!((v - 0.1).abs() < 1e-6);

        for n in [2, 7, 16] {
            let white = LinearImage::filled(n, n, [1.0; 3]);
            assert!((spec_penalty(&white, 0.85, 1e-6).unwrap().total - 0.15).abs() < 1e-6);
        }
    }
}
