//! Pixel-space objectives with analytic gradients, plus a central
//! finite-difference checker.

mod fd;
mod highlight;
mod reconstruction;
mod seam;
mod spec;

pub use self::fd::{fd_check, FdResult};
pub use self::highlight::highlight_loss;
pub use self::reconstruction::reconstruction_loss;
pub use self::seam::{seam_loss, seam_ring};
pub use self::spec::spec_penalty;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{BinaryMask, LinearImage};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub w_dice: f64,
    pub w_l1: f64,
    pub w_tv: f64,
    pub w_seam: f64,
    pub w_spec: f64,
    pub w_rgb: f64,
    pub lambda_g: f64,
    pub tau_m: f64,
    pub eps: f64,
    pub dice_smooth: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            w_dice: 0.2,
            w_l1: 0.7,
            w_tv: 0.1,
            w_seam: 0.25,
            w_spec: 0.25,
            w_rgb: 0.5,
            lambda_g: 1.0,
            tau_m: 0.85,
            eps: 1e-6,
            dice_smooth: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.w_dice, self.w_l1, self.w_tv, self.w_seam, self.w_spec, self.w_rgb, self.lambda_g, self.dice_smooth,
        ];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidArgument("loss weights must be finite and ≥ 0".into()));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidArgument(format!("eps must be > 0, got {}", self.eps)));
        }
        if !(self.tau_m > 0.0 && self.tau_m < 1.0) {
            return Err(Error::InvalidArgument(format!("tau_m must lie in (0,1), got {}", self.tau_m)));
        }
        Ok(())
    }
}

/// Weighted terms and their total. `gradient` is w.r.t. the prediction, laid
/// out like its data (interleaved RGB for images).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub total: f64,
    pub terms: BTreeMap<String, f64>,
    pub weights: BTreeMap<String, f64>,
    #[serde(skip)]
    pub gradient: Option<Vec<f64>>,
}

impl LossReport {
    pub(crate) fn from_terms(terms: &[(&str, f64, f64)], gradient: Option<Vec<f64>>) -> Self {
        let mut t = BTreeMap::new();
        let mut w = BTreeMap::new();
        let mut total = 0.0;
        for &(name, weight, value) in terms {
            total += weight * value;
            t.insert(name.to_string(), value);
            w.insert(name.to_string(), weight);
        }
        Self { total, terms: t, weights: w, gradient }
    }

    /// `Σ weight·term`, recomputed from the maps.
    pub fn weighted_sum(&self) -> f64 {
        self.terms.iter().map(|(k, v)| self.weights.get(k).copied().unwrap_or(0.0) * v).sum()
    }

    pub fn term(&self, name: &str) -> Option<f64> {
        self.terms.get(name).copied()
    }
}

pub(crate) fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Decoder fine-tuning objective `w_seam·L_seam + w_spec·L_spec + w_rgb·L_RGB`.
/// Gradient covers the differentiable parts (seam, spec, L1 of L_RGB).
pub fn decoder_loss(
    pred: &LinearImage,
    input: &LinearImage,
    reference: &LinearImage,
    sup_mask: &BinaryMask,
    ring: &BinaryMask,
    weights: &LossWeights,
) -> Result<LossReport> {
    weights.validate()?;
    let seam = seam_loss(pred, input, ring, weights.lambda_g)?;
    let spec = spec_penalty(pred, weights.tau_m, weights.eps)?;
    let rgb = reconstruction_loss(pred, reference, Some(sup_mask))?;
    let mut grad = vec![0.0; pred.as_slice().len()];
    for (w, g) in [(weights.w_seam, &seam.gradient), (weights.w_spec, &spec.gradient), (weights.w_rgb, &rgb.gradient)] {
        if let Some(g) = g {
            grad.iter_mut().zip(g).for_each(|(a, b)| *a += w * b);
        }
    }
    Ok(LossReport::from_terms(
        &[("seam", weights.w_seam, seam.total), ("spec", weights.w_spec, spec.total), ("rgb", weights.w_rgb, rgb.total)],
        Some(grad),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_validation() {
        let w = LossWeights::default();
        assert_eq!((w.w_dice, w.w_l1, w.w_tv), (0.2, 0.7, 0.1));
        assert_eq!((w.w_seam, w.w_spec, w.w_rgb), (0.25, 0.25, 0.5));
        assert_eq!((w.tau_m, w.eps), (0.85, 1e-6));
        assert!(w.validate().is_ok());
        assert!(LossWeights { w_tv: -1.0, ..w }.validate().is_err());
        assert!(LossWeights { eps: 0.0, ..w }.validate().is_err());
    }

    #[test]
    fn decoder_total_is_weighted_sum() {
        // 2×2: pred = input except one bright pixel; reference gray
        let input = LinearImage::new(2, 2, vec![0.2; 12]).unwrap();
        let mut pred = input.clone();
        pred.set_pixel(1, 1, [0.95; 3]);
        let reference = LinearImage::new(2, 2, vec![0.2; 12]).unwrap();
        let sup = BinaryMask::full(2, 2);
        let ring = BinaryMask::from_fn(2, 2, |x, y| x + y == 1);
        let w = LossWeights::default();
        let r = decoder_loss(&pred, &input, &reference, &sup, &ring, &w).unwrap();
        // seam: ring pixels equal; gradient term sees |0.75| once per ring pixel
        // (right/down neighbour of (1,0) and (0,1) is (1,1)) → (0.75 + 0.75)/2
        let seam = 0.75;
        let spec = ((0.95f64 - 0.85).powi(2) + 1e-12).sqrt();
        let rgb = r.term("rgb").unwrap();
        assert!((r.term("seam").unwrap() - seam).abs() < 1e-6);
        assert!((r.term("spec").unwrap() - spec).abs() < 1e-6);
        let (s, p) = (r.term("seam").unwrap(), r.term("spec").unwrap());
        assert!((r.total - (0.25 * s + 0.25 * p + 0.5 * rgb)).abs() < 1e-12);
        assert!((r.total - r.weighted_sum()).abs() < 1e-12);
    }
}
