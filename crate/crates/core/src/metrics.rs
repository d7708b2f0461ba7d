//! Evaluation metrics: masked MSE, PSNR, SSIM and a luminance suppression ratio.

use serde::{Deserialize, Serialize, Serializer};

use crate::color::{luminance_with, LuminanceMode};
use crate::error::{Error, Result};
use crate::image::{BinaryMask, LinearImage};

pub use crate::ssim::ssim;

/// Identifier reported alongside every LSR value.
pub const LSR_DEFINITION: &str = "lsr_standin_v1";
const LSR_DELTA: f64 = 1e-6;

/// Mean over mask pixels and channels of `(pred − ref)²`.
pub fn mse_masked(pred: &LinearImage, reference: &LinearImage, mask: &BinaryMask) -> Result<f64> {
    pred.ensure_same_dims(reference.dims())?;
    pred.ensure_same_dims(mask.dims())?;
    let n = mask.count();
    if n == 0 {
        return Err(Error::UndefinedMetric("mse_masked over an empty mask"));
    }
    let (p, r) = (pred.as_slice(), reference.as_slice());
    let mut sum = 0.0;
    for (i, _) in mask.as_slice().iter().enumerate().filter(|(_, &m)| m) {
        for c in 3 * i..3 * i + 3 {
            let d = p[c] as f64 - r[c] as f64;
            sum += d * d;
        }
    }
    Ok(sum / (3 * n) as f64)
}

pub fn mse(pred: &LinearImage, reference: &LinearImage) -> Result<f64> {
    pred.ensure_same_dims(reference.dims())?;
    let sum: f64 = pred
        .as_slice()
        .iter()
        .zip(reference.as_slice())
        .map(|(&a, &b)| (a as f64 - b as f64).powi(2))
        .sum();
    Ok(sum / pred.as_slice().len() as f64)
}

/// PSNR in dB for dynamic range 1; identical images give `Infinite`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Psnr {
    Finite(f64),
    Infinite,
}

impl Psnr {
    pub fn from_mse(mse: f64) -> Self {
        if mse == 0.0 {
            Psnr::Infinite
        } else {
            Psnr::Finite(10.0 * (1.0 / mse).log10())
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Psnr::Finite(v) => v,
            Psnr::Infinite => f64::INFINITY,
        }
    }
}

impl Serialize for Psnr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Psnr::Finite(v) => s.serialize_f64(*v),
            Psnr::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Psnr {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Psnr::Finite(v)),
            Raw::Str(s) if s == "inf" => Ok(Psnr::Infinite),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("unexpected PSNR value {s:?}"))),
        }
    }
}

pub fn psnr(pred: &LinearImage, reference: &LinearImage) -> Result<Psnr> {
    Ok(Psnr::from_mse(mse(pred, reference)?))
}

fn region_means(y: &[f32], mask: &BinaryMask) -> (f64, f64) {
    let (mut hl, mut bg, mut nh, mut nb) = (0.0, 0.0, 0usize, 0usize);
    for (&v, &m) in y.iter().zip(mask.as_slice()) {
        if m {
            hl += v as f64;
            nh += 1;
        } else {
            bg += v as f64;
            nb += 1;
        }
    }
    (hl / nh as f64, bg / nb as f64)
}

/// Luminance suppression ratio (stand-in definition `lsr_standin_v1`):
/// highlight-over-background luminance contrast `(E_hl − E_bg) / E_bg` of the
/// output, relative to that of the input. 0 is full suppression; uniform
/// scaling of the output leaves it unchanged.
pub fn lsr(input: &LinearImage, output: &LinearImage, hl_mask: &BinaryMask, mode: LuminanceMode) -> Result<f64> {
    input.ensure_same_dims(output.dims())?;
    input.ensure_same_dims(hl_mask.dims())?;
    let n = hl_mask.count();
    if n == 0 || n == hl_mask.as_slice().len() {
        return Err(Error::UndefinedMetric("lsr needs a non-empty highlight mask and background"));
    }
    let contrast = |img: &LinearImage| {
        let (hl, bg) = region_means(luminance_with(img, mode).as_slice(), hl_mask);
        (hl - bg) / bg.max(LSR_DELTA)
    };
    let c_in = contrast(input);
    if c_in <= 0.0 {
        return Err(Error::UndefinedMetric("lsr: input highlights are not brighter than background"));
    }
    Ok(contrast(output).max(0.0) / c_in.max(LSR_DELTA))
}

/// Metrics for one prediction. Optional entries are `null` when the needed
/// inputs (mask, highlighted input) are unavailable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mse_m: Option<f64>,
    pub psnr: Psnr,
    pub ssim: f64,
    pub lsr: Option<f64>,
    pub lsr_definition: String,
    pub mask_coverage: Option<f64>,
}

/// Evaluates `pred` against `reference`. `mask` restricts MSE_m; `input`
/// (the highlighted image) enables LSR using the same mask.
pub fn evaluate(
    pred: &LinearImage,
    reference: &LinearImage,
    mask: Option<&BinaryMask>,
    input: Option<&LinearImage>,
    mode: LuminanceMode,
) -> Result<MetricReport> {
    let mse_m = match mask {
        Some(m) if !m.is_empty() => Some(mse_masked(pred, reference, m)?),
        _ => None,
    };
    let lsr_value = match (input, mask) {
        (Some(inp), Some(m)) => lsr(inp, pred, m, mode).ok(),
        _ => None,
    };
    Ok(MetricReport {
        mse_m,
        psnr: psnr(pred, reference)?,
        ssim: ssim(pred, reference)?,
        lsr: lsr_value,
        lsr_definition: LSR_DEFINITION.to_string(),
        mask_coverage: mask.map(|m| m.count() as f64 / m.as_slice().len() as f64),
    })
}
