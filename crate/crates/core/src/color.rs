//! sRGB transfer functions and luminance.

use serde::{Deserialize, Serialize};

use crate::image::{LinearImage, ScalarMap};

/// sRGB electro-optical transfer: encoded value in [0,1] to linear light.
#[inline]
pub fn srgb_eotf(encoded: f32) -> f32 {
    let c = encoded as f64;
    let lin = if c <= 0.04045 { c / 12.92 } else { ((c + 0.055) / 1.055).powf(2.4) };
    lin as f32
}

/// Inverse of [`srgb_eotf`].
#[inline]
pub fn srgb_oetf(linear: f32) -> f32 {
    let l = (linear as f64).clamp(0.0, 1.0);
    let enc = if l <= 0.0031308 { l * 12.92 } else { 1.055 * l.powf(1.0 / 2.4) - 0.055 };
    enc as f32
}

/// Bit depth of an encoded image buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn max_code(self) -> u32 {
        match self {
            BitDepth::Eight => 255,
            BitDepth::Sixteen => 65535,
        }
    }
}

/// Decodes one sRGB code to linear light.
pub fn srgb_code_to_linear(code: u16, depth: BitDepth) -> f32 {
    let max = depth.max_code();
    let code = (code as u32).min(max);
    if code == 0 {
        return 0.0;
    }
    if code == max {
        return 1.0;
    }
    srgb_eotf(code as f32 / max as f32)
}

/// Encodes linear light to the nearest sRGB code.
pub fn linear_to_srgb_code(linear: f32, depth: BitDepth) -> u16 {
    let max = depth.max_code() as f32;
    (srgb_oetf(linear) * max).round().clamp(0.0, max) as u16
}

/// Converts interleaved RGB codes to a linear image.
pub fn srgb_to_linear(width: usize, height: usize, codes: &[u16], depth: BitDepth) -> crate::Result<LinearImage> {
    // 8-bit decoding goes through a 256-entry table; the hot path for dataset generation.
    let data = match depth {
        BitDepth::Eight => {
            let lut: Vec<f32> = (0..=255u16).map(|c| srgb_code_to_linear(c, depth)).collect();
            codes.iter().map(|&c| lut[(c.min(255)) as usize]).collect()
        }
        BitDepth::Sixteen => codes.iter().map(|&c| srgb_code_to_linear(c, depth)).collect(),
    };
    LinearImage::new(width, height, data)
}

pub fn linear_to_srgb(img: &LinearImage, depth: BitDepth) -> Vec<u16> {
    img.as_slice().iter().map(|&v| linear_to_srgb_code(v, depth)).collect()
}

/// Which luminance definition to use for thresholding.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LuminanceMode {
    /// Unweighted channel mean, B = (R+G+B)/3.
    #[default]
    Mean,
    /// Rec.709 luma weights on linear values.
    Rec709,
}

impl LuminanceMode {
    #[inline]
    pub fn apply(self, rgb: [f32; 3]) -> f32 {
        match self {
            LuminanceMode::Mean => ((rgb[0] as f64 + rgb[1] as f64 + rgb[2] as f64) / 3.0) as f32,
            LuminanceMode::Rec709 => {
                (0.2126 * rgb[0] as f64 + 0.7152 * rgb[1] as f64 + 0.0722 * rgb[2] as f64) as f32
            }
        }
    }
}

/// Per-pixel channel mean.
pub fn luminance(img: &LinearImage) -> ScalarMap {
    luminance_with(img, LuminanceMode::Mean)
}

pub fn luminance_with(img: &LinearImage, mode: LuminanceMode) -> ScalarMap {
    let data = img.pixels().map(|p| mode.apply(p)).collect();
    ScalarMap::new(img.width(), img.height(), data).expect("luminance of a finite image is finite")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn eotf_fixed_points() {
        assert_eq!(srgb_code_to_linear(0, BitDepth::Eight), 0.0);
        assert_eq!(srgb_code_to_linear(255, BitDepth::Eight), 1.0);
        assert_eq!(srgb_code_to_linear(0, BitDepth::Sixteen), 0.0);
        assert_eq!(srgb_code_to_linear(65535, BitDepth::Sixteen), 1.0);
    }

    #[test]
    fn eotf_code_128() {
        // ((128/255 + 0.055) / 1.055)^2.4
        let c = 128.0f64 / 255.0;
        let expected = ((c + 0.055) / 1.055).powf(2.4);
        assert!((expected - 0.2158605).abs() < 1e-6);
        let got = srgb_code_to_linear(128, BitDepth::Eight) as f64;
        assert!((got - expected).abs() < 1e-7, "{got} vs {expected}");
    }

    #[test]
    fn eotf_strictly_monotone_and_round_trips() {
        for depth in [BitDepth::Eight, BitDepth::Sixteen] {
            let max = depth.max_code() as u16;
            let mut prev = -1.0f32;
            for code in 0..=max {
                let lin = srgb_code_to_linear(code, depth);
                assert!(lin > prev, "not strictly monotone at {code}");
                prev = lin;
                let back = linear_to_srgb_code(lin, depth);
                assert!((back as i32 - code as i32).abs() <= 1, "round trip {code} -> {back}");
            }
        }
    }

    #[test]
    fn luminance_examples() {
        let img = LinearImage::new(3, 1, vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.3, 0.6, 0.9]).unwrap();
        let l = luminance(&img);
        assert_eq!(l.get(0, 0), 1.0);
        assert_eq!(l.get(1, 0), 0.0);
        assert!((l.get(2, 0) - 0.6).abs() < 1e-7);
    }

    proptest! {
        #[test]
        fn gray_luminance_is_exact(g in 0.0f32..=1.0) {
            let img = LinearImage::filled(2, 2, [g, g, g]);
            let l = luminance(&img);
            prop_assert_eq!(l.get(1, 1), g);
        }

        #[test]
        fn luminance_stays_in_unit_range(r in 0.0f32..=1.0, g in 0.0f32..=1.0, b in 0.0f32..=1.0) {
            let img = LinearImage::filled(1, 1, [r, g, b]);
            let v = luminance(&img).get(0, 0);
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}
