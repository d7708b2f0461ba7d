//! JSON run configuration. Every field has a default, so `{}` is valid.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::color::{BitDepth, LuminanceMode};
use crate::compositing::MaskParams;
use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, ViewConvention};
use crate::io::read_bytes;
use crate::losses::LossWeights;
use crate::shading::SamplingRanges;
use crate::tokens::InpainterConfig;

/// Luminance cutoff for dataset highlights.
pub const DEFAULT_TAU_L: f32 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Fallback intrinsics for inputs that do not carry their own.
    pub intrinsics: Option<CameraIntrinsics>,
    pub sampling: SamplingRanges,
    pub view_convention: ViewConvention,
    pub tau_l: f32,
    pub luminance: LuminanceMode,
    pub masks: MaskParams,
    pub inpainter: InpainterConfig,
    pub losses: LossWeights,
    /// Ring radius used when evaluating the seam loss.
    pub seam_radius: usize,
    /// 8 or 16.
    pub png_bit_depth: u8,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            intrinsics: None,
            sampling: SamplingRanges::default(),
            view_convention: ViewConvention::default(),
            tau_l: DEFAULT_TAU_L,
            luminance: LuminanceMode::default(),
            masks: MaskParams::default(),
            inpainter: InpainterConfig::default(),
            losses: LossWeights::default(),
            seam_radius: 2,
            png_bit_depth: 8,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = read_bytes(path)?;
        let cfg: Config = serde_json::from_slice(&bytes).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(k) = &self.intrinsics {
            k.validate()?;
        }
        self.sampling.validate()?;
        self.masks.validate()?;
        self.inpainter.validate()?;
        self.losses.validate()?;
        if !(self.tau_l > 0.0 && self.tau_l <= 1.0) {
            return Err(Error::InvalidArgument(format!("tau_l must lie in (0,1], got {}", self.tau_l)));
        }
        if self.seam_radius == 0 {
            return Err(Error::InvalidArgument("seam_radius must be ≥ 1".into()));
        }
        self.bit_depth().map(|_| ())
    }

    pub fn bit_depth(&self) -> Result<BitDepth> {
        match self.png_bit_depth {
            8 => Ok(BitDepth::Eight),
            16 => Ok(BitDepth::Sixteen),
            d => Err(Error::InvalidArgument(format!("png_bit_depth must be 8 or 16, got {d}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_json_gives_defaults() {
        let cfg: Config = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, Config::default());
        assert_eq!(cfg.tau_l, 0.95);
        assert_eq!(cfg.sampling.r0, 0.04);
        assert_eq!(cfg.inpainter.lambda, 0.5);
        assert_eq!(cfg.inpainter.alpha, 0.25);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn partial_override_and_round_trip() {
        let cfg: Config = serde_json::from_str(
            r#"{"tau_l": 0.9, "luminance": "rec709", "view_convention": "away_from_camera",
                "sampling": {"k_h_range": [0.5, 0.5]}, "intrinsics": {"fx": 100, "fy": 100, "cx": 10, "cy": 8}}"#,
        )
        .unwrap();
        assert_eq!(cfg.tau_l, 0.9);
        assert_eq!(cfg.luminance, LuminanceMode::Rec709);
        assert_eq!(cfg.view_convention, ViewConvention::AwayFromCamera);
        assert_eq!(cfg.sampling.k_h_range, [0.5, 0.5]);
        assert_eq!(cfg.sampling.s_range, SamplingRanges::default().s_range);
        let back: Config = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(serde_json::from_str::<Config>(r#"{"bogus": 1}"#).is_err());
        assert!(Config { png_bit_depth: 12, ..Default::default() }.validate().is_err());
        assert!(Config { tau_l: 0.0, ..Default::default() }.validate().is_err());
    }
}
