//! Synthetic specular-highlight generation and the supporting machinery for
//! highlight-removal research: geometry from depth, Fresnel Blinn-Phong
//! shading, compositing and masks, a token inpainter, losses and metrics.

pub mod color;
pub mod compositing;
pub mod config;
pub mod error;
pub mod geometry;
pub mod image;
pub mod io;
pub mod losses;
pub mod metrics;
pub mod pipeline;
pub mod selfcheck;
pub mod shading;
pub mod ssim;
pub mod testkit;
pub mod tokens;

pub use crate::color::{BitDepth, LuminanceMode};
pub use crate::config::Config;
pub use crate::compositing::{build_masks, composite, detect_dataset_highlights, MaskParams, MaskSet, PatchGrid};
pub use crate::error::{Error, Result};
pub use crate::geometry::{CameraIntrinsics, GeometryBuffers, ViewConvention};
pub use crate::image::{BinaryMask, LinearImage, ScalarMap};
pub use crate::losses::{LossReport, LossWeights};
pub use crate::shading::{SamplingRanges, ShadingParams};
pub use crate::tokens::{InpainterConfig, InpainterWeights, TokenField, TokenGrid};
