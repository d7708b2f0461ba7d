//! Additive highlight compositing, dataset-highlight detection and the
//! pixel/patch supervision masks.

use serde::{Deserialize, Serialize};

use crate::color::LuminanceMode;
use crate::error::{Error, Result};
use crate::image::{clamp01, BinaryMask, LinearImage, ScalarMap};

/// `clamp01((1 − H)·I + H·(I + K_H))`, evaluated as `clamp01(I + K_H·H)`.
pub fn composite(clean: &LinearImage, highlight: &ScalarMap, k_h: f32) -> Result<LinearImage> {
    clean.ensure_same_dims(highlight.dims())?;
    let h = highlight.as_slice();
    let data = clean
        .as_slice()
        .chunks_exact(3)
        .zip(h)
        .flat_map(|(rgb, &hv)| {
            let add = k_h * hv;
            [clamp01(rgb[0] + add), clamp01(rgb[1] + add), clamp01(rgb[2] + add)]
        })
        .collect();
    LinearImage::new(clean.width(), clean.height(), data)
}

/// Pixels whose luminance strictly exceeds `tau_l`.
pub fn detect_dataset_highlights(img: &LinearImage, tau_l: f32, mode: LuminanceMode) -> BinaryMask {
    let data = img.pixels().map(|p| mode.apply(p) > tau_l).collect();
    BinaryMask::new(img.width(), img.height(), data).expect("dims match")
}

/// Boolean grid over `p×p` patches, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PatchGrid {
    pub rows: usize,
    pub cols: usize,
    pub cells: Vec<bool>,
}

impl PatchGrid {
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.cells[row * self.cols + col]
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn intersection(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "patch grid shape mismatch");
        Self {
            rows: self.rows,
            cols: self.cols,
            cells: self.cells.iter().zip(&other.cells).map(|(&a, &b)| a && b).collect(),
        }
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        (self.rows, self.cols) == (other.rows, other.cols)
            && self.cells.iter().zip(&other.cells).all(|(&a, &b)| !a || b)
    }

    pub fn as_f32(&self) -> Vec<f32> {
        self.cells.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }
}

/// Area-exact `p×p` average pooling; ragged right/bottom cells are
/// zero-padded, so every cell divides by `p²`.
pub fn average_pool(values: &[f32], width: usize, height: usize, patch: usize) -> (usize, usize, Vec<f64>) {
    assert!(patch >= 1, "patch size must be positive");
    assert_eq!(values.len(), width * height);
    let rows = height.div_ceil(patch);
    let cols = width.div_ceil(patch);
    let mut sums = vec![0.0f64; rows * cols];
    for y in 0..height {
        let row = y / patch;
        for x in 0..width {
            sums[row * cols + x / patch] += values[y * width + x] as f64;
        }
    }
    let area = (patch * patch) as f64;
    (rows, cols, sums.into_iter().map(|s| s / area).collect())
}

/// Thresholds and patch size for [`build_masks`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaskParams {
    /// `H > pixel_thresh` marks a synthetic-highlight pixel.
    pub pixel_thresh: f32,
    pub patch_size: usize,
    /// Pooled mean `> patch_thresh` selects a patch.
    pub patch_thresh: f32,
}

impl Default for MaskParams {
    fn default() -> Self {
        Self { pixel_thresh: 0.05, patch_size: 16, patch_thresh: 0.10 }
    }
}

impl MaskParams {
    pub fn validate(&self) -> Result<()> {
        if self.patch_size == 0
            || !(0.0..=1.0).contains(&self.pixel_thresh)
            || !(0.0..=1.0).contains(&self.patch_thresh)
        {
            return Err(Error::InvalidArgument(format!("invalid mask parameters {self:?}")));
        }
        Ok(())
    }
}

/// Pixel- and patch-level masks for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskSet {
    pub dataset_hl: BinaryMask,
    pub synthetic_hl: BinaryMask,
    /// Trustworthy pixels, `¬dataset_hl`.
    pub m_sup: BinaryMask,
    /// Pixels to inpaint, `synthetic ∪ dataset`.
    pub m_hole: BinaryMask,
    pub patch_sup: PatchGrid,
    pub patch_hole: PatchGrid,
    /// `patch_hole ∩ patch_sup`
    pub patch_train: PatchGrid,
    pub patch_size: usize,
}

pub fn build_masks(synth_h: &ScalarMap, dataset_hl: &BinaryMask, params: &MaskParams) -> Result<MaskSet> {
    params.validate()?;
    synth_h.ensure_same_dims(dataset_hl.dims())?;
    let (w, h) = synth_h.dims();

    let synthetic_hl = BinaryMask::new(w, h, synth_h.as_slice().iter().map(|&v| v > params.pixel_thresh).collect())?;
    let m_hole = synthetic_hl.union(dataset_hl)?;
    let m_sup = dataset_hl.not();

    let dataset_ind: Vec<f32> = dataset_hl.as_slice().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    // soft union: dataset pixels count as full-intensity highlight
    let hole_soft: Vec<f32> = synth_h.as_slice().iter().zip(&dataset_ind).map(|(&a, &b)| a.max(b)).collect();

    let p = params.patch_size;
    let t = params.patch_thresh as f64;
    let (rows, cols, hole_mean) = average_pool(&hole_soft, w, h, p);
    let (_, _, dataset_mean) = average_pool(&dataset_ind, w, h, p);

    let patch_hole = PatchGrid { rows, cols, cells: hole_mean.iter().map(|&m| m > t).collect() };
    let patch_sup = PatchGrid { rows, cols, cells: dataset_mean.iter().map(|&m| !(m > t)).collect() };
    let patch_train = patch_hole.intersection(&patch_sup);

    Ok(MaskSet {
        dataset_hl: dataset_hl.clone(),
        synthetic_hl,
        m_sup,
        m_hole,
        patch_sup,
        patch_hole,
        patch_train,
        patch_size: p,
    })
}

/// Mask-algebra violations for one sample; all zero for a consistent set.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MaskViolations {
    pub sup_not_complement: usize,
    pub dataset_outside_hole: usize,
    pub train_not_intersection: usize,
}

impl MaskViolations {
    pub fn total(&self) -> usize {
        self.sup_not_complement + self.dataset_outside_hole + self.train_not_intersection
    }
}

pub fn check_mask_algebra(m: &MaskSet) -> MaskViolations {
    let d = m.dataset_hl.as_slice();
    let sup_not_complement = d.iter().zip(m.m_sup.as_slice()).filter(|(&a, &b)| a == b).count();
    let dataset_outside_hole = d.iter().zip(m.m_hole.as_slice()).filter(|(&a, &b)| a && !b).count();
    let expected = m.patch_hole.intersection(&m.patch_sup);
    let train_not_intersection = expected.cells.iter().zip(&m.patch_train.cells).filter(|(a, b)| a != b).count();
    MaskViolations { sup_not_complement, dataset_outside_hole, train_not_intersection }
}
