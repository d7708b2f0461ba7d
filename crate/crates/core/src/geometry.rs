//! Pinhole back-projection, depth-gradient normals and per-pixel view/light
//! directions.

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{BinaryMask, ScalarMap};

/// Zero-skew pinhole intrinsics, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f32,
    pub fy: f32,
    pub cx: f32,
    pub cy: f32,
}

impl CameraIntrinsics {
    pub fn new(fx: f32, fy: f32, cx: f32, cy: f32) -> Result<Self> {
        let k = Self { fx, fy, cx, cy };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) || !self.cx.is_finite() || !self.cy.is_finite() {
            return Err(Error::InvalidArgument(format!("invalid intrinsics {self:?}")));
        }
        Ok(())
    }

    /// Checks that the principal point lies inside a `width`×`height` frame.
    pub fn validate_for(&self, width: usize, height: usize) -> Result<()> {
        self.validate()?;
        if !(self.cx >= 0.0 && self.cx < width as f32 && self.cy >= 0.0 && self.cy < height as f32) {
            return Err(Error::InvalidArgument(format!(
                "principal point ({}, {}) outside {width}x{height} frame",
                self.cx, self.cy
            )));
        }
        Ok(())
    }

    /// `depth · K⁻¹ · (u, v, 1)ᵀ`
    #[inline]
    pub fn unproject(&self, u: f64, v: f64, depth: f64) -> Vector3<f64> {
        Vector3::new(
            depth * (u - self.cx as f64) / self.fx as f64,
            depth * (v - self.cy as f64) / self.fy as f64,
            depth,
        )
    }

    /// Pixel coordinates of a camera-frame point with positive z.
    #[inline]
    pub fn project(&self, p: &Vector3<f64>) -> (f64, f64) {
        (
            self.fx as f64 * p.x / p.z + self.cx as f64,
            self.fy as f64 * p.y / p.z + self.cy as f64,
        )
    }

    /// Principal point at the exact image centre, square pixels.
    pub fn centered(width: usize, height: usize, focal: f32) -> Self {
        Self {
            fx: focal,
            fy: focal,
            cx: (width as f32 - 1.0) / 2.0,
            cy: (height as f32 - 1.0) / 2.0,
        }
    }
}

/// Per-pixel 3-vectors, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    width: usize,
    height: usize,
    data: Vec<Vector3<f32>>,
}

impl VectorField {
    pub fn new(width: usize, height: usize, data: Vec<Vector3<f32>>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidArgument(format!(
                "expected {} vectors for {width}x{height}, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> Vector3<f32> + Sync) -> Self {
        let data = (0..width * height).into_par_iter().map(|i| f(i % width, i / width)).collect();
        Self { width, height, data }
    }

    /// Builds a field from interleaved `[x, y, z]` samples.
    pub fn from_interleaved(width: usize, height: usize, xyz: &[f32]) -> Result<Self> {
        if xyz.len() != width * height * 3 {
            return Err(Error::InvalidArgument(format!(
                "expected {} samples for a {width}x{height}x3 field, got {}",
                width * height * 3,
                xyz.len()
            )));
        }
        Self::new(width, height, xyz.chunks_exact(3).map(|c| Vector3::new(c[0], c[1], c[2])).collect())
    }

    pub fn to_interleaved(&self) -> Vec<f32> {
        self.data.iter().flat_map(|v| [v.x, v.y, v.z]).collect()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Vector3<f32> {
        self.data[y * self.width + x]
    }

    pub fn as_slice(&self) -> &[Vector3<f32>] {
        &self.data
    }
}

/// Camera-frame points with their validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct PointField {
    pub points: VectorField,
    pub valid: BinaryMask,
}

/// Unit normals with their validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalField {
    pub normals: VectorField,
    pub valid: BinaryMask,
}

/// Depth, unit normals and back-projected points for one view.
#[derive(Debug, Clone)]
pub struct GeometryBuffers {
    pub intrinsics: CameraIntrinsics,
    pub depth: ScalarMap,
    pub normals: VectorField,
    pub points: VectorField,
    pub valid: BinaryMask,
}

impl GeometryBuffers {
    /// Assembles buffers from depth and externally supplied normals. Normals
    /// are renormalized; pixels with degenerate normals become invalid.
    pub fn with_normals(
        depth: ScalarMap,
        intrinsics: CameraIntrinsics,
        valid: BinaryMask,
        normals: VectorField,
    ) -> Result<Self> {
        if normals.dims() != depth.dims() {
            return Err(crate::error::shape_err(depth.dims(), normals.dims()));
        }
        let pf = backproject(&depth, &intrinsics, &valid)?;
        let (w, h) = depth.dims();
        let mut valid = pf.valid;
        let mut unit = Vec::with_capacity(w * h);
        for (i, n) in normals.as_slice().iter().enumerate() {
            let n64 = n.cast::<f64>();
            let len = n64.norm();
            if len.is_finite() && len > 1e-12 {
                unit.push((n64 / len).cast::<f32>());
            } else {
                unit.push(Vector3::zeros());
                valid.set(i % w, i / w, false);
            }
        }
        Ok(Self {
            intrinsics,
            depth,
            normals: VectorField::new(w, h, unit)?,
            points: pf.points,
            valid,
        })
    }

    /// Assembles buffers with depth-gradient normals.
    pub fn from_depth(depth: ScalarMap, intrinsics: CameraIntrinsics) -> Result<Self> {
        let nf = normals_from_depth(&depth, &intrinsics);
        let depth_valid = positive_depth_mask(&depth);
        let pf = backproject(&depth, &intrinsics, &depth_valid)?;
        let valid = pf.valid.intersection(&nf.valid)?;
        Ok(Self { intrinsics, depth, normals: nf.normals, points: pf.points, valid })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.depth.dims()
    }
}

/// Pixels with strictly positive depth.
pub fn positive_depth_mask(depth: &ScalarMap) -> BinaryMask {
    BinaryMask::new(depth.width(), depth.height(), depth.as_slice().iter().map(|&d| d > 0.0).collect())
        .expect("dims match")
}

/// Lifts every valid pixel to `X = D(u,v) · K⁻¹ (u, v, 1)ᵀ`. Invalid pixels
/// get the zero vector.
pub fn backproject(depth: &ScalarMap, k: &CameraIntrinsics, valid: &BinaryMask) -> Result<PointField> {
    k.validate()?;
    depth.ensure_same_dims(valid.dims())?;
    let (w, h) = depth.dims();
    for y in 0..h {
        for x in 0..w {
            let d = depth.get(x, y);
            if valid.get(x, y) && d <= 0.0 {
                return Err(Error::NonPositiveDepth { x, y, depth: d });
            }
        }
    }
    let points = VectorField::from_fn(w, h, |x, y| {
        if valid.get(x, y) {
            k.unproject(x as f64, y as f64, depth.get(x, y) as f64).cast::<f32>()
        } else {
            Vector3::zeros()
        }
    });
    Ok(PointField { points, valid: valid.clone() })
}

/// Normals from the cross product of central-difference tangents of the
/// back-projected point field, oriented toward the camera. One-sided
/// differences are used at borders and next to invalid pixels.
pub fn normals_from_depth(depth: &ScalarMap, k: &CameraIntrinsics) -> NormalField {
    let (w, h) = depth.dims();
    let valid = positive_depth_mask(depth);
    let point = |x: usize, y: usize| k.unproject(x as f64, y as f64, depth.get(x, y) as f64);
    let ok = |x: isize, y: isize| x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h && valid.get(x as usize, y as usize);

    let tangent = |x: usize, y: usize, dx: isize, dy: isize| -> Option<Vector3<f64>> {
        let (xi, yi) = (x as isize, y as isize);
        let fwd = ok(xi + dx, yi + dy);
        let bwd = ok(xi - dx, yi - dy);
        let at = |sx: isize, sy: isize| point(sx as usize, sy as usize);
        match (fwd, bwd) {
            (true, true) => Some(at(xi + dx, yi + dy) - at(xi - dx, yi - dy)),
            (true, false) => Some(at(xi + dx, yi + dy) - at(xi, yi)),
            (false, true) => Some(at(xi, yi) - at(xi - dx, yi - dy)),
            (false, false) => None,
        }
    };

    let solved: Vec<Option<Vector3<f32>>> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let (x, y) = (i % w, i / w);
            if !valid.get(x, y) {
                return None;
            }
            let tu = tangent(x, y, 1, 0)?;
            let tv = tangent(x, y, 0, 1)?;
            let n = tu.cross(&tv);
            let len = n.norm();
            if !(len > 1e-12) {
                return None;
            }
            let mut n = n / len;
            if n.dot(&point(x, y)) > 0.0 {
                n = -n;
            }
            Some(n.cast::<f32>())
        })
        .collect();

    let mask = BinaryMask::new(w, h, solved.iter().map(Option::is_some).collect()).expect("dims match");
    let normals = solved.into_iter().map(|n| n.unwrap_or_else(Vector3::zeros)).collect();
    NormalField { normals: VectorField::new(w, h, normals).expect("dims match"), valid: mask }
}

/// Sign convention for the view vector.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewConvention {
    /// `v = −X/‖X‖`, from the surface toward the camera.
    #[default]
    TowardCamera,
    /// `v = X/‖X‖`, the literal camera-to-point direction.
    AwayFromCamera,
}

/// Unit view, light and half vectors for one geometry/light pair.
#[derive(Debug, Clone)]
pub struct DirectionField {
    pub view: VectorField,
    pub light: VectorField,
    pub half: VectorField,
    pub valid: BinaryMask,
}

/// Directions for a single camera-frame point, computed in f64.
/// Returns `(v, l, h)` or `None` when any of them is undefined.
#[inline]
pub fn point_directions(
    point: &Vector3<f64>,
    light_pos: &Vector3<f64>,
    convention: ViewConvention,
) -> Option<(Vector3<f64>, Vector3<f64>, Vector3<f64>)> {
    let dist = point.norm();
    let to_light = light_pos - point;
    let light_dist = to_light.norm();
    if !(dist > 0.0) || !(light_dist > 0.0) {
        return None;
    }
    let v = match convention {
        ViewConvention::TowardCamera => -point / dist,
        ViewConvention::AwayFromCamera => point / dist,
    };
    let l = to_light / light_dist;
    let sum = l + v;
    let sum_len = sum.norm();
    if sum_len < 1e-8 {
        return None;
    }
    Some((v, l, sum / sum_len))
}

pub fn direction_field(geom: &GeometryBuffers, light_pos: Vector3<f32>, convention: ViewConvention) -> DirectionField {
    let (w, h) = geom.dims();
    let light64 = light_pos.cast::<f64>();
    let dirs: Vec<Option<[Vector3<f32>; 3]>> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let (x, y) = (i % w, i / w);
            if !geom.valid.get(x, y) {
                return None;
            }
            let p = geom.points.get(x, y).cast::<f64>();
            let (v, l, hv) = point_directions(&p, &light64, convention)?;
            Some([v.cast(), l.cast(), hv.cast()])
        })
        .collect();
    let valid = BinaryMask::new(w, h, dirs.iter().map(Option::is_some).collect()).expect("dims match");
    let pick = |j: usize| {
        VectorField::new(w, h, dirs.iter().map(|d| d.map_or_else(Vector3::zeros, |d| d[j])).collect())
            .expect("dims match")
    };
    DirectionField { view: pick(0), light: pick(1), half: pick(2), valid }
}
