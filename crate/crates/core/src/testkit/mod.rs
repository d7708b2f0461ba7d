//! Analytic scenes and brute-force oracles.
//!
//! Everything here is written with plain `[f64; 3]` arithmetic and does not
//! call into the production geometry or shading code, so the oracles stay
//! independent of the paths they check.

pub mod gradcheck;
pub mod jobs;
pub mod trials;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, GeometryBuffers, VectorField, ViewConvention};
use crate::image::{BinaryMask, LinearImage, ScalarMap};
use crate::shading::ShadingParams;

type V3 = [f64; 3];

fn dot(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn sub(a: V3, b: V3) -> V3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn add(a: V3, b: V3) -> V3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn scale(a: V3, s: f64) -> V3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn length(a: V3) -> f64 {
    dot(a, a).sqrt()
}

/// Geometry of an analytic scene.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SceneKind {
    /// Infinite plane through `point` with normal `normal`.
    Plane { point: V3, normal: V3 },
    Sphere { center: V3, radius: f64 },
    /// Fronto-parallel plane at `depth` with a checkerboard albedo of
    /// `cell`-pixel squares.
    Checkerboard { depth: f64, cell: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticScene {
    pub kind: SceneKind,
    pub intrinsics: CameraIntrinsics,
    pub width: usize,
    pub height: usize,
}

/// Rasterized buffers of an analytic scene.
#[derive(Debug, Clone)]
pub struct SceneBuffers {
    pub scene: AnalyticScene,
    pub geometry: GeometryBuffers,
    pub analytic_normals: VectorField,
}

impl AnalyticScene {
    pub fn new(kind: SceneKind, intrinsics: CameraIntrinsics, width: usize, height: usize) -> Result<Self> {
        match kind {
            SceneKind::Sphere { center, radius } => {
                if !(radius > 0.0) || center[2] - radius <= 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "sphere (center {center:?}, radius {radius}) is not fully in front of the camera"
                    )));
                }
            }
            SceneKind::Plane { normal, .. } => {
                if !(length(normal) > 0.0) {
                    return Err(Error::InvalidArgument("plane normal must be non-zero".into()));
                }
            }
            SceneKind::Checkerboard { depth, cell } => {
                if !(depth > 0.0) || cell == 0 {
                    return Err(Error::InvalidArgument("checkerboard needs depth > 0 and cell ≥ 1".into()));
                }
            }
        }
        Ok(Self { kind, intrinsics, width, height })
    }

    fn ray(&self, u: f64, v: f64) -> V3 {
        let k = &self.intrinsics;
        [(u - k.cx as f64) / k.fx as f64, (v - k.cy as f64) / k.fy as f64, 1.0]
    }

    /// Exact first hit along the ray of pixel `(u, v)`: the camera-frame point
    /// and the unit normal facing the camera.
    pub fn hit(&self, u: f64, v: f64) -> Option<(V3, V3)> {
        let d = self.ray(u, v);
        match self.kind {
            SceneKind::Sphere { center, radius } => {
                let a = dot(d, d);
                let b = dot(d, center);
                let c = dot(center, center) - radius * radius;
                let disc = b * b - a * c;
                if disc < 0.0 {
                    return None;
                }
                let t = (b - disc.sqrt()) / a;
                if t <= 0.0 {
                    return None;
                }
                let p = scale(d, t);
                let n = scale(sub(p, center), 1.0 / radius);
                Some((p, n))
            }
            SceneKind::Plane { point, normal } => {
                let n = scale(normal, 1.0 / length(normal));
                let denom = dot(n, d);
                if denom.abs() < 1e-12 {
                    return None;
                }
                let t = dot(n, point) / denom;
                if t <= 0.0 {
                    return None;
                }
                let p = scale(d, t);
                let n = if dot(n, p) > 0.0 { scale(n, -1.0) } else { n };
                Some((p, n))
            }
            SceneKind::Checkerboard { depth, .. } => Some((scale(d, depth), [0.0, 0.0, -1.0])),
        }
    }

    /// Albedo for the checkerboard kind; mid gray elsewhere.
    pub fn albedo(&self, x: usize, y: usize) -> [f32; 3] {
        match self.kind {
            SceneKind::Checkerboard { cell, .. } => {
                if (x / cell + y / cell).is_multiple_of(2) {
                    [0.7, 0.65, 0.6]
                } else {
                    [0.2, 0.25, 0.3]
                }
            }
            _ => [0.5, 0.5, 0.5],
        }
    }

    pub fn albedo_image(&self) -> LinearImage {
        LinearImage::from_fn(self.width, self.height, |x, y| self.albedo(x, y))
    }

    pub fn rasterize(&self) -> Result<SceneBuffers> {
        let (w, h) = (self.width, self.height);
        let mut depth = vec![0.0f32; w * h];
        let mut normals = vec![Vector3::zeros(); w * h];
        let mut valid = vec![false; w * h];
        for y in 0..h {
            for x in 0..w {
                if let Some((p, n)) = self.hit(x as f64, y as f64) {
                    let i = y * w + x;
                    depth[i] = p[2] as f32;
                    normals[i] = Vector3::new(n[0] as f32, n[1] as f32, n[2] as f32);
                    valid[i] = depth[i] > 0.0;
                }
            }
        }
        let analytic_normals = VectorField::new(w, h, normals)?;
        let geometry = GeometryBuffers::with_normals(
            ScalarMap::new(w, h, depth)?,
            self.intrinsics,
            BinaryMask::new(w, h, valid)?,
            analytic_normals.clone(),
        )?;
        if geometry.valid.is_empty() {
            return Err(Error::NoValidGeometry);
        }
        Ok(SceneBuffers { scene: *self, geometry, analytic_normals })
    }
}

pub fn make_sphere_scene(radius: f64, center: V3, k: CameraIntrinsics, width: usize, height: usize) -> Result<SceneBuffers> {
    AnalyticScene::new(SceneKind::Sphere { center, radius }, k, width, height)?.rasterize()
}

pub fn make_plane_scene(point: V3, normal: V3, k: CameraIntrinsics, width: usize, height: usize) -> Result<SceneBuffers> {
    AnalyticScene::new(SceneKind::Plane { point, normal }, k, width, height)?.rasterize()
}

pub fn make_checkerboard_scene(depth: f64, cell: usize, k: CameraIntrinsics, width: usize, height: usize) -> Result<SceneBuffers> {
    AnalyticScene::new(SceneKind::Checkerboard { depth, cell }, k, width, height)?.rasterize()
}

/// Highlight intensity at pixel `(x, y)` evaluated directly from the analytic
/// surface with straight-line scalar code. `None` when the pixel misses the
/// surface.
pub fn brute_force_highlight(
    scene: &AnalyticScene,
    params: &ShadingParams,
    convention: ViewConvention,
    x: usize,
    y: usize,
) -> Option<f64> {
    let (p, n) = scene.hit(x as f64, y as f64)?;
    let light = [params.light[0] as f64, params.light[1] as f64, params.light[2] as f64];

    let p_len = length(p);
    let view = match convention {
        ViewConvention::TowardCamera => scale(p, -1.0 / p_len),
        ViewConvention::AwayFromCamera => scale(p, 1.0 / p_len),
    };
    let to_light = sub(light, p);
    let to_light_len = length(to_light);
    if to_light_len == 0.0 {
        return Some(0.0);
    }
    let l = scale(to_light, 1.0 / to_light_len);
    let sum = add(l, view);
    let sum_len = length(sum);
    if sum_len < 1e-8 {
        return Some(0.0);
    }
    let half = scale(sum, 1.0 / sum_len);

    let mut n_dot_h = dot(n, half);
    if n_dot_h < 0.0 {
        n_dot_h = 0.0;
    }
    let mut v_dot_h = dot(view, half);
    if v_dot_h < 0.0 {
        v_dot_h = 0.0;
    }
    if v_dot_h > 1.0 {
        v_dot_h = 1.0;
    }
    let r0 = params.r0 as f64;
    let one_minus = 1.0 - v_dot_h;
    let fresnel = r0 + (1.0 - r0) * one_minus * one_minus * one_minus * one_minus * one_minus;
    let mut h = params.k_h as f64 * fresnel * n_dot_h.powf(params.shininess as f64);
    if h > 1.0 {
        h = 1.0;
    }
    Some(h)
}

/// Angle in degrees between two vectors.
pub fn angle_deg(a: &Vector3<f32>, b: &Vector3<f32>) -> f64 {
    let a = [a.x as f64, a.y as f64, a.z as f64];
    let b = [b.x as f64, b.y as f64, b.z as f64];
    let c = dot(a, b) / (length(a) * length(b));
    c.clamp(-1.0, 1.0).acos().to_degrees()
}

/// Median of a non-empty sample.
pub fn median(mut xs: Vec<f64>) -> f64 {
    assert!(!xs.is_empty(), "median of an empty sample");
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    }
}

/// Median angular error (degrees) between depth-gradient normals and the
/// analytic normals over interior pixels, i.e. pixels whose full 3×3
/// neighbourhood is covered.
pub fn depth_normal_error(buffers: &SceneBuffers) -> f64 {
    let g = &buffers.geometry;
    let nf = crate::geometry::normals_from_depth(&g.depth, &g.intrinsics);
    let (w, h) = g.dims();
    let mut errs = Vec::new();
    for y in 1..h.saturating_sub(1) {
        for x in 1..w.saturating_sub(1) {
            let interior = (0..3).all(|dy| (0..3).all(|dx| g.valid.get(x + dx - 1, y + dy - 1)));
            if interior && nf.valid.get(x, y) {
                errs.push(angle_deg(&nf.normals.get(x, y), &buffers.analytic_normals.get(x, y)));
            }
        }
    }
    median(errs)
}

/// Worst re-projection error in pixels over all valid pixels.
pub fn max_reprojection_error(geom: &GeometryBuffers) -> f64 {
    let k = &geom.intrinsics;
    let (w, h) = geom.dims();
    let mut worst = 0.0f64;
    for y in 0..h {
        for x in 0..w {
            if !geom.valid.get(x, y) {
                continue;
            }
            let p = geom.points.get(x, y);
            let (px, py, pz) = (p.x as f64, p.y as f64, p.z as f64);
            let u = k.fx as f64 * px / pz + k.cx as f64;
            let v = k.fy as f64 * py / pz + k.cy as f64;
            worst = worst.max((u - x as f64).abs()).max((v - y as f64).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shading::render_highlight;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sphere_behind_camera_is_rejected() {
        let k = CameraIntrinsics::centered(8, 8, 10.0);
        assert!(make_sphere_scene(1.0, [0.0, 0.0, 0.5], k, 8, 8).is_err());
        assert!(make_sphere_scene(1.0, [0.0, 0.0, -3.0], k, 8, 8).is_err());
    }

    #[test]
    fn on_axis_sphere_is_symmetric() {
        let (w, h) = (33, 33);
        let k = CameraIntrinsics::centered(w, h, 40.0);
        let s = make_sphere_scene(0.5, [0.0, 0.0, 2.0], k, w, h).unwrap();
        let d = &s.geometry.depth;
        let mut worst = 0.0f32;
        for y in 0..h {
            for x in 0..w {
                worst = worst.max((d.get(x, y) - d.get(w - 1 - x, h - 1 - y)).abs());
                worst = worst.max((d.get(x, y) - d.get(y, x)).abs());
            }
        }
        assert!(worst < 1e-6, "{worst}");
        let n = s.analytic_normals.get(16, 16);
        assert!((n - Vector3::new(0.0, 0.0, -1.0)).amax() < 1e-7);
    }

    #[test]
    fn sphere_depth_normals_within_two_degrees() {
        let k = CameraIntrinsics::centered(128, 128, 150.0);
        let s = make_sphere_scene(0.6, [0.0, 0.0, 2.0], k, 128, 128).unwrap();
        let med = depth_normal_error(&s);
        assert!(med < 2.0, "median {med}°");
    }

    #[test]
    fn analytic_scenes_reproject() {
        let k = CameraIntrinsics::new(70.0, 65.0, 31.2, 22.9).unwrap();
        let scenes = [
            make_sphere_scene(0.4, [0.1, 0.05, 1.5], k, 64, 48).unwrap(),
            make_plane_scene([0.0, 0.0, 2.0], [0.1, -0.3, -1.0], k, 64, 48).unwrap(),
            make_checkerboard_scene(1.7, 8, k, 64, 48).unwrap(),
        ];
        for s in &scenes {
            assert!(max_reprojection_error(&s.geometry) < 1e-4);
        }
    }

    #[test]
    fn oracle_agrees_with_renderer() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let k = CameraIntrinsics::centered(40, 40, 50.0);
        let s = make_sphere_scene(0.5, [0.0, 0.0, 2.0], k, 40, 40).unwrap();
        for _ in 0..20 {
            let p = ShadingParams {
                r0: 0.04,
                k_h: rng.random_range(0.2..1.0),
                shininess: rng.random_range(20.0..400.0),
                light: [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(0.0..0.3)],
            };
            let fast = render_highlight(&s.geometry, &p, ViewConvention::TowardCamera);
            for y in 0..40 {
                for x in 0..40 {
                    if let Some(o) = brute_force_highlight(&s.scene, &p, ViewConvention::TowardCamera, x, y) {
                        assert!((o - fast.get(x, y) as f64).abs() < 1e-6);
                    }
                }
            }
        }
    }

    #[test]
    fn light_behind_surface_gives_zero() {
        let k = CameraIntrinsics::centered(16, 16, 20.0);
        let s = make_plane_scene([0.0, 0.0, 2.0], [0.0, 0.0, -1.0], k, 16, 16).unwrap();
        let p = ShadingParams { r0: 0.04, k_h: 1.0, shininess: 10.0, light: [0.0, 0.0, 5.0] };
        let fast = render_highlight(&s.geometry, &p, ViewConvention::TowardCamera);
        for y in 0..16 {
            for x in 0..16 {
                assert_eq!(brute_force_highlight(&s.scene, &p, ViewConvention::TowardCamera, x, y), Some(0.0));
                assert_eq!(fast.get(x, y), 0.0);
            }
        }
    }

    #[test]
    fn mirror_pixel_attains_scene_maximum() {
        // Fronto-parallel plane, light at the camera: the mirror point is the
        // principal point, where both paths peak.
        let k = CameraIntrinsics::centered(31, 31, 30.0);
        let s = make_plane_scene([0.0, 0.0, 2.0], [0.0, 0.0, -1.0], k, 31, 31).unwrap();
        let p = ShadingParams { r0: 0.04, k_h: 1.0, shininess: 50.0, light: [0.0, 0.0, 0.0] };
        let fast = render_highlight(&s.geometry, &p, ViewConvention::TowardCamera);
        let mut best_oracle = (0.0, (0, 0));
        let mut best_fast = (0.0f32, (0, 0));
        for y in 0..31 {
            for x in 0..31 {
                let o = brute_force_highlight(&s.scene, &p, ViewConvention::TowardCamera, x, y).unwrap();
                if o > best_oracle.0 {
                    best_oracle = (o, (x, y));
                }
                if fast.get(x, y) > best_fast.0 {
                    best_fast = (fast.get(x, y), (x, y));
                }
            }
        }
        assert_eq!(best_oracle.1, (15, 15));
        assert_eq!(best_fast.1, (15, 15));
    }
}
