//! Fresnel-modulated Blinn-Phong specular lobe and randomized lighting.
//!
//! The per-pixel kernel promotes its f32 inputs to f64 and renormalizes the
//! normal and half vector before taking `(n·h)^S`.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{point_directions, DirectionField, GeometryBuffers, VectorField, ViewConvention};
use crate::image::ScalarMap;

/// Fresnel reflectance at normal incidence used throughout.
pub const DEFAULT_R0: f32 = 0.04;

/// Parameters of one rendered lobe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShadingParams {
    pub r0: f32,
    /// Global highlight intensity `K_H`.
    pub k_h: f32,
    /// Shininess exponent `S`.
    pub shininess: f32,
    /// Point-light position, metres, camera frame.
    pub light: [f32; 3],
}

impl ShadingParams {
    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..=1.0).contains(&self.r0)
            && self.k_h > 0.0
            && self.k_h.is_finite()
            && self.shininess > 0.0
            && self.shininess.is_finite()
            && self.light.iter().all(|c| c.is_finite());
        if !ok {
            return Err(Error::InvalidArgument(format!("invalid shading parameters {self:?}")));
        }
        Ok(())
    }

    pub fn light_vec(&self) -> Vector3<f32> {
        Vector3::from(self.light)
    }
}

/// Axis-aligned box, metres, camera frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LightBox {
    pub min: [f32; 3],
    pub max: [f32; 3],
}

/// Uniform sampling ranges for [`sample_params`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingRanges {
    pub k_h_range: [f32; 2],
    pub s_range: [f32; 2],
    pub light_box: LightBox,
    pub r0: f32,
    pub seed: u64,
}

impl Default for SamplingRanges {
    /// Lobes from soft sheens to tight glints on metre-scale scenes.
    fn default() -> Self {
        Self {
            k_h_range: [0.2, 1.0],
            s_range: [20.0, 400.0],
            light_box: LightBox { min: [-0.5, -0.5, 0.0], max: [0.5, 0.5, 0.3] },
            r0: DEFAULT_R0,
            seed: 0,
        }
    }
}

impl SamplingRanges {
    pub fn validate(&self) -> Result<()> {
        let ranges = [
            (self.k_h_range[0], self.k_h_range[1]),
            (self.s_range[0], self.s_range[1]),
            (self.light_box.min[0], self.light_box.max[0]),
            (self.light_box.min[1], self.light_box.max[1]),
            (self.light_box.min[2], self.light_box.max[2]),
        ];
        if ranges.iter().any(|&(lo, hi)| !(lo <= hi) || !lo.is_finite() || !hi.is_finite()) {
            return Err(Error::InvalidArgument(format!("sampling range with lo > hi: {self:?}")));
        }
        if !(self.k_h_range[0] > 0.0 && self.s_range[0] > 0.0) {
            return Err(Error::InvalidArgument("K_H and S ranges must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.r0) {
            return Err(Error::InvalidArgument(format!("R0 {} outside [0,1]", self.r0)));
        }
        Ok(())
    }
}

/// Draws parameters for `draw_index`. The generator is ChaCha8 keyed by the
/// seed with the draw index as stream id, so any draw can be reproduced
/// without replaying earlier ones.
pub fn sample_params(ranges: &SamplingRanges, draw_index: u64) -> ShadingParams {
    let mut rng = ChaCha8Rng::seed_from_u64(ranges.seed);
    rng.set_stream(draw_index);
    let mut uniform = |lo: f32, hi: f32| lo + (hi - lo) * rng.random::<f32>();
    let k_h = uniform(ranges.k_h_range[0], ranges.k_h_range[1]);
    let shininess = uniform(ranges.s_range[0], ranges.s_range[1]);
    let b = ranges.light_box;
    let light = [uniform(b.min[0], b.max[0]), uniform(b.min[1], b.max[1]), uniform(b.min[2], b.max[2])];
    ShadingParams { r0: ranges.r0, k_h, shininess, light }
}

/// Schlick's approximation `R0 + (1 − R0)(1 − cos)^5`.
#[inline]
pub fn fresnel_schlick(cos_vh: f32, r0: f32) -> f32 {
    fresnel_schlick_f64(cos_vh as f64, r0 as f64) as f32
}

#[inline]
pub fn fresnel_schlick_f64(cos_vh: f64, r0: f64) -> f64 {
    let t = 1.0 - cos_vh;
    let t2 = t * t;
    r0 + (1.0 - r0) * (t2 * t2 * t)
}

/// Unclamped lobe `K_H · R(v·h) · max(0, n·h)^S` for unit vectors.
#[inline]
pub fn specular_lobe(n: &Vector3<f64>, v: &Vector3<f64>, h: &Vector3<f64>, params: &ShadingParams) -> f64 {
    let n_dot_h = n.dot(h).max(0.0);
    if n_dot_h == 0.0 {
        return 0.0;
    }
    let v_dot_h = v.dot(h).clamp(0.0, 1.0);
    let r = fresnel_schlick_f64(v_dot_h, params.r0 as f64);
    params.k_h as f64 * r * n_dot_h.powf(params.shininess as f64)
}

#[inline]
fn unit(v: Vector3<f32>) -> Option<Vector3<f64>> {
    let v = v.cast::<f64>();
    let len = v.norm();
    (len > 1e-12).then(|| v / len)
}

/// Renders `H` from a precomputed direction field. Invalid pixels are 0 and
/// the result is clamped to `[0, 1]`.
pub fn blinn_phong_highlight(dirs: &DirectionField, normals: &VectorField, params: &ShadingParams) -> Result<ScalarMap> {
    let (w, h) = dirs.valid.dims();
    if normals.dims() != (w, h) {
        return Err(crate::error::shape_err((w, h), normals.dims()));
    }
    let data: Vec<f32> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let (x, y) = (i % w, i / w);
            if !dirs.valid.get(x, y) {
                return 0.0;
            }
            let (Some(n), Some(v), Some(hv)) =
                (unit(normals.get(x, y)), unit(dirs.view.get(x, y)), unit(dirs.half.get(x, y)))
            else {
                return 0.0;
            };
            specular_lobe(&n, &v, &hv, params).clamp(0.0, 1.0) as f32
        })
        .collect();
    ScalarMap::new(w, h, data)
}

/// Fused renderer: directions and lobe per pixel without materializing the
/// direction field.
pub fn render_highlight(geom: &GeometryBuffers, params: &ShadingParams, convention: ViewConvention) -> ScalarMap {
    let (w, h) = geom.dims();
    let light = params.light_vec().cast::<f64>();
    let data: Vec<f32> = (0..h)
        .into_par_iter()
        .flat_map_iter(|y| {
            let light = &light;
            (0..w).map(move |x| {
                if !geom.valid.get(x, y) {
                    return 0.0;
                }
                let Some(n) = unit(geom.normals.get(x, y)) else {
                    return 0.0;
                };
                let p = geom.points.get(x, y).cast::<f64>();
                match point_directions(&p, light, convention) {
                    Some((v, _, hv)) => specular_lobe(&n, &v, &hv, params).clamp(0.0, 1.0) as f32,
                    None => 0.0,
                }
            })
        })
        .collect();
    ScalarMap::new(w, h, data).expect("lobe values are finite")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{direction_field, CameraIntrinsics};
    use crate::testkit::make_sphere_scene;

    fn params(k_h: f32, s: f32, light: [f32; 3]) -> ShadingParams {
        ShadingParams { r0: DEFAULT_R0, k_h, shininess: s, light }
    }

    #[test]
    fn fresnel_examples() {
        assert_eq!(fresnel_schlick(1.0, 0.04), 0.04);
        assert_eq!(fresnel_schlick(0.0, 0.04), 1.0);
        assert_eq!(fresnel_schlick(0.0, 0.5), 1.0);
        // 0.04 + 0.96 · 0.5⁵
        assert!((fresnel_schlick(0.5, 0.04) - 0.07).abs() < 1e-7);
    }

    #[test]
    fn fresnel_monotone_and_bounded() {
        let mut prev = f32::INFINITY;
        for i in 0..=1000 {
            let c = i as f32 / 1000.0;
            let r = fresnel_schlick(c, 0.04);
            assert!(r <= prev && (0.04..=1.0).contains(&r));
            prev = r;
        }
    }

    #[test]
    fn lobe_examples() {
        let z = Vector3::new(0.0, 0.0, -1.0);
        let p = params(1.0, 10.0, [0.0; 3]);
        assert!((specular_lobe(&z, &z, &z, &p) - 0.04).abs() < 1e-9);

        let perp = Vector3::new(1.0, 0.0, 0.0);
        assert_eq!(specular_lobe(&perp, &z, &z, &params(3.0, 2.0, [0.0; 3])), 0.0);

        // n·h = 0.9 with v = h
        let n = Vector3::new((1.0f64 - 0.81).sqrt(), 0.0, -0.9);
        let expected = 0.04 * 0.9f64.powi(10);
        assert!((expected - 0.013947).abs() < 1e-6);
        assert!((specular_lobe(&n, &z, &z, &p) - expected).abs() < 1e-9);
    }

    #[test]
    fn sampling_degenerate_and_deterministic() {
        let r = SamplingRanges {
            k_h_range: [0.3, 0.3],
            s_range: [50.0, 50.0],
            light_box: LightBox { min: [0.1, -0.2, 0.3], max: [0.1, -0.2, 0.3] },
            r0: 0.04,
            seed: 99,
        };
        for i in 0..5 {
            let p = sample_params(&r, i);
            assert_eq!(p, ShadingParams { r0: 0.04, k_h: 0.3, shininess: 50.0, light: [0.1, -0.2, 0.3] });
        }
        let r = SamplingRanges { seed: 7, ..Default::default() };
        assert_eq!(sample_params(&r, 12), sample_params(&r, 12));
        assert_ne!(sample_params(&r, 12), sample_params(&r, 13));
        let other = SamplingRanges { seed: 8, ..r };
        assert_ne!(sample_params(&r, 12), sample_params(&other, 12));
    }

    #[test]
    fn sampling_mean_converges() {
        let r = SamplingRanges { seed: 1234, ..Default::default() };
        let n = 100_000;
        let mean: f64 = (0..n).map(|i| sample_params(&r, i).k_h as f64).sum::<f64>() / n as f64;
        assert!((mean - 0.6).abs() < 0.01, "mean {mean}");
        for i in 0..1000 {
            let p = sample_params(&r, i);
            assert!((0.2..=1.0).contains(&p.k_h) && (20.0..=400.0).contains(&p.shininess));
            assert!((0.0..=0.3).contains(&p.light[2]));
        }
    }

    #[test]
    fn ranges_validation() {
        assert!(SamplingRanges::default().validate().is_ok());
        let bad = SamplingRanges { k_h_range: [1.0, 0.5], ..Default::default() };
        assert!(bad.validate().is_err());
        assert!(params(0.0, 1.0, [0.0; 3]).validate().is_err());
        assert!(params(1.0, -1.0, [0.0; 3]).validate().is_err());
    }

    #[test]
    fn fused_renderer_matches_two_stage_path() {
        let k = CameraIntrinsics::centered(48, 40, 50.0);
        let scene = make_sphere_scene(0.5, [0.05, -0.02, 2.0], k, 48, 40).unwrap();
        let p = params(0.8, 60.0, [0.3, -0.2, 0.1]);
        let fused = render_highlight(&scene.geometry, &p, ViewConvention::TowardCamera);
        let dirs = direction_field(&scene.geometry, p.light_vec(), ViewConvention::TowardCamera);
        let staged = blinn_phong_highlight(&dirs, &scene.geometry.normals, &p).unwrap();
        for (a, b) in fused.as_slice().iter().zip(staged.as_slice()) {
            assert!((a - b).abs() < 1e-6);
        }
        assert!(fused.max_value() > 0.0);
    }

    #[test]
    fn doubling_intensity_doubles_unclamped_lobe() {
        let k = CameraIntrinsics::centered(32, 32, 40.0);
        let scene = make_sphere_scene(0.5, [0.0, 0.0, 2.0], k, 32, 32).unwrap();
        let p1 = params(0.3, 40.0, [0.2, 0.1, 0.0]);
        let p2 = ShadingParams { k_h: 0.6, ..p1 };
        let h1 = render_highlight(&scene.geometry, &p1, ViewConvention::TowardCamera);
        let h2 = render_highlight(&scene.geometry, &p2, ViewConvention::TowardCamera);
        for (a, b) in h1.as_slice().iter().zip(h2.as_slice()) {
            assert!(*b < 1.0);
            // 2·K_H is exact in f32, so only the final f32 rounding differs
            assert!((2.0 * a - b).abs() <= 2.0 * f32::EPSILON * b, "{a} {b}");
        }
    }

    #[test]
    fn mirror_configuration_maximizes_lobe() {
        // One surface point; light positions on a unit sphere around it. With
        // R0 = 1 the Fresnel factor is constant, so the lobe peaks exactly
        // where h = n, i.e. at the mirror direction.
        let x = Vector3::new(0.1, -0.05, 2.0f64);
        let n = Vector3::new(0.2, 0.1, -1.0f64).normalize();
        let v = -x.normalize();
        let mirror = 2.0 * n.dot(&v) * n - v;
        let p = ShadingParams { r0: 1.0, k_h: 1.0, shininess: 80.0, light: [0.0; 3] };
        let eval = |dir: Vector3<f64>| {
            point_directions(&x, &(x + dir), ViewConvention::TowardCamera)
                .map_or(0.0, |(vv, _, hv)| specular_lobe(&n, &vv, &hv, &p))
        };
        let at_mirror = eval(mirror);
        assert!((at_mirror - 1.0).abs() < 1e-9);
        let mut best = (0.0, Vector3::zeros());
        for i in 0..=180 {
            for j in 0..360 {
                let th = (i as f64).to_radians();
                let ph = (j as f64).to_radians();
                let dir = Vector3::new(th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos());
                let val = eval(dir);
                if val > best.0 {
                    best = (val, dir);
                }
            }
        }
        assert!(at_mirror >= best.0);
        assert!(best.1.dot(&mirror).clamp(-1.0, 1.0).acos().to_degrees() < 1.5);
    }

    #[test]
    fn higher_shininess_shrinks_highlight_area() {
        let k = CameraIntrinsics::centered(64, 64, 80.0);
        let scene = make_sphere_scene(0.6, [0.0, 0.0, 2.0], k, 64, 64).unwrap();
        let render = |s: f32| render_highlight(&scene.geometry, &params(1.0, s, [0.2, 0.2, 0.0]), ViewConvention::TowardCamera);
        let maps: Vec<ScalarMap> = [10.0, 40.0, 160.0].iter().map(|&s| render(s)).collect();
        let peak = maps.iter().map(|m| m.max_value()).fold(f32::INFINITY, f32::min);
        for frac in [0.1f32, 0.3, 0.6] {
            let theta = peak * frac;
            let areas: Vec<usize> = maps.iter().map(|m| m.as_slice().iter().filter(|&&v| v > theta).count()).collect();
            assert!(areas[0] > areas[1] && areas[1] > areas[2], "{areas:?} at θ={theta}");
        }
    }
}
