//! Randomized renderer-versus-oracle trials.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{brute_force_highlight, AnalyticScene, SceneKind};
use crate::geometry::{CameraIntrinsics, ViewConvention};
use crate::shading::{render_highlight, ShadingParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub trials: usize,
    pub max_abs_error: f64,
    /// Trials whose oracle value was non-zero.
    pub lit: usize,
}

fn random_scene(rng: &mut ChaCha8Rng, size: usize) -> AnalyticScene {
    let k = CameraIntrinsics::centered(size, size, rng.random_range(0.6..1.5) * size as f32);
    loop {
        let kind = match rng.random_range(0..3) {
            0 => SceneKind::Sphere {
                center: [rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2), rng.random_range(1.5..3.0)],
                radius: rng.random_range(0.3..1.0),
            },
            1 => SceneKind::Plane {
                point: [0.0, 0.0, rng.random_range(1.0..3.0)],
                normal: [rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4), -1.0],
            },
            _ => SceneKind::Checkerboard { depth: rng.random_range(0.5..3.0), cell: rng.random_range(2..8) },
        };
        if let Ok(scene) = AnalyticScene::new(kind, k, size, size) {
            return scene;
        }
    }
}

/// Runs `trials` independent (scene, params, pixel) comparisons between the
/// optimized renderer and the scalar oracle.
pub fn renderer_oracle_trials(seed: u64, trials: usize, size: usize) -> TrialOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut lit = 0;
    let mut done = 0;
    while done < trials {
        let scene = random_scene(&mut rng, size);
        let params = ShadingParams {
            r0: if rng.random_bool(0.8) { 0.04 } else { rng.random_range(0.0..1.0) },
            k_h: rng.random_range(0.2..1.0),
            shininess: rng.random_range(20.0..400.0),
            light: [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(0.0..0.3)],
        };
        let convention = if rng.random_bool(0.85) { ViewConvention::TowardCamera } else { ViewConvention::AwayFromCamera };
        let buffers = match scene.rasterize() {
            Ok(b) => b,
            Err(_) => continue,
        };
        let (x, y) = (rng.random_range(0..size), rng.random_range(0..size));
        let Some(expected) = brute_force_highlight(&scene, &params, convention, x, y) else {
            continue;
        };
        let fast = render_highlight(&buffers.geometry, &params, convention);
        worst = worst.max((fast.get(x, y) as f64 - expected).abs());
        if expected > 0.0 {
            lit += 1;
        }
        done += 1;
    }
    TrialOutcome { trials: done, max_abs_error: worst, lit }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_run_agrees() {
        let o = renderer_oracle_trials(3, 60, 24);
        assert_eq!(o.trials, 60);
        assert!(o.max_abs_error < 1e-6, "{o:?}");
    }
}
