//! Synthetic on-disk inputs for end-to-end dataset runs.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AnalyticScene, SceneKind};
use crate::color::BitDepth;
use crate::config::Config;
use crate::error::Result;
use crate::geometry::CameraIntrinsics;
use crate::image::LinearImage;
use crate::io::{write_pfm, write_png};
use crate::pipeline::{InputSpec, SynthesisJob};

/// K_H range giving visible glints: near normal incidence the lobe peaks at
/// about `R0·K_H = 0.04·K_H`, so the default range stays below the 0.05
/// pixel threshold.
pub const GLINT_K_H_RANGE: [f32; 2] = [8.0, 25.0];

/// Writes `count` random analytic scenes (16-bit PNG + PFM depth) into
/// `dir/inputs` and returns a job that renders `draws` samples of each into
/// `dir/out`. Every third image carries a saturated patch so dataset
/// highlights appear in the batch, and the config uses
/// [`GLINT_K_H_RANGE`] so lobes clear the pixel threshold.
pub fn synthetic_job(dir: &Path, count: usize, draws: usize, size: usize, seed: u64) -> Result<SynthesisJob> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs_dir = dir.join("inputs");
    let mut inputs = Vec::with_capacity(count);
    for i in 0..count {
        let k = CameraIntrinsics::centered(size, size, size as f32 * rng.random_range(0.8..1.2));
        let kind = match i % 3 {
            0 => SceneKind::Sphere {
                center: [rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), rng.random_range(2.0..3.0)],
                radius: rng.random_range(0.6..1.2),
            },
            1 => SceneKind::Plane {
                point: [0.0, 0.0, rng.random_range(1.0..2.0)],
                normal: [rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), -1.0],
            },
            _ => SceneKind::Checkerboard { depth: rng.random_range(1.0..2.5), cell: rng.random_range(8..32) },
        };
        let scene = AnalyticScene::new(kind, k, size, size)?;
        let buffers = scene.rasterize()?;
        let tint = [rng.random_range(0.4..1.0f32), rng.random_range(0.4..1.0f32), rng.random_range(0.4..1.0f32)];
        let albedo = scene.albedo_image();
        let spot = (rng.random_range(0..size / 2), rng.random_range(0..size / 2), size / 8 + 1);
        let rgb = LinearImage::from_fn(size, size, |x, y| {
            if i % 3 == 2 && (spot.0..spot.0 + spot.2).contains(&x) && (spot.1..spot.1 + spot.2).contains(&y) {
                return [1.0; 3];
            }
            let a = albedo.pixel(x, y);
            [0.8 * a[0] * tint[0], 0.8 * a[1] * tint[1], 0.8 * a[2] * tint[2]]
        });
        let id = format!("scene_{i:03}");
        let rgb_path = inputs_dir.join(format!("{id}.png"));
        let depth_path = inputs_dir.join(format!("{id}.pfm"));
        write_png(&rgb_path, &rgb, BitDepth::Sixteen)?;
        write_pfm(&depth_path, &buffers.geometry.depth)?;
        inputs.push(InputSpec { id, rgb: rgb_path, depth: depth_path, normals: None, intrinsics: Some(k) });
    }
    let mut config = Config::default();
    config.sampling.k_h_range = GLINT_K_H_RANGE;
    Ok(SynthesisJob { inputs, draws_per_image: draws, output_dir: dir.join("out"), seed: Some(seed), config })
}
