//! Build validation: oracle agreement, gradient checks, fixed points and
//! determinism, summarized as pass/fail JSON.

use serde::Serialize;

use crate::compositing::{check_mask_algebra, composite};
use crate::error::Result;
use crate::image::{LinearImage, ScalarMap};
use crate::metrics::{lsr, psnr, ssim};
use crate::shading::{fresnel_schlick, sample_params, SamplingRanges};
use crate::testkit::{gradcheck, jobs::synthetic_job, trials::renderer_oracle_trials};
use crate::tokens::{inpaint, InpainterConfig, InpainterWeights, TokenField, TokenGrid};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelfCheckReport {
    pub passed: bool,
    pub checks: Vec<Check>,
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check { name: name.into(), passed, detail }
}

/// Runs every check. `scratch` receives the small determinism dataset.
pub fn run_selfcheck(seed: u64, scratch: &std::path::Path) -> Result<SelfCheckReport> {
    let mut checks = Vec::new();

    let t = renderer_oracle_trials(seed, 1000, 32);
    checks.push(check(
        "renderer_matches_oracle",
        t.max_abs_error < 1e-6,
        format!("{} trials ({} lit), max |Δ| = {:.3e}", t.trials, t.lit, t.max_abs_error),
    ));

    let f1 = fresnel_schlick(1.0, 0.04);
    let f0 = fresnel_schlick(0.0, 0.04);
    checks.push(check("fresnel_fixed_points", f1 == 0.04 && f0 == 1.0, format!("R(1) = {f1}, R(0) = {f0}")));

    let img = LinearImage::from_fn(16, 16, |x, y| [x as f32 / 16.0, y as f32 / 16.0, 0.5]);
    let same = composite(&img, &ScalarMap::filled(16, 16, 0.0), 0.7)?;
    checks.push(check("composite_zero_identity", same == img, "H ≡ 0".into()));

    let mut grad_worst: f64 = 0.0;
    for s in 0..20 {
        let s = seed.wrapping_add(s);
        grad_worst = grad_worst
            .max(gradcheck::highlight_case(s, 6, 1e-4).max_rel_error)
            .max(gradcheck::seam_case(s, 8, 1e-4).max_rel_error)
            .max(gradcheck::spec_case(s, 6, 1e-4).max_rel_error)
            .max(gradcheck::reconstruction_l1_case(s, 6, 1e-4).max_rel_error)
            .max(gradcheck::inpainting_case(s, 1e-3).max_rel_error);
    }
    checks.push(check("loss_gradients", grad_worst < 1e-4, format!("max relative error {grad_worst:.3e}")));

    let cfg = InpainterConfig { dim: 16, depth: 2, heads: 2, seed, ..Default::default() };
    let weights = InpainterWeights::init(&cfg)?;
    let data: Vec<f32> = (0..16 * 16).map(|i| ((i * 37 % 101) as f32 / 101.0) - 0.5).collect();
    let grid = TokenGrid::new(TokenField::new(4, 4, 16, data)?, (0..16).map(|i| i % 3 == 0).collect())?;
    let out = inpaint(&grid, &cfg, &weights)?;
    let pass_through = (0..16)
        .filter(|&i| !grid.mask[i])
        .all(|i| out.completed.token(i).iter().zip(grid.tokens.token(i)).all(|(a, b)| a.to_bits() == b.to_bits()));
    checks.push(check("token_pass_through", pass_through, "visible tokens bit-exact".into()));

    let a = LinearImage::filled(16, 16, [0.2; 3]);
    let b = LinearImage::filled(16, 16, [0.7; 3]);
    let p = psnr(&a, &b)?.value();
    let s = ssim(&img, &img)?;
    let mask = crate::image::BinaryMask::from_fn(16, 16, |x, y| x < 4 && y < 4);
    let bright = LinearImage::from_fn(16, 16, |x, y| if mask.get(x, y) { [0.9; 3] } else { [0.3; 3] });
    let l_id = lsr(&bright, &bright, &mask, Default::default())?;
    let l_dim = lsr(&bright, &bright.map(|v| 0.5 * v), &mask, Default::default())?;
    let metrics_ok = (p - 6.0206).abs() < 1e-3 && (s - 1.0).abs() < 1e-6 && (l_id - 1.0).abs() < 1e-6 && (l_dim - 1.0).abs() < 1e-6;
    checks.push(check("metric_fixed_points", metrics_ok, format!("psnr {p:.4}, ssim {s:.6}, lsr {l_id:.6}/{l_dim:.6}")));

    let ranges = SamplingRanges { seed, ..Default::default() };
    let draws_repeat = (0..32).all(|i| sample_params(&ranges, i) == sample_params(&ranges, i));
    checks.push(check("sampling_deterministic", draws_repeat, "32 draws".into()));

    let mut job = synthetic_job(scratch, 3, 2, 48, seed)?;
    job.config.masks.patch_size = 8;
    let first = crate::pipeline::run_dataset(&job, 1)?;
    job.output_dir = scratch.join("out_parallel");
    let second = crate::pipeline::run_dataset(&job, 4)?;
    checks.push(check(
        "dataset_deterministic",
        first.samples == second.samples && first.failures == 0,
        format!("{} samples, {} failures", first.samples.len(), first.failures),
    ));

    let mut algebra = 0;
    for rec in &first.samples {
        let input = &job.inputs[rec.image_index];
        let (rgb, geom) = crate::pipeline::load_input(input, &job.config)?;
        let pair = crate::pipeline::synthesize_one(&rgb, &geom, &rec.params.expect("sample params"), &job.config)?;
        algebra += check_mask_algebra(&pair.masks).total();
    }
    checks.push(check("mask_algebra", algebra == 0, format!("{algebra} violations")));

    let passed = checks.iter().all(|c| c.passed);
    Ok(SelfCheckReport { passed, checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selfcheck_passes() {
        let tmp = tempfile::tempdir().unwrap();
        let r = run_selfcheck(1, tmp.path()).unwrap();
        for c in &r.checks {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
        assert!(r.passed);
    }
}
