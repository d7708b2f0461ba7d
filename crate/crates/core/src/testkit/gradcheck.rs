//! Seeded random instances for finite-difference gradient checks.
//!
//! Instances are rejection-sampled so that every non-differentiable locus
//! (L1 kinks, brightness threshold) sits at least `10·step` away from the
//! evaluation point.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::image::{BinaryMask, LinearImage, ScalarMap};
use crate::losses::{fd_check, highlight_loss, reconstruction_loss, seam_loss, seam_ring, spec_penalty, FdResult, LossWeights};
use crate::tokens::{inpainting_loss, TokenField};

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn far(a: f64, b: f64, step: f32) -> bool {
    (a - b).abs() > 10.0 * step as f64
}

fn image(w: usize, h: usize, data: &[f32]) -> LinearImage {
    LinearImage::new(w, h, data.to_vec()).expect("finite instance")
}

/// Highlight loss on a random `n×n` map pair.
pub fn highlight_case(seed: u64, n: usize, step: f32) -> FdResult {
    let mut r = rng(seed, 1);
    let weights = LossWeights::default();
    loop {
        let p: Vec<f32> = (0..n * n).map(|_| r.random_range(0.0..1.0)).collect();
        let t: Vec<f32> = (0..n * n).map(|_| r.random_range(0.0..1.0)).collect();
        let mut ok = p.iter().zip(&t).all(|(&a, &b)| far(a as f64, b as f64, step));
        for y in 0..n {
            for x in 0..n {
                let i = y * n + x;
                if x + 1 < n {
                    ok &= far(p[i] as f64, p[i + 1] as f64, step);
                }
                if y + 1 < n {
                    ok &= far(p[i] as f64, p[i + n] as f64, step);
                }
            }
        }
        if !ok {
            continue;
        }
        let target = ScalarMap::new(n, n, t).expect("finite");
        let eval = |v: &[f32]| highlight_loss(&ScalarMap::new(n, n, v.to_vec()).unwrap(), &target, &weights).unwrap().total;
        let analytic = highlight_loss(&ScalarMap::new(n, n, p.clone()).unwrap(), &target, &weights).unwrap().gradient.unwrap();
        return fd_check(&p, &analytic, step, eval, |_| false);
    }
}

/// Seam loss on a random `n×n` pair with a ring around a random rectangle.
pub fn seam_case(seed: u64, n: usize, step: f32) -> FdResult {
    let mut r = rng(seed, 2);
    loop {
        let (x0, y0) = (r.random_range(1..n / 2), r.random_range(1..n / 2));
        let (x1, y1) = (r.random_range(x0 + 1..n - 1), r.random_range(y0 + 1..n - 1));
        let hole = BinaryMask::from_fn(n, n, |x, y| (x0..x1).contains(&x) && (y0..y1).contains(&y));
        let ring = seam_ring(&hole, 1).expect("radius 1");
        let lambda_g = r.random_range(0.5..2.0);
        let p: Vec<f32> = (0..n * n * 3).map(|_| r.random_range(0.0..1.0)).collect();
        let q: Vec<f32> = (0..n * n * 3).map(|_| r.random_range(0.0..1.0)).collect();
        let mut ok = true;
        for y in 0..n {
            for x in 0..n {
                if !ring.get(x, y) {
                    continue;
                }
                for c in 0..3 {
                    let i = (y * n + x) * 3 + c;
                    ok &= far(p[i] as f64, q[i] as f64, step);
                    for j in [(x + 1 < n).then_some(i + 3), (y + 1 < n).then_some(i + 3 * n)].into_iter().flatten() {
                        let dp = p[j] as f64 - p[i] as f64;
                        let dq = q[j] as f64 - q[i] as f64;
                        ok &= far(dp, dq, 2.0 * step);
                    }
                }
            }
        }
        if !ok {
            continue;
        }
        let input = image(n, n, &q);
        let eval = |v: &[f32]| seam_loss(&image(n, n, v), &input, &ring, lambda_g).unwrap().total;
        let analytic = seam_loss(&image(n, n, &p), &input, &ring, lambda_g).unwrap().gradient.unwrap();
        return fd_check(&p, &analytic, step, eval, |_| false);
    }
}

/// Specular penalty on a random bright `n×n` image.
pub fn spec_case(seed: u64, n: usize, step: f32) -> FdResult {
    let mut r = rng(seed, 3);
    let w = LossWeights::default();
    loop {
        let p: Vec<f32> = (0..n * n * 3).map(|_| r.random_range(0.6..1.0)).collect();
        let ok = p.chunks_exact(3).all(|c| {
            let b = (c[0] as f64 + c[1] as f64 + c[2] as f64) / 3.0;
            far(b, w.tau_m, step)
        });
        if !ok || p.chunks_exact(3).all(|c| (c[0] + c[1] + c[2]) / 3.0 <= w.tau_m as f32) {
            continue;
        }
        let eval = |v: &[f32]| spec_penalty(&image(n, n, v), w.tau_m, w.eps).unwrap().total;
        let analytic = spec_penalty(&image(n, n, &p), w.tau_m, w.eps).unwrap().gradient.unwrap();
        return fd_check(&p, &analytic, step, eval, |_| false);
    }
}

/// L1 term of the reconstruction loss under a random supervision mask.
pub fn reconstruction_l1_case(seed: u64, n: usize, step: f32) -> FdResult {
    let mut r = rng(seed, 4);
    loop {
        let p: Vec<f32> = (0..n * n * 3).map(|_| r.random_range(0.0..1.0)).collect();
        let q: Vec<f32> = (0..n * n * 3).map(|_| r.random_range(0.0..1.0)).collect();
        let mask = BinaryMask::from_fn(n, n, |_, _| r.random_bool(0.7));
        if mask.is_empty() || !p.iter().zip(&q).all(|(&a, &b)| far(a as f64, b as f64, step)) {
            continue;
        }
        let reference = image(n, n, &q);
        let eval = |v: &[f32]| reconstruction_loss(&image(n, n, v), &reference, Some(&mask)).unwrap().term("l1").unwrap();
        let analytic = reconstruction_loss(&image(n, n, &p), &reference, Some(&mask)).unwrap().gradient.unwrap();
        return fd_check(&p, &analytic, step, eval, |_| false);
    }
}

/// Inpainting loss on a random 3×3×8 token pair.
pub fn inpainting_case(seed: u64, step: f32) -> FdResult {
    let mut r = rng(seed, 5);
    let (hp, wp, dim) = (3, 3, 8);
    loop {
        let p: Vec<f32> = (0..hp * wp * dim).map(|_| r.random_range(-1.0..1.0)).collect();
        let t: Vec<f32> = (0..hp * wp * dim).map(|_| r.random_range(-1.0..1.0)).collect();
        let train: Vec<bool> = (0..hp * wp).map(|_| r.random_bool(0.6)).collect();
        let alpha = r.random_range(0.0..1.0);
        if !p.iter().zip(&t).all(|(&a, &b)| far(a as f64, b as f64, step)) {
            continue;
        }
        let target = TokenField::new(hp, wp, dim, t).unwrap();
        let field = |v: &[f32]| TokenField::new(hp, wp, dim, v.to_vec()).unwrap();
        let eval = |v: &[f32]| inpainting_loss(&field(v), &target, &train, alpha).unwrap().value;
        let analytic = inpainting_loss(&field(&p), &target, &train, alpha).unwrap().gradient;
        return fd_check(&p, &analytic, step, eval, |_| false);
    }
}
