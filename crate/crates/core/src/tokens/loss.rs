use super::TokenField;
use crate::error::Result;

const COS_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct InpaintLoss {
    pub value: f64,
    /// Gradient w.r.t. `pred`, same layout as its token data.
    pub gradient: Vec<f64>,
}

/// Mean over trained patches of `α·‖p−t‖₁ + (1−α)·(1 − cos(p, t))`.
pub fn inpainting_loss(pred: &TokenField, target: &TokenField, patch_train: &[bool], alpha: f64) -> Result<InpaintLoss> {
    pred.ensure_shape(target)?;
    if patch_train.len() != pred.len() {
        return Err(crate::error::Error::InvalidArgument(format!(
            "patch_train has {} entries for {} tokens",
            patch_train.len(),
            pred.len()
        )));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(crate::error::Error::InvalidArgument(format!("alpha {alpha} outside [0,1]")));
    }
    let d = pred.dim;
    let mut gradient = vec![0.0; pred.data.len()];
    let count = patch_train.iter().filter(|&&b| b).count();
    if count == 0 {
        return Ok(InpaintLoss { value: 0.0, gradient });
    }
    let inv = 1.0 / count as f64;
    let mut value = 0.0;
    for i in (0..pred.len()).filter(|&i| patch_train[i]) {
        let p: Vec<f64> = pred.token(i).iter().map(|&v| v as f64).collect();
        let t: Vec<f64> = target.token(i).iter().map(|&v| v as f64).collect();
        let g = &mut gradient[i * d..(i + 1) * d];

        let l1: f64 = p.iter().zip(&t).map(|(a, b)| (a - b).abs()).sum();
        let dot: f64 = p.iter().zip(&t).map(|(a, b)| a * b).sum();
        let np = p.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nt = t.iter().map(|a| a * a).sum::<f64>().sqrt();
        let denom = np * nt + COS_EPS;
        let cos = dot / denom;
        value += alpha * l1 + (1.0 - alpha) * (1.0 - cos);

        for c in 0..d {
            let diff = p[c] - t[c];
            let sign = if diff > 0.0 {
                1.0
            } else if diff < 0.0 {
                -1.0
            } else {
                0.0
            };
            let dnp = if np > 0.0 { p[c] / np } else { 0.0 };
            let dcos = t[c] / denom - dot * nt * dnp / (denom * denom);
            g[c] = inv * (alpha * sign - (1.0 - alpha) * dcos);
        }
    }
    Ok(InpaintLoss { value: value * inv, gradient })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn field(data: Vec<f32>, hp: usize, wp: usize, dim: usize) -> TokenField {
        TokenField::new(hp, wp, dim, data).unwrap()
    }

    #[test]
    fn identical_is_zero() {
        let f = field((0..24).map(|i| i as f32 * 0.1 + 0.05).collect(), 2, 3, 4);
        let l = inpainting_loss(&f, &f, &[true; 6], 0.25).unwrap();
        assert!(l.value.abs() < 1e-7);
    }

    #[test]
    fn opposite_unit_vectors_give_two() {
        let t = field(vec![1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0], 1, 2, 4);
        let p = field(t.data.iter().map(|v| -v).collect(), 1, 2, 4);
        let l = inpainting_loss(&p, &t, &[true, true], 0.0).unwrap();
        assert!((l.value - 2.0).abs() < 1e-7);
    }

    #[test]
    fn empty_train_set_is_zero() {
        let t = field(vec![1.0; 8], 1, 2, 4);
        let p = field(vec![-3.0; 8], 1, 2, 4);
        let l = inpainting_loss(&p, &t, &[false, false], 0.5).unwrap();
        assert_eq!(l.value, 0.0);
        assert!(l.gradient.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = 1e-3f32;
        let mut tested = 0;
        while tested < 10 {
            let n = 3 * 3 * 8;
            let t: Vec<f32> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let p: Vec<f32> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            // keep every |p−t| kink well clear of the stencil
            if p.iter().zip(&t).any(|(a, b)| (a - b).abs() < 10.0 * h) {
                continue;
            }
            tested += 1;
            let train: Vec<bool> = (0..9).map(|_| rng.random_bool(0.6)).collect();
            let alpha = rng.random_range(0.0..1.0);
            let tf = field(t, 3, 3, 8);
            let pf = field(p.clone(), 3, 3, 8);
            let analytic = inpainting_loss(&pf, &tf, &train, alpha).unwrap().gradient;
            for c in 0..n {
                let (mut up, mut dn) = (p.clone(), p.clone());
                up[c] += h;
                dn[c] -= h;
                let step = up[c] as f64 - dn[c] as f64;
                let fu = inpainting_loss(&field(up, 3, 3, 8), &tf, &train, alpha).unwrap().value;
                let fd = inpainting_loss(&field(dn, 3, 3, 8), &tf, &train, alpha).unwrap().value;
                let numeric = (fu - fd) / step;
                let err = (numeric - analytic[c]).abs() / analytic[c].abs().max(numeric.abs()).max(1e-2);
                assert!(err < 1e-4, "coord {c}: analytic {} numeric {numeric}", analytic[c]);
            }
        }
    }

    #[test]
    fn bounded_cosine_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let t = field((0..8).map(|_| rng.random_range(-2.0..2.0)).collect(), 1, 2, 4);
            let p = field((0..8).map(|_| rng.random_range(-2.0..2.0)).collect(), 1, 2, 4);
            let l = inpainting_loss(&p, &t, &[true, true], 0.0).unwrap();
            assert!((0.0..=2.0 + 1e-9).contains(&l.value));
        }
    }
}
