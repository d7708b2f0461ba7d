/// Outcome of a finite-difference gradient comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdResult {
    pub max_rel_error: f64,
    pub coordinates: usize,
}

/// Compares `analytic` with central differences of `f` at `x`.
///
/// Each coordinate is perturbed by ±`step` in f32; the realized perturbation
/// is used as the denominator. Relative error is
/// `|a − n| / max(|a|, |n|, 1e-8)`. Coordinates where `skip` is true are
/// ignored.
pub fn fd_check(
    x: &[f32],
    analytic: &[f64],
    step: f32,
    f: impl Fn(&[f32]) -> f64,
    skip: impl Fn(usize) -> bool,
) -> FdResult {
    assert_eq!(x.len(), analytic.len());
    let mut worst: f64 = 0.0;
    let mut coordinates = 0;
    let mut buf = x.to_vec();
    for i in 0..x.len() {
        if skip(i) {
            continue;
        }
        buf[i] = x[i] + step;
        let up = buf[i];
        let fu = f(&buf);
        buf[i] = x[i] - step;
        let dn = buf[i];
        let fd = f(&buf);
        buf[i] = x[i];
        let numeric = (fu - fd) / (up as f64 - dn as f64);
        let a = analytic[i];
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max(err);
        coordinates += 1;
    }
    FdResult { max_rel_error: worst, coordinates }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic() {
        let x = [0.5f32, -1.25, 2.0];
        let analytic: Vec<f64> = x.iter().map(|&v| 2.0 * v as f64).collect();
        let r = fd_check(&x, &analytic, 1e-3, |v| v.iter().map(|&a| (a as f64).powi(2)).sum(), |_| false);
        // the realized stencil midpoint can differ from x by one f32 ulp
        assert!(r.max_rel_error < 1e-6);
        assert_eq!(r.coordinates, 3);
    }

    #[test]
    fn detects_wrong_gradient() {
        let x = [1.0f32];
        let r = fd_check(&x, &[3.0], 1e-3, |v| (v[0] as f64).powi(2), |_| false);
        assert!(r.max_rel_error > 0.3);
    }
}
