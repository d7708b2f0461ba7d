use super::{TokenField, TokenGrid};
use crate::error::{Error, Result};

/// Mean of the visible tokens in the `k×k` window around each patch,
/// excluding the patch itself. Falls back to the global visible mean when the
/// window has no visible token, and to zero when nothing is visible.
pub fn local_mean_prior(grid: &TokenGrid, k: usize) -> Result<TokenField> {
    if k.is_multiple_of(2) || k == 0 {
        return Err(Error::InvalidArgument(format!("window size {k} must be odd")));
    }
    let f = &grid.tokens;
    let (hp, wp, dim) = f.shape();
    let r = (k / 2) as isize;

    let mut global = vec![0.0f64; dim];
    let mut visible = 0usize;
    for i in 0..f.len() {
        if !grid.mask[i] {
            visible += 1;
            for (g, &v) in global.iter_mut().zip(f.token(i)) {
                *g += v as f64;
            }
        }
    }
    let global: Vec<f32> = if visible == 0 {
        vec![0.0; dim]
    } else {
        global.iter().map(|&g| (g / visible as f64) as f32).collect()
    };

    let mut out = TokenField::zeros(hp, wp, dim);
    let mut acc = vec![0.0f64; dim];
    for row in 0..hp as isize {
        for col in 0..wp as isize {
            acc.iter_mut().for_each(|a| *a = 0.0);
            let mut n = 0usize;
            for dr in -r..=r {
                for dc in -r..=r {
                    let (rr, cc) = (row + dr, col + dc);
                    if (dr == 0 && dc == 0) || rr < 0 || cc < 0 || rr >= hp as isize || cc >= wp as isize {
                        continue;
                    }
                    let j = rr as usize * wp + cc as usize;
                    if grid.mask[j] {
                        continue;
                    }
                    n += 1;
                    for (a, &v) in acc.iter_mut().zip(f.token(j)) {
                        *a += v as f64;
                    }
                }
            }
            let dst = out.token_mut(row as usize * wp + col as usize);
            if n == 0 {
                dst.copy_from_slice(&global);
            } else {
                for (d, a) in dst.iter_mut().zip(&acc) {
                    *d = (a / n as f64) as f32;
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(hp: usize, wp: usize, dim: usize, f: impl Fn(usize, usize) -> f32) -> TokenField {
        let mut data = Vec::new();
        for i in 0..hp * wp {
            for c in 0..dim {
                data.push(f(i, c));
            }
        }
        TokenField::new(hp, wp, dim, data).unwrap()
    }

    #[test]
    fn identical_neighbours_give_that_token() {
        let f = field(3, 3, 2, |i, c| if i == 4 { 100.0 } else { [0.25, -1.5][c] });
        let mut mask = vec![false; 9];
        mask[4] = true;
        let m = local_mean_prior(&TokenGrid::new(f, mask).unwrap(), 3).unwrap();
        assert_eq!(m.token(4), &[0.25, -1.5]);
    }

    #[test]
    fn fully_masked_is_zero() {
        let f = field(2, 3, 4, |i, c| (i + c) as f32);
        let m = local_mean_prior(&TokenGrid::new(f, vec![true; 6]).unwrap(), 3).unwrap();
        assert!(m.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn three_by_three_hand_average() {
        // tokens 1..=9 (one channel); centre and the top edge token masked
        let f = field(3, 3, 1, |i, _| (i + 1) as f32);
        let mut mask = vec![false; 9];
        mask[4] = true;
        mask[1] = true;
        let m = local_mean_prior(&TokenGrid::new(f, mask).unwrap(), 3).unwrap();
        // visible neighbours of the centre: 1,3,4,6,7,8,9 → 38/7
        assert!((m.token(4)[0] - 38.0 / 7.0).abs() < 1e-6);
        // corner (0,0): neighbours 2(masked),4,5(masked) → 4
        assert_eq!(m.token(0)[0], 4.0);
    }

    #[test]
    fn isolated_hole_falls_back_to_global_mean() {
        // 1×5 strip, k = 3: patch 0 only sees patch 1, which is masked
        let f = field(1, 5, 1, |i, _| i as f32);
        let mask = vec![true, true, false, false, false];
        let m = local_mean_prior(&TokenGrid::new(f, mask).unwrap(), 3).unwrap();
        assert_eq!(m.token(0)[0], 3.0);
        assert_eq!(m.token(1)[0], 2.0);
    }

    #[test]
    fn rejects_even_window() {
        let f = field(1, 1, 1, |_, _| 0.0);
        assert!(local_mean_prior(&TokenGrid::new(f, vec![false]).unwrap(), 4).is_err());
    }
}
