use super::{sign, LossReport, LossWeights};
use crate::error::Result;
use crate::image::ScalarMap;

/// `w_dice·Dice + w_l1·mean|p−t| + w_tv·TV(p)` with gradient w.r.t. `pred`.
///
/// TV is the mean absolute forward x-difference plus the mean absolute
/// forward y-difference.
pub fn highlight_loss(pred: &ScalarMap, target: &ScalarMap, weights: &LossWeights) -> Result<LossReport> {
    pred.ensure_same_dims(target.dims())?;
    let (w, h) = pred.dims();
    let p: Vec<f64> = pred.as_slice().iter().map(|&v| v as f64).collect();
    let t: Vec<f64> = target.as_slice().iter().map(|&v| v as f64).collect();
    let n = p.len() as f64;
    let s = weights.dice_smooth;

    let spt: f64 = p.iter().zip(&t).map(|(a, b)| a * b).sum();
    let sp: f64 = p.iter().sum();
    let st: f64 = t.iter().sum();
    let num = 2.0 * spt + s;
    let den = sp + st + s;
    let dice = 1.0 - num / den;

    let l1 = p.iter().zip(&t).map(|(a, b)| (a - b).abs()).sum::<f64>() / n;

    let mut grad_tv = vec![0.0; p.len()];
    let mut tv = 0.0;
    if w > 1 {
        let cnt = ((w - 1) * h) as f64;
        let mut acc = 0.0;
        for y in 0..h {
            for x in 0..w - 1 {
                let (i, j) = (y * w + x, y * w + x + 1);
                let d = p[j] - p[i];
                acc += d.abs();
                grad_tv[j] += sign(d) / cnt;
                grad_tv[i] -= sign(d) / cnt;
            }
        }
        tv += acc / cnt;
    }
    if h > 1 {
        let cnt = (w * (h - 1)) as f64;
        let mut acc = 0.0;
        for y in 0..h - 1 {
            for x in 0..w {
                let (i, j) = (y * w + x, (y + 1) * w + x);
                let d = p[j] - p[i];
                acc += d.abs();
                grad_tv[j] += sign(d) / cnt;
                grad_tv[i] -= sign(d) / cnt;
            }
        }
        tv += acc / cnt;
    }

    let grad: Vec<f64> = (0..p.len())
        .map(|i| {
            let g_dice = -(2.0 * t[i] * den - num) / (den * den);
            let g_l1 = sign(p[i] - t[i]) / n;
            weights.w_dice * g_dice + weights.w_l1 * g_l1 + weights.w_tv * grad_tv[i]
        })
        .collect();

    Ok(LossReport::from_terms(
        &[("dice", weights.w_dice, dice), ("l1", weights.w_l1, l1), ("tv", weights.w_tv, tv)],
        Some(grad),
    ))
}
