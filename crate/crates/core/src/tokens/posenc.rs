use super::TokenField;
use crate::error::{Error, Result};

/// Fixed 2D sinusoidal encoding. The first `dim/2` channels encode the row,
/// the rest the column; each half interleaves `sin, cos` pairs over the
/// frequencies `10000^(−j/(dim/4))`.
pub fn positional_encoding(hp: usize, wp: usize, dim: usize) -> Result<TokenField> {
    if dim == 0 || !dim.is_multiple_of(4) {
        return Err(Error::InvalidArgument(format!("positional encoding needs dim divisible by 4, got {dim}")));
    }
    let quarter = dim / 4;
    let freqs: Vec<f64> = (0..quarter).map(|j| 10000f64.powf(-(j as f64) / quarter as f64)).collect();
    let mut out = TokenField::zeros(hp, wp, dim);
    for row in 0..hp {
        for col in 0..wp {
            let t = out.token_mut(row * wp + col);
            for (half, pos) in [row as f64, col as f64].into_iter().enumerate() {
                let base = half * dim / 2;
                for (j, &w) in freqs.iter().enumerate() {
                    t[base + 2 * j] = (pos * w).sin() as f32;
                    t[base + 2 * j + 1] = (pos * w).cos() as f32;
                }
            }
        }
    }
    Ok(out)
}
