use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{InpainterConfig, TokenField};
use crate::error::{Error, Result};

const LN_EPS: f64 = 1e-5;

/// Row-major `rows × cols` matrix applied as `x · W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub rows: usize,
    pub cols: usize,
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

impl Linear {
    fn init(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Self {
        let a = (6.0 / (rows + cols) as f64).sqrt() as f32;
        let weight = (0..rows * cols).map(|_| rng.random_range(-a..a)).collect();
        let bias = (0..cols).map(|_| rng.random_range(-0.02..0.02)).collect();
        Self { rows, cols, weight, bias }
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().zip(&self.bias).for_each(|(o, &b)| *o = b as f64);
        for (r, &xv) in x.iter().enumerate() {
            let row = &self.weight[r * self.cols..(r + 1) * self.cols];
            for (o, &w) in out.iter_mut().zip(row) {
                *o += xv * w as f64;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub gamma: Vec<f32>,
    pub beta: Vec<f32>,
}

impl LayerNorm {
    fn new(dim: usize) -> Self {
        Self { gamma: vec![1.0; dim], beta: vec![0.0; dim] }
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let inv = 1.0 / (var + LN_EPS).sqrt();
        for (i, o) in out.iter_mut().enumerate() {
            *o = (x[i] - mean) * inv * self.gamma[i] as f64 + self.beta[i] as f64;
        }
    }
}

/// One pre-norm transformer block.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub ln1: LayerNorm,
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub proj: Linear,
    pub ln2: LayerNorm,
    pub fc1: Linear,
    pub fc2: Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InpainterWeights {
    pub dim: usize,
    pub heads: usize,
    pub mask_token: Vec<f32>,
    pub blocks: Vec<Block>,
}

impl InpainterWeights {
    /// Deterministic initialization from `config.seed`.
    pub fn init(config: &InpainterConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let d = config.dim;
        let hidden = d * config.ffn_mult;
        let mask_token = (0..d).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        let blocks = (0..config.depth)
            .map(|_| Block {
                ln1: LayerNorm::new(d),
                q: Linear::init(&mut rng, d, d),
                k: Linear::init(&mut rng, d, d),
                v: Linear::init(&mut rng, d, d),
                proj: Linear::init(&mut rng, d, d),
                ln2: LayerNorm::new(d),
                fc1: Linear::init(&mut rng, d, hidden),
                fc2: Linear::init(&mut rng, hidden, d),
            })
            .collect();
        Ok(Self { dim: d, heads: config.heads, mask_token, blocks })
    }
}

fn gelu(x: f64) -> f64 {
    const C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
    0.5 * x * (1.0 + (C * (x + 0.044715 * x * x * x)).tanh())
}

/// Runs the block stack over the flattened token sequence.
pub fn vit_forward(seed: &TokenField, weights: &InpainterWeights) -> Result<TokenField> {
    let (n, d) = (seed.len(), seed.dim);
    if d != weights.dim {
        return Err(Error::InvalidArgument(format!("tokens have {d} channels, weights expect {}", weights.dim)));
    }
    let heads = weights.heads;
    let hd = d / heads;
    let scale = 1.0 / (hd as f64).sqrt();

    let mut x: Vec<f64> = seed.data.iter().map(|&v| v as f64).collect();
    let mut normed = vec![0.0; n * d];
    let (mut q, mut k, mut v) = (vec![0.0; n * d], vec![0.0; n * d], vec![0.0; n * d]);
    let mut attn = vec![0.0; n * d];
    let mut scores = vec![0.0; n];
    let mut tmp = vec![0.0; d];

    for block in &weights.blocks {
        for i in 0..n {
            let row = i * d..(i + 1) * d;
            block.ln1.apply(&x[row.clone()], &mut normed[row.clone()]);
            block.q.apply(&normed[row.clone()], &mut q[row.clone()]);
            block.k.apply(&normed[row.clone()], &mut k[row.clone()]);
            block.v.apply(&normed[row.clone()], &mut v[row]);
        }
        attn.iter_mut().for_each(|a| *a = 0.0);
        for h in 0..heads {
            let ch = h * hd..(h + 1) * hd;
            for i in 0..n {
                let qi = &q[i * d + ch.start..i * d + ch.end];
                let mut max = f64::NEG_INFINITY;
                for (j, s) in scores.iter_mut().enumerate() {
                    let kj = &k[j * d + ch.start..j * d + ch.end];
                    *s = qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() * scale;
                    max = max.max(*s);
                }
                let mut z = 0.0;
                for s in scores.iter_mut() {
                    *s = (*s - max).exp();
                    z += *s;
                }
                let out = &mut attn[i * d + ch.start..i * d + ch.end];
                for (j, &s) in scores.iter().enumerate() {
                    let w = s / z;
                    let vj = &v[j * d + ch.start..j * d + ch.end];
                    for (o, &vv) in out.iter_mut().zip(vj) {
                        *o += w * vv;
                    }
                }
            }
        }
        for i in 0..n {
            let row = i * d..(i + 1) * d;
            block.proj.apply(&attn[row.clone()], &mut tmp);
            x[row].iter_mut().zip(&tmp).for_each(|(a, b)| *a += b);
        }

        let mut hidden = vec![0.0; block.fc1.cols];
        for i in 0..n {
            let row = i * d..(i + 1) * d;
            block.ln2.apply(&x[row.clone()], &mut normed[row.clone()]);
            block.fc1.apply(&normed[row.clone()], &mut hidden);
            hidden.iter_mut().for_each(|h| *h = gelu(*h));
            block.fc2.apply(&hidden, &mut tmp);
            x[row].iter_mut().zip(&tmp).for_each(|(a, b)| *a += b);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("vit_forward"));
        }
    }

    let data: Vec<f32> = x.iter().map(|&v| v as f32).collect();
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("vit_forward"));
    }
    Ok(TokenField { hp: seed.hp, wp: seed.wp, dim: d, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;

    fn random_field(hp: usize, wp: usize, dim: usize, seed: u64) -> TokenField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        TokenField::new(hp, wp, dim, (0..hp * wp * dim).map(|_| rng.random_range(-1.0f32..1.0)).collect()).unwrap()
    }

    #[test]
    fn shape_and_determinism() {
        let cfg = InpainterConfig { dim: 16, depth: 2, heads: 4, seed: 11, ..Default::default() };
        let w = InpainterWeights::init(&cfg).unwrap();
        for (hp, wp) in [(1, 1), (2, 5), (4, 4)] {
            let f = random_field(hp, wp, 16, 3);
            let a = vit_forward(&f, &w).unwrap();
            assert_eq!(a.shape(), f.shape());
            let b = vit_forward(&f, &w).unwrap();
            assert!(a.data.iter().zip(&b.data).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        assert_eq!(InpainterWeights::init(&cfg).unwrap(), w);
        let other = InpainterWeights::init(&InpainterConfig { seed: 12, ..cfg }).unwrap();
        assert_ne!(other, w);
    }

    #[test]
    fn permutation_equivariant() {
        let cfg = InpainterConfig { depth: 6, ..Default::default() };
        let w = InpainterWeights::init(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for trial in 0..3 {
            let f = random_field(4, 4, cfg.dim, 100 + trial);
            let mut perm: Vec<usize> = (0..16).collect();
            perm.shuffle(&mut rng);
            let a = vit_forward(&f.permuted(&perm), &w).unwrap();
            let b = vit_forward(&f, &w).unwrap().permuted(&perm);
            let err = a.data.iter().zip(&b.data).map(|(x, y)| (x - y).abs()).fold(0.0f32, f32::max);
            assert!(err < 1e-5, "max deviation {err}");
        }
    }

    #[test]
    fn rejects_dim_mismatch() {
        let w = InpainterWeights::init(&InpainterConfig { dim: 8, heads: 2, depth: 1, ..Default::default() }).unwrap();
        assert!(vit_forward(&random_field(2, 2, 16, 0), &w).is_err());
    }
}
