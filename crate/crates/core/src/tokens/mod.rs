//! Forward-only token inpainter: local mean prior, 2D sinusoidal positional
//! encodings, seed construction, a small pre-norm transformer, and the merge
//! of refined and visible tokens.

mod loss;
mod posenc;
mod prior;
mod vit;

pub use self::loss::{inpainting_loss, InpaintLoss};
pub use self::posenc::positional_encoding;
pub use self::prior::local_mean_prior;
pub use self::vit::{vit_forward, Block, InpainterWeights};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `hp × wp` grid of `dim`-channel tokens, row-major, channels innermost.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenField {
    pub hp: usize,
    pub wp: usize,
    pub dim: usize,
    pub data: Vec<f32>,
}

impl TokenField {
    pub fn new(hp: usize, wp: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != hp * wp * dim {
            return Err(Error::InvalidArgument(format!(
                "token field {hp}x{wp}x{dim} needs {} values, got {}",
                hp * wp * dim,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("TokenField"));
        }
        Ok(Self { hp, wp, dim, data })
    }

    pub fn zeros(hp: usize, wp: usize, dim: usize) -> Self {
        Self { hp, wp, dim, data: vec![0.0; hp * wp * dim] }
    }

    pub fn len(&self) -> usize {
        self.hp * self.wp
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn token(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn token_mut(&mut self, i: usize) -> &mut [f32] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.hp, self.wp, self.dim)
    }

    pub fn ensure_shape(&self, other: &TokenField) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", self.shape()),
                actual: format!("{:?}", other.shape()),
            });
        }
        Ok(())
    }

    /// Reorders tokens so that output token `i` is input token `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.len());
        let mut out = Self::zeros(self.hp, self.wp, self.dim);
        for (i, &src) in perm.iter().enumerate() {
            out.token_mut(i).copy_from_slice(self.token(src));
        }
        out
    }
}

/// Tokens plus the patch mask `P` (true = to inpaint).
#[derive(Debug, Clone, PartialEq)]
pub struct TokenGrid {
    pub tokens: TokenField,
    pub mask: Vec<bool>,
}

impl TokenGrid {
    pub fn new(tokens: TokenField, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != tokens.len() {
            return Err(Error::InvalidArgument(format!(
                "mask has {} entries for {} tokens",
                mask.len(),
                tokens.len()
            )));
        }
        Ok(Self { tokens, mask })
    }
}

/// Inpainter hyper-parameters. Width, heads and window are desk-scale
/// defaults; depth 6 and `lambda` 0.5 follow the reference setup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InpainterConfig {
    pub dim: usize,
    pub depth: usize,
    pub heads: usize,
    /// Odd window size of the local mean prior.
    pub neighborhood: usize,
    pub lambda: f32,
    /// L1 weight `α` of the inpainting loss.
    pub alpha: f32,
    pub ffn_mult: usize,
    pub seed: u64,
}

impl Default for InpainterConfig {
    fn default() -> Self {
        Self { dim: 64, depth: 6, heads: 4, neighborhood: 3, lambda: 0.5, alpha: 0.25, ffn_mult: 4, seed: 0 }
    }
}

impl InpainterConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("inpainter config: {m}")));
        if self.dim == 0 || self.heads == 0 || !self.dim.is_multiple_of(self.heads) {
            return bad("dim must be a positive multiple of heads");
        }
        if !self.dim.is_multiple_of(4) {
            return bad("dim must be divisible by 4 for 2D positional encodings");
        }
        if self.neighborhood < 3 || self.neighborhood.is_multiple_of(2) {
            return bad("neighborhood must be odd and ≥ 3");
        }
        if self.depth == 0 || self.ffn_mult == 0 {
            return bad("depth and ffn_mult must be ≥ 1");
        }
        if !(0.0..=1.0).contains(&self.lambda) || !(0.0..=1.0).contains(&self.alpha) {
            return bad("lambda and alpha must lie in [0, 1]");
        }
        Ok(())
    }
}

/// `F_seed = P⊙[λ·f_mask + (1−λ)·F_mean] + (1−P)⊙F + E_pos`
pub fn build_seed(grid: &TokenGrid, mean: &TokenField, pos: &TokenField, mask_token: &[f32], lambda: f32) -> Result<TokenField> {
    let f = &grid.tokens;
    f.ensure_shape(mean)?;
    f.ensure_shape(pos)?;
    if mask_token.len() != f.dim {
        return Err(Error::InvalidArgument(format!("mask token has {} channels, expected {}", mask_token.len(), f.dim)));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!("lambda {lambda} outside [0,1]")));
    }
    let mut out = TokenField::zeros(f.hp, f.wp, f.dim);
    for i in 0..f.len() {
        let (m, p, src) = (mean.token(i), pos.token(i), f.token(i));
        let dst = out.token_mut(i);
        for c in 0..f.dim {
            let base = if grid.mask[i] { lambda * mask_token[c] + (1.0 - lambda) * m[c] } else { src[c] };
            dst[c] = base + p[c];
        }
    }
    Ok(out)
}

/// `F_comp = P⊙refined + (1−P)⊙F_raw`
pub fn merge_completed(raw: &TokenGrid, refined: &TokenField) -> Result<TokenField> {
    raw.tokens.ensure_shape(refined)?;
    let mut out = raw.tokens.clone();
    for (i, &masked) in raw.mask.iter().enumerate() {
        if masked {
            out.token_mut(i).copy_from_slice(refined.token(i));
        }
    }
    Ok(out)
}

/// Intermediate and final fields of one inpainting pass.
#[derive(Debug, Clone)]
pub struct InpaintOutput {
    pub mean: TokenField,
    pub seed: TokenField,
    pub refined: TokenField,
    pub completed: TokenField,
}

/// prior → seed → transformer → merge.
pub fn inpaint(grid: &TokenGrid, config: &InpainterConfig, weights: &InpainterWeights) -> Result<InpaintOutput> {
    config.validate()?;
    let f = &grid.tokens;
    if f.dim != config.dim {
        return Err(Error::InvalidArgument(format!("tokens have {} channels, config expects {}", f.dim, config.dim)));
    }
    let mean = local_mean_prior(grid, config.neighborhood)?;
    let pos = positional_encoding(f.hp, f.wp, f.dim)?;
    let seed = build_seed(grid, &mean, &pos, &weights.mask_token, config.lambda)?;
    let refined = vit_forward(&seed, weights)?;
    let completed = merge_completed(grid, &refined)?;
    Ok(InpaintOutput { mean, seed, refined, completed })
}
