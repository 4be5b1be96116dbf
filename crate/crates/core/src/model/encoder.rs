//! Pre-norm Transformer encoder with learned positions and pooling.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use super::attention::{AttentionCache, SelfAttention};
use super::config::Pooling;
use super::layers::{gelu, gelu_grad, normal, LayerNorm, LayerNormCache, Linear};
use super::{join, Param, Parameterized, Real};
use crate::error::{Error, Result};

/// `x + attn(ln1(x))`, then `+ ff(ln2(.))`.
#[derive(Debug, Clone)]
pub struct Block<T: Real> {
    pub ln1: LayerNorm<T>,
    pub attn: SelfAttention<T>,
    pub ln2: LayerNorm<T>,
    pub ff_in: Linear<T>,
    pub ff_out: Linear<T>,
}

#[derive(Debug, Clone)]
pub struct BlockCache<T> {
    ln1: LayerNormCache<T>,
    normed1: Array2<T>,
    attn: AttentionCache<T>,
    ln2: LayerNormCache<T>,
    normed2: Array2<T>,
    hidden_pre: Array2<T>,
    hidden: Array2<T>,
}

impl<T: Real> Block<T> {
    pub fn new<R: Rng>(rng: &mut R, dim: usize, heads: usize, ff_dim: usize) -> Self {
        Self {
            ln1: LayerNorm::new(dim),
            attn: SelfAttention::new(rng, dim, heads),
            ln2: LayerNorm::new(dim),
            ff_in: Linear::new(rng, dim, ff_dim),
            ff_out: Linear::new(rng, ff_dim, dim),
        }
    }

    pub fn forward(&self, x: ArrayView2<'_, T>) -> (Array2<T>, BlockCache<T>) {
        let (normed1, ln1) = self.ln1.forward(x);
        let (att, attn) = self.attn.forward(normed1.view());
        let mid = &x + &att;
        let (normed2, ln2) = self.ln2.forward(mid.view());
        let hidden_pre = self.ff_in.forward(normed2.view());
        let hidden = hidden_pre.mapv(gelu);
        let out = mid + self.ff_out.forward(hidden.view());
        (
            out,
            BlockCache {
                ln1,
                normed1,
                attn,
                ln2,
                normed2,
                hidden_pre,
                hidden,
            },
        )
    }

    pub fn backward(&mut self, cache: &BlockCache<T>, dy: &Array2<T>) -> Array2<T> {
        let dhidden = self.ff_out.backward(cache.hidden.view(), dy);
        let dpre = dhidden * &cache.hidden_pre.mapv(gelu_grad);
        let dnormed2 = self.ff_in.backward(cache.normed2.view(), &dpre);
        let dmid = dy + &self.ln2.backward(&cache.ln2, &dnormed2);
        let dnormed1 = self.attn.backward(cache.normed1.view(), &cache.attn, &dmid);
        &dmid + &self.ln1.backward(&cache.ln1, &dnormed1)
    }
}

impl<T: Real> Parameterized<T> for Block<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<T>)) {
        self.ln1.visit(&join(prefix, "ln1"), f);
        self.attn.visit(&join(prefix, "attn"), f);
        self.ln2.visit(&join(prefix, "ln2"), f);
        self.ff_in.visit(&join(prefix, "ff_in"), f);
        self.ff_out.visit(&join(prefix, "ff_out"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        self.ln1.visit_mut(&join(prefix, "ln1"), f);
        self.attn.visit_mut(&join(prefix, "attn"), f);
        self.ln2.visit_mut(&join(prefix, "ln2"), f);
        self.ff_in.visit_mut(&join(prefix, "ff_in"), f);
        self.ff_out.visit_mut(&join(prefix, "ff_out"), f);
    }
}

#[derive(Debug, Clone)]
pub struct EncoderSpec {
    pub dim: usize,
    pub layers: usize,
    pub heads: usize,
    pub ff_dim: usize,
    /// `None` disables positional embeddings.
    pub max_positions: Option<usize>,
    pub pooling: Pooling,
}

/// Token sequence in, one pooled vector out.
#[derive(Debug, Clone)]
pub struct Encoder<T: Real> {
    pub positions: Option<Param<T>>,
    pub blocks: Vec<Block<T>>,
    pub ln_final: LayerNorm<T>,
    pooling: Pooling,
}

#[derive(Debug, Clone)]
pub struct EncoderCache<T> {
    blocks: Vec<BlockCache<T>>,
    ln_final: LayerNormCache<T>,
    n: usize,
}

pub const POSITION_INIT_STD: f64 = 0.02;

impl<T: Real> Encoder<T> {
    pub fn new<R: Rng>(rng: &mut R, spec: &EncoderSpec) -> Self {
        let positions = spec
            .max_positions
            .map(|p| Param::new(normal(rng, (p, spec.dim), POSITION_INIT_STD)));
        let blocks = (0..spec.layers)
            .map(|_| Block::new(rng, spec.dim, spec.heads, spec.ff_dim))
            .collect();
        Self {
            positions,
            blocks,
            ln_final: LayerNorm::new(spec.dim),
            pooling: spec.pooling,
        }
    }

    pub fn pooling(&self) -> Pooling {
        self.pooling
    }

    pub fn forward(&self, tokens: ArrayView2<'_, T>) -> Result<(Array1<T>, EncoderCache<T>)> {
        let n = tokens.nrows();
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        let mut x = tokens.to_owned();
        if let Some(pos) = &self.positions {
            if n > pos.value.nrows() {
                return Err(Error::shape(format!(
                    "sequence of {n} tokens exceeds {} positions",
                    pos.value.nrows()
                )));
            }
            x += &pos.value.slice(s![0..n, ..]);
        }
        let mut caches = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            let (next, cache) = block.forward(x.view());
            caches.push(cache);
            x = next;
        }
        let (normed, ln_final) = self.ln_final.forward(x.view());
        let pooled = match self.pooling {
            Pooling::Mean => normed.sum_axis(Axis(0)) / T::of(n as f64),
            Pooling::FirstToken => normed.row(0).to_owned(),
        };
        Ok((
            pooled,
            EncoderCache {
                blocks: caches,
                ln_final,
                n,
            },
        ))
    }

    /// Returns the gradient with respect to the input tokens.
    pub fn backward(&mut self, cache: &EncoderCache<T>, dpooled: &Array1<T>) -> Array2<T> {
        let dim = dpooled.len();
        let mut dnormed = Array2::zeros((cache.n, dim));
        match self.pooling {
            Pooling::Mean => {
                let share = dpooled / T::of(cache.n as f64);
                for mut row in dnormed.rows_mut() {
                    row.assign(&share);
                }
            }
            Pooling::FirstToken => dnormed.row_mut(0).assign(dpooled),
        }
        let mut dx = self.ln_final.backward(&cache.ln_final, &dnormed);
        for (block, bc) in self.blocks.iter_mut().zip(&cache.blocks).rev() {
            dx = block.backward(bc, &dx);
        }
        if let Some(pos) = &mut self.positions {
            let mut g = pos.grad.slice_mut(s![0..cache.n, ..]);
            g += &dx;
        }
        dx
    }
}

impl<T: Real> Parameterized<T> for Encoder<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<T>)) {
        if let Some(p) = &self.positions {
            f(&join(prefix, "positions"), p);
        }
        for (i, b) in self.blocks.iter().enumerate() {
            b.visit(&join(prefix, &format!("blocks.{i}")), f);
        }
        self.ln_final.visit(&join(prefix, "ln_final"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        if let Some(p) = &mut self.positions {
            f(&join(prefix, "positions"), p);
        }
        for (i, b) in self.blocks.iter_mut().enumerate() {
            b.visit_mut(&join(prefix, &format!("blocks.{i}")), f);
        }
        self.ln_final.visit_mut(&join(prefix, "ln_final"), f);
    }
}
