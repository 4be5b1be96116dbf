use ndarray::{s, Array2, ArrayView2, Axis};
use rand::Rng;

use super::layers::Linear;
use super::{join, Param, Parameterized, Real};

/// Multi-head scaled dot-product self-attention.
#[derive(Debug, Clone)]
pub struct SelfAttention<T: Real> {
    pub query: Linear<T>,
    pub key: Linear<T>,
    pub value: Linear<T>,
    pub output: Linear<T>,
    heads: usize,
}

#[derive(Debug, Clone)]
pub struct AttentionCache<T> {
    q: Array2<T>,
    k: Array2<T>,
    v: Array2<T>,
    /// One `n x n` row-stochastic matrix per head.
    probs: Vec<Array2<T>>,
    context: Array2<T>,
}

pub(crate) fn softmax_rows<T: Real>(scores: &mut Array2<T>) {
    for mut row in scores.rows_mut() {
        let max = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

impl<T: Real> SelfAttention<T> {
    pub fn new<R: Rng>(rng: &mut R, dim: usize, heads: usize) -> Self {
        assert!(heads > 0 && dim.is_multiple_of(heads), "dim must divide into heads");
        Self {
            query: Linear::new(rng, dim, dim),
            key: Linear::new(rng, dim, dim),
            value: Linear::new(rng, dim, dim),
            output: Linear::new(rng, dim, dim),
            heads,
        }
    }

    pub fn heads(&self) -> usize {
        self.heads
    }

    fn head_dim(&self) -> usize {
        self.query.d_out() / self.heads
    }

    pub fn forward(&self, x: ArrayView2<'_, T>) -> (Array2<T>, AttentionCache<T>) {
        let q = self.query.forward(x);
        let k = self.key.forward(x);
        let v = self.value.forward(x);
        let dh = self.head_dim();
        let scale = T::of(1.0 / (dh as f64).sqrt());

        let mut context = Array2::zeros(q.raw_dim());
        let mut probs = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let cols = s![.., h * dh..(h + 1) * dh];
            let mut a = q.slice(cols).dot(&k.slice(cols).t()) * scale;
            softmax_rows(&mut a);
            context.slice_mut(cols).assign(&a.dot(&v.slice(cols)));
            probs.push(a);
        }
        let y = self.output.forward(context.view());
        (
            y,
            AttentionCache {
                q,
                k,
                v,
                probs,
                context,
            },
        )
    }

    pub fn backward(
        &mut self,
        x: ArrayView2<'_, T>,
        cache: &AttentionCache<T>,
        dy: &Array2<T>,
    ) -> Array2<T> {
        let dcontext = self.output.backward(cache.context.view(), dy);
        let dh = self.head_dim();
        let scale = T::of(1.0 / (dh as f64).sqrt());

        let mut dq = Array2::zeros(cache.q.raw_dim());
        let mut dk = Array2::zeros(cache.k.raw_dim());
        let mut dv = Array2::zeros(cache.v.raw_dim());
        for (h, a) in cache.probs.iter().enumerate() {
            let cols = s![.., h * dh..(h + 1) * dh];
            let dctx = dcontext.slice(cols);
            let da = dctx.dot(&cache.v.slice(cols).t());
            dv.slice_mut(cols).assign(&a.t().dot(&dctx));
            // softmax backward, row-wise: ds = a * (da - <da, a>)
            let inner = (&da * a).sum_axis(Axis(1)).insert_axis(Axis(1));
            let ds = (&da - &inner) * a * scale;
            dq.slice_mut(cols).assign(&ds.dot(&cache.k.slice(cols)));
            dk.slice_mut(cols).assign(&ds.t().dot(&cache.q.slice(cols)));
        }
        let mut dx = self.query.backward(x, &dq);
        dx += &self.key.backward(x, &dk);
        dx += &self.value.backward(x, &dv);
        dx
    }
}

impl<T: Real> Parameterized<T> for SelfAttention<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<T>)) {
        self.query.visit(&join(prefix, "query"), f);
        self.key.visit(&join(prefix, "key"), f);
        self.value.visit(&join(prefix, "value"), f);
        self.output.visit(&join(prefix, "output"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        self.query.visit_mut(&join(prefix, "query"), f);
        self.key.visit_mut(&join(prefix, "key"), f);
        self.value.visit_mut(&join(prefix, "value"), f);
        self.output.visit_mut(&join(prefix, "output"), f);
    }
}
