use ndarray::{concatenate, s, Array1, Array2, Axis};
use rand::Rng;

use super::config::{FusionVariant, ModelConfig};
use super::encoder::{Encoder, EncoderCache, EncoderSpec};
use super::layers::{gelu, gelu_grad, Linear};
use super::{join, Param, Parameterized, Real};
use crate::error::Result;

/// Combines a video embedding and a text embedding into one query embedding.
#[derive(Debug, Clone)]
pub enum Fusion<T: Real> {
    Addition,
    Linear(Linear<T>),
    Mlp { hidden: Linear<T>, out: Linear<T> },
    Transformer(Encoder<T>),
}

#[derive(Debug, Clone)]
pub enum FusionCache<T> {
    Addition,
    Linear {
        joint: Array2<T>,
    },
    Mlp {
        joint: Array2<T>,
        pre: Array2<T>,
        act: Array2<T>,
    },
    Transformer(EncoderCache<T>),
}

impl<T: Real> Fusion<T> {
    pub fn new<R: Rng>(rng: &mut R, config: &ModelConfig) -> Self {
        let d = config.embed_dim;
        match config.fusion_variant {
            FusionVariant::Addition => Fusion::Addition,
            FusionVariant::Linear => Fusion::Linear(Linear::new(rng, 2 * d, d)),
            FusionVariant::Mlp => Fusion::Mlp {
                hidden: Linear::new(rng, 2 * d, config.mlp_hidden()),
                out: Linear::new(rng, config.mlp_hidden(), d),
            },
            FusionVariant::Transformer1 | FusionVariant::Transformer2 => {
                let layers = if config.fusion_variant == FusionVariant::Transformer1 {
                    1
                } else {
                    2
                };
                Fusion::Transformer(Encoder::new(
                    rng,
                    &EncoderSpec {
                        dim: d,
                        layers,
                        heads: config.heads,
                        ff_dim: config.ff_dim,
                        // two learned positions mark which token is video
                        max_positions: Some(2),
                        pooling: config.pooling,
                    },
                ))
            }
        }
    }

    fn joint(y_video: &Array1<T>, y_text: &Array1<T>) -> Array2<T> {
        concatenate(Axis(0), &[y_video.view(), y_text.view()])
            .expect("equal embedding widths")
            .insert_axis(Axis(0))
    }

    pub fn forward(
        &self,
        y_video: &Array1<T>,
        y_text: &Array1<T>,
    ) -> Result<(Array1<T>, FusionCache<T>)> {
        Ok(match self {
            Fusion::Addition => (y_video + y_text, FusionCache::Addition),
            Fusion::Linear(lin) => {
                let joint = Self::joint(y_video, y_text);
                let y = lin.forward(joint.view()).row(0).to_owned();
                (y, FusionCache::Linear { joint })
            }
            Fusion::Mlp { hidden, out } => {
                let joint = Self::joint(y_video, y_text);
                let pre = hidden.forward(joint.view());
                let act = pre.mapv(gelu);
                let y = out.forward(act.view()).row(0).to_owned();
                (y, FusionCache::Mlp { joint, pre, act })
            }
            Fusion::Transformer(enc) => {
                let tokens = ndarray::stack(Axis(0), &[y_video.view(), y_text.view()])
                    .expect("equal embedding widths");
                let (y, cache) = enc.forward(tokens.view())?;
                (y, FusionCache::Transformer(cache))
            }
        })
    }

    /// Returns `(dL/dy_video, dL/dy_text)`.
    pub fn backward(&mut self, cache: &FusionCache<T>, dy: &Array1<T>) -> (Array1<T>, Array1<T>) {
        let d = dy.len();
        let dy2 = || dy.clone().insert_axis(Axis(0));
        let split = |g: Array2<T>| {
            (
                g.slice(s![0, 0..d]).to_owned(),
                g.slice(s![0, d..2 * d]).to_owned(),
            )
        };
        match (self, cache) {
            (Fusion::Addition, FusionCache::Addition) => (dy.clone(), dy.clone()),
            (Fusion::Linear(lin), FusionCache::Linear { joint }) => {
                split(lin.backward(joint.view(), &dy2()))
            }
            (Fusion::Mlp { hidden, out }, FusionCache::Mlp { joint, pre, act }) => {
                let dact = out.backward(act.view(), &dy2());
                let dpre = dact * &pre.mapv(gelu_grad);
                split(hidden.backward(joint.view(), &dpre))
            }
            (Fusion::Transformer(enc), FusionCache::Transformer(c)) => {
                let g = enc.backward(c, dy);
                (g.row(0).to_owned(), g.row(1).to_owned())
            }
            _ => panic!("fusion cache does not match fusion variant"),
        }
    }
}

impl<T: Real> Parameterized<T> for Fusion<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<T>)) {
        match self {
            Fusion::Addition => {}
            Fusion::Linear(lin) => lin.visit(&join(prefix, "linear"), f),
            Fusion::Mlp { hidden, out } => {
                hidden.visit(&join(prefix, "hidden"), f);
                out.visit(&join(prefix, "out"), f);
            }
            Fusion::Transformer(enc) => enc.visit(&join(prefix, "encoder"), f),
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        match self {
            Fusion::Addition => {}
            Fusion::Linear(lin) => lin.visit_mut(&join(prefix, "linear"), f),
            Fusion::Mlp { hidden, out } => {
                hidden.visit_mut(&join(prefix, "hidden"), f);
                out.visit_mut(&join(prefix, "out"), f);
            }
            Fusion::Transformer(enc) => enc.visit_mut(&join(prefix, "encoder"), f),
        }
    }
}
