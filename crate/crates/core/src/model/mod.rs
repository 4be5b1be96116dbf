//! The tri-modal retrieval network.
//!
//! Each modality's base features are linearly projected to `embed_dim`,
//! encoded by a pre-norm Transformer and pooled to one vector. Video and text
//! embeddings are fused into the query embedding that is matched against the
//! music embedding with a symmetric InfoNCE loss. During training the text
//! input is replaced by a fixed null feature with probability `p`.
//!
//! Every layer has a hand-written backward pass; [`ViML::accumulate_gradients`]
//! runs forward and backward for one batch.

mod attention;
mod checkpoint;
mod config;
mod dropout;
mod encoder;
mod fusion;
pub mod gradcheck;
mod layers;
pub mod loss;
mod network;
mod scalar;

use ndarray::Array2;

pub use attention::SelfAttention;
pub use checkpoint::{load_checkpoint, save_checkpoint, CONFIG_FILE, NULL_TEXT_TENSOR};
pub use config::{BaseDims, FusionVariant, ModelConfig, NullTextSource, Pooling};
pub use dropout::text_dropout;
pub use encoder::{Block, Encoder, EncoderSpec};
pub use fusion::Fusion;
pub use layers::{gelu, gelu_grad, LayerNorm, Linear};
pub use loss::{cosine, infonce, similarity_matrix, symmetric_loss, symmetric_loss_with_grad};
pub use network::{Branch, ForwardMode, ForwardOutput, StepStats, TriModalExample, ViML};
pub use scalar::Real;

/// A learned tensor and its accumulated gradient. Vectors are stored as
/// `1 x n` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub value: Array2<T>,
    pub grad: Array2<T>,
}

impl<T: Real> Param<T> {
    pub fn new(value: Array2<T>) -> Self {
        let grad = Array2::zeros(value.raw_dim());
        Self { value, grad }
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(T::zero());
    }
}

/// Walks named parameters in a fixed order.
pub trait Parameterized<T: Real> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<T>));

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<T>));

    fn num_parameters(&self) -> usize {
        let mut n = 0;
        self.visit("", &mut |_, p| n += p.len());
        n
    }

    fn zero_grad(&mut self) {
        self.visit_mut("", &mut |_, p| p.zero_grad());
    }
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}
