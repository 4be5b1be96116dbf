//! Language-guided music retrieval for video.
//!
//! The crate is organised by pipeline stage: [`features`] holds base-feature
//! data and storage, [`tagtext`] synthesises training text from music tags,
//! [`model`] is the tri-modal contrastive network, [`train`] fits it, and
//! [`eval`] runs the pool-based retrieval protocol.

pub mod error;
pub mod eval;
pub mod features;
pub mod model;
pub mod tagtext;
pub mod train;

pub use error::{Error, Result};
