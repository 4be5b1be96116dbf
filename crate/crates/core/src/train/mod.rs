//! Contrastive training with text dropout, experiment presets and corpus
//! loading.

mod config;
mod corpus;
mod optimizer;
mod trainer;

pub use config::{preset, NamedConfig, TextSource, TrainConfig, PRESETS};
pub use corpus::{load_corpus, load_corpus_with, text_encoder_for_store};
pub use optimizer::Adam;
pub use trainer::{train, train_with, EpochSnapshot, StepRecord, TrainLog, TrainOptions};
