//! Baselines for choosing the right ending of a four-sentence story.
//!
//! Two model families share one preprocessing pipeline:
//!
//! - a linear classifier over embedding centroids and story/ending similarity
//!   features ([`features`], [`linear`]),
//! - an LSTM encoder with raw, attention or combined ending representations
//!   ([`neural`]).
//!
//! [`corpus`] and [`annotate`] turn CSV files into tokenized, tagged
//! instances, [`datagen`] synthesizes training pairs from five-sentence
//! stories, and [`harness`] runs the ablation and comparison experiments.

pub mod annotate;
pub mod corpus;
pub mod datagen;
pub mod embeddings;
pub mod features;
pub mod harness;
pub mod linear;
pub mod neural;
mod rng;

use thiserror::Error;

/// Any error surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Embedding(#[from] embeddings::EmbeddingError),
    #[error(transparent)]
    Corpus(#[from] corpus::CorpusError),
    #[error(transparent)]
    Annotate(#[from] annotate::AnnotateError),
    #[error(transparent)]
    Datagen(#[from] datagen::DatagenError),
    #[error(transparent)]
    Feature(#[from] features::FeatureError),
    #[error(transparent)]
    Linear(#[from] linear::LinearError),
    #[error(transparent)]
    Neural(#[from] neural::NeuralError),
    #[error(transparent)]
    Harness(#[from] harness::HarnessError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
