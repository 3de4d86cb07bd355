//! LSTM classifier over (story, ending 1, ending 2).
//!
//! One LSTM encodes the story tokens from a zero state; its final hidden and
//! cell states seed the encoding of each ending. The representation fed to
//! the softmax head depends on the [`Variant`]:
//!
//! - `Raw`: `[e1; e2]`, the final ending hidden states;
//! - `Attention`: `[h*1; h*2]` where `h*k = tanh(Wp·r + Wx·e_k)` and `r` is an
//!   attention-weighted sum of story outputs;
//! - `Combined`: `[e1; h*1; e2; h*2]`.
//!
//! Word vectors are frozen inputs. Training is Adam on mean cross-entropy,
//! with gradients computed by hand (backpropagation through time).

mod checkpoint;
mod matrix;
mod model;
mod train;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use matrix::Matrix;
pub use model::{
    attend, backward, backward_into, embed_instance, encode, forward, init_params, loss, lstm_step,
    AttentionOutput, AttentionParams, ClassifierHead, EmbeddedInstance, Encoding, ForwardCache,
    LstmParams, NeuralModel, MAX_SEQUENCE_LEN,
};
pub use train::{
    accuracy, adam_update, grid_search, predict, train, AdamState, GridReport, GridRow, GridSpec,
    TrainConfig, TrainOutcome, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON,
};

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("shape mismatch in {what}: expected {expected}, found {found}")]
    Shape {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("cannot encode an empty sequence ({0})")]
    EmptySequence(&'static str),
    #[error("instance {0:?} is unlabeled")]
    Unlabeled(String),
    #[error("training or dev set is empty")]
    EmptyData,
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("unknown variant {0:?} (expected raw, att or combined)")]
    UnknownVariant(String),
    #[error("checkpoint line {line}: {reason}")]
    Checkpoint { line: usize, reason: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// How ending representations are built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Raw,
    Attention,
    Combined,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Raw, Variant::Attention, Variant::Combined];

    pub fn uses_attention(self) -> bool {
        !matches!(self, Variant::Raw)
    }

    /// Width of the concatenated representation for hidden size `h`.
    pub fn output_width(self, hidden: usize) -> usize {
        match self {
            Variant::Raw | Variant::Attention => 2 * hidden,
            Variant::Combined => 4 * hidden,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Raw => "raw",
            Variant::Attention => "att",
            Variant::Combined => "combined",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = NeuralError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "raw" => Ok(Variant::Raw),
            "att" | "attention" => Ok(Variant::Attention),
            "combined" | "raw+att" => Ok(Variant::Combined),
            other => Err(NeuralError::UnknownVariant(other.to_string())),
        }
    }
}
