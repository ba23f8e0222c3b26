use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty vector")]
    EmptyVector,

    #[error("input is not a probability vector (sums to {sum})")]
    NotNormalized { sum: f64 },

    #[error("cannot init decoder from empty context")]
    EmptyContext,

    #[error("token id {id} is outside a vocabulary of size {size}")]
    TokenOutOfVocab { id: usize, size: usize },

    #[error("empty source sentence")]
    EmptySource,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("bad magic")]
    BadMagic,

    #[error("unsupported version {0}")]
    UnsupportedVersion(u8),

    #[error("truncated checkpoint: {0}")]
    Truncated(&'static str),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("checkpoint has {0} unexpected trailing bytes")]
    TrailingBytes(usize),

    #[error("checkpoint vocabulary is not valid: {0}")]
    BadVocabulary(String),

    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("undefined delay: no committed tokens")]
    UndefinedDelay,

    #[error("delay must be positive, got {0}")]
    NonPositiveDelay(f64),

    #[error("{hypotheses} hypotheses but {references} references")]
    LengthMismatch { hypotheses: usize, references: usize },

    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error(
        "decoder ran {passes} forward passes, above the bound {bound} \
         (|Y|={output_len}, |X|={source_len}, s0={s0}, delta={delta})"
    )]
    ComplexityBound {
        passes: usize,
        bound: usize,
        output_len: usize,
        source_len: usize,
        s0: usize,
        delta: usize,
    },

    #[error(transparent)]
    Io(#[from] io::Error),
}
