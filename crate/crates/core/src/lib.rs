//! Attention-based sequence-to-sequence translation with simultaneous
//! greedy decoding.
//!
//! The crate covers the whole pipeline at desk scale:
//!
//! * [`numerics`]: dense `f64` linear algebra, softmax/entropy, a seeded
//!   xorshift generator and a finite-difference gradient oracle.
//! * [`model`]: GRU encoder with incremental context extension, additive
//!   attention, GRU decoder, and [`checkpoint`] persistence.
//! * [`training`]: teacher-forced NLL, backpropagation through time,
//!   Adadelta, early stopping and synthetic tasks.
//! * [`decoding`]: consecutive greedy/beam decoding and simultaneous greedy
//!   decoding over input/output pipes with pluggable waiting criteria.
//! * [`metrics`]: delay `τ`, corpus BLEU, quality-to-delay ratio and
//!   source/target chunk alignment.

pub mod checkpoint;
pub mod decoding;
pub mod error;
pub mod gru;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod training;
pub mod vocab;

pub use checkpoint::Checkpoint;
pub use decoding::{
    beam_search, greedy_decode, simul_greedy_decode, Criterion, DecodingTrace, InputPipe,
    OutputPipe, SimulConfig,
};
pub use error::{Error, Result};
pub use metrics::{alignment_chunks, corpus_bleu, delay_tau, q2d, Chunk, SweepResult};
pub use model::{ContextSet, DecoderState, ModelConfig, ModelParams};
pub use training::{SentencePair, TaskKind, TaskSpec, TrainConfig};
pub use vocab::{TokenId, Vocabulary, EOS, PAD, UNK};
