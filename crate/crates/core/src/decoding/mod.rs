//! Consecutive and simultaneous decoding.

mod consecutive;
mod criteria;
mod pipe;
mod simul;

pub use consecutive::{beam_search, greedy_decode, BeamOutput};
pub use criteria::{
    wait_if_diff, wait_if_entropy, wait_if_worse, Constant, Criterion, WaitDecision, WaitPolicy,
};
pub use pipe::{CommitSink, InputPipe, OutputPipe, TokenSource, TraceStep};
pub use simul::{simul_greedy_decode, simul_greedy_decode_with, SimulConfig};

use crate::vocab::TokenId;

/// Default target-length cap for a source of `source_len` tokens.
pub fn default_max_len(source_len: usize) -> usize {
    2 * source_len + 10
}

/// Upper bound on decoder forward passes for one simultaneous session:
/// `2 · (|Ŷ| + ⌈(|X| − s₀)/δ⌉)`.
pub fn forward_pass_bound(output_len: usize, source_len: usize, s0: usize, delta: usize) -> usize {
    2 * (output_len + source_len.saturating_sub(s0).div_ceil(delta))
}

/// Per-commit record of a decoding session.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DecodingTrace {
    pub steps: Vec<TraceStep>,
    /// The length cap stopped decoding before `<eos>` was committed.
    pub truncated: bool,
    /// Decoder forward passes (`next_token_logprobs` calls).
    pub forward_passes: usize,
    /// Source tokens read from the input pipe.
    pub source_read: usize,
}

impl DecodingTrace {
    pub fn tokens(&self) -> Vec<TokenId> {
        self.steps.iter().map(|s| s.token).collect()
    }

    pub fn s_values(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.s).collect()
    }

    pub fn s_prime_values(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.s_prime).collect()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Sum of committed-token log-probabilities.
    pub fn score(&self) -> f64 {
        self.steps.iter().map(|s| s.logp).sum()
    }
}
