//! Simultaneous greedy decoding.
//!
//! State: the context set `C` (source prefix absorbed so far), an optional
//! look-ahead batch `C′` of up to `δ` further source tokens, and the decoder
//! state. Each iteration predicts the best next token under `C`. With the
//! source fully read it is committed outright. Otherwise `C′` is filled if
//! empty and the waiting policy compares the predictions under `C` and
//! `C ∪ C′`: waiting folds `C′` into `C` and retries, otherwise the token is
//! committed from `C`.

use crate::error::{Error, Result};
use crate::model::{ContextSet, ModelParams, Prediction};
use crate::vocab::EOS;

use super::{Criterion, DecodingTrace, InputPipe, OutputPipe, TraceStep, WaitPolicy};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulConfig {
    /// Source tokens per look-ahead read.
    pub delta: usize,
    /// Source tokens read before the first decision.
    pub s0: usize,
    pub criterion: Criterion,
    /// Cap on committed tokens. `None` means `2·s + 10`, with `s` the source
    /// tokens received so far.
    pub max_target_len: Option<usize>,
}

impl SimulConfig {
    pub fn new(delta: usize, s0: usize, criterion: Criterion) -> Self {
        SimulConfig {
            delta,
            s0,
            criterion,
            max_target_len: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.delta == 0 || self.s0 == 0 || self.max_target_len == Some(0) {
            return Err(Error::InvalidConfig(
                "delta, s0 and max_target_len must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

pub fn simul_greedy_decode(
    params: &ModelParams,
    input: &mut InputPipe<'_>,
    output: &mut OutputPipe<'_>,
    cfg: &SimulConfig,
) -> Result<DecodingTrace> {
    simul_greedy_decode_with(params, input, output, cfg, &cfg.criterion)
}

/// [`simul_greedy_decode`] with an arbitrary waiting policy in place of
/// `cfg.criterion`.
pub fn simul_greedy_decode_with(
    params: &ModelParams,
    input: &mut InputPipe<'_>,
    output: &mut OutputPipe<'_>,
    cfg: &SimulConfig,
    policy: &dyn WaitPolicy,
) -> Result<DecodingTrace> {
    cfg.validate()?;
    let mut trace = DecodingTrace::default();

    let first = input.read(cfg.s0)?;
    let mut ctx = params.encode(&first)?;
    let mut state = params.init_decoder(&ctx)?;

    // C ∪ C′ while C′ is non-empty.
    let mut lookahead: Option<ContextSet> = None;
    // Cached predictions for the current decoder state under C and C ∪ C′.
    let mut pred_small: Option<Prediction> = None;
    let mut pred_large: Option<Prediction> = None;

    loop {
        let cap = cfg
            .max_target_len
            .unwrap_or_else(|| super::default_max_len(input.consumed()));
        if trace.steps.len() >= cap {
            trace.truncated = true;
            break;
        }

        if input.is_exhausted() {
            if let Some(full) = lookahead.take() {
                // Everything has been read: absorb C′ without consulting
                // the policy.
                ctx = full;
                pred_small = pred_large.take();
            }
        }

        let small = match pred_small.take() {
            Some(p) => p,
            None => {
                trace.forward_passes += 1;
                params.next_token_logprobs(&state, &ctx)?
            }
        };
        let token = small.argmax();

        let s = if input.is_exhausted() {
            ctx.len()
        } else {
            if lookahead.is_none() {
                let batch = input.read(cfg.delta)?;
                lookahead = Some(params.extend_context(&ctx, &batch)?);
                pred_large = None;
            }
            let full = lookahead.as_ref().expect("look-ahead was just filled");
            let large = match pred_large.take() {
                Some(p) => p,
                None => {
                    trace.forward_passes += 1;
                    params.next_token_logprobs(&state, full)?
                }
            };
            if policy.decide(&small.logprobs, &large.logprobs)?.wait {
                ctx = lookahead.take().expect("look-ahead present");
                pred_small = Some(large);
                continue;
            }
            full.len()
        };

        let step = TraceStep {
            token,
            s,
            s_prime: ctx.len(),
            logp: small.logprobs[token],
        };
        output.write(&step)?;
        trace.steps.push(step);
        state = small.commit(token);
        if token == EOS {
            break;
        }
    }
    trace.source_read = input.consumed();
    Ok(trace)
}
