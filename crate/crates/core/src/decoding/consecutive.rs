use crate::error::Result;
use crate::model::{DecoderState, ModelParams};
use crate::numerics::argmax;
use crate::vocab::{TokenId, EOS};

use super::{DecodingTrace, TraceStep};

/// Argmax decoding over the full source. Every step sees all `|X|` context
/// vectors, so `s(t) = s′(t) = |X|`.
pub fn greedy_decode(params: &ModelParams, source: &[TokenId], max_len: usize) -> Result<DecodingTrace> {
    let ctx = params.encode(source)?;
    let mut state = params.init_decoder(&ctx)?;
    let mut trace = DecodingTrace {
        source_read: source.len(),
        ..Default::default()
    };
    loop {
        if trace.steps.len() >= max_len {
            trace.truncated = true;
            break;
        }
        let pred = params.next_token_logprobs(&state, &ctx)?;
        trace.forward_passes += 1;
        let token = argmax(&pred.logprobs);
        trace.steps.push(TraceStep {
            token,
            s: ctx.len(),
            s_prime: ctx.len(),
            logp: pred.logprobs[token],
        });
        state = pred.commit(token);
        if token == EOS {
            break;
        }
    }
    Ok(trace)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamOutput {
    pub tokens: Vec<TokenId>,
    /// Summed log-probability, no length normalization.
    pub score: f64,
    pub truncated: bool,
}

struct Hypothesis {
    tokens: Vec<TokenId>,
    score: f64,
    state: DecoderState,
    finished: bool,
}

/// Beam search over summed log-probabilities. Hypotheses that emit `<eos>`
/// are frozen and keep competing for beam slots with their final score.
pub fn beam_search(
    params: &ModelParams,
    source: &[TokenId],
    width: usize,
    max_len: usize,
) -> Result<BeamOutput> {
    assert!(width >= 1, "beam width must be at least 1");
    let ctx = params.encode(source)?;
    let mut beam = vec![Hypothesis {
        tokens: Vec::new(),
        score: 0.0,
        state: params.init_decoder(&ctx)?,
        finished: false,
    }];

    for _ in 0..max_len {
        if beam.iter().all(|h| h.finished) {
            break;
        }
        let mut candidates = Vec::with_capacity(beam.len() * width);
        for hyp in beam {
            if hyp.finished {
                candidates.push(hyp);
                continue;
            }
            let pred = params.next_token_logprobs(&hyp.state, &ctx)?;
            for token in top_k(&pred.logprobs, width) {
                let mut tokens = hyp.tokens.clone();
                tokens.push(token);
                candidates.push(Hypothesis {
                    tokens,
                    score: hyp.score + pred.logprobs[token],
                    state: pred.commit(token),
                    finished: token == EOS,
                });
            }
        }
        // Stable: equal scores keep generation order, which puts lower
        // token ids first within a parent.
        candidates.sort_by(|a, b| b.score.total_cmp(&a.score));
        candidates.truncate(width);
        beam = candidates;
    }

    let best_finished = beam
        .iter()
        .filter(|h| h.finished)
        .fold(None::<&Hypothesis>, |best, h| match best {
            Some(b) if b.score >= h.score => Some(b),
            _ => Some(h),
        });
    Ok(match best_finished {
        Some(h) => BeamOutput {
            tokens: h.tokens.clone(),
            score: h.score,
            truncated: false,
        },
        None => BeamOutput {
            tokens: beam[0].tokens.clone(),
            score: beam[0].score,
            truncated: true,
        },
    })
}

/// Indices of the `k` largest entries, largest first, ties by lower index.
fn top_k(v: &[f64], k: usize) -> Vec<TokenId> {
    if k == 1 {
        return vec![argmax(v)];
    }
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}
