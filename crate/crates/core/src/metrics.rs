//! Delay, corpus BLEU and the quality-to-delay ratio.

use std::collections::HashMap;
use std::hash::Hash;
use std::ops::Range;

use serde::Serialize;

use crate::decoding::{Criterion, DecodingTrace};
use crate::error::{Error, Result};

/// Normalized area under `s(t)`: `τ = Σ s(t) / (|X|·|Ŷ|)`.
pub fn delay_tau(s_values: &[usize], source_len: usize) -> Result<f64> {
    if s_values.is_empty() || source_len == 0 {
        return Err(Error::UndefinedDelay);
    }
    let total: usize = s_values.iter().sum();
    Ok(total as f64 / (source_len as f64 * s_values.len() as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DelayReport {
    pub tau: f64,
    /// Mean of `s′(t) / |X|`.
    pub mean_s_prime_ratio: f64,
    pub s: Vec<usize>,
    pub s_prime: Vec<usize>,
}

pub fn delay_report(trace: &DecodingTrace, source_len: usize) -> Result<DelayReport> {
    let s = trace.s_values();
    let s_prime = trace.s_prime_values();
    let tau = delay_tau(&s, source_len)?;
    let mean_s_prime_ratio = delay_tau(&s_prime, source_len)?;
    Ok(DelayReport {
        tau,
        mean_s_prime_ratio,
        s,
        s_prime,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BleuReport {
    /// 0..=100
    pub bleu: f64,
    /// Clipped corpus-level n-gram precisions, n = 1..=max_n.
    pub precisions: Vec<f64>,
    pub brevity_penalty: f64,
    pub hyp_len: usize,
    pub ref_len: usize,
}

fn ngram_counts<T: Hash + Eq>(tokens: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Classic corpus BLEU: clipped n-gram counts pooled over the corpus,
/// geometric mean of precisions for n = 1..=max_n, multiplicative brevity
/// penalty, no smoothing. Any zero numerator gives 0.
pub fn corpus_bleu<T: Hash + Eq>(
    hypotheses: &[Vec<T>],
    references: &[Vec<T>],
    max_n: usize,
) -> Result<BleuReport> {
    if hypotheses.len() != references.len() {
        return Err(Error::LengthMismatch {
            hypotheses: hypotheses.len(),
            references: references.len(),
        });
    }
    let mut matches = vec![0usize; max_n];
    let mut totals = vec![0usize; max_n];
    let mut hyp_len = 0;
    let mut ref_len = 0;
    for (h, r) in hypotheses.iter().zip(references) {
        hyp_len += h.len();
        ref_len += r.len();
        for n in 1..=max_n {
            let hc = ngram_counts(h, n);
            let rc = ngram_counts(r, n);
            matches[n - 1] += hc
                .iter()
                .map(|(g, &c)| c.min(rc.get(g).copied().unwrap_or(0)))
                .sum::<usize>();
            totals[n - 1] += h.len().saturating_sub(n - 1);
        }
    }
    let precisions: Vec<f64> = matches
        .iter()
        .zip(&totals)
        .map(|(&m, &t)| if t == 0 { 0.0 } else { m as f64 / t as f64 })
        .collect();
    let brevity_penalty = if hyp_len == 0 {
        0.0
    } else if hyp_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    let bleu = if max_n == 0 || matches.contains(&0) {
        0.0
    } else {
        let log_mean = precisions.iter().map(|p| p.ln()).sum::<f64>() / max_n as f64;
        100.0 * brevity_penalty * log_mean.exp()
    };
    Ok(BleuReport {
        bleu,
        precisions,
        brevity_penalty,
        hyp_len,
        ref_len,
    })
}

/// Quality-to-delay ratio `BLEU / τ̃`.
pub fn q2d(bleu: f64, mean_tau: f64) -> Result<f64> {
    if mean_tau.is_nan() || mean_tau <= 0.0 {
        return Err(Error::NonPositiveDelay(mean_tau));
    }
    Ok(bleu / mean_tau)
}

/// Corpus delay `τ̃`: unweighted mean of per-sentence delays.
pub fn mean_tau(taus: &[f64]) -> Result<f64> {
    if taus.is_empty() {
        return Err(Error::UndefinedDelay);
    }
    Ok(taus.iter().sum::<f64>() / taus.len() as f64)
}

/// A run of consecutive target tokens conditioned on the same source prefix,
/// paired with the source tokens that prefix added. Ranges are 0-based and
/// half-open.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Chunk {
    pub source: Range<usize>,
    pub target: Range<usize>,
}

/// Groups target positions by their `s′(t)` value. Each group maps to the
/// source span between the previous group's `s′` and its own.
pub fn alignment_chunks(s_prime: &[usize]) -> Vec<Chunk> {
    let mut chunks: Vec<Chunk> = Vec::new();
    let mut prev_s = 0;
    for (t, &sp) in s_prime.iter().enumerate() {
        match chunks.last_mut() {
            Some(last) if last.source.end == sp => last.target.end = t + 1,
            _ => {
                chunks.push(Chunk {
                    source: prev_s..sp,
                    target: t..t + 1,
                });
                prev_s = sp;
            }
        }
    }
    chunks
}

/// One cell of a quality/delay sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    /// `None` for consecutive baselines.
    pub criterion: Option<Criterion>,
    /// Row label, e.g. `worse`, `greedy` or `beam5`.
    pub label: String,
    pub delta: Option<usize>,
    pub s0: Option<usize>,
    pub bleu: f64,
    pub mean_tau: f64,
    pub q2d: f64,
}
