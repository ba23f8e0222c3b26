//! Synthetic translation tasks.
//!
//! Content tokens use ids `3..vocab_size` and are named `t<id>`, so source
//! and target share one vocabulary.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Rng;
use crate::vocab::{TokenId, Vocabulary, EOS, RESERVED};

use super::SentencePair;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    /// Target equals source.
    Copy,
    /// Target is the source body reversed.
    Reverse,
    /// Target applies a fixed random bijection tokenwise.
    Cipher,
    /// Source ends with a marker `A`/`B`; every target token is the body
    /// token mapped through a marker-specific bijection, so nothing can be
    /// emitted correctly before the marker is read.
    VerbFinal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub kind: TaskKind,
    /// Includes the three reserved ids.
    pub vocab_size: usize,
    /// Body length range, inclusive, not counting `<eos>` (or the marker).
    pub min_len: usize,
    pub max_len: usize,
    /// Total pairs across train, validation and test.
    pub count: usize,
    pub seed: u64,
}

impl TaskSpec {
    pub fn validate(&self) -> Result<()> {
        let min_vocab = match self.kind {
            TaskKind::VerbFinal => RESERVED + 4,
            _ => RESERVED + 1,
        };
        if self.vocab_size < min_vocab.max(4) {
            return Err(Error::InvalidConfig(format!(
                "vocab_size must be at least {}",
                min_vocab.max(4)
            )));
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return Err(Error::InvalidConfig(
                "lengths must satisfy 1 <= min_len <= max_len".into(),
            ));
        }
        if self.count < 3 {
            return Err(Error::InvalidConfig("count must be at least 3".into()));
        }
        let body_symbols = self.body_symbols().len() as u128;
        let mut distinct: u128 = 0;
        for len in self.min_len..=self.max_len {
            distinct = distinct.saturating_add(body_symbols.saturating_pow(len as u32));
        }
        if self.kind == TaskKind::VerbFinal {
            distinct = distinct.saturating_mul(2);
        }
        if (self.count as u128) > distinct {
            return Err(Error::InvalidConfig(format!(
                "only {distinct} distinct sources exist, {} requested",
                self.count
            )));
        }
        Ok(())
    }

    fn body_symbols(&self) -> Vec<TokenId> {
        let end = match self.kind {
            TaskKind::VerbFinal => self.vocab_size - 2,
            _ => self.vocab_size,
        };
        (RESERVED..end).collect()
    }

    pub fn vocabulary(&self) -> Vocabulary {
        Vocabulary::build((RESERVED..self.vocab_size).map(|i| format!("t{i}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskData {
    pub train: Vec<SentencePair>,
    pub valid: Vec<SentencePair>,
    pub test: Vec<SentencePair>,
    pub vocab: Vocabulary,
}

/// Draws `count` pairs with distinct sources and splits them 80/10/10.
pub fn generate_task(spec: &TaskSpec) -> Result<TaskData> {
    spec.validate()?;
    let mut rng = Rng::new(spec.seed);
    let body = spec.body_symbols();

    let mut shuffled = body.clone();
    rng.shuffle(&mut shuffled);
    // Bijection over body ids: body[i] ↦ shuffled[i].
    let map = |perm: &[TokenId], id: TokenId| perm[id - RESERVED];
    let alt: Vec<TokenId> = (0..body.len())
        .map(|i| shuffled[(i + 1) % body.len()])
        .collect();
    let markers = [spec.vocab_size - 2, spec.vocab_size - 1];

    let mut seen = HashSet::with_capacity(spec.count);
    let mut pairs = Vec::with_capacity(spec.count);
    while pairs.len() < spec.count {
        let len = spec.min_len + rng.below(spec.max_len - spec.min_len + 1);
        let words: Vec<TokenId> = (0..len).map(|_| body[rng.below(body.len())]).collect();
        let (mut source, mut target) = match spec.kind {
            TaskKind::Copy => (words.clone(), words),
            TaskKind::Reverse => {
                let rev = words.iter().rev().copied().collect();
                (words, rev)
            }
            TaskKind::Cipher => {
                let tgt = words.iter().map(|&w| map(&shuffled, w)).collect();
                (words, tgt)
            }
            TaskKind::VerbFinal => {
                let which = rng.below(2);
                let perm = if which == 0 { &shuffled } else { &alt };
                let tgt = words.iter().map(|&w| map(perm, w)).collect();
                let mut src = words;
                src.push(markers[which]);
                (src, tgt)
            }
        };
        if !seen.insert(source.clone()) {
            continue;
        }
        source.push(EOS);
        target.push(EOS);
        pairs.push(SentencePair { source, target });
    }

    let n_valid = spec.count / 10;
    let n_test = spec.count / 10;
    let test = pairs.split_off(pairs.len() - n_test);
    let valid = pairs.split_off(pairs.len() - n_valid);
    Ok(TaskData {
        train: pairs,
        valid,
        test,
        vocab: spec.vocabulary(),
    })
}
