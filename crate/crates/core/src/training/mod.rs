//! Maximum-likelihood training with Adadelta and early stopping.

mod adadelta;
mod grad;
mod tasks;

use std::collections::HashSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

pub use adadelta::{adadelta_step, AdadeltaState, DEFAULT_EPS, DEFAULT_RHO};
pub use grad::{accumulate_grad, grad_nll, nll};
pub use tasks::{generate_task, TaskData, TaskKind, TaskSpec};

use crate::decoding::{default_max_len, greedy_decode};
use crate::error::{Error, Result};
use crate::model::{ModelConfig, ModelParams};
use crate::numerics::Rng;
use crate::vocab::TokenId;

/// Pairs with a side longer than this many tokens are dropped before
/// training.
pub const MAX_TRAIN_LEN: usize = 50;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SentencePair {
    /// Ends with `<eos>`.
    pub source: Vec<TokenId>,
    /// Ends with `<eos>`.
    pub target: Vec<TokenId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub seed: u64,
    pub max_epochs: usize,
    /// Consecutive non-improving epochs tolerated before stopping.
    pub patience: usize,
    pub batch_size: usize,
    /// Rescale each batch gradient to at most this L2 norm.
    pub clip_norm: Option<f64>,
    pub rho: f64,
    pub eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seed: 1,
            max_epochs: 50,
            patience: 2,
            batch_size: 16,
            clip_norm: None,
            rho: DEFAULT_RHO,
            eps: DEFAULT_EPS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean per-sentence NLL over the epoch's updates.
    pub train_nll: f64,
    /// Mean per-token log-probability on the validation split.
    pub valid_logprob: f64,
    pub best_so_far: bool,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the best validation epoch.
    pub params: ModelParams,
    pub best_epoch: usize,
    pub log: Vec<EpochLog>,
}

/// Writes the epoch log as CSV: `epoch,train_nll,valid_logprob,best_so_far`.
pub fn write_log_csv(log: &[EpochLog], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "epoch,train_nll,valid_logprob,best_so_far")?;
    for e in log {
        writeln!(
            w,
            "{},{},{},{}",
            e.epoch,
            e.train_nll,
            e.valid_logprob,
            u8::from(e.best_so_far)
        )?;
    }
    Ok(())
}

/// Mean per-token log-probability of the targets.
pub fn mean_token_logprob(params: &ModelParams, pairs: &[SentencePair]) -> f64 {
    let mut total = 0.0;
    let mut tokens = 0;
    for p in pairs {
        total -= nll(params, p);
        tokens += p.target.len();
    }
    total / tokens.max(1) as f64
}

/// Fraction of reference positions (including `<eos>`) that greedy decoding
/// reproduces exactly.
pub fn token_accuracy(params: &ModelParams, pairs: &[SentencePair]) -> Result<f64> {
    let mut correct = 0;
    let mut total = 0;
    for p in pairs {
        let hyp = greedy_decode(params, &p.source, default_max_len(p.source.len()))?.tokens();
        correct += hyp.iter().zip(&p.target).filter(|(a, b)| a == b).count();
        total += p.target.len();
    }
    Ok(correct as f64 / total.max(1) as f64)
}

fn validate_pairs(config: &ModelConfig, pairs: &[SentencePair]) -> Result<()> {
    for p in pairs {
        if p.source.is_empty() || p.target.is_empty() {
            return Err(Error::InvalidConfig("empty sentence in training data".into()));
        }
        for (ids, size) in [(&p.source, config.source_vocab), (&p.target, config.target_vocab)] {
            if let Some(&id) = ids.iter().find(|&&id| id >= size) {
                return Err(Error::TokenOutOfVocab { id, size });
            }
        }
    }
    Ok(())
}

/// Initializes a model from `cfg.seed` and trains it.
pub fn train(
    config: ModelConfig,
    train_pairs: &[SentencePair],
    valid_pairs: &[SentencePair],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    let mut rng = Rng::new(cfg.seed);
    let params = ModelParams::init(config, &mut rng);
    train_from(params, train_pairs, valid_pairs, cfg, &mut rng)
}

/// Trains `params` in place of a fresh initialization; `rng` drives the
/// per-epoch shuffles.
pub fn train_from(
    mut params: ModelParams,
    train_pairs: &[SentencePair],
    valid_pairs: &[SentencePair],
    cfg: &TrainConfig,
    rng: &mut Rng,
) -> Result<TrainOutcome> {
    if cfg.batch_size == 0 || cfg.max_epochs == 0 {
        return Err(Error::InvalidConfig(
            "batch_size and max_epochs must be >= 1".into(),
        ));
    }
    validate_pairs(&params.config, train_pairs)?;
    validate_pairs(&params.config, valid_pairs)?;
    let train_sources: HashSet<&Vec<TokenId>> = train_pairs.iter().map(|p| &p.source).collect();
    if valid_pairs.iter().any(|p| train_sources.contains(&p.source)) {
        return Err(Error::InvalidConfig(
            "training and validation splits overlap".into(),
        ));
    }
    if valid_pairs.is_empty() {
        return Err(Error::InvalidConfig("validation split is empty".into()));
    }

    let mut data: Vec<&SentencePair> = train_pairs
        .iter()
        .filter(|p| p.source.len() <= MAX_TRAIN_LEN && p.target.len() <= MAX_TRAIN_LEN)
        .collect();
    if data.is_empty() {
        return Err(Error::InvalidConfig("no training pairs".into()));
    }

    let mut opt = AdadeltaState::new(&params, cfg.rho, cfg.eps);
    let mut grads = ModelParams::zeros(params.config);
    let mut best = params.clone();
    let mut best_score = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut stale = 0;
    let mut log = Vec::new();

    for epoch in 1..=cfg.max_epochs {
        rng.shuffle(&mut data);
        let mut epoch_loss = 0.0;
        for batch in data.chunks(cfg.batch_size) {
            grads.tensors_mut().into_iter().for_each(|t| t.fill(0.0));
            for pair in batch {
                epoch_loss += accumulate_grad(&params, pair, &mut grads);
            }
            let scale = 1.0 / batch.len() as f64;
            scale_grads(&mut grads, scale, cfg.clip_norm);
            adadelta_step(&mut params, &grads, &mut opt);
        }
        let train_nll = epoch_loss / data.len() as f64;
        if !train_nll.is_finite() || !params.all_finite() {
            return Err(Error::Diverged { epoch });
        }

        let valid_logprob = mean_token_logprob(&params, valid_pairs);
        if !valid_logprob.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        let improved = valid_logprob > best_score;
        if improved {
            best_score = valid_logprob;
            best = params.clone();
            best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
        }
        log.push(EpochLog {
            epoch,
            train_nll,
            valid_logprob,
            best_so_far: improved,
        });
        if stale > cfg.patience {
            break;
        }
    }

    Ok(TrainOutcome {
        params: best,
        best_epoch,
        log,
    })
}

fn scale_grads(grads: &mut ModelParams, scale: f64, clip_norm: Option<f64>) {
    let mut factor = scale;
    if let Some(max) = clip_norm {
        let norm = grads
            .tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
            * scale;
        if norm > max {
            factor *= max / norm;
        }
    }
    for t in grads.tensors_mut() {
        t.iter_mut().for_each(|g| *g *= factor);
    }
}
