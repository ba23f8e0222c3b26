//! JSON run configuration.
//!
//! ```json
//! {
//!   "data": { "task": { "kind": "cipher", "vocab_size": 20, "min_len": 4,
//!                       "max_len": 16, "count": 4000, "seed": 1 } },
//!   "model": { "emb_dim": 32, "hidden_dim": 64, "att_dim": 64 },
//!   "training": { "seed": 1, "max_epochs": 10, "patience": 2 },
//!   "sweep": { "deltas": [1, 2, 3], "s0s": [2, 3, 4, 5, 6, 7],
//!              "criteria": ["worse", "diff"], "beam_width": 5 }
//! }
//! ```
//!
//! `data` may instead name a parallel corpus:
//! `{ "corpus": { "train_source": "train.de", "train_target": "train.en", ... } }`.
//! Relative corpus paths resolve against the config file's directory.
//! Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use simulmt_core::model::ModelConfig;
use simulmt_core::{Criterion, TaskKind, TaskSpec, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSource,
    #[serde(default)]
    pub model: ModelDims,
    #[serde(default)]
    pub training: TrainConfig,
    #[serde(default)]
    pub sweep: SweepGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Task(TaskSpec),
    Corpus(CorpusPaths),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusPaths {
    pub train_source: PathBuf,
    pub train_target: PathBuf,
    pub valid_source: PathBuf,
    pub valid_target: PathBuf,
    pub test_source: PathBuf,
    pub test_target: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelDims {
    pub emb_dim: usize,
    pub hidden_dim: usize,
    pub att_dim: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        let d = ModelConfig::with_vocab(0, 0);
        ModelDims {
            emb_dim: d.emb_dim,
            hidden_dim: d.hidden_dim,
            att_dim: d.att_dim,
        }
    }
}

impl ModelDims {
    pub fn with_vocab(self, source_vocab: usize, target_vocab: usize) -> ModelConfig {
        ModelConfig {
            source_vocab,
            target_vocab,
            emb_dim: self.emb_dim,
            hidden_dim: self.hidden_dim,
            att_dim: self.att_dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrid {
    pub deltas: Vec<usize>,
    pub s0s: Vec<usize>,
    pub criteria: Vec<Criterion>,
    pub beam_width: usize,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            deltas: vec![1, 2, 3],
            s0s: (2..=7).collect(),
            criteria: vec![Criterion::WaitIfWorse, Criterion::WaitIfDiff],
            beam_width: 5,
        }
    }
}

impl SweepGrid {
    pub fn validate(&self) -> anyhow::Result<()> {
        if self.deltas.is_empty() || self.s0s.is_empty() || self.criteria.is_empty() {
            bail!("sweep grid lists must be non-empty");
        }
        if self.deltas.contains(&0) || self.s0s.contains(&0) || self.beam_width == 0 {
            bail!("delta, s0 and beam_width values must be >= 1");
        }
        Ok(())
    }

    /// Adds the entropy criterion if absent.
    pub fn with_entropy(mut self) -> Self {
        if !self.criteria.contains(&Criterion::Entropy) {
            self.criteria.push(Criterion::Entropy);
        }
        self
    }

    /// Cells in output order: criterion name, then delta, then s0, with
    /// duplicates removed.
    pub fn cells(&self) -> Vec<(Criterion, usize, usize)> {
        let mut criteria = self.criteria.clone();
        criteria.sort_by_key(|c| c.name());
        criteria.dedup();
        let mut deltas = self.deltas.clone();
        deltas.sort_unstable();
        deltas.dedup();
        let mut s0s = self.s0s.clone();
        s0s.sort_unstable();
        s0s.dedup();
        let mut out = Vec::new();
        for &c in &criteria {
            for &d in &deltas {
                for &s in &s0s {
                    out.push((c, d, s));
                }
            }
        }
        out
    }
}

impl Default for RunConfig {
    /// The default cipher setup.
    fn default() -> Self {
        RunConfig {
            data: DataSource::Task(TaskSpec {
                kind: TaskKind::Cipher,
                vocab_size: 20,
                min_len: 4,
                max_len: 16,
                count: 4000,
                seed: 1,
            }),
            model: ModelDims::default(),
            training: TrainConfig {
                max_epochs: 10,
                ..TrainConfig::default()
            },
            sweep: SweepGrid::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).context("invalid config")?;
        cfg.sweep.validate()?;
        Ok(cfg)
    }

    /// Reads a config file and resolves relative corpus paths against its
    /// directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg = Self::from_json(&text)
            .with_context(|| format!("in {}", path.display()))?;
        if let DataSource::Corpus(c) = &mut cfg.data {
            let base = path.parent().unwrap_or(Path::new("."));
            for p in [
                &mut c.train_source,
                &mut c.train_target,
                &mut c.valid_source,
                &mut c.valid_target,
                &mut c.test_source,
                &mut c.test_target,
            ] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }
}
