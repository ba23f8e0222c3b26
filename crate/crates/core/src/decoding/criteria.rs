//! Waiting criteria: given the next-token distributions under the current
//! context `C` and the enlarged context `C ∪ C′`, decide whether to absorb
//! `C′` before committing.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{argmax, entropy};
use crate::vocab::TokenId;

/// Wait-If-Worse: the current best token loses probability once more
/// source is visible. Strict inequality.
pub fn wait_if_worse(logp_small: f64, logp_large: f64) -> bool {
    logp_small > logp_large
}

/// Wait-If-Diff: the best token changes once more source is visible.
pub fn wait_if_diff(argmax_small: TokenId, argmax_large: TokenId) -> bool {
    argmax_small != argmax_large
}

/// Wait if the prediction entropy drops once more source is visible.
pub fn wait_if_entropy(dist_small: &[f64], dist_large: &[f64]) -> Result<bool> {
    Ok(entropy(dist_small)? > entropy(dist_large)?)
}

/// Everything a criterion looked at, plus its verdict.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaitDecision {
    pub wait: bool,
    /// Log-probability of `argmax_small` under `C`.
    pub logp_small: f64,
    /// Log-probability of the same token `argmax_small` under `C ∪ C′`.
    pub logp_large: f64,
    pub argmax_small: TokenId,
    pub argmax_large: TokenId,
}

impl WaitDecision {
    fn observe(small: &[f64], large: &[f64]) -> Self {
        let argmax_small = argmax(small);
        WaitDecision {
            wait: false,
            logp_small: small[argmax_small],
            logp_large: large[argmax_small],
            argmax_small,
            argmax_large: argmax(large),
        }
    }
}

/// A pure decision rule over two next-token log-distributions.
pub trait WaitPolicy {
    fn decide(&self, logp_small: &[f64], logp_large: &[f64]) -> Result<WaitDecision>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Criterion {
    #[serde(rename = "worse")]
    WaitIfWorse,
    #[serde(rename = "diff")]
    WaitIfDiff,
    #[serde(rename = "entropy")]
    Entropy,
}

impl Criterion {
    pub fn name(self) -> &'static str {
        match self {
            Criterion::WaitIfWorse => "worse",
            Criterion::WaitIfDiff => "diff",
            Criterion::Entropy => "entropy",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "worse" => Ok(Criterion::WaitIfWorse),
            "diff" => Ok(Criterion::WaitIfDiff),
            "entropy" => Ok(Criterion::Entropy),
            other => Err(Error::InvalidConfig(format!(
                "unknown criterion {other:?} (expected worse, diff or entropy)"
            ))),
        }
    }
}

impl WaitPolicy for Criterion {
    fn decide(&self, small: &[f64], large: &[f64]) -> Result<WaitDecision> {
        let mut d = WaitDecision::observe(small, large);
        d.wait = match self {
            Criterion::WaitIfWorse => wait_if_worse(d.logp_small, d.logp_large),
            Criterion::WaitIfDiff => wait_if_diff(d.argmax_small, d.argmax_large),
            Criterion::Entropy => {
                let ps: Vec<f64> = small.iter().map(|x| x.exp()).collect();
                let pl: Vec<f64> = large.iter().map(|x| x.exp()).collect();
                wait_if_entropy(&ps, &pl)?
            }
        };
        Ok(d)
    }
}

/// Fixed-verdict policy, useful for probing the decoder's control flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Constant(pub bool);

impl WaitPolicy for Constant {
    fn decide(&self, small: &[f64], large: &[f64]) -> Result<WaitDecision> {
        let mut d = WaitDecision::observe(small, large);
        d.wait = self.0;
        Ok(d)
    }
}
