//! Quality/delay sweeps over the δ × s₀ × criterion grid.

use std::io::Write;

use anyhow::{bail, Context};
use serde::Serialize;
use simulmt_core::decoding::{
    beam_search, default_max_len, forward_pass_bound, greedy_decode, simul_greedy_decode,
    DecodingTrace,
};
use simulmt_core::metrics::{corpus_bleu, delay_tau, mean_tau, q2d};
use simulmt_core::{
    Criterion, Error, InputPipe, ModelParams, OutputPipe, SimulConfig, SweepResult, TokenId,
    Vocabulary,
};

use crate::config::SweepGrid;

/// Test sentences: source ids (ending in `<eos>`) and tokenized references.
pub struct SweepData<'a> {
    pub params: &'a ModelParams,
    pub target_vocab: &'a Vocabulary,
    pub sources: &'a [Vec<TokenId>],
    pub references: &'a [Vec<String>],
}

/// Runs one simultaneous session over a complete source with the
/// `2|X| + 10` cap, enforcing the forward-pass bound.
pub fn decode_simul(
    params: &ModelParams,
    source: &[TokenId],
    delta: usize,
    s0: usize,
    criterion: Criterion,
) -> simulmt_core::Result<DecodingTrace> {
    let mut input = InputPipe::from_tokens(source.to_vec());
    let mut output = OutputPipe::new();
    let cfg = SimulConfig {
        max_target_len: Some(default_max_len(source.len())),
        ..SimulConfig::new(delta, s0, criterion)
    };
    let trace = simul_greedy_decode(params, &mut input, &mut output, &cfg)?;
    let bound = forward_pass_bound(trace.len(), source.len(), s0, delta);
    if trace.forward_passes > bound {
        return Err(Error::ComplexityBound {
            passes: trace.forward_passes,
            bound,
            output_len: trace.len(),
            source_len: source.len(),
            s0,
            delta,
        });
    }
    Ok(trace)
}

impl SweepData<'_> {
    fn words(&self, ids: &[TokenId]) -> Vec<String> {
        crate::data::tokens(&self.target_vocab.decode(ids))
    }

    fn row(
        &self,
        label: &str,
        criterion: Option<Criterion>,
        delta: Option<usize>,
        s0: Option<usize>,
        outputs: &[(Vec<TokenId>, f64)],
    ) -> anyhow::Result<SweepResult> {
        let hyps: Vec<Vec<String>> = outputs.iter().map(|(ids, _)| self.words(ids)).collect();
        let bleu = corpus_bleu(&hyps, self.references, 4)?.bleu;
        let taus: Vec<f64> = outputs.iter().map(|(_, tau)| *tau).collect();
        let mean_tau = mean_tau(&taus)?;
        Ok(SweepResult {
            criterion,
            label: label.to_owned(),
            delta,
            s0,
            bleu,
            mean_tau,
            q2d: q2d(bleu, mean_tau)?,
        })
    }

    pub fn cell(&self, criterion: Criterion, delta: usize, s0: usize) -> anyhow::Result<SweepResult> {
        let outputs = self
            .sources
            .iter()
            .map(|src| {
                let trace = decode_simul(self.params, src, delta, s0, criterion)?;
                Ok((trace.tokens(), delay_tau(&trace.s_values(), src.len())?))
            })
            .collect::<simulmt_core::Result<Vec<_>>>()
            .with_context(|| format!("criterion {criterion}, delta {delta}, s0 {s0}"))?;
        self.row(criterion.name(), Some(criterion), Some(delta), Some(s0), &outputs)
    }

    pub fn greedy_baseline(&self) -> anyhow::Result<SweepResult> {
        let outputs = self
            .sources
            .iter()
            .map(|src| {
                let trace = greedy_decode(self.params, src, default_max_len(src.len()))?;
                Ok((trace.tokens(), delay_tau(&trace.s_values(), src.len())?))
            })
            .collect::<simulmt_core::Result<Vec<_>>>()?;
        self.row("greedy", None, None, None, &outputs)
    }

    pub fn beam_baseline(&self, width: usize) -> anyhow::Result<SweepResult> {
        let outputs = self
            .sources
            .iter()
            .map(|src| {
                let out = beam_search(self.params, src, width, default_max_len(src.len()))?;
                // Every token sees the whole source.
                let s = vec![src.len(); out.tokens.len()];
                Ok((out.tokens, delay_tau(&s, src.len())?))
            })
            .collect::<simulmt_core::Result<Vec<_>>>()?;
        self.row(&format!("beam{width}"), None, None, None, &outputs)
    }

    /// Every grid cell in order, then the greedy and beam baselines.
    pub fn run(&self, grid: &SweepGrid) -> anyhow::Result<Vec<SweepResult>> {
        grid.validate()?;
        if self.sources.is_empty() {
            bail!("test corpus is empty");
        }
        if self.sources.len() != self.references.len() {
            bail!(
                "{} source sentences but {} references",
                self.sources.len(),
                self.references.len()
            );
        }
        let mut rows = Vec::new();
        for (c, d, s) in grid.cells() {
            rows.push(self.cell(c, d, s)?);
        }
        rows.push(self.greedy_baseline()?);
        rows.push(self.beam_baseline(grid.beam_width)?);
        Ok(rows)
    }
}

#[derive(Serialize)]
struct CsvRow<'a> {
    criterion: &'a str,
    delta: Option<usize>,
    s0: Option<usize>,
    bleu: f64,
    mean_tau: f64,
    q2d: f64,
}

pub fn write_csv(rows: &[SweepResult], out: impl Write) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(CsvRow {
            criterion: &r.label,
            delta: r.delta,
            s0: r.s0,
            bleu: r.bleu,
            mean_tau: r.mean_tau,
            q2d: r.q2d,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Highest-Q2D row per criterion; the first row wins ties.
pub fn best_by_criterion(rows: &[SweepResult]) -> Vec<&SweepResult> {
    let mut best: Vec<&SweepResult> = Vec::new();
    for r in rows.iter().filter(|r| r.criterion.is_some()) {
        match best.iter_mut().find(|b| b.criterion == r.criterion) {
            Some(b) if r.q2d > b.q2d => *b = r,
            Some(_) => {}
            None => best.push(r),
        }
    }
    best
}
