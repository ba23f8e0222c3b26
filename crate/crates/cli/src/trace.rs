//! Chunk-aligned rendering of a simultaneous decoding trace.

use std::fmt::Write as _;

use simulmt_core::metrics::alignment_chunks;
use simulmt_core::{Chunk, DecodingTrace, Vocabulary};

use crate::svg;

pub struct Rendering {
    pub source: Vec<String>,
    pub target: Vec<String>,
    pub chunks: Vec<Chunk>,
    pub s_prime: Vec<usize>,
}

impl Rendering {
    pub fn new(
        source_ids: &[usize],
        trace: &DecodingTrace,
        source_vocab: &Vocabulary,
        target_vocab: &Vocabulary,
    ) -> Self {
        let name = |v: &Vocabulary, id: usize| v.token(id).unwrap_or("<unk>").to_owned();
        let s_prime = trace.s_prime_values();
        Rendering {
            source: source_ids.iter().map(|&id| name(source_vocab, id)).collect(),
            target: trace.steps.iter().map(|s| name(target_vocab, s.token)).collect(),
            chunks: alignment_chunks(&s_prime),
            s_prime,
        }
    }

    /// Bracketed chunk groups, one line per side, plus the `s′` column.
    /// Source tokens no commit was conditioned on trail unbracketed.
    pub fn text(&self) -> String {
        let group = |toks: &[String]| format!("[{}]", toks.join(" "));
        let mut src: Vec<String> = self
            .chunks
            .iter()
            .map(|c| group(&self.source[c.source.clone()]))
            .collect();
        let used = self.chunks.last().map_or(0, |c| c.source.end);
        src.extend(self.source[used..].iter().cloned());
        let tgt: Vec<String> = self
            .chunks
            .iter()
            .map(|c| group(&self.target[c.target.clone()]))
            .collect();
        let mut out = String::new();
        let _ = writeln!(out, "source  {}", src.join(" "));
        let _ = writeln!(out, "target  {}", tgt.join(" "));
        let sp: Vec<String> = self.s_prime.iter().map(usize::to_string).collect();
        let _ = writeln!(out, "s'      {}", sp.join(" "));
        out
    }

    pub fn svg(&self, title: &str) -> String {
        svg::trace_svg(&self.source, &self.target, &self.chunks, &self.s_prime, title)
    }
}
