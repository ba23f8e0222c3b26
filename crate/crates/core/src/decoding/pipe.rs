//! Source and target pipes for streaming decoding.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::vocab::{TokenId, EOS};

/// Anything that yields source tokens one at a time, possibly blocking.
/// `Ok(None)` means the underlying stream ended.
pub trait TokenSource {
    fn next_token(&mut self) -> Result<Option<TokenId>>;
}

impl<T: TokenSource + ?Sized> TokenSource for &mut T {
    fn next_token(&mut self) -> Result<Option<TokenId>> {
        (**self).next_token()
    }
}

impl TokenSource for VecDeque<TokenId> {
    fn next_token(&mut self) -> Result<Option<TokenId>> {
        Ok(self.pop_front())
    }
}

/// Source side of a decoding session.
///
/// The pipe is exhausted once `<eos>` has been handed out; after that every
/// read is empty. A stream that ends before `<eos>` is a protocol error.
pub struct InputPipe<'a> {
    source: Box<dyn TokenSource + 'a>,
    exhausted: bool,
    consumed: usize,
}

impl<'a> InputPipe<'a> {
    pub fn new(source: impl TokenSource + 'a) -> Self {
        InputPipe {
            source: Box::new(source),
            exhausted: false,
            consumed: 0,
        }
    }

    pub fn from_tokens(tokens: impl IntoIterator<Item = TokenId>) -> InputPipe<'static> {
        InputPipe::new(tokens.into_iter().collect::<VecDeque<_>>())
    }

    pub fn is_exhausted(&self) -> bool {
        self.exhausted
    }

    /// Tokens handed out so far.
    pub fn consumed(&self) -> usize {
        self.consumed
    }

    /// Reads up to `n` tokens. Fewer come back only when `<eos>` is reached.
    pub fn read(&mut self, n: usize) -> Result<Vec<TokenId>> {
        let mut out = Vec::with_capacity(n.min(64));
        while out.len() < n && !self.exhausted {
            match self.source.next_token()? {
                Some(tok) => {
                    out.push(tok);
                    self.consumed += 1;
                    if tok == EOS {
                        self.exhausted = true;
                    }
                }
                None if self.consumed == 0 => return Err(Error::EmptySource),
                None => {
                    return Err(Error::Protocol(
                        "source stream ended without <eos>".into(),
                    ))
                }
            }
        }
        Ok(out)
    }

    /// Consumes whatever is left of the sentence and returns the total
    /// source length.
    pub fn drain(&mut self) -> Result<usize> {
        while !self.exhausted {
            self.read(usize::MAX)?;
        }
        Ok(self.consumed)
    }
}

/// One committed target token with its delay bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceStep {
    pub token: TokenId,
    /// Source tokens available at the decision, `|C ∪ C′|`.
    pub s: usize,
    /// Source tokens the token was conditioned on, `|C|`.
    pub s_prime: usize,
    pub logp: f64,
}

/// Receives commits as they happen, e.g. to flush them to a stream.
pub trait CommitSink {
    fn commit(&mut self, step: &TraceStep) -> Result<()>;
}

impl<F: FnMut(&TraceStep) -> Result<()>> CommitSink for F {
    fn commit(&mut self, step: &TraceStep) -> Result<()> {
        self(step)
    }
}

/// Append-only target side of a decoding session.
#[derive(Default)]
pub struct OutputPipe<'a> {
    committed: Vec<TokenId>,
    sink: Option<Box<dyn CommitSink + 'a>>,
}

impl<'a> OutputPipe<'a> {
    pub fn new() -> Self {
        OutputPipe {
            committed: Vec::new(),
            sink: None,
        }
    }

    pub fn with_sink(sink: impl CommitSink + 'a) -> Self {
        OutputPipe {
            committed: Vec::new(),
            sink: Some(Box::new(sink)),
        }
    }

    pub fn committed(&self) -> &[TokenId] {
        &self.committed
    }

    pub fn write(&mut self, step: &TraceStep) -> Result<()> {
        self.committed.push(step.token);
        if let Some(sink) = self.sink.as_mut() {
            sink.commit(step)?;
        }
        Ok(())
    }
}
