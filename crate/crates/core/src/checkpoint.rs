//! Versioned binary checkpoint.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "SMDC"                      magic
//! u8                          version (= 1)
//! u32 × 5                     source_vocab, target_vocab, emb_dim, hidden_dim, att_dim
//! vocabulary × 2              source then target:
//!                               u32 count, then per token u32 byte length + UTF-8
//! f64 × …                     every tensor in `ModelParams::tensors` order, row-major
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{ModelConfig, ModelParams};
use crate::vocab::Vocabulary;

pub const MAGIC: &[u8; 4] = b"SMDC";
pub const VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub source_vocab: Vocabulary,
    pub target_vocab: Vocabulary,
}

impl Checkpoint {
    pub fn new(params: ModelParams, source_vocab: Vocabulary, target_vocab: Vocabulary) -> Result<Self> {
        let cfg = params.config;
        if cfg.source_vocab != source_vocab.len() || cfg.target_vocab != target_vocab.len() {
            return Err(Error::ShapeMismatch(format!(
                "model expects vocabularies of {}/{} but got {}/{}",
                cfg.source_vocab,
                cfg.target_vocab,
                source_vocab.len(),
                target_vocab.len()
            )));
        }
        Ok(Checkpoint {
            params,
            source_vocab,
            target_vocab,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(16 + self.params.num_params() * 8);
        buf.extend_from_slice(MAGIC);
        buf.push(VERSION);
        let c = self.params.config;
        for d in [c.source_vocab, c.target_vocab, c.emb_dim, c.hidden_dim, c.att_dim] {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for vocab in [&self.source_vocab, &self.target_vocab] {
            buf.extend_from_slice(&(vocab.len() as u32).to_le_bytes());
            for t in vocab.tokens() {
                buf.extend_from_slice(&(t.len() as u32).to_le_bytes());
                buf.extend_from_slice(t.as_bytes());
            }
        }
        for tensor in self.params.tensors() {
            for x in tensor {
                buf.extend_from_slice(&x.to_le_bytes());
            }
        }
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4, "magic")? != MAGIC {
            return Err(Error::BadMagic);
        }
        let version = r.take(1, "version")?[0];
        if version != VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let mut dims = [0usize; 5];
        for d in &mut dims {
            *d = r.u32("config")? as usize;
        }
        let config = ModelConfig {
            source_vocab: dims[0],
            target_vocab: dims[1],
            emb_dim: dims[2],
            hidden_dim: dims[3],
            att_dim: dims[4],
        };
        config
            .validate()
            .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        let source_vocab = r.vocabulary()?;
        let target_vocab = r.vocabulary()?;

        let mut params = ModelParams::zeros(config);
        // Guard against absurd dims in a corrupt header before reading.
        if r.remaining() / 8 < params.num_params() {
            return Err(Error::Truncated("weights"));
        }
        for tensor in params.tensors_mut() {
            for x in tensor.iter_mut() {
                *x = f64::from_le_bytes(r.take(8, "weights")?.try_into().unwrap());
            }
        }
        if r.remaining() > 0 {
            return Err(Error::TrailingBytes(r.remaining()));
        }
        Checkpoint::new(params, source_vocab, target_vocab)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::Truncated(what));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self, what: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn vocabulary(&mut self) -> Result<Vocabulary> {
        let count = self.u32("vocabulary")? as usize;
        let mut tokens = Vec::with_capacity(count.min(self.remaining() / 4));
        for _ in 0..count {
            let len = self.u32("vocabulary")? as usize;
            let raw = self.take(len, "vocabulary")?;
            let token = std::str::from_utf8(raw)
                .map_err(|e| Error::BadVocabulary(e.to_string()))?;
            tokens.push(token.to_owned());
        }
        Vocabulary::from_id_order(tokens)
    }
}
