use std::collections::HashMap;

use crate::error::{Error, Result};

pub type TokenId = usize;

pub const PAD: TokenId = 0;
pub const EOS: TokenId = 1;
pub const UNK: TokenId = 2;

pub const PAD_TOKEN: &str = "<pad>";
pub const EOS_TOKEN: &str = "<eos>";
pub const UNK_TOKEN: &str = "<unk>";

/// Number of ids reserved at the start of every vocabulary.
pub const RESERVED: usize = 3;

/// Bijection between token strings and ids, with `<pad>`, `<eos>` and
/// `<unk>` fixed at ids 0, 1 and 2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl Vocabulary {
    /// Builds a vocabulary from tokens in first-seen order. Reserved tokens
    /// and duplicates in the input are skipped.
    pub fn build<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut vocab = Self::reserved_only();
        for t in tokens {
            let t = t.as_ref();
            if !vocab.index.contains_key(t) {
                vocab.index.insert(t.to_owned(), vocab.tokens.len());
                vocab.tokens.push(t.to_owned());
            }
        }
        vocab
    }

    fn reserved_only() -> Self {
        let tokens: Vec<String> = [PAD_TOKEN, EOS_TOKEN, UNK_TOKEN]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary { tokens, index }
    }

    /// Rebuilds a vocabulary from its full id-ordered token list, as stored
    /// in a checkpoint.
    pub fn from_id_order(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < RESERVED
            || tokens[PAD] != PAD_TOKEN
            || tokens[EOS] != EOS_TOKEN
            || tokens[UNK] != UNK_TOKEN
        {
            return Err(Error::BadVocabulary("reserved tokens missing".into()));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::BadVocabulary(format!("duplicate token {t:?}")));
            }
        }
        Ok(Vocabulary { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn id_or_unk(&self, token: &str) -> TokenId {
        self.id(token).unwrap_or(UNK)
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Whitespace-tokenizes a line, maps unknown tokens to `<unk>` and
    /// appends `<eos>`.
    pub fn encode_line(&self, line: &str) -> Vec<TokenId> {
        line.split_whitespace()
            .map(|t| self.id_or_unk(t))
            .chain(std::iter::once(EOS))
            .collect()
    }

    /// Joins tokens with single spaces, stopping at the first `<eos>`.
    pub fn decode(&self, ids: &[TokenId]) -> String {
        ids.iter()
            .take_while(|&&id| id != EOS)
            .map(|&id| self.token(id).unwrap_or(UNK_TOKEN))
            .collect::<Vec<_>>()
            .join(" ")
    }
}
