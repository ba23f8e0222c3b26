//! Corpus ingestion and split files.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context};
use simulmt_core::training::generate_task;
use simulmt_core::{SentencePair, TokenId, Vocabulary};

use crate::config::{CorpusPaths, DataSource};

/// Tokenized text of one split: parallel source and target lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SplitText {
    pub source: Vec<String>,
    pub target: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: Vec<SentencePair>,
    pub valid: Vec<SentencePair>,
    pub test: Vec<SentencePair>,
    pub source_vocab: Vocabulary,
    pub target_vocab: Vocabulary,
    /// Train, valid and test text, in that order.
    pub text: [SplitText; 3],
}

pub const SPLIT_NAMES: [&str; 3] = ["train", "valid", "test"];

/// Reads a UTF-8 file as lines with whitespace normalized to single spaces.
pub fn read_lines(path: &Path) -> anyhow::Result<Vec<String>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(text.lines().map(normalize).collect())
}

pub fn normalize(line: &str) -> String {
    line.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn tokens(line: &str) -> Vec<String> {
    line.split_whitespace().map(str::to_owned).collect()
}

pub fn load(source: &DataSource) -> anyhow::Result<Dataset> {
    match source {
        DataSource::Task(spec) => {
            let data = generate_task(spec)?;
            let vocab = data.vocab;
            let text = [&data.train, &data.valid, &data.test].map(|pairs| SplitText {
                source: pairs.iter().map(|p| vocab.decode(&p.source)).collect(),
                target: pairs.iter().map(|p| vocab.decode(&p.target)).collect(),
            });
            Ok(Dataset {
                train: data.train,
                valid: data.valid,
                test: data.test,
                source_vocab: vocab.clone(),
                target_vocab: vocab,
                text,
            })
        }
        DataSource::Corpus(paths) => load_corpus(paths),
    }
}

fn load_corpus(paths: &CorpusPaths) -> anyhow::Result<Dataset> {
    let read_split = |src: &Path, tgt: &Path| -> anyhow::Result<SplitText> {
        let source = read_lines(src)?;
        let target = read_lines(tgt)?;
        if source.len() != target.len() {
            bail!(
                "{} has {} lines but {} has {}",
                src.display(),
                source.len(),
                tgt.display(),
                target.len()
            );
        }
        Ok(SplitText { source, target })
    };
    let text = [
        read_split(&paths.train_source, &paths.train_target)?,
        read_split(&paths.valid_source, &paths.valid_target)?,
        read_split(&paths.test_source, &paths.test_target)?,
    ];
    if text[0].source.is_empty() {
        bail!("training corpus is empty");
    }
    let source_vocab = Vocabulary::build(text[0].source.iter().flat_map(|l| l.split_whitespace()));
    let target_vocab = Vocabulary::build(text[0].target.iter().flat_map(|l| l.split_whitespace()));
    let encode = |split: &SplitText| -> Vec<SentencePair> {
        split
            .source
            .iter()
            .zip(&split.target)
            .map(|(s, t)| SentencePair {
                source: source_vocab.encode_line(s),
                target: target_vocab.encode_line(t),
            })
            .collect()
    };
    let [train, valid, test] = [&text[0], &text[1], &text[2]].map(encode);
    Ok(Dataset {
        train,
        valid,
        test,
        source_vocab,
        target_vocab,
        text,
    })
}

/// Writes `<name>.src` / `<name>.tgt` for every split into `dir`.
pub fn write_splits(dir: &Path, text: &[SplitText; 3]) -> anyhow::Result<()> {
    for (name, split) in SPLIT_NAMES.iter().zip(text) {
        write_lines(&dir.join(format!("{name}.src")), &split.source)?;
        write_lines(&dir.join(format!("{name}.tgt")), &split.target)?;
    }
    Ok(())
}

pub fn write_lines(path: &Path, lines: &[String]) -> anyhow::Result<()> {
    let mut text = String::new();
    for l in lines {
        text.push_str(l);
        text.push('\n');
    }
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// Source lines as id sequences ending in `<eos>`.
pub fn encode_sources(vocab: &Vocabulary, lines: &[String]) -> Vec<Vec<TokenId>> {
    lines.iter().map(|l| vocab.encode_line(l)).collect()
}
