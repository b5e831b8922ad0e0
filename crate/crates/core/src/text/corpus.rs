use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{tokenize, Sentence, TextError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentencePair {
    pub source: Sentence,
    pub target: Sentence,
}

/// Line-aligned source/target sentences. No pair has an empty side.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParallelCorpus {
    pub name: String,
    pairs: Vec<SentencePair>,
}

impl ParallelCorpus {
    /// Builds a corpus, dropping pairs with an empty side. Returns the
    /// corpus and the number of dropped pairs.
    pub fn from_pairs(
        name: impl Into<String>,
        pairs: impl IntoIterator<Item = (Sentence, Sentence)>,
    ) -> (Self, usize) {
        let mut dropped = 0;
        let pairs = pairs
            .into_iter()
            .filter_map(|(source, target)| {
                if source.is_empty() || target.is_empty() {
                    dropped += 1;
                    None
                } else {
                    Some(SentencePair { source, target })
                }
            })
            .collect();
        (
            ParallelCorpus {
                name: name.into(),
                pairs,
            },
            dropped,
        )
    }

    pub fn pairs(&self) -> &[SentencePair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn sources(&self) -> impl Iterator<Item = &Sentence> {
        self.pairs.iter().map(|p| &p.source)
    }

    pub fn targets(&self) -> impl Iterator<Item = &Sentence> {
        self.pairs.iter().map(|p| &p.target)
    }

    /// Swaps the roles of source and target.
    pub fn reversed(&self) -> ParallelCorpus {
        ParallelCorpus {
            name: format!("{}.rev", self.name),
            pairs: self
                .pairs
                .iter()
                .map(|p| SentencePair {
                    source: p.target.clone(),
                    target: p.source.clone(),
                })
                .collect(),
        }
    }

    /// Splits off the first `n` pairs (clamped) into a separate corpus.
    pub fn split_at(&self, n: usize) -> (ParallelCorpus, ParallelCorpus) {
        let n = n.min(self.pairs.len());
        (
            ParallelCorpus {
                name: format!("{}.a", self.name),
                pairs: self.pairs[..n].to_vec(),
            },
            ParallelCorpus {
                name: format!("{}.b", self.name),
                pairs: self.pairs[n..].to_vec(),
            },
        )
    }
}

#[derive(Debug, Clone)]
pub struct LoadedCorpus {
    pub corpus: ParallelCorpus,
    /// Pairs skipped because one side was empty.
    pub dropped: usize,
}

fn read_lines(path: &Path) -> Result<Vec<String>, TextError> {
    let bytes = fs::read(path).map_err(|source| TextError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut segments: Vec<&[u8]> = bytes.split(|&b| b == b'\n').collect();
    if segments.last().is_some_and(|s| s.is_empty()) {
        segments.pop();
    }
    segments
        .into_iter()
        .enumerate()
        .map(|(i, raw)| {
            let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
            std::str::from_utf8(raw)
                .map(str::to_string)
                .map_err(|_| TextError::InvalidUtf8 {
                    path: path.to_path_buf(),
                    line: i + 1,
                })
        })
        .collect()
}

/// Reads two line-aligned UTF-8 files and tokenizes every line.
pub fn load_parallel(source_path: &Path, target_path: &Path) -> Result<LoadedCorpus, TextError> {
    let src = read_lines(source_path)?;
    let tgt = read_lines(target_path)?;
    if src.len() != tgt.len() {
        return Err(TextError::LineCountMismatch {
            source_lines: src.len(),
            target_lines: tgt.len(),
        });
    }
    let name = source_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let (corpus, dropped) = ParallelCorpus::from_pairs(
        name,
        src.iter().zip(&tgt).map(|(s, t)| (tokenize(s), tokenize(t))),
    );
    if dropped > 0 {
        log::warn!(
            "{}: dropped {dropped} pair(s) with an empty side",
            source_path.display()
        );
    }
    Ok(LoadedCorpus { corpus, dropped })
}

/// Reads one sentence per line; blank lines are skipped.
pub fn load_monolingual(path: &Path) -> Result<Vec<Sentence>, TextError> {
    Ok(read_lines(path)?
        .iter()
        .map(|l| tokenize(l))
        .filter(|s| !s.is_empty())
        .collect())
}

/// Sentence, token and vocabulary counts for both sides of a corpus.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub sentences: usize,
    pub source_tokens: usize,
    pub target_tokens: usize,
    pub source_vocab: usize,
    pub target_vocab: usize,
}

pub fn corpus_stats(corpus: &ParallelCorpus) -> CorpusStats {
    let mut src_vocab = HashSet::new();
    let mut tgt_vocab = HashSet::new();
    let mut stats = CorpusStats {
        sentences: corpus.len(),
        ..Default::default()
    };
    for pair in corpus.pairs() {
        stats.source_tokens += pair.source.len();
        stats.target_tokens += pair.target.len();
        src_vocab.extend(pair.source.iter());
        tgt_vocab.extend(pair.target.iter());
    }
    stats.source_vocab = src_vocab.len();
    stats.target_vocab = tgt_vocab.len();
    stats
}

fn trim_zero(s: String) -> String {
    s.strip_suffix(".0").map(str::to_string).unwrap_or(s)
}

/// Sentence counts print raw below 10K, as in "2000" or "35.2K".
fn format_count(n: usize) -> String {
    if n < 10_000 {
        n.to_string()
    } else if n < 1_000_000 {
        trim_zero(format!("{:.1}", n as f64 / 1e3)) + "K"
    } else {
        trim_zero(format!("{:.1}", n as f64 / 1e6)) + "M"
    }
}

/// Source/target pairs share one unit suffix, as in "870.4/862.4K".
fn format_pair(a: usize, b: usize) -> String {
    let max = a.max(b);
    if max < 1_000 {
        format!("{a}/{b}")
    } else if max < 1_000_000 {
        format!("{:.1}/{:.1}K", a as f64 / 1e3, b as f64 / 1e3)
    } else {
        format!("{:.1}/{:.1}M", a as f64 / 1e6, b as f64 / 1e6)
    }
}

impl fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "|S| {}, |T| {}, |V| {}",
            format_count(self.sentences),
            format_pair(self.source_tokens, self.target_tokens),
            format_pair(self.source_vocab, self.target_vocab)
        )
    }
}
