//! Corpus ingestion, tokenization, vocabularies, subword segmentation and
//! synthetic historical-drift corpora.

mod bpe;
mod corpus;
mod drift;
mod tokenize;
mod vocab;

pub use bpe::{BpeModel, BpeSides, CONTINUATION_MARKER, DEFAULT_MERGES, REFERENCE_MERGES};
pub use corpus::{
    corpus_stats, load_monolingual, load_parallel, CorpusStats, LoadedCorpus, ParallelCorpus,
    SentencePair,
};
pub use drift::{builtin_rules, sample_modern_text, synth_drift, DriftRule, RuleScope};
pub use tokenize::{detokenize, detokenize_tokens, is_detached_punct, tokenize, DETACHED_PUNCT};
pub use vocab::{Vocabulary, BOS, EOS, PAD, UNK};

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum TextError {
    #[error("empty token at index {0}")]
    EmptyToken(usize),
    #[error("token {0:?} contains whitespace")]
    WhitespaceInToken(String),
    #[error("line count mismatch {source_lines} vs {target_lines}")]
    LineCountMismatch { source_lines: usize, target_lines: usize },
    #[error("{path}: invalid UTF-8 on line {line}")]
    InvalidUtf8 { path: PathBuf, line: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed {what} at line {line}: {message}")]
    Format {
        what: &'static str,
        line: usize,
        message: String,
    },
}

/// A tokenized sentence. Tokens are non-empty and contain no whitespace.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Sentence(Vec<String>);

impl Sentence {
    pub fn new(tokens: Vec<String>) -> Result<Self, TextError> {
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() {
                return Err(TextError::EmptyToken(i));
            }
            if t.chars().any(char::is_whitespace) {
                return Err(TextError::WhitespaceInToken(t.clone()));
            }
        }
        Ok(Sentence(tokens))
    }

    /// Builds a sentence from tokens already known to satisfy the invariants.
    pub(crate) fn from_tokens_unchecked(tokens: Vec<String>) -> Self {
        debug_assert!(tokens
            .iter()
            .all(|t| !t.is_empty() && !t.chars().any(char::is_whitespace)));
        Sentence(tokens)
    }

    /// Splits on whitespace only, without punctuation handling.
    pub fn from_words(text: &str) -> Self {
        Sentence(text.split_whitespace().map(str::to_string).collect())
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn into_tokens(self) -> Vec<String> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&str> {
        self.0.get(i).map(String::as_str)
    }

    pub fn starts_with(&self, prefix: &Sentence) -> bool {
        self.0.starts_with(&prefix.0)
    }

    /// Concatenation `self ++ other`.
    pub fn concat(&self, other: &Sentence) -> Sentence {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Sentence(v)
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> Sentence {
        Sentence(self.0[range].to_vec())
    }

    pub fn iter(&self) -> std::slice::Iter<'_, String> {
        self.0.iter()
    }
}

impl TryFrom<Vec<String>> for Sentence {
    type Error = TextError;
    fn try_from(v: Vec<String>) -> Result<Self, TextError> {
        Sentence::new(v)
    }
}

impl From<Sentence> for Vec<String> {
    fn from(s: Sentence) -> Self {
        s.0
    }
}

impl<'a> IntoIterator for &'a Sentence {
    type Item = &'a String;
    type IntoIter = std::slice::Iter<'a, String>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// Space-joined tokens; use [`detokenize`] for readable text.
impl fmt::Display for Sentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(" "))
    }
}
