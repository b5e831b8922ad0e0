//! Phrase-based statistical modernization.
//!
//! Pipeline: IBM Model 1 in both directions, grow-diag symmetrization,
//! consistent phrase extraction, an interpolated modified Kneser-Ney
//! language model, and a log-linear stack decoder whose pruned search space
//! is kept as a [`WordGraph`] for prefix-constrained suffix search.
//!
//! All scores are natural-log based except the language model's own
//! interface, which follows ARPA and reports log10.

mod align;
mod decoder;
mod graph;
mod lexical;
mod lm;
mod mert;
mod phrase;
mod suffix;
mod weights;

use std::fs;
use std::path::{Path, PathBuf};

pub use align::{align_pair, grow_diag, Alignment};
pub use decoder::{decode, DecodeConfig, Hypothesis, OOV_PROBABILITY};
pub use graph::{GraphEdge, GraphNode, WordGraph};
pub use lexical::{train_ibm1, train_ibm1_traced, LexicalTable};
pub use lm::{lm_score, train_kn_lm, NGramLanguageModel, DEFAULT_ORDER, FALLBACK_DISCOUNTS, LM_BOS, LM_EOS, LM_UNK};
pub use mert::{line_search, optimize_on_pool, pool_objective, tune_weights, Candidate, MertConfig};
pub use phrase::{consistent_spans, extract_phrases, phrase, PhraseOption, PhraseTable};
pub use suffix::{graph_suffix, graph_suffix_match, SuffixMatch, SCORE_TOLERANCE};
pub use weights::{Feature, FeatureVector, LogLinearWeights, NUM_FEATURES};

use crate::text::{ParallelCorpus, Sentence};

#[derive(Debug, thiserror::Error)]
pub enum SmtError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid phrase entry: {0}")]
    InvalidPhrase(String),
    #[error("invalid weights: {0}")]
    InvalidWeight(String),
    #[error("invalid word graph: {0}")]
    InvalidGraph(String),
    #[error("word graph has no reachable final node")]
    NoFinalNode,
    #[error("malformed {what} at line {line}: {message}")]
    Format {
        what: &'static str,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub const PHRASE_TABLE_FILE: &str = "phrase-table.txt";
pub const LM_FILE: &str = "lm.arpa";
pub const WEIGHTS_FILE: &str = "weights.txt";
pub const DECODER_FILE: &str = "decoder.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SmtTrainConfig {
    pub ibm_iterations: usize,
    pub max_phrase_len: usize,
    pub lm_order: usize,
}

impl Default for SmtTrainConfig {
    fn default() -> Self {
        SmtTrainConfig {
            ibm_iterations: 5,
            max_phrase_len: 4,
            lm_order: DEFAULT_ORDER,
        }
    }
}

/// A trained engine: phrase table, language model, weights and search
/// settings. Immutable after training; safe to share across threads.
#[derive(Debug, Clone)]
pub struct SmtModel {
    pub phrase_table: PhraseTable,
    pub lm: NGramLanguageModel,
    pub weights: LogLinearWeights,
    pub config: DecodeConfig,
}

impl SmtModel {
    pub fn decode(&self, source: &Sentence) -> Result<(Hypothesis, WordGraph), SmtError> {
        decode(&self.phrase_table, &self.lm, &self.weights, source, &self.config)
    }

    pub fn translate(&self, source: &Sentence) -> Result<Sentence, SmtError> {
        self.decode(source).map(|(h, _)| h.tokens)
    }

    /// Writes the phrase table, ARPA model, weights and decoder settings.
    pub fn save(&self, dir: &Path) -> Result<(), SmtError> {
        let io = |path: PathBuf| move |source| SmtError::Io { path, source };
        fs::create_dir_all(dir).map_err(io(dir.to_path_buf()))?;
        let files = [
            (PHRASE_TABLE_FILE, self.phrase_table.to_text()),
            (LM_FILE, self.lm.to_arpa()),
            (WEIGHTS_FILE, self.weights.to_text()),
            (DECODER_FILE, decoder_to_text(&self.config)),
        ];
        for (name, text) in files {
            let path = dir.join(name);
            fs::write(&path, text).map_err(io(path.clone()))?;
        }
        Ok(())
    }

    /// Loads a model saved by [`save`](Self::save). The decoder settings
    /// file is optional.
    pub fn load(dir: &Path) -> Result<Self, SmtError> {
        let read = |name: &str| {
            let path = dir.join(name);
            fs::read_to_string(&path).map_err(|source| SmtError::Io { path, source })
        };
        let config = match read(DECODER_FILE) {
            Ok(text) => decoder_from_text(&text)?,
            Err(SmtError::Io { source, .. }) if source.kind() == std::io::ErrorKind::NotFound => DecodeConfig::default(),
            Err(e) => return Err(e),
        };
        Ok(SmtModel {
            phrase_table: PhraseTable::from_text(&read(PHRASE_TABLE_FILE)?)?,
            lm: NGramLanguageModel::from_arpa(&read(LM_FILE)?)?,
            weights: LogLinearWeights::from_text(&read(WEIGHTS_FILE)?)?,
            config,
        })
    }
}

fn decoder_to_text(c: &DecodeConfig) -> String {
    format!(
        "beam_size\t{}\ndistortion_limit\t{}\ntable_limit\t{}\n",
        c.beam_size, c.distortion_limit, c.table_limit
    )
}

fn decoder_from_text(text: &str) -> Result<DecodeConfig, SmtError> {
    let mut c = DecodeConfig::default();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| SmtError::Format {
            what: "decoder settings",
            line: n + 1,
            message,
        };
        let (k, v) = line.split_once('\t').ok_or_else(|| bad("expected name<TAB>value".into()))?;
        let v: usize = v.trim().parse().map_err(|e| bad(format!("{e}")))?;
        match k.trim() {
            "beam_size" => c.beam_size = v,
            "distortion_limit" => c.distortion_limit = v,
            "table_limit" => c.table_limit = v,
            other => return Err(bad(format!("unknown setting {other:?}"))),
        }
    }
    Ok(c)
}

/// Aligns the corpus in both directions and symmetrizes.
pub fn align_corpus(corpus: &ParallelCorpus, iterations: usize) -> Result<Vec<Alignment>, SmtError> {
    let st = train_ibm1(corpus, iterations)?;
    let ts = train_ibm1(&corpus.reversed(), iterations)?;
    Ok(corpus
        .pairs()
        .iter()
        .map(|p| align_pair(&st, &ts, &p.source, &p.target))
        .collect())
}

/// Trains the full engine with default weights. The language model sees
/// the target side plus any extra monolingual sentences.
pub fn train_smt(
    corpus: &ParallelCorpus,
    extra_lm_text: &[Sentence],
    cfg: &SmtTrainConfig,
) -> Result<SmtModel, SmtError> {
    let alignments = align_corpus(corpus, cfg.ibm_iterations)?;
    let phrase_table = extract_phrases(corpus, &alignments, cfg.max_phrase_len)?;
    let lm = train_kn_lm(corpus.targets().chain(extra_lm_text), cfg.lm_order)?;
    log::info!(
        "trained SMT: {} source phrases, LM n-grams {:?}",
        phrase_table.len(),
        lm.ngram_counts()
    );
    Ok(SmtModel {
        phrase_table,
        lm,
        weights: LogLinearWeights::default(),
        config: DecodeConfig::default(),
    })
}
