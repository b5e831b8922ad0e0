//! Attention encoder-decoder over subwords.
//!
//! [`NeuralModel`] works on subword sentences; [`NmtSystem`] adds the BPE
//! model and speaks words. Decoding is deterministic and models are
//! immutable after training, so one model can serve many threads.

mod model;
mod search;
mod tensor;
mod train;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

pub use model::{gradient_check, DecoderState, Encoding, ModelDims, Params, PARAM_NAMES};
pub use search::{BeamConfig, SearchResult, DEFAULT_BEAM_SIZE, DEFAULT_MAX_OUTPUT_LEN};
pub use tensor::{log_softmax, softmax, Tensor};
pub use train::{train_params, TrainConfig, DEFAULT_BATCH_SIZE, DEFAULT_LABEL_SMOOTHING, DEFAULT_LEARNING_RATE};

use search::Mask;
use crate::text::{BpeModel, BpeSides, ParallelCorpus, Sentence, TextError, Vocabulary, EOS, DEFAULT_MERGES};

#[derive(Debug, thiserror::Error)]
pub enum NmtError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("subword {0:?} is outside the model vocabularies")]
    OovSubword(String),
    #[error("prefix of {prefix} subwords exceeds max_output_len {max}")]
    PrefixTooLong { prefix: usize, max: usize },
    #[error("search produced no hypothesis")]
    NoHypothesis,
    #[error("training diverged at update {0}")]
    Diverged(usize),
    #[error("malformed checkpoint at line {line}: {message}")]
    Checkpoint { line: usize, message: String },
    #[error(transparent)]
    Text(#[from] TextError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub const DEFAULT_DIM: usize = 64;
/// Width of the full-scale reference configuration.
pub const REFERENCE_DIM: usize = 512;
const CHECKPOINT_TAG: &str = "imt-nmt v1";

/// Decoded output of a search.
#[derive(Debug, Clone, PartialEq)]
pub struct NmtHypothesis {
    /// Generated subwords (forced prefix excluded).
    pub subwords: Sentence,
    /// Generated subwords glued into words.
    pub words: Sentence,
    /// Raw log-probability of the full output, prefix and EOS included.
    pub score: f64,
    pub normalized_score: f64,
    pub ended: bool,
}

/// Parameters plus source and target subword vocabularies.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuralModel {
    pub src_vocab: Vocabulary,
    pub tgt_vocab: Vocabulary,
    pub params: Params,
    continuation: Vec<bool>,
}

fn continuation_flags(v: &Vocabulary) -> Vec<bool> {
    v.iter().map(|(_, t)| BpeModel::is_continuation(t)).collect()
}

impl NeuralModel {
    /// Seeded initialization; `embed` and `hidden` must be at least 2.
    pub fn init(src_vocab: Vocabulary, tgt_vocab: Vocabulary, embed: usize, hidden: usize, seed: u64) -> Result<Self, NmtError> {
        if embed < 2 || hidden < 2 {
            return Err(NmtError::InvalidConfig("model dimensions must be at least 2".into()));
        }
        let dims = ModelDims {
            src_vocab: src_vocab.len(),
            tgt_vocab: tgt_vocab.len(),
            embed,
            hidden,
        };
        dims.validate()?;
        let params = Params::init(&dims, seed);
        Ok(Self::from_parts(src_vocab, tgt_vocab, params))
    }

    fn from_parts(src_vocab: Vocabulary, tgt_vocab: Vocabulary, params: Params) -> Self {
        let continuation = continuation_flags(&tgt_vocab);
        NeuralModel {
            src_vocab,
            tgt_vocab,
            params,
            continuation,
        }
    }

    pub fn dims(&self) -> ModelDims {
        self.params.dims()
    }

    /// Source ids with EOS appended; unknown subwords map to UNK.
    pub fn source_ids(&self, x: &Sentence) -> Vec<u32> {
        x.iter().map(|t| self.src_vocab.id(t)).chain(std::iter::once(EOS)).collect()
    }

    /// Target ids; every subword must be in the vocabulary.
    pub fn target_ids(&self, y: &Sentence) -> Result<Vec<u32>, NmtError> {
        y.iter()
            .map(|t| self.tgt_vocab.get(t).ok_or_else(|| NmtError::OovSubword(t.clone())))
            .collect()
    }

    fn target_ids_lossy(&self, y: &Sentence) -> Vec<u32> {
        y.iter().map(|t| self.tgt_vocab.id(t)).collect()
    }

    fn tokens(&self, ids: &[u32]) -> Sentence {
        let toks = ids
            .iter()
            .map(|&i| self.tgt_vocab.token(i).unwrap_or("<unk>").to_string())
            .collect();
        Sentence::from_tokens_unchecked(toks)
    }

    fn hypothesis(&self, r: &SearchResult) -> NmtHypothesis {
        let subwords = self.tokens(r.generated());
        NmtHypothesis {
            words: BpeModel::decode(&subwords),
            subwords,
            score: r.score,
            normalized_score: r.normalized_score(),
            ended: r.ended,
        }
    }

    fn mask(&self) -> Mask<'_> {
        Mask {
            continuation: &self.continuation,
        }
    }

    /// Length-normalized beam search on a subword source.
    pub fn beam_decode(&self, x: &Sentence, cfg: &BeamConfig) -> Result<NmtHypothesis, NmtError> {
        self.prefix_decode(x, &Sentence::default(), cfg)
    }

    /// Beam search after force-feeding `prefix` (subwords). The first free
    /// token is never a continuation subword.
    pub fn prefix_decode(&self, x: &Sentence, prefix: &Sentence, cfg: &BeamConfig) -> Result<NmtHypothesis, NmtError> {
        let enc = self.params.encode(&self.source_ids(x));
        let forced = self.target_ids_lossy(prefix);
        let r = search::search(&self.params, &enc, &forced, &self.mask(), cfg)?;
        Ok(self.hypothesis(&r))
    }

    /// Stepwise argmax decoding under the same token mask as the beam.
    pub fn greedy_decode(&self, x: &Sentence, max_output_len: usize) -> NmtHypothesis {
        let enc = self.params.encode(&self.source_ids(x));
        let r = search::greedy(&self.params, &enc, &self.mask(), max_output_len);
        self.hypothesis(&r)
    }

    /// Log-probability of `y` (subwords) followed by EOS given `x`.
    pub fn score(&self, x: &Sentence, y: &Sentence) -> f64 {
        self.params
            .sequence_logprob(&self.source_ids(x), &self.target_ids_lossy(y))
    }

    /// Per-step next-token distributions along `y`, EOS step included.
    pub fn step_distributions(&self, x: &Sentence, y: &Sentence) -> Vec<Vec<f64>> {
        let enc = self.params.encode(&self.source_ids(x));
        let mut state = self.params.initial_state(&enc);
        let mut prev = crate::text::BOS;
        let mut out = Vec::new();
        for tok in self.target_ids_lossy(y).into_iter().chain(std::iter::once(EOS)) {
            let (next, lp) = self.params.step(&enc, &state, prev);
            out.push(lp.into_iter().map(f64::exp).collect());
            state = next;
            prev = tok;
        }
        out
    }

    /// Maps a subword corpus to ids; any target subword outside the
    /// vocabulary is an error.
    pub fn corpus_ids(&self, corpus: &ParallelCorpus) -> Result<Vec<(Vec<u32>, Vec<u32>)>, NmtError> {
        corpus
            .pairs()
            .iter()
            .map(|p| {
                for t in &p.source {
                    if self.src_vocab.get(t).is_none() {
                        return Err(NmtError::OovSubword(t.clone()));
                    }
                }
                Ok((self.source_ids(&p.source), self.target_ids(&p.target)?))
            })
            .collect()
    }

    /// Trains a copy of the model on a subword corpus.
    pub fn train(&self, corpus: &ParallelCorpus, cfg: &TrainConfig) -> Result<(NeuralModel, Vec<f64>), NmtError> {
        let data = self.corpus_ids(corpus)?;
        let (params, trace) = train_params(&self.params, &data, cfg)?;
        Ok((Self::from_parts(self.src_vocab.clone(), self.tgt_vocab.clone(), params), trace))
    }

    /// Text checkpoint: tag, dims, both vocabularies, then every tensor as
    /// `tensor <name> <rows> <cols>` followed by one line per row.
    /// Values use shortest round-trip formatting, so loading is bit-exact.
    pub fn to_text(&self) -> String {
        let d = self.dims();
        let mut out = format!(
            "{CHECKPOINT_TAG}\ndims {} {} {} {}\n",
            d.src_vocab, d.tgt_vocab, d.embed, d.hidden
        );
        out.push_str(&self.src_vocab.to_text());
        out.push_str(&self.tgt_vocab.to_text());
        for (name, t) in self.params.tensors() {
            let _ = writeln!(out, "tensor {name} {} {}", t.rows(), t.cols());
            for r in 0..t.rows() {
                let row: Vec<String> = t.row(r).iter().map(|v| format!("{v:?}")).collect();
                out.push_str(&row.join(" "));
                out.push('\n');
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, NmtError> {
        let mut lines = text.lines().enumerate().peekable();
        let bad = |line: usize, message: String| NmtError::Checkpoint { line: line + 1, message };
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| NmtError::Checkpoint {
                    line: 0,
                    message: format!("unexpected end of file, expected {what}"),
                })
        };
        let (n, tag) = next("version tag")?;
        if tag != CHECKPOINT_TAG {
            return Err(bad(n, format!("expected {CHECKPOINT_TAG:?}, found {tag:?}")));
        }
        let (n, dims_line) = next("dims")?;
        let nums: Vec<usize> = dims_line
            .strip_prefix("dims ")
            .map(|r| r.split_whitespace().filter_map(|v| v.parse().ok()).collect())
            .unwrap_or_default();
        let [vs, vt, e, h] = nums[..] else {
            return Err(bad(n, format!("bad dims line {dims_line:?}")));
        };
        let dims = ModelDims {
            src_vocab: vs,
            tgt_vocab: vt,
            embed: e,
            hidden: h,
        };
        let mut rest = lines.map(|(_, l)| l);
        let src_vocab = Vocabulary::read_lines(&mut rest)?;
        let tgt_vocab = Vocabulary::read_lines(&mut rest)?;
        if src_vocab.len() != vs || tgt_vocab.len() != vt {
            return Err(bad(1, "vocabulary sizes disagree with dims".into()));
        }
        let mut params = Params::zeros(&dims);
        for (name, t) in params.tensors_mut() {
            let header = rest.next().unwrap_or_default();
            let expected = format!("tensor {name} {} {}", t.rows(), t.cols());
            if header != expected {
                return Err(bad(1, format!("expected {expected:?}, found {header:?}")));
            }
            for r in 0..t.rows() {
                let line = rest.next().unwrap_or_default();
                let row = t.row_mut(r);
                let mut vals = line.split(' ');
                for slot in row.iter_mut() {
                    let v: f64 = vals
                        .next()
                        .and_then(|v| v.parse().ok())
                        .filter(|v: &f64| v.is_finite())
                        .ok_or_else(|| bad(1, format!("bad value row in tensor {name}")))?;
                    *slot = v;
                }
                if vals.next().is_some() {
                    return Err(bad(1, format!("too many values in a row of tensor {name}")));
                }
            }
        }
        if rest.any(|l| !l.trim().is_empty()) {
            return Err(bad(1, "trailing data after the last tensor".into()));
        }
        Ok(Self::from_parts(src_vocab, tgt_vocab, params))
    }
}

pub const NMT_MODEL_FILE: &str = "nmt-model.txt";
pub const BPE_FILE: &str = "bpe.txt";
pub const SEARCH_FILE: &str = "search.txt";

/// Word-level settings for building an [`NmtSystem`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NmtSystemConfig {
    pub merges: usize,
    pub embed: usize,
    pub hidden: usize,
    pub train: TrainConfig,
    pub beam: BeamConfig,
}

impl Default for NmtSystemConfig {
    fn default() -> Self {
        NmtSystemConfig {
            merges: DEFAULT_MERGES,
            embed: DEFAULT_DIM,
            hidden: DEFAULT_DIM,
            train: TrainConfig::default(),
            beam: BeamConfig::default(),
        }
    }
}

/// BPE model, neural model and search settings; speaks words.
#[derive(Debug, Clone, PartialEq)]
pub struct NmtSystem {
    pub bpe: BpeModel,
    pub model: NeuralModel,
    pub beam: BeamConfig,
}

impl NmtSystem {
    /// Learns joint BPE, builds subword vocabularies, initializes with
    /// `cfg.train.seed` and trains. Returns the system and the loss trace.
    pub fn train(corpus: &ParallelCorpus, cfg: &NmtSystemConfig) -> Result<(NmtSystem, Vec<f64>), NmtError> {
        if corpus.is_empty() {
            return Err(NmtError::EmptyCorpus);
        }
        cfg.beam.validate()?;
        let bpe = BpeModel::train(corpus, cfg.merges, BpeSides::Joint);
        let encoded = encode_corpus(&bpe, corpus);
        let src_vocab = Vocabulary::from_tokens(encoded.sources().flat_map(|s| s.iter().map(String::as_str)));
        let tgt_vocab = Vocabulary::from_tokens(encoded.targets().flat_map(|s| s.iter().map(String::as_str)));
        let model = NeuralModel::init(src_vocab, tgt_vocab, cfg.embed, cfg.hidden, cfg.train.seed)?;
        let (model, trace) = model.train(&encoded, &cfg.train)?;
        log::info!(
            "trained NMT: {} updates, final loss {:.4}",
            trace.len(),
            trace.last().copied().unwrap_or(f64::NAN)
        );
        Ok((
            NmtSystem {
                bpe,
                model,
                beam: cfg.beam,
            },
            trace,
        ))
    }

    pub fn translate(&self, source: &Sentence) -> Result<Sentence, NmtError> {
        Ok(self.model.beam_decode(&self.bpe.encode(source), &self.beam)?.words)
    }

    /// Words completing the word-level `prefix`.
    pub fn suffix(&self, source: &Sentence, prefix: &Sentence) -> Result<Sentence, NmtError> {
        let h = self
            .model
            .prefix_decode(&self.bpe.encode(source), &self.bpe.encode(prefix), &self.beam)?;
        Ok(h.words)
    }

    pub fn save(&self, dir: &Path) -> Result<(), NmtError> {
        let io = |path: PathBuf| move |source| NmtError::Io { path, source };
        fs::create_dir_all(dir).map_err(io(dir.to_path_buf()))?;
        let files = [
            (BPE_FILE, self.bpe.to_text()),
            (NMT_MODEL_FILE, self.model.to_text()),
            (
                SEARCH_FILE,
                format!(
                    "beam_size\t{}\nmax_output_len\t{}\n",
                    self.beam.beam_size, self.beam.max_output_len
                ),
            ),
        ];
        for (name, text) in files {
            let path = dir.join(name);
            fs::write(&path, text).map_err(io(path.clone()))?;
        }
        Ok(())
    }

    /// Loads a system saved by [`save`](Self::save); the search settings
    /// file is optional.
    pub fn load(dir: &Path) -> Result<Self, NmtError> {
        let read = |name: &str| {
            let path = dir.join(name);
            fs::read_to_string(&path).map_err(|source| NmtError::Io { path, source })
        };
        let beam = match read(SEARCH_FILE) {
            Ok(text) => beam_from_text(&text)?,
            Err(NmtError::Io { source, .. }) if source.kind() == std::io::ErrorKind::NotFound => BeamConfig::default(),
            Err(e) => return Err(e),
        };
        Ok(NmtSystem {
            bpe: BpeModel::from_text(&read(BPE_FILE)?)?,
            model: NeuralModel::from_text(&read(NMT_MODEL_FILE)?)?,
            beam,
        })
    }
}

fn beam_from_text(text: &str) -> Result<BeamConfig, NmtError> {
    let mut c = BeamConfig::default();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| NmtError::Checkpoint { line: n + 1, message };
        let (k, v) = line.split_once('\t').ok_or_else(|| bad("expected name<TAB>value".into()))?;
        let v: usize = v.trim().parse().map_err(|e| bad(format!("{e}")))?;
        match k.trim() {
            "beam_size" => c.beam_size = v,
            "max_output_len" => c.max_output_len = v,
            other => return Err(bad(format!("unknown setting {other:?}"))),
        }
    }
    c.validate()?;
    Ok(c)
}

/// Applies BPE to both sides of a word-level corpus.
pub fn encode_corpus(bpe: &BpeModel, corpus: &ParallelCorpus) -> ParallelCorpus {
    let (encoded, _) = ParallelCorpus::from_pairs(
        corpus.name.clone(),
        corpus.pairs().iter().map(|p| (bpe.encode(&p.source), bpe.encode(&p.target))),
    );
    encoded
}
