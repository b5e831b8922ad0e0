//! Quality metrics (BLEU, TER), effort metrics (WSR, MAR) and approximate
//! randomization significance tests.
//!
//! All corpus metrics are computed from per-sentence components summed in
//! input order, so results are bit-reproducible.

mod bleu;
mod effort;
mod report;
mod significance;
mod ter;

pub use bleu::{bleu, bleu_components, sentence_bleu, BleuStats, MAX_ORDER};
pub use effort::{aggregate_effort, effort_components, EffortStats};
pub use report::{
    bleu_metric, mar_metric, ter_metric, wsr_metric, EvalReport, Metric, SystemComponents,
    SystemReport,
};
pub use significance::{
    approx_randomization, exact_randomization, mean, ALPHA, DEFAULT_REPETITIONS,
    MAX_EXACT_SENTENCES,
};
pub use ter::{corpus_ter, levenshtein, ter, ter_components, ter_edits, ter_stats, TerStats};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("hypothesis/reference count mismatch: {hyps} vs {refs}")]
    LengthMismatch { hyps: usize, refs: usize },
    #[error("no sentences to score")]
    Empty,
    #[error("empty reference sentence")]
    EmptyReference,
    #[error("exact enumeration over {0} sentences is too large")]
    TooLarge(usize),
}
