use serde::{Deserialize, Serialize};

use super::bleu::check_lengths;
use super::EvalError;
use crate::imt::SessionMetrics;
use crate::text::{detokenize, Sentence};

/// Per-sentence effort counts with their normalizers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EffortStats {
    pub word_strokes: u64,
    pub mouse_actions: u64,
    pub ref_words: u64,
    pub ref_chars: u64,
}

impl EffortStats {
    pub fn new(metrics: &SessionMetrics, reference: &Sentence) -> Self {
        EffortStats {
            word_strokes: metrics.word_strokes as u64,
            mouse_actions: metrics.mouse_actions as u64,
            ref_words: reference.len() as u64,
            ref_chars: detokenize(reference).chars().count() as u64,
        }
    }

    /// Word stroke ratio in percent.
    pub fn wsr(&self) -> f64 {
        ratio(self.word_strokes, self.ref_words)
    }

    /// Mouse action ratio in percent.
    pub fn mar(&self) -> f64 {
        ratio(self.mouse_actions, self.ref_chars)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

impl std::iter::Sum for EffortStats {
    fn sum<I: Iterator<Item = EffortStats>>(iter: I) -> EffortStats {
        iter.fold(EffortStats::default(), |a, b| EffortStats {
            word_strokes: a.word_strokes + b.word_strokes,
            mouse_actions: a.mouse_actions + b.mouse_actions,
            ref_words: a.ref_words + b.ref_words,
            ref_chars: a.ref_chars + b.ref_chars,
        })
    }
}

pub fn effort_components(
    sessions: &[SessionMetrics],
    refs: &[Sentence],
) -> Result<Vec<EffortStats>, EvalError> {
    check_lengths(sessions.len(), refs.len())?;
    Ok(sessions.iter().zip(refs).map(|(m, r)| EffortStats::new(m, r)).collect())
}

/// Corpus WSR and MAR in percent: total word strokes over total reference
/// words, total mouse actions over total characters of the detokenized
/// references.
pub fn aggregate_effort(
    sessions: &[SessionMetrics],
    refs: &[Sentence],
) -> Result<(f64, f64), EvalError> {
    let total: EffortStats = effort_components(sessions, refs)?.into_iter().sum();
    Ok((total.wsr(), total.mar()))
}
