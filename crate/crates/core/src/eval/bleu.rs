use std::collections::HashMap;
use std::ops::{Add, AddAssign, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::text::Sentence;

pub const MAX_ORDER: usize = 4;

/// Sufficient statistics for BLEU-4: clipped n-gram matches and totals per
/// order, plus hypothesis and reference lengths.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BleuStats {
    pub matches: [u64; MAX_ORDER],
    pub totals: [u64; MAX_ORDER],
    pub hyp_len: u64,
    pub ref_len: u64,
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], u64> {
    let mut counts = HashMap::new();
    for g in tokens.windows(n) {
        *counts.entry(g).or_insert(0) += 1;
    }
    counts
}

impl BleuStats {
    pub fn from_pair(hyp: &Sentence, reference: &Sentence) -> Self {
        let (h, r) = (hyp.tokens(), reference.tokens());
        let mut s = BleuStats {
            hyp_len: h.len() as u64,
            ref_len: r.len() as u64,
            ..Default::default()
        };
        for n in 1..=MAX_ORDER {
            let hc = ngram_counts(h, n);
            let rc = ngram_counts(r, n);
            s.totals[n - 1] = h.len().saturating_sub(n - 1) as u64;
            s.matches[n - 1] = hc
                .iter()
                .map(|(g, c)| (*c).min(rc.get(g).copied().unwrap_or(0)))
                .sum();
        }
        s
    }

    fn brevity_log(&self) -> f64 {
        if self.hyp_len < self.ref_len {
            1.0 - self.ref_len as f64 / self.hyp_len as f64
        } else {
            0.0
        }
    }

    /// Unsmoothed BLEU in percent. Orders with no hypothesis n-grams at
    /// all are left out of the geometric mean.
    pub fn score(&self) -> f64 {
        if self.hyp_len == 0 {
            return 0.0;
        }
        let mut log_sum = 0.0;
        let mut orders = 0;
        for n in 0..MAX_ORDER {
            if self.totals[n] == 0 {
                continue;
            }
            if self.matches[n] == 0 {
                return 0.0;
            }
            log_sum += (self.matches[n] as f64 / self.totals[n] as f64).ln();
            orders += 1;
        }
        100.0 * (log_sum / orders as f64 + self.brevity_log()).exp()
    }

    /// BLEU with add-one smoothing on the precisions of order two and up.
    pub fn smoothed_score(&self) -> f64 {
        if self.hyp_len == 0 || self.matches[0] == 0 {
            return 0.0;
        }
        let mut log_sum = (self.matches[0] as f64 / self.totals[0] as f64).ln();
        for n in 1..MAX_ORDER {
            log_sum += ((self.matches[n] + 1) as f64 / (self.totals[n] + 1) as f64).ln();
        }
        100.0 * (log_sum / MAX_ORDER as f64 + self.brevity_log()).exp()
    }
}

impl AddAssign for BleuStats {
    fn add_assign(&mut self, o: BleuStats) {
        for n in 0..MAX_ORDER {
            self.matches[n] += o.matches[n];
            self.totals[n] += o.totals[n];
        }
        self.hyp_len += o.hyp_len;
        self.ref_len += o.ref_len;
    }
}

impl Add for BleuStats {
    type Output = BleuStats;
    fn add(mut self, o: BleuStats) -> BleuStats {
        self += o;
        self
    }
}

impl SubAssign for BleuStats {
    fn sub_assign(&mut self, o: BleuStats) {
        for n in 0..MAX_ORDER {
            self.matches[n] -= o.matches[n];
            self.totals[n] -= o.totals[n];
        }
        self.hyp_len -= o.hyp_len;
        self.ref_len -= o.ref_len;
    }
}

impl Sub for BleuStats {
    type Output = BleuStats;
    fn sub(mut self, o: BleuStats) -> BleuStats {
        self -= o;
        self
    }
}

impl std::iter::Sum for BleuStats {
    fn sum<I: Iterator<Item = BleuStats>>(iter: I) -> BleuStats {
        iter.fold(BleuStats::default(), Add::add)
    }
}

pub(crate) fn check_lengths(hyps: usize, refs: usize) -> Result<(), EvalError> {
    if hyps != refs {
        return Err(EvalError::LengthMismatch { hyps, refs });
    }
    if hyps == 0 {
        return Err(EvalError::Empty);
    }
    Ok(())
}

/// Per-sentence statistics, in input order.
pub fn bleu_components(hyps: &[Sentence], refs: &[Sentence]) -> Result<Vec<BleuStats>, EvalError> {
    check_lengths(hyps.len(), refs.len())?;
    Ok(hyps.iter().zip(refs).map(|(h, r)| BleuStats::from_pair(h, r)).collect())
}

/// Corpus-level BLEU-4 in percent.
pub fn bleu(hyps: &[Sentence], refs: &[Sentence]) -> Result<f64, EvalError> {
    Ok(bleu_components(hyps, refs)?.into_iter().sum::<BleuStats>().score())
}

/// Sentence-level BLEU with add-one smoothing for n >= 2.
pub fn sentence_bleu(hyp: &Sentence, reference: &Sentence) -> f64 {
    BleuStats::from_pair(hyp, reference).smoothed_score()
}
