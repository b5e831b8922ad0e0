//! Translation edit rate with greedy block shifts.

use serde::{Deserialize, Serialize};

use super::bleu::check_lengths;
use super::EvalError;
use crate::text::Sentence;

/// Longest span considered for a single shift.
const MAX_SHIFT_SPAN: usize = 10;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TerStats {
    pub edits: f64,
    pub ref_len: f64,
}

impl TerStats {
    pub fn score(&self) -> f64 {
        if self.ref_len == 0.0 {
            return 0.0;
        }
        100.0 * self.edits / self.ref_len
    }
}

impl std::iter::Sum for TerStats {
    fn sum<I: Iterator<Item = TerStats>>(iter: I) -> TerStats {
        iter.fold(TerStats::default(), |a, b| TerStats {
            edits: a.edits + b.edits,
            ref_len: a.ref_len + b.ref_len,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    Match,
    Sub,
    /// Hypothesis word with no reference counterpart.
    Ins,
    /// Reference word missing from the hypothesis.
    Del,
}

pub fn levenshtein<T: PartialEq>(h: &[T], r: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=r.len()).collect();
    let mut cur = vec![0; r.len() + 1];
    for i in 1..=h.len() {
        cur[0] = i;
        for j in 1..=r.len() {
            let sub = prev[j - 1] + usize::from(h[i - 1] != r[j - 1]);
            cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[r.len()]
}

fn alignment<T: PartialEq>(h: &[T], r: &[T]) -> Vec<Op> {
    let (n, m) = (h.len(), r.len());
    let mut d = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=m {
        d[0][j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = d[i - 1][j - 1] + usize::from(h[i - 1] != r[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    let mut ops = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        if i > 0 && j > 0 && d[i][j] == d[i - 1][j - 1] + usize::from(h[i - 1] != r[j - 1]) {
            ops.push(if h[i - 1] == r[j - 1] { Op::Match } else { Op::Sub });
            i -= 1;
            j -= 1;
        } else if i > 0 && d[i][j] == d[i - 1][j] + 1 {
            ops.push(Op::Ins);
            i -= 1;
        } else {
            ops.push(Op::Del);
            j -= 1;
        }
    }
    ops.reverse();
    ops
}

struct AlignmentView {
    hyp_matched: Vec<bool>,
    ref_matched: Vec<bool>,
    /// For each reference position: hypothesis words consumed before it, and
    /// the hypothesis word aligned to it (if any).
    ref_anchor: Vec<(usize, Option<usize>)>,
}

fn view<T: PartialEq>(h: &[T], r: &[T]) -> AlignmentView {
    let mut v = AlignmentView {
        hyp_matched: vec![false; h.len()],
        ref_matched: vec![false; r.len()],
        ref_anchor: Vec::with_capacity(r.len()),
    };
    let (mut i, mut j) = (0, 0);
    for op in alignment(h, r) {
        match op {
            Op::Match | Op::Sub => {
                if op == Op::Match {
                    v.hyp_matched[i] = true;
                    v.ref_matched[j] = true;
                }
                v.ref_anchor.push((i, Some(i)));
                i += 1;
                j += 1;
            }
            Op::Ins => i += 1,
            Op::Del => {
                v.ref_anchor.push((i, None));
                j += 1;
            }
        }
    }
    v
}

fn shifted<T: Clone>(h: &[T], start: usize, len: usize, dest: usize) -> Vec<T> {
    let span = &h[start..start + len];
    let mut rest: Vec<T> = Vec::with_capacity(h.len());
    rest.extend_from_slice(&h[..start]);
    rest.extend_from_slice(&h[start + len..]);
    let at = if dest > start { dest - len } else { dest };
    rest.splice(at..at, span.iter().cloned());
    rest
}

/// Best shift by edit-distance gain; `None` when no shift lowers the total.
fn best_shift<T: PartialEq + Clone>(h: &[T], r: &[T], current: usize) -> Option<(Vec<T>, usize)> {
    let v = view(h, r);
    let mut best: Option<(Vec<T>, usize)> = None;
    for start in 0..h.len() {
        for len in 1..=MAX_SHIFT_SPAN.min(h.len() - start) {
            if v.hyp_matched[start..start + len].iter().all(|&m| m) {
                continue;
            }
            let span = &h[start..start + len];
            for j in 0..=r.len().saturating_sub(len) {
                if r.len() < len
                    || &r[j..j + len] != span
                    || v.ref_matched[j..j + len].iter().all(|&m| m)
                {
                    continue;
                }
                let (before, aligned) = v.ref_anchor[j];
                let mut dests = vec![before];
                if let Some(k) = aligned {
                    dests.push(k + 1);
                }
                for dest in dests {
                    if dest >= start && dest <= start + len {
                        continue;
                    }
                    let cand = shifted(h, start, len, dest);
                    let ed = levenshtein(&cand, r);
                    if ed + 1 < current && best.as_ref().is_none_or(|(_, e)| ed < *e) {
                        best = Some((cand, ed));
                    }
                }
            }
        }
    }
    best
}

/// Number of edits (shifts plus remaining insertions, deletions and
/// substitutions) turning `hyp` into `reference`.
pub fn ter_edits<T: PartialEq + Clone>(hyp: &[T], reference: &[T]) -> usize {
    let mut h = hyp.to_vec();
    let mut shifts = 0;
    let mut current = levenshtein(&h, reference);
    while current > 1 {
        match best_shift(&h, reference, current) {
            Some((next, ed)) => {
                h = next;
                current = ed;
                shifts += 1;
            }
            None => break,
        }
    }
    shifts + current
}

pub fn ter_stats(hyp: &Sentence, reference: &Sentence) -> Result<TerStats, EvalError> {
    if reference.is_empty() {
        return Err(EvalError::EmptyReference);
    }
    Ok(TerStats {
        edits: ter_edits(hyp.tokens(), reference.tokens()) as f64,
        ref_len: reference.len() as f64,
    })
}

/// Sentence TER in percent.
pub fn ter(hyp: &Sentence, reference: &Sentence) -> Result<f64, EvalError> {
    Ok(ter_stats(hyp, reference)?.score())
}

pub fn ter_components(hyps: &[Sentence], refs: &[Sentence]) -> Result<Vec<TerStats>, EvalError> {
    check_lengths(hyps.len(), refs.len())?;
    hyps.iter().zip(refs).map(|(h, r)| ter_stats(h, r)).collect()
}

/// Corpus TER: total edits over total reference words, in percent.
pub fn corpus_ter(hyps: &[Sentence], refs: &[Sentence]) -> Result<f64, EvalError> {
    Ok(ter_components(hyps, refs)?.into_iter().sum::<TerStats>().score())
}
