//! Beam search with an optional forced prefix.

use super::model::{DecoderState, Encoding, Params};
use super::NmtError;
use crate::text::{BOS, EOS, PAD, UNK};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BeamConfig {
    pub beam_size: usize,
    /// Upper bound on target subwords, forced prefix included, EOS excluded.
    pub max_output_len: usize,
}

pub const DEFAULT_BEAM_SIZE: usize = 6;
pub const DEFAULT_MAX_OUTPUT_LEN: usize = 100;

impl Default for BeamConfig {
    fn default() -> Self {
        BeamConfig {
            beam_size: DEFAULT_BEAM_SIZE,
            max_output_len: DEFAULT_MAX_OUTPUT_LEN,
        }
    }
}

impl BeamConfig {
    pub fn validate(&self) -> Result<(), NmtError> {
        if self.beam_size == 0 {
            return Err(NmtError::InvalidConfig("beam_size must be at least 1".into()));
        }
        if self.max_output_len == 0 {
            return Err(NmtError::InvalidConfig("max_output_len must be at least 1".into()));
        }
        Ok(())
    }
}

/// A finished search result in target ids.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    /// Forced prefix followed by generated tokens, EOS excluded.
    pub ids: Vec<u32>,
    /// Number of leading ids that were forced.
    pub forced: usize,
    /// Sum of per-step log-probabilities of `ids`, plus EOS when `ended`.
    pub score: f64,
    /// False when the search stopped at `max_output_len` without EOS.
    pub ended: bool,
}

impl SearchResult {
    /// Score divided by the number of scored tokens.
    pub fn normalized_score(&self) -> f64 {
        let n = self.ids.len() + usize::from(self.ended);
        if n == 0 {
            0.0
        } else {
            self.score / n as f64
        }
    }

    pub fn generated(&self) -> &[u32] {
        &self.ids[self.forced..]
    }
}

/// Tokens the search may emit: never PAD, BOS or UNK, and no
/// word-internal continuation as the first free token.
pub(crate) struct Mask<'a> {
    pub continuation: &'a [bool],
}

impl Mask<'_> {
    fn allowed(&self, tok: u32, first_free: bool) -> bool {
        !(tok == PAD || tok == BOS || tok == UNK || (first_free && self.continuation[tok as usize]))
    }
}

struct Live {
    ids: Vec<u32>,
    score: f64,
    state: DecoderState,
}

/// Beam search from `forced`. Partial hypotheses compete on raw score;
/// finished ones on [`SearchResult::normalized_score`]. Ties keep the
/// earlier hypothesis and the lower token id.
pub(crate) fn search(
    p: &Params,
    enc: &Encoding,
    forced: &[u32],
    mask: &Mask,
    cfg: &BeamConfig,
) -> Result<SearchResult, NmtError> {
    cfg.validate()?;
    if forced.len() > cfg.max_output_len {
        return Err(NmtError::PrefixTooLong {
            prefix: forced.len(),
            max: cfg.max_output_len,
        });
    }
    let mut state = p.initial_state(enc);
    let mut prev = BOS;
    let mut score = 0.0;
    for &tok in forced {
        let (next, lp) = p.step(enc, &state, prev);
        score += lp[tok as usize];
        state = next;
        prev = tok;
    }
    let mut live = vec![Live {
        ids: forced.to_vec(),
        score,
        state,
    }];
    let mut finished: Vec<SearchResult> = Vec::new();
    let mut first_free = true;
    while !live.is_empty() && finished.len() < cfg.beam_size {
        let room = cfg.beam_size - finished.len();
        let mut expanded: Vec<(DecoderState, Vec<f64>)> = Vec::with_capacity(live.len());
        let mut cands: Vec<(f64, usize, u32)> = Vec::new();
        for (hi, h) in live.iter().enumerate() {
            if h.ids.len() >= cfg.max_output_len {
                continue;
            }
            let prev = h.ids.last().copied().unwrap_or(BOS);
            let (next, lp) = p.step(enc, &h.state, prev);
            for (tok, &l) in lp.iter().enumerate() {
                let tok = tok as u32;
                if mask.allowed(tok, first_free) {
                    cands.push((h.score + l, hi, tok));
                }
            }
            expanded.push((next, lp));
        }
        // Hypotheses at the length limit finish without EOS.
        let mut next_live = Vec::new();
        let mut slot = 0;
        let mut slot_of = vec![usize::MAX; live.len()];
        for (hi, h) in live.iter().enumerate() {
            if h.ids.len() >= cfg.max_output_len {
                finished.push(SearchResult {
                    ids: h.ids.clone(),
                    forced: forced.len(),
                    score: h.score,
                    ended: false,
                });
            } else {
                slot_of[hi] = slot;
                slot += 1;
            }
        }
        let keep = room.min(cands.len());
        if keep == 0 {
            break;
        }
        let order = |a: &(f64, usize, u32), b: &(f64, usize, u32)| {
            b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
        };
        if keep < cands.len() {
            cands.select_nth_unstable_by(keep - 1, order);
            cands.truncate(keep);
        }
        cands.sort_by(order);
        for (s, hi, tok) in cands {
            let h = &live[hi];
            let mut ids = h.ids.clone();
            if tok == EOS {
                finished.push(SearchResult {
                    ids,
                    forced: forced.len(),
                    score: s,
                    ended: true,
                });
            } else {
                ids.push(tok);
                next_live.push(Live {
                    ids,
                    score: s,
                    state: expanded[slot_of[hi]].0.clone(),
                });
            }
        }
        live = next_live;
        first_free = false;
    }
    for h in live {
        finished.push(SearchResult {
            ids: h.ids,
            forced: forced.len(),
            score: h.score,
            ended: false,
        });
    }
    let mut best: Option<SearchResult> = None;
    for r in finished {
        if best.as_ref().is_none_or(|b| r.normalized_score() > b.normalized_score()) {
            best = Some(r);
        }
    }
    best.ok_or(NmtError::NoHypothesis)
}

/// Stepwise argmax under the same mask; the reference for beam size 1.
pub(crate) fn greedy(p: &Params, enc: &Encoding, mask: &Mask, max_len: usize) -> SearchResult {
    let mut state = p.initial_state(enc);
    let mut prev = BOS;
    let mut ids = Vec::new();
    let mut score = 0.0;
    loop {
        if ids.len() >= max_len {
            return SearchResult {
                ids,
                forced: 0,
                score,
                ended: false,
            };
        }
        let (next, lp) = p.step(enc, &state, prev);
        let mut best = None;
        for (tok, &l) in lp.iter().enumerate() {
            if mask.allowed(tok as u32, ids.is_empty()) && best.is_none_or(|(_, bl)| l > bl) {
                best = Some((tok as u32, l));
            }
        }
        let (tok, l) = best.expect("vocabulary has an allowed token");
        score += l;
        if tok == EOS {
            return SearchResult {
                ids,
                forced: 0,
                score,
                ended: true,
            };
        }
        ids.push(tok);
        state = next;
        prev = tok;
    }
}
