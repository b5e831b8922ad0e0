//! Error-correcting prefix search on word graphs.
//!
//! Every edge is unrolled into single-word arcs (the edge score sits on the
//! first arc). A dynamic program over (graph position, prefix length) finds,
//! for every position a path can stop at, the path-prefix with the fewest
//! word edits to the user prefix; ties prefer the higher score of the best
//! full path through that position, then the longer path-prefix. Scores
//! within [`SCORE_TOLERANCE`] tie. The best
//! position's completion is the suffix.

use super::{SmtError, WordGraph};
use crate::text::Sentence;

#[derive(Debug, Clone, PartialEq)]
pub struct SuffixMatch {
    pub suffix: Sentence,
    /// Word-level edit distance between the matched path-prefix and the
    /// user prefix.
    pub edit_distance: usize,
    /// Score of the full path: matched path-prefix plus completion.
    pub path_score: f64,
    /// Number of words in the matched path-prefix.
    pub cut_len: usize,
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    ed: usize,
    score: f64,
    len: usize,
}

impl Cell {
    fn step(self, ed: usize, score: f64, len: usize) -> Cell {
        Cell {
            ed: self.ed + ed,
            score: self.score + score,
            len: self.len + len,
        }
    }
}

/// Scores closer than this count as equal, so that sums taken in a
/// different order still tie.
pub const SCORE_TOLERANCE: f64 = 1e-9;

/// Lexicographic (edit distance, higher score, longer) preference.
fn better(a: &Cell, b: &Cell) -> bool {
    if a.ed != b.ed {
        return a.ed < b.ed;
    }
    if (a.score - b.score).abs() > SCORE_TOLERANCE {
        return a.score > b.score;
    }
    a.len > b.len
}

fn keep_best(slot: &mut Option<Cell>, cand: Option<Cell>) {
    if let Some(c) = cand {
        if slot.as_ref().is_none_or(|s| better(&c, s)) {
            *slot = Some(c);
        }
    }
}

enum Cut {
    Node(usize),
    /// After the first `k` words of an edge.
    Inside(usize, usize),
}

/// Finds the best suffix for `prefix` and reports how it was matched.
pub fn graph_suffix_match(graph: &WordGraph, prefix: &Sentence) -> Result<SuffixMatch, SmtError> {
    if graph.finals().is_empty() {
        return Err(SmtError::NoFinalNode);
    }
    let completion = graph.completion_scores();
    if completion[graph.start()] == f64::NEG_INFINITY {
        return Err(SmtError::NoFinalNode);
    }
    let y = prefix.tokens();
    let p_len = y.len();
    let mut rows: Vec<Vec<Option<Cell>>> = vec![vec![None; p_len + 1]; graph.nodes().len()];
    for (p, cell) in rows[graph.start()].iter_mut().enumerate() {
        *cell = Some(Cell {
            ed: p,
            score: 0.0,
            len: 0,
        });
    }

    let mut best: Option<(Cell, Cut)> = None;
    let mut consider = |cell: Option<Cell>, compl: f64, cut: Cut| {
        let Some(c) = cell else { return };
        if compl == f64::NEG_INFINITY {
            return;
        }
        let total = Cell {
            score: c.score + compl,
            ..c
        };
        if best.as_ref().is_none_or(|(b, _)| better(&total, b)) {
            best = Some((total, cut));
        }
    };

    let mut cur: Vec<Option<Cell>> = vec![None; p_len + 1];
    for u in 0..graph.nodes().len() {
        let mut row = std::mem::take(&mut rows[u]);
        // The user typed words the path does not have.
        for p in 1..=p_len {
            let ins = row[p - 1].map(|c| c.step(1, 0.0, 0));
            keep_best(&mut row[p], ins);
        }
        if row.iter().all(Option::is_none) {
            continue;
        }
        consider(row[p_len], completion[u], Cut::Node(u));
        for &e in graph.out_edges(u) {
            let edge = &graph.edges()[e];
            let mut prev = row.clone();
            for (k, word) in edge.words.iter().enumerate() {
                let s = if k == 0 { edge.score } else { 0.0 };
                cur[0] = prev[0].map(|c| c.step(1, s, 1));
                for p in 1..=p_len {
                    let sub = usize::from(*word != y[p - 1]);
                    let mut slot = prev[p - 1].map(|c| c.step(sub, s, 1));
                    keep_best(&mut slot, prev[p].map(|c| c.step(1, s, 1)));
                    keep_best(&mut slot, cur[p - 1].map(|c| c.step(1, 0.0, 0)));
                    cur[p] = slot;
                }
                std::mem::swap(&mut prev, &mut cur);
                if k + 1 < edge.words.len() {
                    consider(prev[p_len], completion[edge.to], Cut::Inside(e, k + 1));
                }
            }
            for (slot, cand) in rows[edge.to].iter_mut().zip(prev) {
                keep_best(slot, cand);
            }
        }
        rows[u] = row;
    }

    let (cell, cut) = best.ok_or(SmtError::NoFinalNode)?;
    let mut words: Vec<String> = Vec::new();
    let from = match cut {
        Cut::Node(n) => n,
        Cut::Inside(e, k) => {
            let edge = &graph.edges()[e];
            words.extend(edge.words[k..].iter().cloned());
            edge.to
        }
    };
    let rest = graph
        .best_completion(from, &completion)
        .ok_or(SmtError::NoFinalNode)?;
    words.extend(graph.path_words(&rest).into_tokens());
    Ok(SuffixMatch {
        suffix: Sentence::from_tokens_unchecked(words),
        edit_distance: cell.ed,
        path_score: cell.score,
        cut_len: cell.len,
    })
}

/// Best suffix completing `prefix` within the graph.
pub fn graph_suffix(graph: &WordGraph, prefix: &Sentence) -> Result<Sentence, SmtError> {
    graph_suffix_match(graph, prefix).map(|m| m.suffix)
}
