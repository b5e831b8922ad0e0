//! Directional Viterbi alignments and grow-diag symmetrization.
//!
//! Links are `(source index, target index)`, 0-based.

use std::collections::BTreeSet;

use super::LexicalTable;
use crate::text::Sentence;

pub type Alignment = BTreeSet<(usize, usize)>;

/// Probability used for pairs the table has never seen.
const FLOOR: f64 = 1e-12;

/// Picks, for each `to` position, the `from` position with the highest
/// probability; ties go to the position closest to the diagonal, then to
/// the lower index.
fn viterbi(from: &Sentence, to: &Sentence, table: &LexicalTable) -> Vec<usize> {
    let (nf, nt) = (from.len() as f64, to.len() as f64);
    to.iter()
        .enumerate()
        .map(|(j, tw)| {
            let diag = |i: usize| ((i as f64 + 0.5) / nf - (j as f64 + 0.5) / nt).abs();
            let mut best = 0;
            let mut best_p = f64::NEG_INFINITY;
            for (i, fw) in from.iter().enumerate() {
                let p = table.prob(fw, tw).max(FLOOR);
                if p > best_p || (p == best_p && diag(i) < diag(best)) {
                    best = i;
                    best_p = p;
                }
            }
            best
        })
        .collect()
}

/// Symmetrizes two directional alignments: start from their intersection
/// and repeatedly add union links that neighbour (including diagonally) an
/// existing link and cover a still unaligned source or target word.
pub fn grow_diag(source_to_target: &Alignment, target_to_source: &Alignment, source_len: usize, target_len: usize) -> Alignment {
    const NEIGHBOURS: [(isize, isize); 8] = [
        (-1, 0),
        (0, -1),
        (1, 0),
        (0, 1),
        (-1, -1),
        (-1, 1),
        (1, -1),
        (1, 1),
    ];
    let union: Alignment = source_to_target.union(target_to_source).copied().collect();
    let mut links: Alignment = source_to_target.intersection(target_to_source).copied().collect();
    let mut src_aligned = vec![false; source_len];
    let mut tgt_aligned = vec![false; target_len];
    for &(i, j) in &links {
        src_aligned[i] = true;
        tgt_aligned[j] = true;
    }
    loop {
        let mut added = false;
        for i in 0..source_len {
            for j in 0..target_len {
                if !links.contains(&(i, j)) {
                    continue;
                }
                for (di, dj) in NEIGHBOURS {
                    let (Some(ni), Some(nj)) = (i.checked_add_signed(di), j.checked_add_signed(dj)) else {
                        continue;
                    };
                    if ni >= source_len || nj >= target_len {
                        continue;
                    }
                    if (!src_aligned[ni] || !tgt_aligned[nj])
                        && union.contains(&(ni, nj))
                        && links.insert((ni, nj))
                    {
                        src_aligned[ni] = true;
                        tgt_aligned[nj] = true;
                        added = true;
                    }
                }
            }
        }
        if !added {
            return links;
        }
    }
}

/// Word-aligns one sentence pair from `p(t|s)` and `p(s|t)` tables.
pub fn align_pair(
    lex_st: &LexicalTable,
    lex_ts: &LexicalTable,
    source: &Sentence,
    target: &Sentence,
) -> Alignment {
    if source.is_empty() || target.is_empty() {
        return Alignment::new();
    }
    let st: Alignment = viterbi(source, target, lex_st)
        .into_iter()
        .enumerate()
        .map(|(j, i)| (i, j))
        .collect();
    let ts: Alignment = viterbi(target, source, lex_ts)
        .into_iter()
        .enumerate()
        .collect();
    grow_diag(&st, &ts, source.len(), target.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smt::train_ibm1;
    use crate::text::ParallelCorpus;

    fn set(links: &[(usize, usize)]) -> Alignment {
        links.iter().copied().collect()
    }

    #[test]
    fn one_word_pair() {
        let c = ParallelCorpus::from_pairs("t", [(Sentence::from_words("a"), Sentence::from_words("x"))]).0;
        let st = train_ibm1(&c, 1).unwrap();
        let ts = train_ibm1(&c.reversed(), 1).unwrap();
        let a = align_pair(&st, &ts, &Sentence::from_words("a"), &Sentence::from_words("x"));
        assert_eq!(a, set(&[(0, 0)]));
    }

    #[test]
    fn agreeing_directions_are_kept_verbatim() {
        let a = set(&[(0, 1), (1, 0), (2, 2)]);
        assert_eq!(grow_diag(&a, &a, 3, 3), a);
    }

    #[test]
    fn three_by_three_grow_diag() {
        // Intersection {(0,0),(1,1)}; (1,2) joins because target 2 is
        // unaligned, then (2,2) joins because source 2 is unaligned.
        let st = set(&[(0, 0), (1, 1), (1, 2)]);
        let ts = set(&[(0, 0), (1, 1), (2, 2)]);
        assert_eq!(grow_diag(&st, &ts, 3, 3), set(&[(0, 0), (1, 1), (1, 2), (2, 2)]));
        // Growth chains through newly added links.
        let st = set(&[(0, 0), (2, 2)]);
        let ts = set(&[(0, 0), (1, 1)]);
        assert_eq!(grow_diag(&st, &ts, 3, 3), set(&[(0, 0), (1, 1), (2, 2)]));
        // A union link not adjacent to any link is never added.
        let st = set(&[(0, 0), (0, 2)]);
        let ts = set(&[(0, 0)]);
        assert_eq!(grow_diag(&st, &ts, 3, 3), set(&[(0, 0)]));
    }

    #[test]
    fn unknown_words_align_along_the_diagonal() {
        let empty = LexicalTable::default();
        let a = align_pair(&empty, &empty, &Sentence::from_words("p q r"), &Sentence::from_words("u v w"));
        assert_eq!(a, set(&[(0, 0), (1, 1), (2, 2)]));
    }
}
