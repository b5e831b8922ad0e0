//! Phrase extraction from word-aligned pairs and the phrase table.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::{Alignment, SmtError};
use crate::text::{ParallelCorpus, Sentence};

#[derive(Debug, Clone, PartialEq)]
pub struct PhraseOption {
    pub target: Vec<String>,
    /// `p(target phrase | source phrase)`.
    pub p_t_s: f64,
    /// `p(source phrase | target phrase)`.
    pub p_s_t: f64,
}

/// Source phrase -> translation options sorted by descending `p(t|s)`,
/// then by target text.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PhraseTable {
    entries: HashMap<Vec<String>, Vec<PhraseOption>>,
    max_phrase_len: usize,
}

fn sort_options(options: &mut [PhraseOption]) {
    options.sort_by(|a, b| b.p_t_s.total_cmp(&a.p_t_s).then_with(|| a.target.cmp(&b.target)));
}

impl PhraseTable {
    /// Builds a table from explicit entries, validating probabilities.
    pub fn from_entries(
        entries: impl IntoIterator<Item = (Vec<String>, PhraseOption)>,
    ) -> Result<Self, SmtError> {
        let mut table = PhraseTable::default();
        for (source, option) in entries {
            table.insert(source, option)?;
        }
        table.finish();
        Ok(table)
    }

    fn insert(&mut self, source: Vec<String>, option: PhraseOption) -> Result<(), SmtError> {
        let valid = |p: f64| p > 0.0 && p <= 1.0;
        if source.is_empty() || option.target.is_empty() {
            return Err(SmtError::InvalidPhrase("empty phrase side".into()));
        }
        if !valid(option.p_t_s) || !valid(option.p_s_t) {
            return Err(SmtError::InvalidPhrase(format!(
                "probabilities must lie in (0, 1]: {} {}",
                option.p_t_s, option.p_s_t
            )));
        }
        self.max_phrase_len = self.max_phrase_len.max(source.len()).max(option.target.len());
        self.entries.entry(source).or_default().push(option);
        Ok(())
    }

    fn finish(&mut self) {
        for options in self.entries.values_mut() {
            sort_options(options);
        }
    }

    pub fn get(&self, source: &[String]) -> Option<&[PhraseOption]> {
        self.entries.get(source).map(Vec::as_slice)
    }

    pub fn max_phrase_len(&self) -> usize {
        self.max_phrase_len
    }

    /// Number of distinct source phrases.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[String], &PhraseOption)> {
        self.entries
            .iter()
            .flat_map(|(s, opts)| opts.iter().map(move |o| (s.as_slice(), o)))
    }

    /// `src ||| tgt ||| p_t_s p_s_t` lines, sorted by source phrase.
    pub fn to_text(&self) -> String {
        let mut sources: Vec<&Vec<String>> = self.entries.keys().collect();
        sources.sort();
        let mut out = String::new();
        for s in sources {
            for o in &self.entries[s] {
                let _ = writeln!(out, "{} ||| {} ||| {} {}", s.join(" "), o.target.join(" "), o.p_t_s, o.p_s_t);
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, SmtError> {
        let mut table = PhraseTable::default();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |message: String| SmtError::Format {
                what: "phrase table",
                line: n + 1,
                message,
            };
            let fields: Vec<&str> = line.split("|||").map(str::trim).collect();
            let [src, tgt, probs] = fields[..] else {
                return Err(bad(format!("expected 3 fields, found {}", fields.len())));
            };
            let probs: Vec<f64> = probs
                .split_whitespace()
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|e| bad(format!("bad probability: {e}")))?;
            let [p_t_s, p_s_t] = probs[..] else {
                return Err(bad(format!("expected 2 probabilities, found {}", probs.len())));
            };
            let split = |s: &str| s.split_whitespace().map(str::to_string).collect::<Vec<_>>();
            table
                .insert(
                    split(src),
                    PhraseOption {
                        target: split(tgt),
                        p_t_s,
                        p_s_t,
                    },
                )
                .map_err(|e| bad(e.to_string()))?;
        }
        table.finish();
        Ok(table)
    }
}

/// All phrase pairs consistent with `links` whose sides have at most
/// `max_len` words. A pair is consistent when no link leaves its box and it
/// holds at least one link; unaligned target words at the box edges give
/// additional pairs. Returned as (source span, target span), end-exclusive.
pub fn consistent_spans(
    source_len: usize,
    target_len: usize,
    links: &Alignment,
    max_len: usize,
) -> Vec<((usize, usize), (usize, usize))> {
    let mut tgt_aligned = vec![false; target_len];
    for &(_, j) in links {
        tgt_aligned[j] = true;
    }
    let mut spans = Vec::new();
    for s_start in 0..source_len {
        for s_end in s_start + 1..=(s_start + max_len).min(source_len) {
            let mut t_min = usize::MAX;
            let mut t_max = 0;
            for &(i, j) in links {
                if (s_start..s_end).contains(&i) {
                    t_min = t_min.min(j);
                    t_max = t_max.max(j);
                }
            }
            if t_min == usize::MAX || t_max - t_min + 1 > max_len {
                continue;
            }
            let consistent = links
                .iter()
                .all(|&(i, j)| !(t_min..=t_max).contains(&j) || (s_start..s_end).contains(&i));
            if !consistent {
                continue;
            }
            let mut lo = t_min;
            loop {
                let mut hi = t_max;
                loop {
                    spans.push(((s_start, s_end), (lo, hi + 1)));
                    hi += 1;
                    if hi >= target_len || tgt_aligned[hi] || hi - lo + 1 > max_len {
                        break;
                    }
                }
                if lo == 0 || tgt_aligned[lo - 1] || t_max - (lo - 1) + 1 > max_len {
                    break;
                }
                lo -= 1;
            }
        }
    }
    spans
}

/// Extracts phrase pairs from every aligned sentence pair and estimates
/// both translation directions by relative frequency.
pub fn extract_phrases(
    corpus: &ParallelCorpus,
    alignments: &[Alignment],
    max_len: usize,
) -> Result<PhraseTable, SmtError> {
    if max_len == 0 {
        return Err(SmtError::InvalidConfig("max phrase length must be at least 1".into()));
    }
    if alignments.len() != corpus.len() {
        return Err(SmtError::InvalidConfig(format!(
            "{} alignments for {} sentence pairs",
            alignments.len(),
            corpus.len()
        )));
    }
    let mut joint: HashMap<(Vec<String>, Vec<String>), u64> = HashMap::new();
    for (pair, links) in corpus.pairs().iter().zip(alignments) {
        let (s, t) = (pair.source.tokens(), pair.target.tokens());
        if let Some(&(i, j)) = links.iter().find(|&&(i, j)| i >= s.len() || j >= t.len()) {
            return Err(SmtError::InvalidConfig(format!("link ({i}, {j}) outside the sentence pair")));
        }
        for ((a, b), (c, d)) in consistent_spans(s.len(), t.len(), links, max_len) {
            *joint.entry((s[a..b].to_vec(), t[c..d].to_vec())).or_insert(0) += 1;
        }
    }
    let mut src_totals: HashMap<&[String], u64> = HashMap::new();
    let mut tgt_totals: HashMap<&[String], u64> = HashMap::new();
    for ((s, t), &c) in &joint {
        *src_totals.entry(s).or_insert(0) += c;
        *tgt_totals.entry(t).or_insert(0) += c;
    }
    let mut table = PhraseTable::default();
    for ((s, t), &c) in &joint {
        let option = PhraseOption {
            target: t.clone(),
            p_t_s: c as f64 / src_totals[s.as_slice()] as f64,
            p_s_t: c as f64 / tgt_totals[t.as_slice()] as f64,
        };
        table.insert(s.clone(), option)?;
    }
    table.finish();
    Ok(table)
}

/// Convenience for tests and callers that build phrases from words.
pub fn phrase(words: &str) -> Vec<String> {
    Sentence::from_words(words).into_tokens()
}
