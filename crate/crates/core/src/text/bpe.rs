//! Byte pair encoding over characters of whitespace-separated words.
//!
//! Merges are learned per word and never cross word boundaries. In encoded
//! sentences every subword after the first one of a word carries the
//! [`CONTINUATION_MARKER`] prefix, so word boundaries are recoverable by
//! [`BpeModel::decode`]. A word-initial subword never starts with the marker.

use std::collections::HashMap;

use super::{ParallelCorpus, Sentence, TextError};

pub const CONTINUATION_MARKER: &str = "@@";

/// Merge count used for the full-scale configuration.
pub const REFERENCE_MERGES: usize = 32_000;

/// Merge count for desk-scale corpora.
pub const DEFAULT_MERGES: usize = 1_000;

/// Which corpus sides feed the pair statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BpeSides {
    #[default]
    Joint,
    Source,
    Target,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BpeModel {
    merges: Vec<(String, String)>,
    // "left right" -> rank; symbols never contain whitespace.
    ranks: HashMap<String, usize>,
}

fn pair_key(buf: &mut String, left: &str, right: &str) {
    buf.clear();
    buf.push_str(left);
    buf.push(' ');
    buf.push_str(right);
}

impl BpeModel {
    pub fn from_merges(merges: Vec<(String, String)>) -> Self {
        let mut ranks = HashMap::with_capacity(merges.len());
        let mut key = String::new();
        for (i, (l, r)) in merges.iter().enumerate() {
            pair_key(&mut key, l, r);
            ranks.entry(key.clone()).or_insert(i);
        }
        BpeModel { merges, ranks }
    }

    /// Greedy most-frequent-pair merging. Ties go to the lexicographically
    /// smallest `(left, right)`; training stops early once no pair occurs
    /// at least twice.
    pub fn train(corpus: &ParallelCorpus, num_merges: usize, sides: BpeSides) -> Self {
        let mut word_freq: HashMap<&str, u64> = HashMap::new();
        for pair in corpus.pairs() {
            let sentences: &[&Sentence] = match sides {
                BpeSides::Joint => &[&pair.source, &pair.target],
                BpeSides::Source => &[&pair.source],
                BpeSides::Target => &[&pair.target],
            };
            for s in sentences {
                for w in s.iter() {
                    *word_freq.entry(w.as_str()).or_default() += 1;
                }
            }
        }
        Self::train_on_words(word_freq, num_merges)
    }

    pub fn train_on_words<'a>(
        word_freq: impl IntoIterator<Item = (&'a str, u64)>,
        num_merges: usize,
    ) -> Self {
        let mut symbols: Vec<String> = Vec::new();
        let mut symbol_id: HashMap<String, u32> = HashMap::new();
        let mut intern = |s: String, symbols: &mut Vec<String>| -> u32 {
            *symbol_id.entry(s).or_insert_with_key(|k| {
                symbols.push(k.clone());
                (symbols.len() - 1) as u32
            })
        };

        let mut entries: Vec<(&str, u64)> = word_freq.into_iter().collect();
        entries.sort();
        let mut words: Vec<(Vec<u32>, u64)> = entries
            .into_iter()
            .map(|(w, f)| {
                let syms = w
                    .chars()
                    .map(|c| intern(c.to_string(), &mut symbols))
                    .collect();
                (syms, f)
            })
            .collect();

        let mut merges = Vec::new();
        while merges.len() < num_merges {
            let mut counts: HashMap<(u32, u32), u64> = HashMap::new();
            for (syms, f) in &words {
                for w in syms.windows(2) {
                    *counts.entry((w[0], w[1])).or_default() += f;
                }
            }
            let best = counts.into_iter().max_by(|(pa, ca), (pb, cb)| {
                ca.cmp(cb).then_with(|| {
                    let ka = (&symbols[pa.0 as usize], &symbols[pa.1 as usize]);
                    let kb = (&symbols[pb.0 as usize], &symbols[pb.1 as usize]);
                    kb.cmp(&ka)
                })
            });
            let Some(((l, r), count)) = best else { break };
            if count < 2 {
                break;
            }
            let merged = format!("{}{}", symbols[l as usize], symbols[r as usize]);
            let m = intern(merged, &mut symbols);
            for (syms, _) in &mut words {
                merge_in_place(syms, l, r, m);
            }
            merges.push((symbols[l as usize].clone(), symbols[r as usize].clone()));
        }
        BpeModel::from_merges(merges)
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn num_merges(&self) -> usize {
        self.merges.len()
    }

    /// Splits one word into subword symbols (without markers).
    pub fn segment_word(&self, word: &str) -> Vec<String> {
        let mut syms: Vec<String> = word.chars().map(|c| c.to_string()).collect();
        let mut key = String::new();
        loop {
            let mut best: Option<(usize, usize)> = None;
            for i in 0..syms.len().saturating_sub(1) {
                pair_key(&mut key, &syms[i], &syms[i + 1]);
                if let Some(&rank) = self.ranks.get(&key) {
                    if best.is_none_or(|(r, _)| rank < r) {
                        best = Some((rank, i));
                    }
                }
            }
            let Some((rank, _)) = best else { break };
            let (left, right) = &self.merges[rank];
            let mut out = Vec::with_capacity(syms.len());
            let mut i = 0;
            while i < syms.len() {
                if i + 1 < syms.len() && &syms[i] == left && &syms[i + 1] == right {
                    out.push(format!("{left}{right}"));
                    i += 2;
                } else {
                    out.push(std::mem::take(&mut syms[i]));
                    i += 1;
                }
            }
            syms = out;
        }
        if syms.first().is_some_and(|s| s.starts_with(CONTINUATION_MARKER)) {
            let first = syms.remove(0);
            let mut chars = first.chars();
            let head = chars.next().map(String::from).unwrap_or_default();
            syms.insert(0, chars.as_str().to_string());
            syms.insert(0, head);
        }
        syms
    }

    /// Encodes a word-level sentence into marked subword tokens.
    pub fn encode(&self, sentence: &Sentence) -> Sentence {
        let mut out = Vec::new();
        for word in sentence {
            for (i, sym) in self.segment_word(word).into_iter().enumerate() {
                if i == 0 {
                    out.push(sym);
                } else {
                    out.push(format!("{CONTINUATION_MARKER}{sym}"));
                }
            }
        }
        Sentence::from_tokens_unchecked(out)
    }

    /// Glues marked continuations onto the preceding word. A continuation
    /// with no preceding word starts a word of its own.
    pub fn decode(subwords: &Sentence) -> Sentence {
        let mut words: Vec<String> = Vec::new();
        for tok in subwords {
            match tok.strip_prefix(CONTINUATION_MARKER) {
                Some(body) if !words.is_empty() => words.last_mut().unwrap().push_str(body),
                Some(body) if !body.is_empty() => words.push(body.to_string()),
                _ => words.push(tok.clone()),
            }
        }
        Sentence::from_tokens_unchecked(words)
    }

    pub fn is_continuation(token: &str) -> bool {
        token.len() > CONTINUATION_MARKER.len() && token.starts_with(CONTINUATION_MARKER)
    }

    /// `bpe v1 <n>` header, then one `left right` merge per line.
    pub fn to_text(&self) -> String {
        let mut out = format!("bpe v1 {}\n", self.merges.len());
        for (l, r) in &self.merges {
            out.push_str(l);
            out.push(' ');
            out.push_str(r);
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, TextError> {
        let err = |line: usize, message: String| TextError::Format {
            what: "bpe model",
            line,
            message,
        };
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| err(1, "missing header".into()))?;
        let n: usize = header
            .strip_prefix("bpe v1 ")
            .and_then(|n| n.trim().parse().ok())
            .ok_or_else(|| err(1, format!("bad header {header:?}")))?;
        let mut merges = Vec::with_capacity(n);
        for (i, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split(' ');
            match (parts.next(), parts.next(), parts.next()) {
                (Some(l), Some(r), None) if !l.is_empty() && !r.is_empty() => {
                    merges.push((l.to_string(), r.to_string()))
                }
                _ => return Err(err(i + 2, format!("expected `left right`, got {line:?}"))),
            }
        }
        if merges.len() != n {
            return Err(err(1, format!("header says {n} merges, found {}", merges.len())));
        }
        Ok(BpeModel::from_merges(merges))
    }
}

fn merge_in_place(syms: &mut Vec<u32>, l: u32, r: u32, merged: u32) {
    if syms.len() < 2 {
        return;
    }
    let mut w = 0;
    let mut i = 0;
    while i < syms.len() {
        if i + 1 < syms.len() && syms[i] == l && syms[i + 1] == r {
            syms[w] = merged;
            i += 2;
        } else {
            syms[w] = syms[i];
            i += 1;
        }
        w += 1;
    }
    syms.truncate(w);
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mono(text: &str) -> ParallelCorpus {
        let s = Sentence::from_words(text);
        ParallelCorpus::from_pairs("t", [(s.clone(), s)]).0
    }

    /// Brute-force adjacent pair counting over whitespace words.
    fn pair_counts(text: &str) -> Vec<((String, String), usize)> {
        let mut counts: Vec<((String, String), usize)> = Vec::new();
        for w in text.split_whitespace() {
            let cs: Vec<char> = w.chars().collect();
            for p in cs.windows(2) {
                let key = (p[0].to_string(), p[1].to_string());
                match counts.iter_mut().find(|(k, _)| *k == key) {
                    Some((_, c)) => *c += 1,
                    None => counts.push((key, 1)),
                }
            }
        }
        counts
    }

    #[test]
    fn first_merge_low_lower() {
        let counts = pair_counts("low low lower");
        let max = counts.iter().map(|(_, c)| *c).max().unwrap();
        let mut tied: Vec<_> = counts.iter().filter(|(_, c)| *c == max).map(|(k, _)| k.clone()).collect();
        tied.sort();
        assert_eq!(max, 3);
        assert_eq!(tied, [("l".to_string(), "o".to_string()), ("o".into(), "w".into())]);

        let m = BpeModel::train_on_words([("low", 2), ("lower", 1)], 1);
        assert_eq!(m.merges(), &[("l".to_string(), "o".to_string())]);
        // Joint training over a mirrored corpus doubles every count but keeps the order.
        let joint = BpeModel::train(&mono("low low lower"), 1, BpeSides::Joint);
        assert_eq!(joint.merges(), m.merges());
    }

    #[test]
    fn zero_merges_is_character_level() {
        let m = BpeModel::train(&mono("hello world"), 0, BpeSides::Joint);
        assert_eq!(m.num_merges(), 0);
        let enc = m.encode(&Sentence::from_words("hey"));
        assert_eq!(enc.tokens(), ["h", "@@e", "@@y"]);
    }

    #[test]
    fn covered_word_is_single_token() {
        let m = BpeModel::train(&mono("abc abc abc"), 10, BpeSides::Joint);
        assert_eq!(m.encode(&Sentence::from_words("abc")).tokens(), ["abc"]);
    }

    #[test]
    fn stops_when_no_pair_repeats() {
        let m = BpeModel::train(&mono("ab cd"), 10, BpeSides::Joint);
        // Each pair occurs twice (source + target sides).
        assert_eq!(m.num_merges(), 2);
        let m = BpeModel::train_on_words([("ab", 1), ("cd", 1)], 10);
        assert_eq!(m.num_merges(), 0);
    }

    #[test]
    fn unseen_characters_pass_through() {
        let m = BpeModel::train(&mono("aaa aaa"), 5, BpeSides::Joint);
        let enc = m.encode(&Sentence::from_words("aaxé"));
        assert_eq!(enc.tokens(), ["aa", "@@x", "@@é"]);
    }

    #[test]
    fn decode_edge_cases() {
        assert!(BpeModel::decode(&Sentence::default()).is_empty());
        let s = Sentence::from_words("@@er a @@b");
        assert_eq!(BpeModel::decode(&s).tokens(), ["er", "ab"]);
    }

    #[test]
    fn marker_like_words_survive() {
        let m = BpeModel::train_on_words([("@@x", 5), ("a@@", 5)], 10);
        for w in ["@@x", "a@@", "@@", "@", "@@@"] {
            let s = Sentence::from_words(w);
            let enc = m.encode(&s);
            assert!(!enc.tokens()[0].starts_with(CONTINUATION_MARKER), "{enc:?}");
            assert_eq!(BpeModel::decode(&enc), s);
        }
    }

    #[test]
    fn text_round_trip() {
        let m = BpeModel::train(&mono("lower lowest newer newest"), 20, BpeSides::Joint);
        let back = BpeModel::from_text(&m.to_text()).unwrap();
        assert_eq!(m, back);
        assert!(m.to_text().starts_with(&format!("bpe v1 {}\n", m.num_merges())));
        assert!(BpeModel::from_text("bpe v1 2\na b\n").is_err());
    }

    #[test]
    fn training_is_deterministic() {
        let c = mono("the quick brown fox jumps over the lazy dog the end");
        let a = BpeModel::train(&c, 30, BpeSides::Joint);
        let b = BpeModel::train(&c, 30, BpeSides::Joint);
        assert_eq!(a.to_text(), b.to_text());
    }

    fn word() -> impl Strategy<Value = String> {
        proptest::string::string_regex("[a-e@#.éñ]{1,8}").unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn encode_decode_identity(words in proptest::collection::vec(word(), 0..8)) {
            let m = BpeModel::train_on_words(
                [("abba", 4), ("abc", 3), ("@@a", 3), ("ée", 2), ("#@", 2)], 12);
            let s = Sentence::new(words).unwrap();
            prop_assert_eq!(BpeModel::decode(&m.encode(&s)), s);
        }
    }
}
