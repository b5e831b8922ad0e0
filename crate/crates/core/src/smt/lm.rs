//! Interpolated modified Kneser-Ney n-gram language model.
//!
//! Training produces the interpolated distribution and stores it in backoff
//! form (ARPA): every observed n-gram keeps its full interpolated log10
//! probability and every observed context keeps its interpolation weight as
//! the backoff weight, so backoff scoring reproduces the interpolated model
//! exactly.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::SmtError;
use crate::text::Sentence;

pub const LM_BOS: &str = "<s>";
pub const LM_EOS: &str = "</s>";
pub const LM_UNK: &str = "<unk>";

const BOS_ID: u32 = 0;
const EOS_ID: u32 = 1;
const UNK_ID: u32 = 2;

/// log10 probability written for `<s>`, which is never predicted.
const BOS_LOGPROB: f64 = -99.0;

pub const DEFAULT_ORDER: usize = 5;

/// Discounts used when the count-of-counts of an order do not yield valid
/// modified Kneser-Ney estimates (tiny corpora).
pub const FALLBACK_DISCOUNTS: [f64; 3] = [0.5, 1.0, 1.5];

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    logprob: f64,
    backoff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NGramLanguageModel {
    order: usize,
    words: Vec<String>,
    ids: HashMap<String, u32>,
    /// `tables[k]` holds the n-grams of order `k + 1`.
    tables: Vec<HashMap<Vec<u32>, Entry>>,
    /// `discounts[k]` = (D1, D2, D3+) for order `k + 1`; empty when loaded
    /// from ARPA.
    discounts: Vec<[f64; 3]>,
}

fn modified_discounts(count_of_counts: [u64; 4]) -> [f64; 3] {
    let [n1, n2, n3, n4] = count_of_counts.map(|n| n as f64);
    if n1 == 0.0 || n2 == 0.0 || n3 == 0.0 || n4 == 0.0 {
        return FALLBACK_DISCOUNTS;
    }
    let y = n1 / (n1 + 2.0 * n2);
    let d = [1.0 - 2.0 * y * n2 / n1, 2.0 - 3.0 * y * n3 / n2, 3.0 - 4.0 * y * n4 / n3];
    let valid = d.iter().enumerate().all(|(k, &dk)| dk > 0.0 && dk < (k + 1) as f64);
    if valid {
        d
    } else {
        FALLBACK_DISCOUNTS
    }
}

fn discount(d: &[f64; 3], count: u64) -> f64 {
    match count {
        0 => 0.0,
        1 => d[0],
        2 => d[1],
        _ => d[2],
    }
}

impl NGramLanguageModel {
    pub fn order(&self) -> usize {
        self.order
    }

    /// Predictable vocabulary: every word plus `</s>` and `<unk>`.
    pub fn vocab_size(&self) -> usize {
        self.words.len() - 1
    }

    /// Predictable tokens (everything except `<s>`).
    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.words.iter().skip(1).map(String::as_str)
    }

    pub fn discounts(&self) -> &[[f64; 3]] {
        &self.discounts
    }

    /// Token for an id.
    pub fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    /// Id for a token, mapping unknown words to `<unk>`.
    pub fn id(&self, token: &str) -> u32 {
        self.ids.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn bos(&self) -> u32 {
        BOS_ID
    }

    pub fn eos(&self) -> u32 {
        EOS_ID
    }

    pub fn is_known(&self, token: &str) -> bool {
        self.ids.contains_key(token)
    }

    /// Number of stored n-grams per order.
    pub fn ngram_counts(&self) -> Vec<usize> {
        self.tables.iter().map(HashMap::len).collect()
    }

    /// Observed contexts (n-grams with a backoff weight), as token strings.
    pub fn contexts(&self) -> Vec<Vec<&str>> {
        let mut out: Vec<Vec<&str>> = self
            .tables
            .iter()
            .flat_map(|t| t.iter().filter(|(_, e)| e.backoff.is_some()).map(|(k, _)| k))
            .map(|k| k.iter().map(|&i| self.words[i as usize].as_str()).collect())
            .collect();
        out.sort();
        out
    }

    /// `log10 P(word | context)` with ids. Only the last `order - 1` ids of
    /// the context are used.
    pub fn logprob_ids(&self, context: &[u32], word: u32) -> f64 {
        let keep = context.len().min(self.order - 1);
        let mut ctx = &context[context.len() - keep..];
        let mut backoff = 0.0;
        let mut key: Vec<u32> = Vec::with_capacity(keep + 1);
        loop {
            key.clear();
            key.extend_from_slice(ctx);
            key.push(word);
            if let Some(e) = self.tables[ctx.len()].get(key.as_slice()) {
                return backoff + e.logprob;
            }
            if ctx.is_empty() {
                // Only reachable for ids outside the model; treat as <unk>.
                return backoff + self.tables[0][&vec![UNK_ID]].logprob;
            }
            if let Some(e) = self.tables[ctx.len() - 1].get(ctx) {
                backoff += e.backoff.unwrap_or(0.0);
            }
            ctx = &ctx[1..];
        }
    }

    /// `log10 P(word | context)` with tokens; the context should start with
    /// `<s>` at sentence starts.
    pub fn logprob(&self, context: &[&str], word: &str) -> f64 {
        let ctx: Vec<u32> = context.iter().map(|w| self.id(w)).collect();
        self.logprob_ids(&ctx, self.id(word))
    }

    /// Keeps the last `order - 1` ids as the state after `word`.
    pub fn advance(&self, state: &[u32], word: u32) -> Vec<u32> {
        let keep = self.order - 1;
        let mut next: Vec<u32> = state.iter().copied().chain(std::iter::once(word)).collect();
        if next.len() > keep {
            next.drain(..next.len() - keep);
        }
        next
    }

    /// State at sentence start.
    pub fn start_state(&self) -> Vec<u32> {
        self.advance(&[], BOS_ID)
    }

    /// Serializes to ARPA text.
    pub fn to_arpa(&self) -> String {
        let mut out = String::from("\\data\\\n");
        for (k, t) in self.tables.iter().enumerate() {
            let _ = writeln!(out, "ngram {}={}", k + 1, t.len());
        }
        for (k, t) in self.tables.iter().enumerate() {
            let _ = write!(out, "\n\\{}-grams:\n", k + 1);
            let mut rows: Vec<(Vec<&str>, &Entry)> = t
                .iter()
                .map(|(key, e)| (key.iter().map(|&i| self.words[i as usize].as_str()).collect(), e))
                .collect();
            rows.sort_by(|a, b| a.0.cmp(&b.0));
            for (words, e) in rows {
                let _ = write!(out, "{}\t{}", e.logprob, words.join(" "));
                if let Some(b) = e.backoff {
                    let _ = write!(out, "\t{b}");
                }
                out.push('\n');
            }
        }
        out.push_str("\n\\end\\\n");
        out
    }

    pub fn from_arpa(text: &str) -> Result<Self, SmtError> {
        let bad = |line: usize, message: String| SmtError::Format {
            what: "ARPA file",
            line,
            message,
        };
        let mut lines = text.lines().enumerate().peekable();
        while let Some((_, l)) = lines.peek() {
            if l.trim() == "\\data\\" {
                break;
            }
            lines.next();
        }
        if lines.next().is_none() {
            return Err(bad(1, "missing \\data\\ header".into()));
        }
        let mut declared: Vec<usize> = Vec::new();
        for (n, l) in lines.by_ref() {
            let l = l.trim();
            if l.is_empty() {
                if declared.is_empty() {
                    continue;
                }
                break;
            }
            let rest = l
                .strip_prefix("ngram ")
                .ok_or_else(|| bad(n + 1, format!("expected ngram count, got {l:?}")))?;
            let (k, c) = rest
                .split_once('=')
                .ok_or_else(|| bad(n + 1, "expected ngram k=count".into()))?;
            let k: usize = k.trim().parse().map_err(|e| bad(n + 1, format!("{e}")))?;
            let c: usize = c.trim().parse().map_err(|e| bad(n + 1, format!("{e}")))?;
            if k != declared.len() + 1 {
                return Err(bad(n + 1, format!("ngram order {k} out of sequence")));
            }
            declared.push(c);
        }
        if declared.is_empty() {
            return Err(bad(1, "no ngram counts".into()));
        }
        let order = declared.len();
        let mut raw: Vec<Vec<(Vec<String>, f64, Option<f64>)>> = vec![Vec::new(); order];
        let mut current: Option<usize> = None;
        let mut ended = false;
        for (n, l) in lines {
            let l = l.trim();
            if l.is_empty() {
                continue;
            }
            if l == "\\end\\" {
                ended = true;
                break;
            }
            if let Some(k) = l.strip_prefix('\\').and_then(|r| r.strip_suffix("-grams:")) {
                let k: usize = k.parse().map_err(|e| bad(n + 1, format!("{e}")))?;
                if k == 0 || k > order {
                    return Err(bad(n + 1, format!("unexpected {k}-grams section")));
                }
                current = Some(k);
                continue;
            }
            let k = current.ok_or_else(|| bad(n + 1, "n-gram outside a section".into()))?;
            let fields: Vec<&str> = l.split_whitespace().collect();
            if fields.len() != k + 1 && fields.len() != k + 2 {
                return Err(bad(n + 1, format!("expected {} or {} fields", k + 1, k + 2)));
            }
            let p: f64 = fields[0].parse().map_err(|e| bad(n + 1, format!("{e}")))?;
            let b = match fields.get(k + 1) {
                Some(s) => Some(s.parse::<f64>().map_err(|e| bad(n + 1, format!("{e}")))?),
                None => None,
            };
            if !p.is_finite() || b.is_some_and(|b| !b.is_finite()) {
                return Err(bad(n + 1, "non-finite value".into()));
            }
            raw[k - 1].push((fields[1..=k].iter().map(|s| s.to_string()).collect(), p, b));
        }
        if !ended {
            return Err(bad(text.lines().count(), "missing \\end\\".into()));
        }
        for (k, r) in raw.iter().enumerate() {
            if r.len() != declared[k] {
                return Err(bad(1, format!("{}-grams: declared {}, found {}", k + 1, declared[k], r.len())));
            }
        }
        let mut words = vec![LM_BOS.to_string(), LM_EOS.to_string(), LM_UNK.to_string()];
        let mut ids: HashMap<String, u32> = words.iter().enumerate().map(|(i, w)| (w.clone(), i as u32)).collect();
        for (gram, _, _) in &raw[0] {
            if !ids.contains_key(&gram[0]) {
                ids.insert(gram[0].clone(), words.len() as u32);
                words.push(gram[0].clone());
            }
        }
        let mut tables: Vec<HashMap<Vec<u32>, Entry>> = vec![HashMap::new(); order];
        for (k, r) in raw.into_iter().enumerate() {
            for (gram, logprob, backoff) in r {
                let key = gram
                    .iter()
                    .map(|w| {
                        ids.get(w)
                            .copied()
                            .ok_or_else(|| bad(1, format!("{}-gram word {w:?} missing from unigrams", k + 1)))
                    })
                    .collect::<Result<Vec<u32>, _>>()?;
                tables[k].insert(key, Entry { logprob, backoff });
            }
        }
        if !tables[0].contains_key(&vec![UNK_ID]) {
            return Err(bad(1, "unigrams must include <unk>".into()));
        }
        Ok(NGramLanguageModel {
            order,
            words,
            ids,
            tables,
            discounts: Vec::new(),
        })
    }
}

/// Trains an interpolated modified Kneser-Ney model of the given order.
///
/// Each sentence is padded with one `<s>` and one `</s>`. The highest order
/// and n-grams starting with `<s>` use raw counts; other lower orders use
/// continuation counts. Discounts come from each order's count-of-counts.
pub fn train_kn_lm<'a>(
    sentences: impl IntoIterator<Item = &'a Sentence>,
    order: usize,
) -> Result<NGramLanguageModel, SmtError> {
    if order == 0 {
        return Err(SmtError::InvalidConfig("LM order must be at least 1".into()));
    }
    let mut words = vec![LM_BOS.to_string(), LM_EOS.to_string(), LM_UNK.to_string()];
    let mut ids: HashMap<String, u32> = words.iter().enumerate().map(|(i, w)| (w.clone(), i as u32)).collect();
    let mut raw: Vec<HashMap<Vec<u32>, u64>> = vec![HashMap::new(); order];
    for s in sentences {
        let mut seq = vec![BOS_ID];
        for w in s {
            let id = *ids.entry(w.clone()).or_insert_with(|| {
                words.push(w.clone());
                (words.len() - 1) as u32
            });
            seq.push(id);
        }
        seq.push(EOS_ID);
        for end in 1..seq.len() {
            for k in 1..=order.min(end + 1) {
                *raw[k - 1].entry(seq[end + 1 - k..=end].to_vec()).or_insert(0) += 1;
            }
        }
    }

    // Adjusted counts.
    let mut adjusted: Vec<HashMap<Vec<u32>, u64>> = vec![HashMap::new(); order];
    adjusted[order - 1] = raw[order - 1].clone();
    for k in (0..order - 1).rev() {
        let mut cont: HashMap<Vec<u32>, u64> = HashMap::new();
        for gram in raw[k + 1].keys() {
            *cont.entry(gram[1..].to_vec()).or_insert(0) += 1;
        }
        for (gram, &c) in &raw[k] {
            let a = if gram[0] == BOS_ID { c } else { cont.get(gram).copied().unwrap_or(c) };
            adjusted[k].insert(gram.clone(), a);
        }
    }

    let discounts: Vec<[f64; 3]> = adjusted
        .iter()
        .map(|t| {
            let mut coc = [0u64; 4];
            for &c in t.values() {
                if (1..=4).contains(&c) {
                    coc[c as usize - 1] += 1;
                }
            }
            modified_discounts(coc)
        })
        .collect();

    let ctx_stats: Vec<HashMap<Vec<u32>, ContextStats>> = adjusted
        .iter()
        .map(|t| {
            let mut m: HashMap<Vec<u32>, ContextStats> = HashMap::new();
            for (gram, &c) in t {
                let s = m.entry(gram[..gram.len() - 1].to_vec()).or_default();
                s.total += c;
                s.by_count[(c.min(3) - 1) as usize] += 1;
            }
            m
        })
        .collect();

    let vocab = (words.len() - 1) as f64;
    // Interpolated probabilities, bottom-up. Every lower-order n-gram needed
    // here is a sub-window of an observed one, hence itself observed.
    let mut probs: Vec<HashMap<Vec<u32>, f64>> = vec![HashMap::new(); order];
    let (unigram_total, unigram_gamma) = match ctx_stats[0].get(&Vec::new()) {
        Some(s) => (s.total as f64, s.gamma(&discounts[0])),
        None => (1.0, 1.0),
    };
    for id in 1..words.len() as u32 {
        let a = adjusted[0].get(&vec![id]).copied().unwrap_or(0);
        let direct = (a as f64 - discount(&discounts[0], a)) / unigram_total;
        probs[0].insert(vec![id], direct + unigram_gamma / vocab);
    }
    for k in 1..order {
        let mut level = HashMap::with_capacity(adjusted[k].len());
        for (gram, &a) in &adjusted[k] {
            let s = &ctx_stats[k][&gram[..k]];
            let lower = probs[k - 1][&gram[1..]];
            let p = (a as f64 - discount(&discounts[k], a)) / s.total as f64 + s.gamma(&discounts[k]) * lower;
            level.insert(gram.clone(), p);
        }
        probs[k] = level;
    }

    let mut tables: Vec<HashMap<Vec<u32>, Entry>> = probs
        .into_iter()
        .map(|t| {
            t.into_iter()
                .map(|(g, p)| {
                    let e = Entry {
                        logprob: p.log10(),
                        backoff: None,
                    };
                    (g, e)
                })
                .collect()
        })
        .collect();
    tables[0].insert(
        vec![BOS_ID],
        Entry {
            logprob: BOS_LOGPROB,
            backoff: None,
        },
    );
    for k in 1..order {
        for (ctx, s) in &ctx_stats[k] {
            if let Some(e) = tables[k - 1].get_mut(ctx) {
                e.backoff = Some(s.gamma(&discounts[k]).log10());
            }
        }
    }
    Ok(NGramLanguageModel {
        order,
        words,
        ids,
        tables,
        discounts,
    })
}

#[derive(Default)]
struct ContextStats {
    total: u64,
    /// Number of continuations seen once, twice, and three or more times.
    by_count: [u64; 3],
}

impl ContextStats {
    fn gamma(&self, d: &[f64; 3]) -> f64 {
        (d[0] * self.by_count[0] as f64 + d[1] * self.by_count[1] as f64 + d[2] * self.by_count[2] as f64)
            / self.total as f64
    }
}

/// Sum of per-token `log10` probabilities including `</s>`; unknown words
/// are scored as `<unk>`.
pub fn lm_score(lm: &NGramLanguageModel, sentence: &Sentence) -> f64 {
    let mut state = lm.start_state();
    let mut total = 0.0;
    for w in sentence {
        let id = lm.id(w);
        total += lm.logprob_ids(&state, id);
        state = lm.advance(&state, id);
    }
    total + lm.logprob_ids(&state, EOS_ID)
}
