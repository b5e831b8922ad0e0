//! IBM Model 1 lexical translation probabilities trained with EM.

use std::collections::HashMap;

use super::SmtError;
use crate::text::ParallelCorpus;

/// Lexical translation probabilities `p(target | source)`.
///
/// Only co-occurring pairs are stored; for every source word the stored
/// probabilities sum to one.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LexicalTable {
    table: HashMap<String, HashMap<String, f64>>,
}

impl LexicalTable {
    /// `p(target | source)`, zero for pairs never seen together.
    pub fn prob(&self, source: &str, target: &str) -> f64 {
        self.table
            .get(source)
            .and_then(|row| row.get(target))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn row(&self, source: &str) -> Option<&HashMap<String, f64>> {
        self.table.get(source)
    }

    pub fn sources(&self) -> impl Iterator<Item = &str> {
        self.table.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

struct Interned {
    pairs: Vec<(Vec<u32>, Vec<u32>)>,
    source_words: Vec<String>,
    target_words: Vec<String>,
}

fn intern(corpus: &ParallelCorpus) -> Interned {
    let mut src_ids: HashMap<&str, u32> = HashMap::new();
    let mut tgt_ids: HashMap<&str, u32> = HashMap::new();
    let mut source_words = Vec::new();
    let mut target_words = Vec::new();
    let mut pairs = Vec::with_capacity(corpus.len());
    for pair in corpus.pairs() {
        let s = pair
            .source
            .iter()
            .map(|w| {
                *src_ids.entry(w).or_insert_with(|| {
                    source_words.push(w.clone());
                    (source_words.len() - 1) as u32
                })
            })
            .collect();
        let t = pair
            .target
            .iter()
            .map(|w| {
                *tgt_ids.entry(w).or_insert_with(|| {
                    target_words.push(w.clone());
                    (target_words.len() - 1) as u32
                })
            })
            .collect();
        pairs.push((s, t));
    }
    Interned {
        pairs,
        source_words,
        target_words,
    }
}

/// Trains `p(target | source)` and returns the corpus log-likelihood
/// (natural log, up to the constant alignment prior) measured before each
/// EM iteration's update and once more after the last one.
pub fn train_ibm1_traced(
    corpus: &ParallelCorpus,
    iterations: usize,
) -> Result<(LexicalTable, Vec<f64>), SmtError> {
    if corpus.is_empty() {
        return Err(SmtError::EmptyCorpus);
    }
    if iterations == 0 {
        return Err(SmtError::InvalidConfig("IBM-1 needs at least one iteration".into()));
    }
    let data = intern(corpus);
    let uniform = 1.0 / data.target_words.len() as f64;
    let mut t: HashMap<(u32, u32), f64> = HashMap::new();
    for (s, tg) in &data.pairs {
        for &f in tg {
            for &e in s {
                t.insert((e, f), uniform);
            }
        }
    }

    let mut trace = Vec::with_capacity(iterations + 1);
    let mut posterior = Vec::new();
    for _ in 0..iterations {
        let mut counts: HashMap<(u32, u32), f64> = HashMap::with_capacity(t.len());
        let mut totals = vec![0.0; data.source_words.len()];
        let mut loglik = 0.0;
        for (s, tg) in &data.pairs {
            let inv_len = 1.0 / s.len() as f64;
            for &f in tg {
                posterior.clear();
                posterior.extend(s.iter().map(|&e| t[&(e, f)]));
                let z: f64 = posterior.iter().sum();
                loglik += (z * inv_len).ln();
                for (&e, &p) in s.iter().zip(&posterior) {
                    let c = p / z;
                    *counts.entry((e, f)).or_insert(0.0) += c;
                    totals[e as usize] += c;
                }
            }
        }
        trace.push(loglik);
        for (&(e, f), &c) in &counts {
            t.insert((e, f), c / totals[e as usize]);
        }
    }
    let mut final_ll = 0.0;
    for (s, tg) in &data.pairs {
        for &f in tg {
            let z: f64 = s.iter().map(|&e| t[&(e, f)]).sum();
            final_ll += (z / s.len() as f64).ln();
        }
    }
    trace.push(final_ll);

    let mut table: HashMap<String, HashMap<String, f64>> = HashMap::new();
    for ((e, f), p) in t {
        table
            .entry(data.source_words[e as usize].clone())
            .or_default()
            .insert(data.target_words[f as usize].clone(), p);
    }
    Ok((LexicalTable { table }, trace))
}

/// Trains IBM Model 1 `p(target | source)` from a uniform start.
pub fn train_ibm1(corpus: &ParallelCorpus, iterations: usize) -> Result<LexicalTable, SmtError> {
    train_ibm1_traced(corpus, iterations).map(|(t, _)| t)
}
