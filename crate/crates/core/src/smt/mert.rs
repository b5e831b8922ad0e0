//! Minimum error rate training: n-best coordinate ascent with exact line
//! search on corpus BLEU.

use std::collections::HashSet;

use super::{decode, DecodeConfig, Feature, FeatureVector, LogLinearWeights, NGramLanguageModel, PhraseTable, SmtError};
use crate::eval::BleuStats;
use crate::text::{ParallelCorpus, Sentence};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MertConfig {
    /// Paths taken from each word graph per round.
    pub nbest: usize,
    /// Coordinate ascent sweeps over all features per round.
    pub max_passes: usize,
    pub decode: DecodeConfig,
}

impl Default for MertConfig {
    fn default() -> Self {
        MertConfig {
            nbest: 100,
            max_passes: 5,
            decode: DecodeConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub tokens: Sentence,
    pub features: FeatureVector,
    pub stats: BleuStats,
}

impl Candidate {
    pub fn new(tokens: Sentence, features: FeatureVector, reference: &Sentence) -> Self {
        let stats = BleuStats::from_pair(&tokens, reference);
        Candidate { tokens, features, stats }
    }
}

fn argmax(cands: &[Candidate], w: &LogLinearWeights) -> usize {
    let mut best = 0;
    let mut best_s = f64::NEG_INFINITY;
    for (i, c) in cands.iter().enumerate() {
        let s = w.dot(&c.features);
        if s > best_s {
            best = i;
            best_s = s;
        }
    }
    best
}

/// Smoothed corpus BLEU of each sentence's best candidate under `w`.
pub fn pool_objective(pool: &[Vec<Candidate>], w: &LogLinearWeights) -> f64 {
    pool.iter()
        .filter(|c| !c.is_empty())
        .map(|c| c[argmax(c, w)].stats)
        .sum::<BleuStats>()
        .smoothed_score()
}

/// Upper envelope of the lines `a_i + b_i x`: `(x_from, index)` pairs in
/// increasing `x`, the first starting at `-inf`.
fn envelope(lines: &[(f64, f64)]) -> Vec<(f64, usize)> {
    let mut order: Vec<usize> = (0..lines.len()).collect();
    order.sort_by(|&i, &j| {
        lines[i]
            .1
            .total_cmp(&lines[j].1)
            .then(lines[j].0.total_cmp(&lines[i].0))
            .then(i.cmp(&j))
    });
    let mut hull: Vec<(f64, usize)> = Vec::new();
    for idx in order {
        let (a, b) = lines[idx];
        if let Some(&(_, top)) = hull.last() {
            if lines[top].1 == b {
                continue;
            }
        }
        loop {
            let Some(&(x0, top)) = hull.last() else {
                hull.push((f64::NEG_INFINITY, idx));
                break;
            };
            let (ta, tb) = lines[top];
            let x = (ta - a) / (b - tb);
            if x <= x0 {
                hull.pop();
                continue;
            }
            hull.push((x, idx));
            break;
        }
    }
    hull
}

/// Exact line search along one feature weight. Returns the new weight and
/// its objective, or `None` when the ranking never changes along the line.
///
/// The chosen value is the midpoint of the best interval, or one unit
/// beyond the outermost crossing for an unbounded interval.
pub fn line_search(pool: &[Vec<Candidate>], w: &LogLinearWeights, feature: Feature) -> Option<(f64, f64)> {
    let d = feature.index();
    let mut stats = BleuStats::default();
    let mut events: Vec<(f64, usize, usize, usize)> = Vec::new();
    let mut hulls = Vec::with_capacity(pool.len());
    for (s, cands) in pool.iter().enumerate() {
        if cands.is_empty() {
            hulls.push(Vec::new());
            continue;
        }
        let lines: Vec<(f64, f64)> = cands
            .iter()
            .map(|c| (w.dot(&c.features) - w.values()[d] * c.features[d], c.features[d]))
            .collect();
        let hull = envelope(&lines);
        stats = stats + cands[hull[0].1].stats;
        for k in 1..hull.len() {
            events.push((hull[k].0, s, hull[k - 1].1, hull[k].1));
        }
        hulls.push(hull);
    }
    if events.is_empty() {
        return None;
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut best_obj = stats.smoothed_score();
    let mut best_interval: (f64, f64) = (f64::NEG_INFINITY, events[0].0);
    let mut e = 0;
    while e < events.len() {
        let x = events[e].0;
        while e < events.len() && events[e].0 == x {
            let (_, s, old, new) = events[e];
            stats = stats - pool[s][old].stats + pool[s][new].stats;
            e += 1;
        }
        let upper = events.get(e).map_or(f64::INFINITY, |ev| ev.0);
        let obj = stats.smoothed_score();
        if obj > best_obj {
            best_obj = obj;
            best_interval = (x, upper);
        }
    }
    let value = match best_interval {
        (lo, hi) if lo == f64::NEG_INFINITY => hi - 1.0,
        (lo, hi) if hi == f64::INFINITY => lo + 1.0,
        (lo, hi) => 0.5 * (lo + hi),
    };
    Some((value, best_obj))
}

/// One coordinate ascent run over all features on a fixed pool.
pub fn optimize_on_pool(pool: &[Vec<Candidate>], init: &LogLinearWeights, max_passes: usize) -> LogLinearWeights {
    let mut w = *init;
    let mut obj = pool_objective(pool, &w);
    for _ in 0..max_passes {
        let mut improved = false;
        for f in Feature::ALL {
            if let Some((value, new_obj)) = line_search(pool, &w, f) {
                if new_obj > obj + 1e-12 {
                    w[f] = value;
                    obj = pool_objective(pool, &w);
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    w
}

/// Tunes weights on `dev` for `rounds` decode/optimize rounds and returns
/// the weights with the best dev BLEU among the initial and every round's
/// result; the initial weights win ties. No randomness is involved.
pub fn tune_weights(
    pt: &PhraseTable,
    lm: &NGramLanguageModel,
    dev: &ParallelCorpus,
    init: &LogLinearWeights,
    rounds: usize,
    cfg: &MertConfig,
) -> Result<LogLinearWeights, SmtError> {
    if dev.is_empty() {
        return Err(SmtError::EmptyCorpus);
    }
    if rounds == 0 {
        return Ok(*init);
    }
    let refs: Vec<&Sentence> = dev.targets().collect();
    let mut pool: Vec<Vec<Candidate>> = vec![Vec::new(); dev.len()];
    let mut seen: Vec<HashSet<(Sentence, [u64; 6])>> = vec![HashSet::new(); dev.len()];
    let mut tried: Vec<(LogLinearWeights, f64)> = Vec::new();
    let mut w = *init;
    for round in 0..=rounds {
        let mut one_best = BleuStats::default();
        let mut added = 0;
        for (s, pair) in dev.pairs().iter().enumerate() {
            let (hyp, graph) = decode(pt, lm, &w, &pair.source, &cfg.decode)?;
            one_best = one_best + BleuStats::from_pair(&hyp.tokens, refs[s]);
            if round == rounds {
                continue;
            }
            for (path, _) in graph.nbest(cfg.nbest) {
                let tokens = graph.path_words(&path);
                let features = graph.path_features(&path);
                if seen[s].insert((tokens.clone(), features.map(f64::to_bits))) {
                    pool[s].push(Candidate::new(tokens, features, refs[s]));
                    added += 1;
                }
            }
        }
        tried.push((w, one_best.score()));
        if round == rounds || (round > 0 && added == 0) {
            break;
        }
        w = optimize_on_pool(&pool, &w, cfg.max_passes);
        if tried.iter().any(|(t, _)| *t == w) {
            break;
        }
    }
    let mut best = tried[0];
    for &(t, score) in &tried[1..] {
        if score > best.1 {
            best = (t, score);
        }
    }
    log::info!("tuned weights reach dev BLEU {:.2} (initial {:.2})", best.1, tried[0].1);
    Ok(best.0)
}
