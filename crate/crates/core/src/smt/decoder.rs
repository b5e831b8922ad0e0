//! Stack-based beam search producing a word graph.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{
    Feature, FeatureVector, GraphEdge, GraphNode, LogLinearWeights, NGramLanguageModel, PhraseTable,
    SmtError, WordGraph, NUM_FEATURES,
};
use crate::text::Sentence;

/// Translation probability given to the identity option of an
/// out-of-vocabulary source word.
pub const OOV_PROBABILITY: f64 = 1e-7;

const LN_10: f64 = std::f64::consts::LN_10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeConfig {
    /// Hypotheses kept per stack.
    pub beam_size: usize,
    /// Maximum distance between a phrase start and the first untranslated
    /// word; 0 means monotone.
    pub distortion_limit: usize,
    /// Options kept per source phrase, best `p(t|s)` first.
    pub table_limit: usize,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            beam_size: 100,
            distortion_limit: 0,
            table_limit: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub tokens: Sentence,
    pub score: f64,
    pub features: FeatureVector,
}

struct TransOption {
    words: Vec<String>,
    lm_ids: Vec<u32>,
    /// Phrase translation features, word and phrase counts.
    partial: FeatureVector,
    partial_score: f64,
}

struct Node {
    coverage: Vec<u64>,
    covered: usize,
    last_end: usize,
    lm_state: Vec<u32>,
    score: f64,
    future: f64,
}

type StateKey = (Vec<u64>, usize, Vec<u32>);

fn is_covered(cov: &[u64], i: usize) -> bool {
    cov[i / 64] >> (i % 64) & 1 == 1
}

fn first_uncovered(cov: &[u64], n: usize) -> usize {
    (0..n).find(|&i| !is_covered(cov, i)).unwrap_or(n)
}

fn collect_options(
    pt: &PhraseTable,
    lm: &NGramLanguageModel,
    w: &LogLinearWeights,
    x: &Sentence,
    cfg: &DecodeConfig,
) -> Vec<Vec<Vec<TransOption>>> {
    let n = x.len();
    let max_len = pt.max_phrase_len().max(1);
    let mut options: Vec<Vec<Vec<TransOption>>> = (0..n).map(|_| Vec::new()).collect();
    let make = |target: &[String], p_t_s: f64, p_s_t: f64| {
        let mut partial = [0.0; NUM_FEATURES];
        partial[Feature::TranslationTgs.index()] = p_t_s.ln();
        partial[Feature::TranslationSgt.index()] = p_s_t.ln();
        partial[Feature::WordPenalty.index()] = target.len() as f64;
        partial[Feature::PhrasePenalty.index()] = 1.0;
        TransOption {
            words: target.to_vec(),
            lm_ids: target.iter().map(|t| lm.id(t)).collect(),
            partial_score: w.dot(&partial),
            partial,
        }
    };
    for (i, slot) in options.iter_mut().enumerate() {
        for len in 1..=max_len.min(n - i) {
            let span = &x.tokens()[i..i + len];
            let mut opts: Vec<TransOption> = pt
                .get(span)
                .unwrap_or_default()
                .iter()
                .take(cfg.table_limit)
                .map(|o| make(&o.target, o.p_t_s, o.p_s_t))
                .collect();
            if len == 1 && opts.is_empty() {
                opts.push(make(span, OOV_PROBABILITY, OOV_PROBABILITY));
            }
            slot.push(opts);
        }
    }
    options
}

/// Heuristic best score for translating each span `[i, j)` in isolation.
fn future_costs(
    options: &[Vec<Vec<TransOption>>],
    lm: &NGramLanguageModel,
    w: &LogLinearWeights,
) -> Vec<Vec<f64>> {
    let n = options.len();
    let lm_w = w[Feature::LanguageModel];
    let mut fc = vec![vec![f64::NEG_INFINITY; n + 1]; n + 1];
    for (i, by_len) in options.iter().enumerate() {
        for (l, opts) in by_len.iter().enumerate() {
            for o in opts {
                let mut state: Vec<u32> = Vec::new();
                let mut lp = 0.0;
                for &id in &o.lm_ids {
                    lp += lm.logprob_ids(&state, id) * LN_10;
                    state = lm.advance(&state, id);
                }
                let est = o.partial_score + lm_w * lp;
                let cell = &mut fc[i][i + l + 1];
                if est > *cell {
                    *cell = est;
                }
            }
        }
    }
    for len in 2..=n {
        for i in 0..=n - len {
            let j = i + len;
            for k in i + 1..j {
                let s = fc[i][k] + fc[k][j];
                if s > fc[i][j] {
                    fc[i][j] = s;
                }
            }
        }
    }
    fc
}

fn future_of(cov: &[u64], n: usize, fc: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    let mut i = 0;
    while i < n {
        if is_covered(cov, i) {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && !is_covered(cov, i) {
            i += 1;
        }
        total += fc[start][i];
    }
    total
}

/// Translates `x` and returns the best hypothesis with the pruned search
/// graph. The hypothesis is the best path of the graph.
pub fn decode(
    pt: &PhraseTable,
    lm: &NGramLanguageModel,
    w: &LogLinearWeights,
    x: &Sentence,
    cfg: &DecodeConfig,
) -> Result<(Hypothesis, WordGraph), SmtError> {
    if cfg.beam_size == 0 || cfg.table_limit == 0 {
        return Err(SmtError::InvalidConfig("beam size and table limit must be at least 1".into()));
    }
    let n = x.len();
    if n == 0 {
        let h = Hypothesis {
            tokens: Sentence::default(),
            score: 0.0,
            features: [0.0; NUM_FEATURES],
        };
        return Ok((h, WordGraph::trivial()));
    }
    let options = collect_options(pt, lm, w, x, cfg);
    let fc = future_costs(&options, lm, w);
    let lm_w = w[Feature::LanguageModel];
    let words = n.div_ceil(64);

    let mut nodes: Vec<Node> = vec![Node {
        coverage: vec![0; words],
        covered: 0,
        last_end: 0,
        lm_state: lm.start_state(),
        score: 0.0,
        future: fc[0][n],
    }];
    let mut edges: Vec<GraphEdge> = Vec::new();
    let mut stacks: Vec<HashMap<StateKey, usize>> = (0..=n).map(|_| HashMap::new()).collect();
    stacks[0].insert((vec![0; words], 0, lm.start_state()), 0);
    let mut alive = vec![false; 1];

    let prune = |stack: &HashMap<StateKey, usize>, nodes: &[Node]| -> Vec<usize> {
        let mut ids: Vec<usize> = stack.values().copied().collect();
        ids.sort_by(|&a, &b| {
            let (sa, sb) = (nodes[a].score + nodes[a].future, nodes[b].score + nodes[b].future);
            sb.total_cmp(&sa).then(a.cmp(&b))
        });
        ids.truncate(cfg.beam_size);
        ids.sort_unstable();
        ids
    };

    for k in 0..n {
        let kept = prune(&stacks[k], &nodes);
        for &id in &kept {
            alive[id] = true;
        }
        for id in kept {
            let first = first_uncovered(&nodes[id].coverage, n);
            let window_end = if cfg.distortion_limit == 0 {
                first + 1
            } else {
                (first + cfg.distortion_limit + 1).min(n)
            };
            for i in first..window_end {
                if is_covered(&nodes[id].coverage, i) {
                    continue;
                }
                for (l, opts) in options[i].iter().enumerate() {
                    let j = i + l + 1;
                    if (i..j).any(|p| is_covered(&nodes[id].coverage, p)) {
                        break;
                    }
                    let mut coverage = nodes[id].coverage.clone();
                    for p in i..j {
                        coverage[p / 64] |= 1 << (p % 64);
                    }
                    let covered = nodes[id].covered + (j - i);
                    let future = future_of(&coverage, n, &fc);
                    let distortion = -(i as f64 - nodes[id].last_end as f64).abs();
                    for o in opts {
                        let mut state = nodes[id].lm_state.clone();
                        let mut lp = 0.0;
                        for &wid in &o.lm_ids {
                            lp += lm.logprob_ids(&state, wid);
                            state = lm.advance(&state, wid);
                        }
                        if covered == n {
                            lp += lm.logprob_ids(&state, lm.eos());
                        }
                        let mut features = o.partial;
                        features[Feature::LanguageModel.index()] = lp * LN_10;
                        features[Feature::Distortion.index()] = distortion;
                        let score = o.partial_score + lm_w * features[Feature::LanguageModel.index()]
                            + w[Feature::Distortion] * distortion;
                        let total = nodes[id].score + score;
                        let key = (coverage.clone(), j, state);
                        let to = match stacks[covered].get(&key) {
                            Some(&to) => {
                                if total > nodes[to].score {
                                    nodes[to].score = total;
                                }
                                to
                            }
                            None => {
                                let to = nodes.len();
                                nodes.push(Node {
                                    coverage: coverage.clone(),
                                    covered,
                                    last_end: j,
                                    lm_state: key.2.clone(),
                                    score: total,
                                    future,
                                });
                                alive.push(false);
                                stacks[covered].insert(key, to);
                                to
                            }
                        };
                        edges.push(GraphEdge {
                            from: id,
                            to,
                            words: o.words.clone(),
                            source_span: (i, j),
                            features,
                            score,
                        });
                    }
                }
            }
        }
    }
    let finals = prune(&stacks[n], &nodes);
    for &id in &finals {
        alive[id] = true;
    }

    // Keep nodes that survived pruning and lead to a final node.
    let mut useful = vec![false; nodes.len()];
    for &f in &finals {
        useful[f] = true;
    }
    let mut order: Vec<usize> = (0..nodes.len()).filter(|&i| alive[i]).collect();
    order.sort_by_key(|&i| (nodes[i].covered, i));
    let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
    for (e, edge) in edges.iter().enumerate() {
        if alive[edge.from] && alive[edge.to] {
            incoming[edge.to].push(e);
        }
    }
    for &v in order.iter().rev() {
        if useful[v] {
            for &e in &incoming[v] {
                useful[edges[e].from] = true;
            }
        }
    }
    let kept: Vec<usize> = order.into_iter().filter(|&i| useful[i]).collect();
    let mut remap = vec![usize::MAX; nodes.len()];
    for (new, &old) in kept.iter().enumerate() {
        remap[old] = new;
    }
    let graph_nodes: Vec<GraphNode> = kept
        .iter()
        .map(|&i| GraphNode {
            coverage: (0..n).map(|p| is_covered(&nodes[i].coverage, p)).collect(),
            last_end: nodes[i].last_end,
            lm_context: nodes[i].lm_state.iter().map(|&id| lm.word(id).to_string()).collect(),
        })
        .collect();
    let graph_edges: Vec<GraphEdge> = edges
        .into_iter()
        .filter(|e| remap[e.from] != usize::MAX && remap[e.to] != usize::MAX)
        .map(|e| GraphEdge {
            from: remap[e.from],
            to: remap[e.to],
            ..e
        })
        .collect();
    let graph_finals: Vec<usize> = finals.iter().map(|&f| remap[f]).collect();
    let graph = WordGraph::new(graph_nodes, graph_edges, remap[0], graph_finals, n)?;
    let (path, score) = graph.viterbi().ok_or(SmtError::NoFinalNode)?;
    let hypothesis = Hypothesis {
        tokens: graph.path_words(&path),
        score,
        features: graph.path_features(&path),
    };
    Ok((hypothesis, graph))
}
