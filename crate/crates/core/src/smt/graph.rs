//! Word graphs: the search space kept by the decoder.

use std::fmt::Write as _;

use super::{FeatureVector, SmtError, NUM_FEATURES};
use crate::text::Sentence;

#[derive(Debug, Clone, PartialEq)]
pub struct GraphNode {
    /// Source positions translated on every path reaching this node.
    pub coverage: Vec<bool>,
    /// Source position following the last translated phrase.
    pub last_end: usize,
    /// Language model history.
    pub lm_context: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphEdge {
    pub from: usize,
    pub to: usize,
    /// Target words; never empty.
    pub words: Vec<String>,
    /// Source span translated by this edge, end-exclusive.
    pub source_span: (usize, usize),
    /// Unweighted feature values contributed by this edge.
    pub features: FeatureVector,
    /// Weighted feature sum.
    pub score: f64,
}

/// A directed acyclic graph of translation hypotheses.
///
/// Node ids are topologically sorted: every edge goes from a lower to a
/// higher id. A path from `start` to a final node is one complete
/// translation; its score is the sum of its edge scores.
#[derive(Debug, Clone, PartialEq)]
pub struct WordGraph {
    nodes: Vec<GraphNode>,
    edges: Vec<GraphEdge>,
    start: usize,
    finals: Vec<usize>,
    is_final: Vec<bool>,
    out: Vec<Vec<usize>>,
    source_len: usize,
}

impl WordGraph {
    pub fn new(
        nodes: Vec<GraphNode>,
        edges: Vec<GraphEdge>,
        start: usize,
        finals: Vec<usize>,
        source_len: usize,
    ) -> Result<Self, SmtError> {
        let n = nodes.len();
        if start >= n {
            return Err(SmtError::InvalidGraph(format!("start node {start} out of range")));
        }
        let mut is_final = vec![false; n];
        for &f in &finals {
            if f >= n {
                return Err(SmtError::InvalidGraph(format!("final node {f} out of range")));
            }
            is_final[f] = true;
        }
        let mut out = vec![Vec::new(); n];
        for (i, e) in edges.iter().enumerate() {
            if e.to >= n || e.from >= e.to {
                return Err(SmtError::InvalidGraph(format!(
                    "edge {i} ({} -> {}) is not topologically ordered",
                    e.from, e.to
                )));
            }
            if e.words.is_empty() {
                return Err(SmtError::InvalidGraph(format!("edge {i} has no words")));
            }
            out[e.from].push(i);
        }
        let mut finals = finals;
        finals.sort_unstable();
        finals.dedup();
        Ok(WordGraph {
            nodes,
            edges,
            start,
            finals,
            is_final,
            out,
            source_len,
        })
    }

    /// Single-node graph for an empty source.
    pub fn trivial() -> Self {
        let node = GraphNode {
            coverage: Vec::new(),
            last_end: 0,
            lm_context: Vec::new(),
        };
        WordGraph::new(vec![node], Vec::new(), 0, vec![0], 0).expect("trivial graph is valid")
    }

    pub fn nodes(&self) -> &[GraphNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[GraphEdge] {
        &self.edges
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn finals(&self) -> &[usize] {
        &self.finals
    }

    pub fn is_final(&self, node: usize) -> bool {
        self.is_final[node]
    }

    pub fn out_edges(&self, node: usize) -> &[usize] {
        &self.out[node]
    }

    pub fn source_len(&self) -> usize {
        self.source_len
    }

    /// Best score from each node to any final node; `-inf` where no final
    /// node is reachable.
    pub fn completion_scores(&self) -> Vec<f64> {
        let mut best = vec![f64::NEG_INFINITY; self.nodes.len()];
        for n in (0..self.nodes.len()).rev() {
            if self.is_final[n] {
                best[n] = 0.0;
            }
            for &e in &self.out[n] {
                let edge = &self.edges[e];
                let s = edge.score + best[edge.to];
                if s > best[n] {
                    best[n] = s;
                }
            }
        }
        best
    }

    /// Edges of the best-scoring path from `node` to a final node, given
    /// precomputed [`completion_scores`](Self::completion_scores).
    pub fn best_completion(&self, node: usize, completion: &[f64]) -> Option<Vec<usize>> {
        if completion[node] == f64::NEG_INFINITY {
            return None;
        }
        let mut path = Vec::new();
        let mut n = node;
        loop {
            if self.is_final[n] && completion[n] == 0.0 {
                return Some(path);
            }
            let e = *self.out[n]
                .iter()
                .find(|&&e| self.edges[e].score + completion[self.edges[e].to] == completion[n])
                .expect("completion scores are consistent");
            path.push(e);
            n = self.edges[e].to;
        }
    }

    /// Best complete path as edge indices and its score.
    pub fn viterbi(&self) -> Option<(Vec<usize>, f64)> {
        let completion = self.completion_scores();
        let path = self.best_completion(self.start, &completion)?;
        Some((path, completion[self.start]))
    }

    pub fn path_words(&self, path: &[usize]) -> Sentence {
        Sentence::from_tokens_unchecked(
            path.iter()
                .flat_map(|&e| self.edges[e].words.iter().cloned())
                .collect(),
        )
    }

    pub fn path_score(&self, path: &[usize]) -> f64 {
        path.iter().map(|&e| self.edges[e].score).sum()
    }

    pub fn path_features(&self, path: &[usize]) -> FeatureVector {
        let mut f = [0.0; NUM_FEATURES];
        for &e in path {
            for (acc, v) in f.iter_mut().zip(&self.edges[e].features) {
                *acc += v;
            }
        }
        f
    }

    /// The `k` best complete paths, best first.
    pub fn nbest(&self, k: usize) -> Vec<(Vec<usize>, f64)> {
        if k == 0 {
            return Vec::new();
        }
        // Per node: up to k (score, continuation) entries, best first.
        type Entry = (f64, Option<(usize, usize)>);
        let mut lists: Vec<Vec<Entry>> = vec![Vec::new(); self.nodes.len()];
        for n in (0..self.nodes.len()).rev() {
            let mut cands: Vec<Entry> = Vec::new();
            if self.is_final[n] {
                cands.push((0.0, None));
            }
            for &e in &self.out[n] {
                let edge = &self.edges[e];
                for (r, &(s, _)) in lists[edge.to].iter().enumerate() {
                    cands.push((edge.score + s, Some((e, r))));
                }
            }
            cands.sort_by(|a, b| b.0.total_cmp(&a.0));
            cands.truncate(k);
            lists[n] = cands;
        }
        lists[self.start]
            .iter()
            .map(|&(score, mut next)| {
                let mut path = Vec::new();
                while let Some((e, r)) = next {
                    path.push(e);
                    next = lists[self.edges[e].to][r].1;
                }
                (path, score)
            })
            .collect()
    }

    /// Number of complete paths, saturating at `u128::MAX`.
    pub fn count_paths(&self) -> u128 {
        let mut count = vec![0u128; self.nodes.len()];
        for n in (0..self.nodes.len()).rev() {
            let mut c: u128 = u128::from(self.is_final[n]);
            for &e in &self.out[n] {
                c = c.saturating_add(count[self.edges[e].to]);
            }
            count[n] = c;
        }
        count[self.start]
    }

    /// Debug dump: a `nodes` block then an `edges` block.
    pub fn to_text(&self) -> String {
        let mut out = format!("nodes {}\n", self.nodes.len());
        for (i, n) in self.nodes.iter().enumerate() {
            let cov: String = n.coverage.iter().map(|&c| if c { '1' } else { '0' }).collect();
            let mut flags = String::new();
            if i == self.start {
                flags.push_str(" start");
            }
            if self.is_final[i] {
                flags.push_str(" final");
            }
            let _ = writeln!(out, "{i}\t{cov}\t{}\t{}{flags}", n.last_end, n.lm_context.join(" "));
        }
        let _ = writeln!(out, "edges {}", self.edges.len());
        for e in &self.edges {
            let feats: Vec<String> = e.features.iter().map(|f| f.to_string()).collect();
            let _ = writeln!(
                out,
                "{}\t{}\t{}-{}\t{}\t{}\t{}",
                e.from,
                e.to,
                e.source_span.0,
                e.source_span.1,
                e.words.join(" "),
                e.score,
                feats.join(" ")
            );
        }
        out
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// Builds a graph from `(from, to, words, score)` edges with node 0 as
    /// start and the given finals; features carry the score in slot 0.
    pub(crate) fn toy_graph(n: usize, edges: &[(usize, usize, &str, f64)], finals: &[usize]) -> WordGraph {
        let nodes = (0..n)
            .map(|_| GraphNode {
                coverage: Vec::new(),
                last_end: 0,
                lm_context: Vec::new(),
            })
            .collect();
        let edges = edges
            .iter()
            .map(|&(from, to, words, score)| {
                let mut features = [0.0; NUM_FEATURES];
                features[0] = score;
                GraphEdge {
                    from,
                    to,
                    words: words.split_whitespace().map(str::to_string).collect(),
                    source_span: (0, 0),
                    features,
                    score,
                }
            })
            .collect();
        WordGraph::new(nodes, edges, 0, finals.to_vec(), 0).unwrap()
    }

    fn diamond() -> WordGraph {
        toy_graph(
            4,
            &[
                (0, 1, "a", -1.0),
                (0, 2, "b c", -0.5),
                (1, 3, "d", -1.0),
                (2, 3, "e", -2.0),
                (1, 3, "f g", -0.2),
            ],
            &[3],
        )
    }

    #[test]
    fn viterbi_and_nbest() {
        let g = diamond();
        let (path, score) = g.viterbi().unwrap();
        assert_eq!(g.path_words(&path), Sentence::from_words("a f g"));
        assert!((score + 1.2).abs() < 1e-12);
        let nb = g.nbest(10);
        assert_eq!(nb.len(), 3);
        let words: Vec<String> = nb.iter().map(|(p, _)| g.path_words(p).to_string()).collect();
        assert_eq!(words, ["a f g", "a d", "b c e"]);
        assert!(nb.windows(2).all(|w| w[0].1 >= w[1].1));
        for (p, s) in &nb {
            assert!((g.path_score(p) - s).abs() < 1e-12);
        }
        assert_eq!(g.count_paths(), 3);
        assert_eq!(g.nbest(1)[0].0, path);
    }

    #[test]
    fn rejects_malformed() {
        let node = GraphNode {
            coverage: Vec::new(),
            last_end: 0,
            lm_context: Vec::new(),
        };
        let edge = GraphEdge {
            from: 1,
            to: 0,
            words: vec!["a".into()],
            source_span: (0, 1),
            features: [0.0; NUM_FEATURES],
            score: 0.0,
        };
        assert!(WordGraph::new(vec![node.clone(), node.clone()], vec![edge.clone()], 0, vec![1], 1).is_err());
        let empty = GraphEdge {
            from: 0,
            to: 1,
            words: vec![],
            ..edge
        };
        assert!(WordGraph::new(vec![node.clone(), node], vec![empty], 0, vec![1], 1).is_err());
    }

    #[test]
    fn text_dump_has_both_blocks() {
        let t = diamond().to_text();
        assert!(t.starts_with("nodes 4\n0\t\t0\t start\n"));
        assert!(t.contains("edges 5\n0\t1\t0-0\ta\t-1\t"));
        assert!(t.contains("3\t\t0\t final\n"));
    }

    #[test]
    fn trivial_graph() {
        let g = WordGraph::trivial();
        let (p, s) = g.viterbi().unwrap();
        assert!(p.is_empty() && s == 0.0);
        assert_eq!(g.count_paths(), 1);
    }
}
