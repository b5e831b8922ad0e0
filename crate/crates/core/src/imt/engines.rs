//! Suffix generators backed by the trained engines.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use super::{GeneratorError, SuffixGenerator};
use crate::nmt::NmtSystem;
use crate::smt::{graph_suffix, SmtModel, WordGraph};
use crate::text::Sentence;

/// Word graphs kept per generator before the cache is flushed.
pub const GRAPH_CACHE_CAPACITY: usize = 256;

/// Decodes each source once and answers every prefix from its word graph
/// with error-correcting suffix search.
#[derive(Debug)]
pub struct SmtGenerator {
    model: Arc<SmtModel>,
    graphs: Mutex<HashMap<Sentence, Arc<WordGraph>>>,
}

impl SmtGenerator {
    pub fn new(model: Arc<SmtModel>) -> Self {
        SmtGenerator {
            model,
            graphs: Mutex::new(HashMap::new()),
        }
    }

    pub fn model(&self) -> &SmtModel {
        &self.model
    }

    /// The cached word graph for `source`, decoding it on first use.
    pub fn graph(&self, source: &Sentence) -> Result<Arc<WordGraph>, GeneratorError> {
        if let Some(g) = self.graphs.lock().unwrap_or_else(|e| e.into_inner()).get(source) {
            return Ok(Arc::clone(g));
        }
        let (_, graph) = self.model.decode(source)?;
        let graph = Arc::new(graph);
        let mut cache = self.graphs.lock().unwrap_or_else(|e| e.into_inner());
        if cache.len() >= GRAPH_CACHE_CAPACITY {
            cache.clear();
        }
        cache.insert(source.clone(), Arc::clone(&graph));
        Ok(graph)
    }
}

impl SuffixGenerator for SmtGenerator {
    fn suffix(&self, source: &Sentence, prefix: &Sentence) -> Result<Sentence, GeneratorError> {
        let graph = self.graph(source)?;
        Ok(graph_suffix(&graph, prefix)?)
    }
}

/// Prefix-constrained beam search on the neural engine.
#[derive(Debug, Clone)]
pub struct NmtGenerator {
    system: Arc<NmtSystem>,
}

impl NmtGenerator {
    pub fn new(system: Arc<NmtSystem>) -> Self {
        NmtGenerator { system }
    }

    pub fn system(&self) -> &NmtSystem {
        &self.system
    }
}

impl SuffixGenerator for NmtGenerator {
    fn suffix(&self, source: &Sentence, prefix: &Sentence) -> Result<Sentence, GeneratorError> {
        Ok(self.system.suffix(source, prefix)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imt::{simulate_session, CopyGenerator};
    use crate::smt::{train_smt, SmtTrainConfig};
    use crate::text::ParallelCorpus;

    fn corpus() -> ParallelCorpus {
        let pairs = [
            ("vuestra merced dixo", "vuestra merced dijo"),
            ("el fijo dixo", "el hijo dijo"),
            ("el fijo vio", "el hijo vio"),
            ("vuestra merced vio", "vuestra merced vio"),
        ];
        ParallelCorpus::from_pairs(
            "toy",
            pairs.iter().map(|(s, t)| (Sentence::from_words(s), Sentence::from_words(t))),
        )
        .0
    }

    #[test]
    fn smt_generator_completes_prefixes_from_the_graph() {
        let model = Arc::new(train_smt(&corpus(), &[], &SmtTrainConfig::default()).unwrap());
        let g = SmtGenerator::new(model);
        let src = Sentence::from_words("el fijo dixo");
        assert_eq!(g.suffix(&src, &Sentence::default()).unwrap(), Sentence::from_words("el hijo dijo"));
        assert_eq!(g.suffix(&src, &Sentence::from_words("el hijo")).unwrap(), Sentence::from_words("dijo"));
        let g1 = g.graph(&src).unwrap();
        assert!(Arc::ptr_eq(&g1, &g.graph(&src).unwrap()));
        let reference = Sentence::from_words("el hijo dijo");
        let smt = simulate_session(&g, &src, &reference).unwrap();
        let copy = simulate_session(&CopyGenerator, &src, &reference).unwrap();
        assert_eq!(smt.word_strokes, 0);
        assert_eq!(copy.word_strokes, 2);
    }
}
