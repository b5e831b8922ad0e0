use std::collections::HashMap;

use crate::text::Sentence;

pub type GeneratorError = Box<dyn std::error::Error + Send + Sync>;

/// Completes a validated word-level prefix with a word-level suffix.
///
/// Implementations must be deterministic for a fixed model state. The
/// session appends the returned suffix to the prefix to form the next
/// hypothesis.
pub trait SuffixGenerator: Send + Sync {
    fn suffix(&self, source: &Sentence, prefix: &Sentence) -> Result<Sentence, GeneratorError>;
}

impl<G: SuffixGenerator + ?Sized> SuffixGenerator for std::sync::Arc<G> {
    fn suffix(&self, source: &Sentence, prefix: &Sentence) -> Result<Sentence, GeneratorError> {
        (**self).suffix(source, prefix)
    }
}

impl<G: SuffixGenerator + ?Sized> SuffixGenerator for Box<G> {
    fn suffix(&self, source: &Sentence, prefix: &Sentence) -> Result<Sentence, GeneratorError> {
        (**self).suffix(source, prefix)
    }
}

/// Proposes the untouched source words after the prefix: the "do nothing"
/// baseline where the historical text itself is the hypothesis.
#[derive(Debug, Clone, Copy, Default)]
pub struct CopyGenerator;

impl SuffixGenerator for CopyGenerator {
    fn suffix(&self, source: &Sentence, prefix: &Sentence) -> Result<Sentence, GeneratorError> {
        let start = prefix.len().min(source.len());
        Ok(source.slice(start..source.len()))
    }
}

/// Replays fixed hypotheses keyed by prefix. Useful for trace replay and
/// for exercising the protocol without a trained model.
#[derive(Debug, Clone, Default)]
pub struct ScriptedGenerator {
    responses: HashMap<Sentence, Sentence>,
}

impl ScriptedGenerator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers the full hypothesis to return for `prefix`. The hypothesis
    /// must start with the prefix.
    pub fn respond(mut self, prefix: Sentence, hypothesis: Sentence) -> Self {
        assert!(hypothesis.starts_with(&prefix), "scripted hypothesis must extend its prefix");
        let suffix = hypothesis.slice(prefix.len()..hypothesis.len());
        self.responses.insert(prefix, suffix);
        self
    }
}

impl SuffixGenerator for ScriptedGenerator {
    fn suffix(&self, _source: &Sentence, prefix: &Sentence) -> Result<Sentence, GeneratorError> {
        self.responses
            .get(prefix)
            .cloned()
            .ok_or_else(|| format!("no scripted response for prefix {prefix:?}").into())
    }
}
