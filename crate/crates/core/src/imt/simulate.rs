use super::{Correction, ImtError, ImtSession, SessionMetrics, SuffixGenerator};
use crate::text::Sentence;

/// The leftmost point where a hypothesis departs from the reference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Divergence {
    /// 1-based position.
    pub position: usize,
    pub correction: Correction,
}

/// Finds the first position where `hypothesis` and `reference` differ.
///
/// Returns the reference word at that position, or [`Correction::End`] when
/// the hypothesis continues past the end of the reference. `None` means the
/// two are identical.
pub fn leftmost_divergence(hypothesis: &Sentence, reference: &Sentence) -> Option<Divergence> {
    let common = hypothesis
        .iter()
        .zip(reference.iter())
        .take_while(|(h, r)| h == r)
        .count();
    let position = common + 1;
    if common < reference.len() {
        Some(Divergence {
            position,
            correction: Correction::Word(reference.tokens()[common].clone()),
        })
    } else if common < hypothesis.len() {
        Some(Divergence {
            position,
            correction: Correction::End,
        })
    } else {
        None
    }
}

/// Runs the simulated user to convergence and returns the accepted session.
pub fn simulate_trace(
    generator: &dyn SuffixGenerator,
    source: &Sentence,
    reference: &Sentence,
) -> Result<ImtSession, ImtError> {
    if reference.is_empty() {
        return Err(ImtError::EmptyReference);
    }
    let mut session = ImtSession::start(0, generator, source.clone())?;
    // Each word correction grows the validated prefix and a truncation ends
    // the loop, so |reference| + 1 iterations always suffice.
    let limit = reference.len() + 1;
    while let Some(d) = leftmost_divergence(session.hypothesis(), reference) {
        if session.log().len() >= limit {
            return Err(ImtError::NoConvergence(limit));
        }
        session.apply(generator, d.position, &d.correction)?;
    }
    session.accept()?;
    Ok(session)
}

/// Simulates a user who always corrects the leftmost wrong word until the
/// hypothesis equals the reference, then accepts.
pub fn simulate_session(
    generator: &dyn SuffixGenerator,
    source: &Sentence,
    reference: &Sentence,
) -> Result<SessionMetrics, ImtError> {
    simulate_trace(generator, source, reference).map(|s| s.metrics())
}
