//! The prefix-based interactive protocol.
//!
//! A session starts from the generator's suggestion for the empty prefix.
//! Each correction at position `i` validates the words before `i` plus the
//! typed word, and the generator completes that prefix. The simulated user
//! always corrects the leftmost word that differs from the reference.

mod engines;
mod generator;
mod session;
mod simulate;

pub use engines::{NmtGenerator, SmtGenerator, GRAPH_CACHE_CAPACITY};
pub use generator::{CopyGenerator, GeneratorError, ScriptedGenerator, SuffixGenerator};
pub use session::{Correction, ImtSession, Iteration, SessionMetrics, SessionStatus};
pub use simulate::{leftmost_divergence, simulate_session, simulate_trace, Divergence};

#[derive(Debug, thiserror::Error)]
pub enum ImtError {
    #[error("suffix generation failed: {0}")]
    Generator(#[source] GeneratorError),
    #[error("position {position} out of range 1..={max}")]
    PositionOutOfRange { position: usize, max: usize },
    #[error("position {position} lies inside the validated prefix of length {prefix_len}")]
    InsidePrefix { position: usize, prefix_len: usize },
    #[error("invalid correction word {0:?}")]
    InvalidWord(String),
    #[error("session already accepted")]
    AlreadyAccepted,
    #[error("reference is empty")]
    EmptyReference,
    #[error("simulation did not converge after {0} iterations")]
    NoConvergence(usize),
}
