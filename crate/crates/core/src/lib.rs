//! Prefix-based interactive machine translation for modernizing historical
//! text.
//!
//! The crate is organised bottom-up:
//!
//! * [`text`]: tokenization, corpora, vocabularies, byte pair encoding and
//!   synthetic drift corpora.
//! * [`smt`]: a phrase-based statistical engine (IBM-1 alignment, phrase
//!   extraction, Kneser-Ney language model, stack decoder producing word
//!   graphs, error-correcting suffix search, weight tuning).
//! * [`nmt`]: a small attention encoder-decoder with exact gradients and
//!   prefix-constrained beam search.
//! * [`imt`]: the interactive protocol (sessions, suffix generators, the
//!   simulated user).
//! * [`eval`]: BLEU, TER, WSR/MAR effort metrics and approximate
//!   randomization significance tests.

pub mod eval;
pub mod imt;
pub mod nmt;
pub mod smt;
pub mod text;

pub use text::{detokenize, tokenize, ParallelCorpus, Sentence};
