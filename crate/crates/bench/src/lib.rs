//! Shared fixtures for the benchmarks: a seeded synthetic drift corpus and
//! engines trained on it.

use imtkit::nmt::{NmtSystem, NmtSystemConfig, TrainConfig};
use imtkit::smt::{train_smt, SmtModel, SmtTrainConfig};
use imtkit::text::{builtin_rules, sample_modern_text, synth_drift};
use imtkit::ParallelCorpus;

pub const SEED: u64 = 17;

/// `n` historical/modern pairs from the built-in drift rules.
pub fn drift_corpus(n: usize) -> ParallelCorpus {
    synth_drift(&sample_modern_text(n, SEED), &builtin_rules(), SEED)
}

pub fn smt_model(corpus: &ParallelCorpus) -> SmtModel {
    train_smt(corpus, &[], &SmtTrainConfig::default()).expect("training succeeds")
}

/// A small network trained briefly; benchmark speed does not depend on
/// how well it translates.
pub fn nmt_system(corpus: &ParallelCorpus, dim: usize) -> NmtSystem {
    let cfg = NmtSystemConfig {
        merges: 300,
        embed: dim,
        hidden: dim,
        train: TrainConfig {
            learning_rate: 0.01,
            batch_size: 20,
            max_updates: 20,
            seed: SEED,
            ..TrainConfig::default()
        },
        ..NmtSystemConfig::default()
    };
    NmtSystem::train(corpus, &cfg).expect("training succeeds").0
}
