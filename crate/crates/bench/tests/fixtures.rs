use imt_bench::{drift_corpus, nmt_system, smt_model};

#[test]
fn fixtures_are_deterministic_and_usable() {
    let a = drift_corpus(60);
    assert_eq!(a, drift_corpus(60));
    let smt = smt_model(&a);
    let pair = &a.pairs()[0];
    assert!(!smt.translate(&pair.source).unwrap().is_empty());
    let nmt = nmt_system(&a, 8);
    assert_eq!(nmt, nmt_system(&a, 8));
}
