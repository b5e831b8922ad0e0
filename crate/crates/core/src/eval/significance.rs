//! Paired approximate randomization tests over per-sentence metric
//! components.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::bleu::check_lengths;
use super::EvalError;

/// Repetitions used for reported significance marks.
pub const DEFAULT_REPETITIONS: usize = 10_000;

/// Significance level for the report marks.
pub const ALPHA: f64 = 0.05;

/// Largest `n` for which [`exact_randomization`] will enumerate `2^n`
/// assignments.
pub const MAX_EXACT_SENTENCES: usize = 20;

fn statistic<C>(a: &[C], b: &[C], metric: &impl Fn(&[C]) -> f64) -> f64 {
    (metric(a) - metric(b)).abs()
}

/// Two-sided p-value for the difference `|metric(A) - metric(B)|`.
///
/// Each repetition swaps every sentence's A/B components with probability
/// one half and recomputes the corpus metric on both shuffled systems. The
/// p-value is `(count(stat_perm >= stat_obs) + 1) / (reps + 1)`.
pub fn approx_randomization<C: Clone>(
    a: &[C],
    b: &[C],
    metric: impl Fn(&[C]) -> f64,
    reps: usize,
    seed: u64,
) -> Result<f64, EvalError> {
    check_lengths(a.len(), b.len())?;
    let observed = statistic(a, b, &metric);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    let mut at_least = 0usize;
    for _ in 0..reps {
        for i in 0..a.len() {
            if rng.gen_bool(0.5) {
                xa[i] = b[i].clone();
                xb[i] = a[i].clone();
            } else {
                xa[i] = a[i].clone();
                xb[i] = b[i].clone();
            }
        }
        if statistic(&xa, &xb, &metric) >= observed {
            at_least += 1;
        }
    }
    Ok((at_least + 1) as f64 / (reps + 1) as f64)
}

/// Exact permutation p-value over all `2^n` swap assignments.
pub fn exact_randomization<C: Clone>(
    a: &[C],
    b: &[C],
    metric: impl Fn(&[C]) -> f64,
) -> Result<f64, EvalError> {
    check_lengths(a.len(), b.len())?;
    let n = a.len();
    if n > MAX_EXACT_SENTENCES {
        return Err(EvalError::TooLarge(n));
    }
    let observed = statistic(a, b, &metric);
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    let mut at_least = 0u64;
    for mask in 0u64..(1 << n) {
        for i in 0..n {
            let swap = mask >> i & 1 == 1;
            xa[i] = if swap { b[i].clone() } else { a[i].clone() };
            xb[i] = if swap { a[i].clone() } else { b[i].clone() };
        }
        if statistic(&xa, &xb, &metric) >= observed {
            at_least += 1;
        }
    }
    Ok(at_least as f64 / (1u64 << n) as f64)
}

/// Mean of scalar per-sentence scores, a convenience corpus metric.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}
