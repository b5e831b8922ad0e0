//! Mini-batch Adam training.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::Params;
use super::NmtError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub label_smoothing: f64,
    pub max_updates: usize,
    pub seed: u64,
    /// Global gradient-norm clipping threshold; `None` disables clipping.
    pub clip_norm: Option<f64>,
}

pub const DEFAULT_LEARNING_RATE: f64 = 0.0002;
pub const DEFAULT_BATCH_SIZE: usize = 60;
pub const DEFAULT_LABEL_SMOOTHING: f64 = 0.1;

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: DEFAULT_LEARNING_RATE,
            batch_size: DEFAULT_BATCH_SIZE,
            label_smoothing: DEFAULT_LABEL_SMOOTHING,
            max_updates: 1000,
            seed: 0,
            clip_norm: Some(5.0),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NmtError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(NmtError::InvalidConfig("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return Err(NmtError::InvalidConfig("label_smoothing must be in [0, 1)".into()));
        }
        if self.batch_size == 0 {
            return Err(NmtError::InvalidConfig("batch_size must be at least 1".into()));
        }
        if self.clip_norm.is_some_and(|c| !(c.is_finite() && c > 0.0)) {
            return Err(NmtError::InvalidConfig("clip_norm must be positive".into()));
        }
        Ok(())
    }
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPSILON: f64 = 1e-8;

struct Adam {
    m: Params,
    v: Params,
    t: i32,
}

impl Adam {
    fn new(p: &Params) -> Self {
        let dims = p.dims();
        Adam {
            m: Params::zeros(&dims),
            v: Params::zeros(&dims),
            t: 0,
        }
    }

    fn update(&mut self, p: &mut Params, g: &Params, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t);
        let c2 = 1.0 - BETA2.powi(self.t);
        let tensors = p
            .tensors_mut()
            .into_iter()
            .zip(g.tensors())
            .zip(self.m.tensors_mut().into_iter().zip(self.v.tensors_mut()));
        for (((_, p), (_, g)), ((_, m), (_, v))) in tensors {
            let (p, g, m, v) = (p.data_mut(), g.data(), m.data_mut(), v.data_mut());
            for k in 0..p.len() {
                m[k] = BETA1 * m[k] + (1.0 - BETA1) * g[k];
                v[k] = BETA2 * v[k] + (1.0 - BETA2) * g[k] * g[k];
                p[k] -= lr * (m[k] / c1) / ((v[k] / c2).sqrt() + EPSILON);
            }
        }
    }
}

/// Trains on id sequences (sources already end in EOS; targets do not).
/// Batches are drawn from seeded per-epoch shuffles. Returns the trained
/// parameters and the loss of every batch before its update.
pub fn train_params(
    init: &Params,
    data: &[(Vec<u32>, Vec<u32>)],
    cfg: &TrainConfig,
) -> Result<(Params, Vec<f64>), NmtError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(NmtError::EmptyCorpus);
    }
    let mut p = init.clone();
    let mut adam = Adam::new(&p);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut cursor = order.len();
    let mut trace = Vec::with_capacity(cfg.max_updates);
    let mut grads = Params::zeros(&p.dims());
    for update in 0..cfg.max_updates {
        let mut batch: Vec<(&[u32], &[u32])> = Vec::with_capacity(cfg.batch_size);
        while batch.len() < cfg.batch_size.min(data.len()) {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let (s, t) = &data[order[cursor]];
            batch.push((s, t));
            cursor += 1;
        }
        grads.scale(0.0);
        let loss = p.batch_loss(&batch, cfg.label_smoothing, Some(&mut grads));
        if !loss.is_finite() {
            return Err(NmtError::Diverged(update));
        }
        if let Some(c) = cfg.clip_norm {
            let norm = grads.sum_squares().sqrt();
            if norm > c {
                grads.scale(c / norm);
            }
        }
        adam.update(&mut p, &grads, cfg.learning_rate);
        trace.push(loss);
        if update % 100 == 0 {
            log::debug!("update {update}: loss {loss:.4}");
        }
    }
    Ok((p, trace))
}
