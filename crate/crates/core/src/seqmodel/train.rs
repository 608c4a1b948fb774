use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::TrainingCorpus;
use crate::scalar::Scalar;

use super::lstm::accumulate;
use super::{init_parameters, Gradients, Model, ModelError, DEFAULT_EMBEDDING_DIM, DEFAULT_HIDDEN_SIZE};

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPSILON: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Adam,
    Sgd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub embedding_dim: usize,
    pub hidden_size: usize,
    /// Inputs per window; a window spans `window + 1` tokens.
    pub window: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
    /// Global gradient-norm ceiling.
    pub clip_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            embedding_dim: DEFAULT_EMBEDDING_DIM,
            hidden_size: DEFAULT_HIDDEN_SIZE,
            window: 32,
            batch_size: 16,
            learning_rate: 1e-3,
            epochs: 30,
            seed: 0,
            optimizer: Optimizer::Adam,
            clip_norm: 5.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("embedding_dim", self.embedding_dim),
            ("hidden_size", self.hidden_size),
            ("window", self.window),
            ("batch_size", self.batch_size),
            ("epochs", self.epochs),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(ModelError::InvalidConfig(format!("{name} must be positive")));
        }
        for (name, v) in [("learning_rate", self.learning_rate), ("clip_norm", self.clip_norm)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ModelError::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

pub struct TrainOutcome<T> {
    pub model: Model<T>,
    /// Mean per-step cross-entropy of each epoch, measured during the epoch.
    pub loss_history: Vec<f64>,
}

/// Chops each sequence into windows of `window + 1` tokens with stride
/// `window`, so consecutive windows share one boundary token and every
/// (input, target) pair appears exactly once. Returned as
/// `(sequence, start, end)` ranges.
pub fn make_windows(sequences: &[Vec<usize>], window: usize) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for (s, seq) in sequences.iter().enumerate() {
        let mut start = 0;
        while start + 1 < seq.len() {
            let end = (start + window + 1).min(seq.len());
            out.push((s, start, end));
            start += window;
        }
    }
    out
}

struct Adam<T> {
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    step: i32,
}

impl<T: Scalar> Adam<T> {
    fn new(model: &Model<T>) -> Self {
        let zeros = || model.tensors().iter().map(|(_, t)| vec![T::zero(); t.len()]).collect();
        Self { m: zeros(), v: zeros(), step: 0 }
    }

    fn update(&mut self, model: &mut Model<T>, grads: &Gradients<T>, lr: f64) {
        self.step += 1;
        let (b1, b2) = (T::of(ADAM_BETA1), T::of(ADAM_BETA2));
        let correct1 = 1.0 - ADAM_BETA1.powi(self.step);
        let correct2 = 1.0 - ADAM_BETA2.powi(self.step);
        let lr = T::of(lr);
        let (c1, c2, eps) = (T::of(correct1), T::of(correct2), T::of(ADAM_EPSILON));
        let grads = grads.tensors();
        for (((p, (_, g)), m), v) in model.tensors_mut().into_iter().zip(&grads).zip(&mut self.m).zip(&mut self.v) {
            for k in 0..p.len() {
                m[k] = b1 * m[k] + (T::one() - b1) * g[k];
                v[k] = b2 * v[k] + (T::one() - b2) * g[k] * g[k];
                p[k] -= lr * (m[k] / c1) / ((v[k] / c2).sqrt() + eps);
            }
        }
    }
}

fn sgd_update<T: Scalar>(model: &mut Model<T>, grads: &Gradients<T>, lr: f64) {
    let lr = T::of(lr);
    for (p, (_, g)) in model.tensors_mut().into_iter().zip(grads.tensors()) {
        p.iter_mut().zip(g).for_each(|(w, &d)| *w -= lr * d);
    }
}

/// Trains embeddings and predictor jointly with teacher forcing.
///
/// Each epoch visits every window once in a seeded shuffled order. A batch
/// gradient is the token-weighted mean over its windows, clipped to
/// `clip_norm` before the optimizer step.
pub fn train<T: Scalar>(corpus: &TrainingCorpus, config: &TrainConfig) -> Result<TrainOutcome<T>, ModelError> {
    config.validate()?;
    let mut model: Model<T> =
        init_parameters(corpus.vocabulary(), config.embedding_dim, config.hidden_size, config.seed);
    let mut windows = make_windows(corpus.sequences(), config.window);
    if windows.is_empty() {
        return Err(ModelError::NoTrainingPairs);
    }
    // Shuffling draws from its own stream so it does not depend on init.
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5EED_5EED_5EED_5EED);
    let mut adam = Adam::new(&model);
    let mut grads = Gradients::zeros_like(&model);
    let clip = T::of(config.clip_norm);
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        windows.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut epoch_steps = 0usize;
        for batch in windows.chunks(config.batch_size) {
            let steps: usize = batch.iter().map(|(_, a, b)| b - a - 1).sum();
            let scale = T::one() / T::of(steps as f64);
            grads.zero();
            for &(s, a, b) in batch {
                let seq = &corpus.sequences()[s][a..b];
                epoch_loss += accumulate(&model, seq, scale, &mut grads)?.as_f64();
            }
            epoch_steps += steps;

            let norm = grads.norm();
            if !norm.is_finite() {
                return Err(ModelError::NonFinite(epoch));
            }
            if norm > clip {
                grads.scale(clip / norm);
            }
            match config.optimizer {
                Optimizer::Adam => adam.update(&mut model, &grads, config.learning_rate),
                Optimizer::Sgd => sgd_update(&mut model, &grads, config.learning_rate),
            }
        }
        let mean = epoch_loss / epoch_steps as f64;
        if !mean.is_finite() {
            return Err(ModelError::NonFinite(epoch));
        }
        history.push(mean);
    }
    Ok(TrainOutcome { model, loss_history: history })
}

/// `epoch,loss` CSV.
pub fn loss_history_csv(history: &[f64]) -> String {
    let mut out = String::from("epoch,loss\n");
    for (epoch, loss) in history.iter().enumerate() {
        out.push_str(&format!("{epoch},{loss}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Variant;

    #[test]
    fn windows_cover_every_pair_once() {
        let seqs = vec![(0..10).collect::<Vec<usize>>(), vec![0, 1], vec![5]];
        let w = make_windows(&seqs, 4);
        assert_eq!(w, vec![(0, 0, 5), (0, 4, 9), (0, 8, 10), (1, 0, 2)]);
        let pairs: usize = w.iter().map(|(_, a, b)| b - a - 1).sum();
        assert_eq!(pairs, 9 + 1);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig { window: 0, ..Default::default() };
        assert!(matches!(bad.validate(), Err(ModelError::InvalidConfig(_))));
        let bad = TrainConfig { learning_rate: -1.0, ..Default::default() };
        assert!(matches!(bad.validate(), Err(ModelError::InvalidConfig(_))));
    }

    #[test]
    fn single_step_interval_sequences_yield_no_pairs() {
        let corpus = TrainingCorpus::from_token_sequences(Variant::Interval, vec![vec![3], vec![-1]]).unwrap();
        let cfg = TrainConfig { embedding_dim: 2, hidden_size: 2, epochs: 1, ..Default::default() };
        assert!(matches!(train::<f32>(&corpus, &cfg), Err(ModelError::NoTrainingPairs)));
    }

    #[test]
    fn csv_format() {
        assert_eq!(loss_history_csv(&[0.5, 0.25]), "epoch,loss\n0,0.5\n1,0.25\n");
    }

    #[test]
    fn sgd_also_reduces_loss() {
        let seq: Vec<i32> = (0..40).map(|i| i % 3).collect();
        let corpus = TrainingCorpus::from_token_sequences(Variant::Control, vec![seq]).unwrap();
        let cfg = TrainConfig {
            embedding_dim: 4,
            hidden_size: 6,
            window: 8,
            batch_size: 1,
            learning_rate: 0.5,
            epochs: 40,
            optimizer: Optimizer::Sgd,
            ..Default::default()
        };
        let out = train::<f64>(&corpus, &cfg).unwrap();
        assert!(out.loss_history.last().unwrap() < &(0.5 * out.loss_history[0]));
    }
}
