//! Token embeddings trained jointly with an LSTM next-token predictor.
//!
//! The embedding lookup feeds a single LSTM layer whose hidden state is
//! projected to vocabulary logits. Gradients are derived by hand
//! (backpropagation through time) and checked against finite differences
//! in the tests.

mod checkpoint;
mod lstm;
mod train;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Token, Vocabulary};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC};
pub use lstm::{forward, loss, loss_and_gradients, softmax, ForwardCache, StepCache};
pub use train::{loss_history_csv, make_windows, train, Optimizer, TrainConfig, TrainOutcome};

/// Embedding size used throughout the experiments.
pub const DEFAULT_EMBEDDING_DIM: usize = 128;
pub const DEFAULT_HIDDEN_SIZE: usize = 128;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("token index {index} out of vocabulary of size {vocab}")]
    IndexOutOfVocabulary { index: usize, vocab: usize },
    #[error("sequence of length {0} is too short (need at least {1})")]
    SequenceTooShort(usize, usize),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("corpus yields no (input, target) pairs")]
    NoTrainingPairs,
    #[error("loss became non-finite in epoch {0}")]
    NonFinite(usize),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Gate order used for every per-gate array.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gate {
    Input = 0,
    Forget = 1,
    Output = 2,
    Candidate = 3,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Input, Gate::Forget, Gate::Output, Gate::Candidate];

    pub fn name(self) -> &'static str {
        match self {
            Gate::Input => "input",
            Gate::Forget => "forget",
            Gate::Output => "output",
            Gate::Candidate => "candidate",
        }
    }
}

/// V×D token vectors; row `i` belongs to `vocabulary.token(i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix<T> {
    vocabulary: Vocabulary,
    weights: Matrix<T>,
}

impl<T: Scalar> EmbeddingMatrix<T> {
    pub fn new(vocabulary: Vocabulary, weights: Matrix<T>) -> Self {
        assert_eq!(vocabulary.len(), weights.rows(), "one embedding row per token");
        Self { vocabulary, weights }
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn weights(&self) -> &Matrix<T> {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut Matrix<T> {
        &mut self.weights
    }

    pub fn dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn len(&self) -> usize {
        self.weights.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.rows() == 0
    }

    pub fn vector(&self, token: Token) -> Option<&[T]> {
        self.vocabulary.index_of(token).map(|i| self.weights.row(i))
    }
}

/// Gate weights act on the concatenation `[embedding; previous hidden]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmParameters<T> {
    input_dim: usize,
    hidden: usize,
    /// H×(D+H), indexed by [`Gate`].
    pub gate_weights: [Matrix<T>; 4],
    /// Length H, indexed by [`Gate`].
    pub gate_biases: [Vec<T>; 4],
    /// V×H.
    pub output_weights: Matrix<T>,
    pub output_bias: Vec<T>,
}

impl<T: Scalar> LstmParameters<T> {
    pub fn zeros(vocab: usize, input_dim: usize, hidden: usize) -> Self {
        let gate = || Matrix::zeros(hidden, input_dim + hidden);
        Self {
            input_dim,
            hidden,
            gate_weights: [gate(), gate(), gate(), gate()],
            gate_biases: std::array::from_fn(|_| vec![T::zero(); hidden]),
            output_weights: Matrix::zeros(vocab, hidden),
            output_bias: vec![T::zero(); vocab],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn vocab(&self) -> usize {
        self.output_bias.len()
    }

    pub fn gate(&self, gate: Gate) -> (&Matrix<T>, &[T]) {
        (&self.gate_weights[gate as usize], &self.gate_biases[gate as usize])
    }

    fn tensors(&self) -> Vec<(String, &[T])> {
        let mut out = Vec::with_capacity(10);
        for g in Gate::ALL {
            out.push((format!("w_{}", g.name()), self.gate_weights[g as usize].as_slice()));
        }
        for g in Gate::ALL {
            out.push((format!("b_{}", g.name()), self.gate_biases[g as usize].as_slice()));
        }
        out.push(("w_out".into(), self.output_weights.as_slice()));
        out.push(("b_out".into(), self.output_bias.as_slice()));
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = Vec::with_capacity(10);
        out.extend(self.gate_weights.iter_mut().map(|m| m.as_mut_slice()));
        out.extend(self.gate_biases.iter_mut().map(|b| b.as_mut_slice()));
        out.push(self.output_weights.as_mut_slice());
        out.push(self.output_bias.as_mut_slice());
        out
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|x| x.is_finite()))
    }

    pub fn cast<U: Scalar>(&self) -> LstmParameters<U> {
        LstmParameters {
            input_dim: self.input_dim,
            hidden: self.hidden,
            gate_weights: std::array::from_fn(|k| self.gate_weights[k].cast()),
            gate_biases: std::array::from_fn(|k| self.gate_biases[k].iter().map(|&x| U::of(x.as_f64())).collect()),
            output_weights: self.output_weights.cast(),
            output_bias: self.output_bias.iter().map(|&x| U::of(x.as_f64())).collect(),
        }
    }
}

/// Embedding table plus recurrent predictor.
#[derive(Clone, Debug, PartialEq)]
pub struct Model<T> {
    pub embedding: EmbeddingMatrix<T>,
    pub lstm: LstmParameters<T>,
}

impl<T: Scalar> Model<T> {
    pub fn vocab(&self) -> usize {
        self.embedding.len()
    }

    /// Named parameter tensors in a fixed order: embedding first, then
    /// gate weights, gate biases, output weights and output bias.
    pub fn tensors(&self) -> Vec<(String, &[T])> {
        let mut out = vec![("embedding".to_string(), self.embedding.weights.as_slice())];
        out.extend(self.lstm.tensors());
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = vec![self.embedding.weights.as_mut_slice()];
        out.extend(self.lstm.tensors_mut());
        out
    }

    pub fn is_finite(&self) -> bool {
        self.embedding.weights.is_finite() && self.lstm.is_finite()
    }

    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            embedding: EmbeddingMatrix::new(self.embedding.vocabulary.clone(), self.embedding.weights.cast()),
            lstm: self.lstm.cast(),
        }
    }
}

/// Gradients with the same layout as [`Model`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T> {
    pub embedding: Matrix<T>,
    pub lstm: LstmParameters<T>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(model: &Model<T>) -> Self {
        Self {
            embedding: Matrix::zeros(model.vocab(), model.embedding.dim()),
            lstm: LstmParameters::zeros(model.vocab(), model.lstm.input_dim, model.lstm.hidden),
        }
    }

    pub fn tensors(&self) -> Vec<(String, &[T])> {
        let mut out = vec![("embedding".to_string(), self.embedding.as_slice())];
        out.extend(self.lstm.tensors());
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = vec![self.embedding.as_mut_slice()];
        out.extend(self.lstm.tensors_mut());
        out
    }

    pub fn zero(&mut self) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x = T::zero());
        }
    }

    pub fn norm(&self) -> T {
        self.tensors().iter().flat_map(|(_, t)| t.iter()).fold(T::zero(), |acc, &g| acc + g * g).sqrt()
    }

    pub fn scale(&mut self, factor: T) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= factor);
        }
    }
}

fn uniform_matrix<T: Scalar>(rng: &mut ChaCha8Rng, rows: usize, cols: usize, fan_in: usize) -> Matrix<T> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    let data = (0..rows * cols).map(|_| T::of(rng.random_range(-bound..=bound))).collect();
    Matrix::from_vec(rows, cols, data)
}

/// Seeded initialisation: weights uniform in ±1/√fan_in, biases zero
/// except the forget gate bias, which starts at 1.
///
/// The embedding lookup is a one-hot product, so its fan-in is the
/// vocabulary size. Values are drawn in `f64` and rounded, so `f32` and
/// `f64` models from the same seed agree up to rounding.
pub fn init_parameters<T: Scalar>(vocabulary: &Vocabulary, embedding_dim: usize, hidden: usize, seed: u64) -> Model<T> {
    assert!(!vocabulary.is_empty() && embedding_dim > 0 && hidden > 0);
    let vocab = vocabulary.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let embedding = uniform_matrix(&mut rng, vocab, embedding_dim, vocab);
    let mut lstm = LstmParameters::zeros(vocab, embedding_dim, hidden);
    for g in Gate::ALL {
        lstm.gate_weights[g as usize] =
            uniform_matrix(&mut rng, hidden, embedding_dim + hidden, embedding_dim + hidden);
    }
    lstm.gate_biases[Gate::Forget as usize].iter_mut().for_each(|b| *b = T::one());
    lstm.output_weights = uniform_matrix(&mut rng, vocab, hidden, hidden);
    Model { embedding: EmbeddingMatrix::new(vocabulary.clone(), embedding), lstm }
}
