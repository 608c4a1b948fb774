//! Embeddings for monophonic symbolic music.
//!
//! The pipeline reads melodies from Standard MIDI Files, builds one of
//! three token datasets (plain pitches, pitches augmented to all twelve
//! transpositions, or semitone intervals), trains token embeddings
//! jointly with an LSTM next-token predictor, projects them with exact
//! t-SNE and reports cosine nearest neighbors.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`). Training
//! and checkpoints use `f32`; the `f64` instantiations back gradient
//! checks and numerical oracles.

pub mod analysis;
pub mod corpus;
pub mod matrix;
pub mod midi;
pub mod scalar;
pub mod seqmodel;
pub mod tsne;

pub use corpus::{Token, TrainingCorpus, Variant, Vocabulary};
pub use matrix::Matrix;
pub use midi::{NoteEvent, PitchSequence};
pub use scalar::Scalar;

/// Single-precision model, as stored in checkpoints.
pub type Model32 = seqmodel::Model<f32>;
/// Double-precision model for gradient checks.
pub type Model64 = seqmodel::Model<f64>;
pub type Embeddings32 = seqmodel::EmbeddingMatrix<f32>;
pub type Embeddings64 = seqmodel::EmbeddingMatrix<f64>;
pub type Projection32 = tsne::Projection<f32>;
pub type Projection64 = tsne::Projection<f64>;
pub type Affinities64 = tsne::AffinityMatrix<f64>;
