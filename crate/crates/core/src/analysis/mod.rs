//! Neighbor reports, pitch naming and export formats for trained embeddings.

mod export;
mod names;
mod neighbors;
mod plot;

use thiserror::Error;

pub use export::{
    export_projector, import_projector_metadata, import_projector_vectors, parse_projection_tsv, projection_tsv,
};
pub use names::{note_name, parse_note_name, parse_query, token_label, NOTE_NAMES};
pub use neighbors::{cosine_distance, nearest_neighbors, report_csv, report_table, NeighborReport};
pub use plot::{plot_projection, Highlight};

use crate::corpus::Token;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("pitch {0} outside 0..=127")]
    PitchOutOfRange(i32),
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("token {0} is not in the vocabulary")]
    UnknownToken(Token),
    #[error("k = {k} but only {available} other tokens exist")]
    KTooLarge { k: usize, available: usize },
    #[error("{rows} rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("plots need a 2-D projection, got {0} dimensions")]
    WrongDimensionality(usize),
    #[error("cannot parse `{input}` as {kind}; {hint}")]
    BadQuery { input: String, kind: &'static str, hint: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}
