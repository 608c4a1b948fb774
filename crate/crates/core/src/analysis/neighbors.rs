use crate::corpus::{Token, Variant};
use crate::matrix::dot;
use crate::scalar::Scalar;
use crate::seqmodel::EmbeddingMatrix;

use super::{token_label, AnalysisError};

/// Nearest tokens to a query, ascending by cosine distance.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighborReport {
    pub query_token: Token,
    pub neighbors: Vec<(Token, f64)>,
}

/// `1 − cos θ`, in `[0, 2]`.
pub fn cosine_distance<T: Scalar>(a: &[T], b: &[T]) -> Result<f64, AnalysisError> {
    assert_eq!(a.len(), b.len(), "vectors must share a dimension");
    let (na, nb) = (dot(a, a).as_f64(), dot(b, b).as_f64());
    if na == 0.0 || nb == 0.0 {
        return Err(AnalysisError::ZeroVector);
    }
    let cos = dot(a, b).as_f64() / (na * nb).sqrt();
    Ok((1.0 - cos).clamp(0.0, 2.0))
}

/// Exhaustive scan; ties are broken by ascending token value.
pub fn nearest_neighbors<T: Scalar>(
    embeddings: &EmbeddingMatrix<T>,
    query: Token,
    k: usize,
) -> Result<NeighborReport, AnalysisError> {
    let vocab = embeddings.vocabulary();
    let q = vocab.index_of(query).ok_or(AnalysisError::UnknownToken(query))?;
    let available = vocab.len() - 1;
    if k == 0 || k > available {
        return Err(AnalysisError::KTooLarge { k, available });
    }
    let weights = embeddings.weights();
    let mut scored = Vec::with_capacity(available);
    for (i, &token) in vocab.tokens().iter().enumerate() {
        if i != q {
            scored.push((token, cosine_distance(weights.row(q), weights.row(i))?));
        }
    }
    scored.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    Ok(NeighborReport { query_token: query, neighbors: scored })
}

const COLUMN: usize = 12;

/// Plain-text table: total embedding count, the selection, then one row
/// per neighbor with the distance to three decimals.
pub fn report_table<T: Scalar>(
    embeddings: &EmbeddingMatrix<T>,
    variant: Variant,
    query: Token,
    k: usize,
) -> Result<String, AnalysisError> {
    let report = nearest_neighbors(embeddings, query, k)?;
    let kind = if variant.is_note() { "Note" } else { "Interval" };
    let mut out = String::new();
    out.push_str(&format!("{:<COLUMN$}{}\n", "Total:", embeddings.len()));
    out.push_str(&format!("{:<COLUMN$}{}\n", "Selection:", token_label(query, variant)));
    out.push_str(&format!("{:<COLUMN$}{}\n", kind, "Cos"));
    for (token, distance) in &report.neighbors {
        let label = token_label(*token, variant);
        // Pad by characters, not bytes: labels may contain '♯'.
        let pad = COLUMN.saturating_sub(label.chars().count()).max(1);
        out.push_str(&format!("{label}{}{distance:.3}\n", " ".repeat(pad)));
    }
    Ok(out)
}

pub fn report_csv(report: &NeighborReport, variant: Variant) -> String {
    let mut out = String::from("rank,token,label,cosine_distance\n");
    for (rank, (token, distance)) in report.neighbors.iter().enumerate() {
        out.push_str(&format!("{},{token},{},{distance}\n", rank + 1, token_label(*token, variant)));
    }
    out
}
