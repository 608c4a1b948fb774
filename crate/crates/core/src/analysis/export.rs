//! Tab-separated exports readable by embedding projector tools.
//!
//! Values are written in their shortest round-trip decimal form, so a
//! re-import reproduces every bit.

use crate::corpus::Token;
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::seqmodel::EmbeddingMatrix;
use crate::tsne::Projection;

use super::{parse_note_name, AnalysisError};

fn join_row<T: Scalar>(row: &[T]) -> String {
    row.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join("\t")
}

/// Returns `(vectors, metadata)`: one tab-separated embedding row per
/// line, and a `token<TAB>label` table with a header line.
pub fn export_projector<T: Scalar>(
    embeddings: &EmbeddingMatrix<T>,
    labels: &[String],
) -> Result<(String, String), AnalysisError> {
    let rows = embeddings.len();
    if rows == 0 || labels.len() != rows {
        return Err(AnalysisError::LengthMismatch { rows, labels: labels.len() });
    }
    let mut vectors = String::new();
    let mut metadata = String::from("token\tlabel\n");
    for (i, label) in labels.iter().enumerate() {
        vectors.push_str(&join_row(embeddings.weights().row(i)));
        vectors.push('\n');
        metadata.push_str(&format!("{}\t{label}\n", embeddings.vocabulary().token(i)));
    }
    Ok((vectors, metadata))
}

fn parse_values<T: Scalar>(line: &str, lineno: usize) -> Result<Vec<T>, AnalysisError> {
    line.split('\t')
        .map(|v| {
            v.parse::<T>().map_err(|_| AnalysisError::Parse { line: lineno, message: format!("bad number `{v}`") })
        })
        .collect()
}

pub fn import_projector_vectors<T: Scalar>(text: &str) -> Result<Matrix<T>, AnalysisError> {
    let rows = text.lines().enumerate().map(|(i, line)| parse_values(line, i + 1)).collect::<Result<Vec<_>, _>>()?;
    if rows.is_empty() {
        return Err(AnalysisError::LengthMismatch { rows: 0, labels: 0 });
    }
    let cols = rows[0].len();
    if let Some(i) = rows.iter().position(|r| r.len() != cols) {
        return Err(AnalysisError::Parse { line: i + 1, message: "ragged row".into() });
    }
    Ok(Matrix::from_rows(&rows))
}

pub fn import_projector_metadata(text: &str) -> Result<Vec<(Token, String)>, AnalysisError> {
    let mut lines = text.lines();
    if lines.next() != Some("token\tlabel") {
        return Err(AnalysisError::Parse { line: 1, message: "expected `token<TAB>label` header".into() });
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let (token, label) = line
                .split_once('\t')
                .ok_or_else(|| AnalysisError::Parse { line: i + 2, message: "expected two columns".into() })?;
            let token = token
                .parse()
                .map_err(|_| AnalysisError::Parse { line: i + 2, message: format!("bad token `{token}`") })?;
            Ok((token, label.to_string()))
        })
        .collect()
}

/// `token<TAB>y1<TAB>y2[<TAB>y3]` table, one labelled point per row.
pub fn projection_tsv<T: Scalar>(projection: &Projection<T>) -> String {
    let header: Vec<String> = (1..=projection.dims()).map(|d| format!("y{d}")).collect();
    let mut out = format!("token\t{}\n", header.join("\t"));
    for (i, label) in projection.labels.iter().enumerate() {
        out.push_str(&format!("{label}\t{}\n", join_row(projection.y.row(i))));
    }
    out
}

/// Reads a projection table back. Labels that parse as integers are taken
/// as interval tokens, anything else as note names.
pub fn parse_projection_tsv(text: &str) -> Result<Projection<f64>, AnalysisError> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let cols: Vec<&str> = header.split('\t').collect();
    let dims = cols.len().saturating_sub(1);
    let expected: Vec<String> =
        std::iter::once("token".to_string()).chain((1..=dims).map(|d| format!("y{d}"))).collect();
    if dims == 0 || cols != expected {
        return Err(AnalysisError::Parse { line: 1, message: format!("bad header `{header}`") });
    }
    let (mut tokens, mut labels, mut rows) = (Vec::new(), Vec::new(), Vec::new());
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let (label, values) = line
            .split_once('\t')
            .ok_or_else(|| AnalysisError::Parse { line: lineno, message: "missing coordinates".into() })?;
        let values: Vec<f64> = parse_values(values, lineno)?;
        if values.len() != dims {
            return Err(AnalysisError::Parse {
                line: lineno,
                message: format!("expected {dims} coordinates, found {}", values.len()),
            });
        }
        let token = match label.parse::<Token>() {
            Ok(t) => t,
            Err(_) => {
                parse_note_name(label).map_err(|e| AnalysisError::Parse { line: lineno, message: e.to_string() })?
            }
        };
        tokens.push(token);
        labels.push(label.to_string());
        rows.push(values);
    }
    let y = if rows.is_empty() { Matrix::zeros(0, dims) } else { Matrix::from_rows(&rows) };
    Ok(Projection { y, tokens, labels, kl_history: Vec::new() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Vocabulary;
    use proptest::prelude::*;

    #[test]
    fn two_by_two_example() {
        let e = EmbeddingMatrix::new(
            Vocabulary::from_tokens([60, 62]),
            Matrix::from_rows(&[vec![1.0f32, 2.0], vec![3.0, 4.0]]),
        );
        let (vectors, metadata) = export_projector(&e, &["C5".into(), "D5".into()]).unwrap();
        assert_eq!(vectors, "1.0\t2.0\n3.0\t4.0\n");
        assert_eq!(metadata, "token\tlabel\n60\tC5\n62\tD5\n");
        assert_eq!(import_projector_metadata(&metadata).unwrap(), vec![(60, "C5".to_string()), (62, "D5".to_string())]);
    }

    #[test]
    fn length_mismatch() {
        let e = EmbeddingMatrix::new(Vocabulary::from_tokens([1]), Matrix::from_rows(&[vec![1.0f32]]));
        assert_eq!(export_projector(&e, &[]), Err(AnalysisError::LengthMismatch { rows: 1, labels: 0 }));
        let empty = EmbeddingMatrix::new(Vocabulary::from_tokens([]), Matrix::<f32>::zeros(0, 3));
        assert!(matches!(export_projector(&empty, &[]), Err(AnalysisError::LengthMismatch { .. })));
        assert!(import_projector_vectors::<f32>("").is_err());
    }

    #[test]
    fn projection_table_round_trip() {
        let p = Projection {
            y: Matrix::from_rows(&[vec![0.5f64, -1.25, 3.0], vec![1e-7, 2.0, 0.1]]),
            tokens: vec![60, 61],
            labels: vec!["C5".into(), "C♯5".into()],
            kl_history: vec![],
        };
        let text = projection_tsv(&p);
        assert!(text.starts_with("token\ty1\ty2\ty3\nC5\t0.5\t-1.25\t3.0\n"));
        let back = parse_projection_tsv(&text).unwrap();
        assert_eq!(back.y, p.y);
        assert_eq!(back.tokens, p.tokens);
        assert_eq!(back.labels, p.labels);
        assert!(parse_projection_tsv("token\tx\n").is_err());
    }

    proptest! {
        #[test]
        fn vectors_round_trip_bit_exact(data in prop::collection::vec(any::<f32>().prop_filter("finite", |v| v.is_finite()), 12)) {
            let e = EmbeddingMatrix::new(Vocabulary::from_tokens(0..4), Matrix::from_vec(4, 3, data));
            let labels: Vec<String> = (0..4).map(|i| i.to_string()).collect();
            let (vectors, _) = export_projector(&e, &labels).unwrap();
            let back: Matrix<f32> = import_projector_vectors(&vectors).unwrap();
            let bits = |m: &Matrix<f32>| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&back), bits(e.weights()));
        }
    }
}
