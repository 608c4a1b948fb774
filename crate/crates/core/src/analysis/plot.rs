use std::fmt::Write;

use crate::corpus::Token;
use crate::scalar::Scalar;
use crate::tsne::Projection;

use super::AnalysisError;

/// A query point and its neighbor set, drawn on top of the other points.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Highlight {
    pub query: Token,
    pub neighbors: Vec<Token>,
}

const SIZE: f64 = 800.0;
const MARGIN: f64 = 40.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Labelled scatter plot of a 2-D projection as an SVG 1.1 document.
pub fn plot_projection<T: Scalar>(
    projection: &Projection<T>,
    highlight: Option<&Highlight>,
) -> Result<String, AnalysisError> {
    if projection.dims() != 2 {
        return Err(AnalysisError::WrongDimensionality(projection.dims()));
    }
    let index_of = |t: Token| projection.tokens.iter().position(|&x| x == t);
    let mut role = vec![0u8; projection.len()];
    if let Some(h) = highlight {
        for &n in &h.neighbors {
            role[index_of(n).ok_or(AnalysisError::UnknownToken(n))?] = 1;
        }
        role[index_of(h.query).ok_or(AnalysisError::UnknownToken(h.query))?] = 2;
    }

    let points: Vec<(f64, f64)> =
        (0..projection.len()).map(|i| (projection.y.get(i, 0).as_f64(), projection.y.get(i, 1).as_f64())).collect();
    let (mut min_x, mut max_x, mut min_y, mut max_y) =
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &points {
        min_x = min_x.min(x);
        max_x = max_x.max(x);
        min_y = min_y.min(y);
        max_y = max_y.max(y);
    }
    // Uniform scale keeps the map's geometry; a single point sits centred.
    let span = (max_x - min_x).max(max_y - min_y);
    let scale = if span > 0.0 { (SIZE - 2.0 * MARGIN) / span } else { 0.0 };
    let (cx, cy) = ((min_x + max_x) / 2.0, (min_y + max_y) / 2.0);
    let to_px = |(x, y): (f64, f64)| {
        let px = if points.is_empty() { SIZE / 2.0 } else { SIZE / 2.0 + (x - cx) * scale };
        let py = if points.is_empty() { SIZE / 2.0 } else { SIZE / 2.0 - (y - cy) * scale };
        (px, py)
    };

    let mut svg = String::new();
    svg.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">"
    );
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    if let Some(h) = highlight {
        let q = to_px(points[index_of(h.query).expect("checked above")]);
        svg.push_str("<g stroke=\"#ff7f0e\" stroke-width=\"1\" stroke-opacity=\"0.6\">\n");
        for &n in &h.neighbors {
            let p = to_px(points[index_of(n).expect("checked above")]);
            let _ = writeln!(svg, "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\"/>", q.0, q.1, p.0, p.1);
        }
        svg.push_str("</g>\n");
    }

    svg.push_str("<g font-family=\"sans-serif\" font-size=\"11\">\n");
    // Background points first so highlighted ones are drawn on top.
    for layer in 0..=2u8 {
        for (i, &pt) in points.iter().enumerate().filter(|(i, _)| role[*i] == layer) {
            let (x, y) = to_px(pt);
            let (fill, r, weight) = match layer {
                2 => ("#d62728", 6.0, "bold"),
                1 => ("#ff7f0e", 4.5, "bold"),
                _ => ("#7f7f7f", 3.0, "normal"),
            };
            let _ = writeln!(svg, "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"{r}\" fill=\"{fill}\"/>");
            let _ = writeln!(
                svg,
                "<text x=\"{:.2}\" y=\"{:.2}\" font-weight=\"{weight}\" fill=\"{}\">{}</text>",
                x + r + 2.0,
                y + 4.0,
                if layer == 0 { "#444444" } else { fill },
                escape(&projection.labels[i])
            );
        }
    }
    svg.push_str("</g>\n</svg>\n");
    Ok(svg)
}
