//! Exact t-SNE.
//!
//! High-dimensional affinities are Gaussian conditionals
//! `p(j|i) ∝ exp(-‖xᵢ-xⱼ‖² / 2σᵢ²)`, each σᵢ found by bisection so the row
//! perplexity matches the target, then symmetrised as
//! `Pᵢⱼ = (p(j|i) + p(i|j)) / 2n`. The map uses the Student-t kernel
//! `qᵢⱼ ∝ (1 + ‖yᵢ-yⱼ‖²)⁻¹` and minimises `KL(P‖Q)` by gradient descent
//! with momentum, early exaggeration and per-coordinate gains.
//!
//! Vocabularies hold at most a few hundred tokens, so every pairwise term
//! is computed exactly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Token;
use crate::matrix::{squared_distance, Matrix};
use crate::scalar::Scalar;

/// Bisection stops once `|log₂ perplexity − log₂ target|` falls below this.
pub const PERPLEXITY_TOLERANCE: f64 = 1e-10;
pub const PERPLEXITY_MAX_ITERATIONS: usize = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TsneError {
    #[error("all distances in row are zero")]
    DegenerateRow,
    #[error("perplexity {perplexity} outside [2, {max}]")]
    PerplexityOutOfRange { perplexity: f64, max: usize },
    #[error("need at least {min} points, got {got}")]
    TooFewPoints { min: usize, got: usize },
    #[error("rows {0} and {1} are identical")]
    DuplicatePoints(usize, usize),
    #[error("output dimensionality must be 2 or 3, got {0}")]
    WrongDimensionality(usize),
    #[error("non-finite gradient at iteration {0}")]
    NonFiniteGradient(usize),
    #[error("affinity matrix is not square or does not match the map ({0})")]
    ShapeMismatch(String),
}

/// Symmetric joint probabilities over pairs of input points.
#[derive(Clone, Debug, PartialEq)]
pub struct AffinityMatrix<T> {
    pub p: Matrix<T>,
    pub perplexity: f64,
    /// Bandwidth chosen for each row.
    pub sigmas: Vec<T>,
}

impl<T: Scalar> AffinityMatrix<T> {
    pub fn len(&self) -> usize {
        self.p.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.p.rows() == 0
    }
}

/// Conditional probabilities of one row for precision `beta = 1/2σ²`,
/// plus their Shannon entropy in bits.
fn conditional_row(distances: &[f64], beta: f64) -> (Vec<f64>, f64) {
    let min = distances.iter().copied().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = distances.iter().map(|&d| (-(d - min) * beta).exp()).collect();
    let sum: f64 = weights.iter().sum();
    let probs: Vec<f64> = weights.iter().map(|w| w / sum).collect();
    let entropy = -probs.iter().filter(|&&p| p > 0.0).map(|&p| p * p.log2()).sum::<f64>();
    (probs, entropy)
}

fn search_beta(distances: &[f64], target_perplexity: f64) -> Result<f64, TsneError> {
    let max = distances.len();
    if !(2.0..=max as f64).contains(&target_perplexity) {
        return Err(TsneError::PerplexityOutOfRange { perplexity: target_perplexity, max });
    }
    if distances.iter().all(|&d| d == 0.0) {
        return Err(TsneError::DegenerateRow);
    }
    let target = target_perplexity.log2();
    let (mut beta, mut lo, mut hi) = (1.0, 0.0, f64::INFINITY);
    let mut best = (f64::INFINITY, beta);
    for _ in 0..PERPLEXITY_MAX_ITERATIONS {
        let (_, entropy) = conditional_row(distances, beta);
        let diff = entropy - target;
        if diff.abs() < best.0 {
            best = (diff.abs(), beta);
        }
        if diff.abs() < PERPLEXITY_TOLERANCE {
            break;
        }
        if diff > 0.0 {
            // Too flat: sharpen.
            lo = beta;
            beta = if hi.is_infinite() { beta * 2.0 } else { 0.5 * (beta + hi) };
        } else {
            hi = beta;
            beta = 0.5 * (beta + lo);
        }
    }
    // Rows whose entropy does not depend on σ (equidistant neighbours) never
    // converge; the closest bandwidth seen is as good as any.
    Ok(best.1)
}

/// Finds σ such that the perplexity of `p(·|i)` over the given squared
/// distances equals `target_perplexity`.
pub fn perplexity_search<T: Scalar>(distances_row: &[T], target_perplexity: f64) -> Result<T, TsneError> {
    if distances_row.is_empty() {
        return Err(TsneError::TooFewPoints { min: 2, got: 1 });
    }
    let d: Vec<f64> = distances_row.iter().map(|x| x.as_f64()).collect();
    let beta = search_beta(&d, target_perplexity)?;
    Ok(T::of((0.5 / beta).sqrt()))
}

/// Row perplexity `2^H` of `p(·|i)` at bandwidth `sigma`.
pub fn row_perplexity<T: Scalar>(distances_row: &[T], sigma: T) -> f64 {
    let d: Vec<f64> = distances_row.iter().map(|x| x.as_f64()).collect();
    let s = sigma.as_f64();
    conditional_row(&d, 0.5 / (s * s)).1.exp2()
}

pub fn squared_distances<T: Scalar>(x: &Matrix<T>) -> Matrix<T> {
    let n = x.rows();
    let mut d = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = squared_distance(x.row(i), x.row(j));
            d.set(i, j, v);
            d.set(j, i, v);
        }
    }
    d
}

/// Joint affinities of the rows of `x`. Identical rows are rejected.
pub fn compute_affinities<T: Scalar>(x: &Matrix<T>, perplexity: f64) -> Result<AffinityMatrix<T>, TsneError> {
    let n = x.rows();
    if n < 4 {
        return Err(TsneError::TooFewPoints { min: 4, got: n });
    }
    if !(perplexity < n as f64) {
        return Err(TsneError::PerplexityOutOfRange { perplexity, max: n - 1 });
    }
    for i in 0..n {
        for j in i + 1..n {
            if x.row(i) == x.row(j) {
                return Err(TsneError::DuplicatePoints(i, j));
            }
        }
    }
    let dist = squared_distances(x);
    let mut conditional = vec![vec![0.0f64; n]; n];
    let mut sigmas = Vec::with_capacity(n);
    for i in 0..n {
        let row: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| dist.get(i, j).as_f64()).collect();
        let beta = search_beta(&row, perplexity)?;
        sigmas.push(T::of((0.5 / beta).sqrt()));
        let (probs, _) = conditional_row(&row, beta);
        for (j, p) in (0..n).filter(|&j| j != i).zip(probs) {
            conditional[i][j] = p;
        }
    }
    let mut p = Matrix::zeros(n, n);
    let denom = 2.0 * n as f64;
    for i in 0..n {
        for j in i + 1..n {
            let v = T::of((conditional[i][j] + conditional[j][i]) / denom);
            p.set(i, j, v);
            p.set(j, i, v);
        }
    }
    Ok(AffinityMatrix { p, perplexity, sigmas })
}

/// Unnormalised Student-t kernel `(1 + ‖yᵢ-yⱼ‖²)⁻¹` (zero diagonal) and its sum.
fn student_t<T: Scalar>(y: &Matrix<T>) -> (Matrix<T>, T) {
    let n = y.rows();
    let mut num = Matrix::zeros(n, n);
    let mut sum = T::zero();
    for i in 0..n {
        for j in i + 1..n {
            let v = T::one() / (T::one() + squared_distance(y.row(i), y.row(j)));
            num.set(i, j, v);
            num.set(j, i, v);
            sum += v + v;
        }
    }
    (num, sum)
}

/// `Σᵢ≠ⱼ Pᵢⱼ log(Pᵢⱼ / qᵢⱼ)`, with `0 log 0 = 0`.
pub fn kl_divergence<T: Scalar>(p: &Matrix<T>, y: &Matrix<T>) -> T {
    let (num, sum) = student_t(y);
    let n = p.rows();
    let mut kl = T::zero();
    for i in 0..n {
        for j in 0..n {
            let pij = p.get(i, j);
            if i != j && pij > T::zero() {
                kl += pij * (pij / (num.get(i, j) / sum)).ln();
            }
        }
    }
    kl
}

/// `∂KL/∂yᵢ = 4 Σⱼ (αPᵢⱼ − qᵢⱼ)(yᵢ − yⱼ)(1 + ‖yᵢ-yⱼ‖²)⁻¹` for exaggeration α.
pub fn kl_gradient<T: Scalar>(p: &Matrix<T>, y: &Matrix<T>, exaggeration: T) -> Matrix<T> {
    let (num, sum) = student_t(y);
    let (n, k) = y.shape();
    let mut grad = Matrix::zeros(n, k);
    let four = T::of(4.0);
    for i in 0..n {
        let g = grad.row_mut(i);
        for j in 0..n {
            if i == j {
                continue;
            }
            let nij = num.get(i, j);
            let mult = (exaggeration * p.get(i, j) - nij / sum) * nij;
            for d in 0..k {
                g[d] += four * mult * (y.get(i, d) - y.get(j, d));
            }
        }
    }
    grad
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsneConfig {
    pub dims: usize,
    pub perplexity: f64,
    /// Step size, or its ceiling when `scale_learning_rate` is set.
    pub learning_rate: f64,
    /// Use `min(learning_rate, n / early_exaggeration)`. Small maps are
    /// unstable under early exaggeration at a fixed step of 200: the
    /// fastest-growing mode pulls tight pairs apart.
    pub scale_learning_rate: bool,
    pub iterations: usize,
    pub early_exaggeration: f64,
    pub exaggeration_iterations: usize,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub momentum_switch: usize,
    /// Standard deviation of the Gaussian initial map.
    pub init_std: f64,
    /// Delta-bar-delta step-size gains per coordinate.
    pub adaptive_gains: bool,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            dims: 2,
            perplexity: 15.0,
            learning_rate: 200.0,
            scale_learning_rate: true,
            iterations: 1000,
            early_exaggeration: 12.0,
            exaggeration_iterations: 250,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch: 250,
            init_std: 1e-4,
            adaptive_gains: true,
            seed: 0,
        }
    }
}

impl TsneConfig {
    pub fn effective_learning_rate(&self, points: usize) -> f64 {
        if self.scale_learning_rate {
            self.learning_rate.min(points as f64 / self.early_exaggeration.max(1.0))
        } else {
            self.learning_rate
        }
    }
}

/// A low-dimensional map with a label per row.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection<T> {
    pub y: Matrix<T>,
    pub tokens: Vec<Token>,
    pub labels: Vec<String>,
    /// KL divergence after each iteration (unexaggerated P).
    pub kl_history: Vec<f64>,
}

impl<T: Scalar> Projection<T> {
    pub fn dims(&self) -> usize {
        self.y.cols()
    }

    pub fn len(&self) -> usize {
        self.y.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.y.rows() == 0
    }

    pub fn with_labels(mut self, tokens: Vec<Token>, labels: Vec<String>) -> Self {
        assert_eq!(tokens.len(), self.len());
        assert_eq!(labels.len(), self.len());
        self.tokens = tokens;
        self.labels = labels;
        self
    }

    /// KL divergence after `iteration` updates (1-based).
    pub fn kl_at(&self, iteration: usize) -> Option<f64> {
        iteration.checked_sub(1).and_then(|i| self.kl_history.get(i).copied())
    }

    /// Whether the final KL is below the KL right after early exaggeration ends.
    pub fn improved_after_exaggeration(&self, exaggeration_iterations: usize) -> bool {
        match (self.kl_at(exaggeration_iterations + 1), self.kl_history.last()) {
            (Some(start), Some(&end)) => end < start,
            _ => false,
        }
    }

    /// `iteration,kl` CSV, 1-based iterations.
    pub fn kl_csv(&self) -> String {
        let mut out = String::from("iteration,kl\n");
        for (i, kl) in self.kl_history.iter().enumerate() {
            out.push_str(&format!("{},{kl}\n", i + 1));
        }
        out
    }
}

pub fn tsne_optimize<T: Scalar>(
    affinities: &AffinityMatrix<T>,
    config: &TsneConfig,
) -> Result<Projection<T>, TsneError> {
    let k = config.dims;
    if k != 2 && k != 3 {
        return Err(TsneError::WrongDimensionality(k));
    }
    let p = &affinities.p;
    let n = p.rows();
    if p.cols() != n {
        return Err(TsneError::ShapeMismatch(format!("{}×{}", p.rows(), p.cols())));
    }
    if n < 2 {
        return Err(TsneError::TooFewPoints { min: 2, got: n });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normal = Normal::new(0.0, config.init_std).expect("positive init_std");
    let mut y = Matrix::from_vec(n, k, (0..n * k).map(|_| T::of(normal.sample(&mut rng))).collect());
    let mut update = Matrix::<T>::zeros(n, k);
    let mut gains = Matrix::<T>::from_vec(n, k, vec![T::one(); n * k]);
    let (min_gain, lr) = (T::of(0.01), T::of(config.effective_learning_rate(n)));
    let mut kl_history = Vec::with_capacity(config.iterations);

    for it in 0..config.iterations {
        let exaggeration = if it < config.exaggeration_iterations { config.early_exaggeration } else { 1.0 };
        let momentum = T::of(if it < config.momentum_switch { config.initial_momentum } else { config.final_momentum });
        let grad = kl_gradient(p, &y, T::of(exaggeration));
        if !grad.is_finite() {
            return Err(TsneError::NonFiniteGradient(it));
        }
        let g = grad.as_slice();
        let u = update.as_mut_slice();
        let gain = gains.as_mut_slice();
        for idx in 0..g.len() {
            if config.adaptive_gains {
                gain[idx] = if (g[idx] > T::zero()) != (u[idx] > T::zero()) {
                    gain[idx] + T::of(0.2)
                } else {
                    gain[idx] * T::of(0.8)
                };
                if gain[idx] < min_gain {
                    gain[idx] = min_gain;
                }
            }
            u[idx] = momentum * u[idx] - lr * gain[idx] * g[idx];
        }
        for (yv, &uv) in y.as_mut_slice().iter_mut().zip(update.as_slice()) {
            *yv += uv;
        }
        center(&mut y);
        kl_history.push(kl_divergence(p, &y).as_f64());
    }

    Ok(Projection { y, tokens: (0..n as Token).collect(), labels: (0..n).map(|i| i.to_string()).collect(), kl_history })
}

fn center<T: Scalar>(y: &mut Matrix<T>) {
    let (n, k) = y.shape();
    for d in 0..k {
        let mean = (0..n).map(|i| y.get(i, d)).sum::<T>() / T::of(n as f64);
        for i in 0..n {
            y.set(i, d, y.get(i, d) - mean);
        }
    }
}
