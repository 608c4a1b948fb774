use crate::matrix::Matrix;
use crate::scalar::{sigmoid, Scalar};

use super::{Gate, Gradients, Model, ModelError};

/// Activations of one time step, kept for the backward pass.
#[derive(Clone, Debug)]
pub struct StepCache<T> {
    pub token: usize,
    pub h_prev: Vec<T>,
    pub c_prev: Vec<T>,
    /// Post-activation gate values, indexed by [`Gate`].
    pub gates: [Vec<T>; 4],
    pub c: Vec<T>,
    pub tanh_c: Vec<T>,
    pub h: Vec<T>,
}

#[derive(Clone, Debug)]
pub struct ForwardCache<T> {
    pub steps: Vec<StepCache<T>>,
}

/// Runs the recurrence over `tokens` from a zero state. Row `t` of the
/// returned logits scores the token that follows `tokens[t]`.
pub fn forward<T: Scalar>(model: &Model<T>, tokens: &[usize]) -> Result<(Matrix<T>, ForwardCache<T>), ModelError> {
    if tokens.is_empty() {
        return Err(ModelError::SequenceTooShort(0, 1));
    }
    let vocab = model.vocab();
    if let Some(&index) = tokens.iter().find(|&&i| i >= vocab) {
        return Err(ModelError::IndexOutOfVocabulary { index, vocab });
    }
    let lstm = &model.lstm;
    let hidden = lstm.hidden();
    let mut logits = Matrix::zeros(tokens.len(), vocab);
    let mut steps = Vec::with_capacity(tokens.len());
    let mut h = vec![T::zero(); hidden];
    let mut c = vec![T::zero(); hidden];

    for (t, &token) in tokens.iter().enumerate() {
        let x = model.embedding.weights().row(token);
        let mut gates: [Vec<T>; 4] = std::array::from_fn(|_| vec![T::zero(); hidden]);
        for g in Gate::ALL {
            let (w, b) = lstm.gate(g);
            let pre = &mut gates[g as usize];
            w.matvec_concat(&[x, &h], pre);
            for (p, &bias) in pre.iter_mut().zip(b) {
                let a = *p + bias;
                *p = if g == Gate::Candidate { a.tanh() } else { sigmoid(a) };
            }
        }
        let [i, f, o, g] = &gates;
        let c_new: Vec<T> = (0..hidden).map(|k| f[k] * c[k] + i[k] * g[k]).collect();
        let tanh_c: Vec<T> = c_new.iter().map(|v| v.tanh()).collect();
        let h_new: Vec<T> = (0..hidden).map(|k| o[k] * tanh_c[k]).collect();

        let row = logits.row_mut(t);
        lstm.output_weights.matvec_concat(&[&h_new], row);
        for (l, &b) in row.iter_mut().zip(&lstm.output_bias) {
            *l += b;
        }

        steps.push(StepCache {
            token,
            h_prev: std::mem::replace(&mut h, h_new.clone()),
            c_prev: std::mem::replace(&mut c, c_new.clone()),
            gates,
            c: c_new,
            tanh_c,
            h: h_new,
        });
    }
    Ok((logits, ForwardCache { steps }))
}

pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().fold(T::neg_infinity(), |m, &x| m.max(x));
    let exps: Vec<T> = logits.iter().map(|&x| (x - max).exp()).collect();
    let sum: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn log_sum_exp<T: Scalar>(logits: &[T]) -> T {
    let max = logits.iter().fold(T::neg_infinity(), |m, &x| m.max(x));
    max + logits.iter().map(|&x| (x - max).exp()).sum::<T>().ln()
}

fn check_len(sequence: &[usize]) -> Result<(), ModelError> {
    if sequence.len() < 2 {
        return Err(ModelError::SequenceTooShort(sequence.len(), 2));
    }
    Ok(())
}

/// Mean next-token cross-entropy over the sequence.
pub fn loss<T: Scalar>(model: &Model<T>, sequence: &[usize]) -> Result<T, ModelError> {
    check_len(sequence)?;
    let (logits, _) = forward(model, &sequence[..sequence.len() - 1])?;
    let total = sequence[1..]
        .iter()
        .enumerate()
        .fold(T::zero(), |acc, (t, &y)| acc + log_sum_exp(logits.row(t)) - logits.get(t, y));
    Ok(total / T::of((sequence.len() - 1) as f64))
}

/// Mean next-token cross-entropy and its gradient with respect to every
/// parameter, embedding rows included.
pub fn loss_and_gradients<T: Scalar>(model: &Model<T>, sequence: &[usize]) -> Result<(T, Gradients<T>), ModelError> {
    let mut grads = Gradients::zeros_like(model);
    let steps = T::of((sequence.len().max(1) - 1) as f64);
    let total = accumulate(model, sequence, T::one() / steps, &mut grads)?;
    Ok((total / steps, grads))
}

/// Adds `scale ×` the gradient of the summed cross-entropy to `grads` and
/// returns the summed (unscaled) cross-entropy.
pub(crate) fn accumulate<T: Scalar>(
    model: &Model<T>,
    sequence: &[usize],
    scale: T,
    grads: &mut Gradients<T>,
) -> Result<T, ModelError> {
    check_len(sequence)?;
    let (logits, cache) = forward(model, &sequence[..sequence.len() - 1])?;
    let lstm = &model.lstm;
    let hidden = lstm.hidden();
    let dim = lstm.input_dim();

    let mut total = T::zero();
    let mut dlogits = Matrix::zeros(logits.rows(), logits.cols());
    for (t, &y) in sequence[1..].iter().enumerate() {
        let row = logits.row(t);
        total += log_sum_exp(row) - row[y];
        let d = dlogits.row_mut(t);
        d.copy_from_slice(&softmax(row));
        d[y] -= T::one();
        d.iter_mut().for_each(|v| *v *= scale);
    }

    let mut dh_next = vec![T::zero(); hidden];
    let mut dc_next = vec![T::zero(); hidden];
    let mut dz = vec![T::zero(); dim + hidden];
    let mut dpre: [Vec<T>; 4] = std::array::from_fn(|_| vec![T::zero(); hidden]);

    for (t, step) in cache.steps.iter().enumerate().rev() {
        let dl = dlogits.row(t);
        grads.lstm.output_weights.outer_acc_concat(dl, &[&step.h]);
        for (b, &d) in grads.lstm.output_bias.iter_mut().zip(dl) {
            *b += d;
        }
        let mut dh = dh_next.clone();
        lstm.output_weights.matvec_t_acc(dl, &mut dh);

        let [i, f, o, g] = &step.gates;
        for k in 0..hidden {
            let dc = dh[k] * o[k] * (T::one() - step.tanh_c[k] * step.tanh_c[k]) + dc_next[k];
            dpre[Gate::Output as usize][k] = dh[k] * step.tanh_c[k] * o[k] * (T::one() - o[k]);
            dpre[Gate::Input as usize][k] = dc * g[k] * i[k] * (T::one() - i[k]);
            dpre[Gate::Candidate as usize][k] = dc * i[k] * (T::one() - g[k] * g[k]);
            dpre[Gate::Forget as usize][k] = dc * step.c_prev[k] * f[k] * (T::one() - f[k]);
            dc_next[k] = dc * f[k];
        }

        let x = model.embedding.weights().row(step.token);
        dz.iter_mut().for_each(|v| *v = T::zero());
        for gate in Gate::ALL {
            let k = gate as usize;
            grads.lstm.gate_weights[k].outer_acc_concat(&dpre[k], &[x, &step.h_prev]);
            for (b, &d) in grads.lstm.gate_biases[k].iter_mut().zip(&dpre[k]) {
                *b += d;
            }
            lstm.gate_weights[k].matvec_t_acc(&dpre[k], &mut dz);
        }
        for (e, &d) in grads.embedding.row_mut(step.token).iter_mut().zip(&dz[..dim]) {
            *e += d;
        }
        dh_next.copy_from_slice(&dz[dim..]);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Vocabulary;
    use crate::seqmodel::{init_parameters, EmbeddingMatrix, LstmParameters};

    fn tiny(vocab: usize, dim: usize, hidden: usize, seed: u64) -> Model<f64> {
        let v = Vocabulary::from_tokens(0..vocab as i32);
        init_parameters(&v, dim, hidden, seed)
    }

    #[test]
    fn zero_output_layer_gives_uniform_predictions() {
        let mut m = tiny(5, 4, 3, 1);
        m.lstm.output_weights.fill(0.0);
        let (logits, _) = forward(&m, &[0, 3, 4]).unwrap();
        assert!(logits.as_slice().iter().all(|&x| x == 0.0));
        let l = loss(&m, &[0, 3, 4, 1]).unwrap();
        assert!((l - 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn single_step_gives_one_row() {
        let m = tiny(3, 2, 2, 0);
        let (logits, cache) = forward(&m, &[2]).unwrap();
        assert_eq!(logits.shape(), (1, 3));
        assert_eq!(cache.steps.len(), 1);
    }

    #[test]
    fn rejects_out_of_vocabulary_and_short_input() {
        let m = tiny(3, 2, 2, 0);
        assert!(matches!(forward(&m, &[0, 3]), Err(ModelError::IndexOutOfVocabulary { index: 3, vocab: 3 })));
        assert!(matches!(forward(&m, &[]), Err(ModelError::SequenceTooShort(0, _))));
        assert!(matches!(loss_and_gradients(&m, &[1]), Err(ModelError::SequenceTooShort(1, 2))));
    }

    /// One step through V=2, D=2, H=2 with hand-set weights, recomputed
    /// scalar by scalar from the gate equations.
    #[test]
    fn hand_computed_single_step() {
        let v = Vocabulary::from_tokens([0, 1]);
        let emb = Matrix::from_rows(&[vec![0.5, -1.0], vec![2.0, 0.25]]);
        let mut lstm = LstmParameters::<f64>::zeros(2, 2, 2);
        // Rows act on [x0, x1, h0, h1]; h starts at zero so only x columns matter.
        lstm.gate_weights[0] = Matrix::from_rows(&[vec![0.1, 0.2, 9.0, 9.0], vec![-0.3, 0.4, 9.0, 9.0]]);
        lstm.gate_weights[1] = Matrix::from_rows(&[vec![0.5, 0.5, 9.0, 9.0], vec![0.0, -0.5, 9.0, 9.0]]);
        lstm.gate_weights[2] = Matrix::from_rows(&[vec![1.0, 0.0, 9.0, 9.0], vec![0.0, 1.0, 9.0, 9.0]]);
        lstm.gate_weights[3] = Matrix::from_rows(&[vec![0.7, -0.2, 9.0, 9.0], vec![0.3, 0.3, 9.0, 9.0]]);
        lstm.gate_biases[0] = vec![0.1, 0.0];
        lstm.gate_biases[1] = vec![1.0, 1.0];
        lstm.gate_biases[2] = vec![0.0, -0.1];
        lstm.gate_biases[3] = vec![0.0, 0.2];
        lstm.output_weights = Matrix::from_rows(&[vec![1.0, -1.0], vec![0.5, 2.0]]);
        lstm.output_bias = vec![0.05, -0.05];
        let m = Model { embedding: EmbeddingMatrix::new(v, emb), lstm };

        let s = |a: f64| 1.0 / (1.0 + (-a).exp());
        let (x0, x1) = (0.5, -1.0);
        let i = [s(0.1 * x0 + 0.2 * x1 + 0.1), s(-0.3 * x0 + 0.4 * x1)];
        let o = [s(x0), s(x1 - 0.1)];
        let g = [(0.7 * x0 - 0.2 * x1).tanh(), (0.3 * x0 + 0.3 * x1 + 0.2).tanh()];
        // c_prev = 0, so the forget gate does not contribute.
        let c = [i[0] * g[0], i[1] * g[1]];
        let h = [o[0] * c[0].tanh(), o[1] * c[1].tanh()];
        let expected = [h[0] - h[1] + 0.05, 0.5 * h[0] + 2.0 * h[1] - 0.05];

        let (logits, _) = forward(&m, &[0]).unwrap();
        for (a, b) in logits.row(0).iter().zip(expected) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let m = tiny(7, 3, 4, 9);
        let (logits, _) = forward(&m, &[0, 6, 2, 2, 5]).unwrap();
        for t in 0..logits.rows() {
            let p = softmax(logits.row(t));
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        let extreme = softmax(&[1000.0f64, -1000.0, 0.0]);
        assert!((extreme[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn absent_tokens_get_exactly_zero_gradient() {
        let m = tiny(6, 4, 3, 2);
        let (_, grads) = loss_and_gradients(&m, &[1, 3, 1, 3, 5]).unwrap();
        // The final token is only a target, never an input.
        for absent in [0, 2, 4, 5] {
            assert!(grads.embedding.row(absent).iter().all(|&g| g == 0.0), "row {absent}");
        }
        for present in [1, 3] {
            assert!(grads.embedding.row(present).iter().any(|&g| g != 0.0));
        }
    }

    #[test]
    fn reported_loss_matches_loss_function() {
        let m = tiny(5, 4, 3, 3);
        let seq = [0, 1, 4, 2, 2, 3];
        let (l, _) = loss_and_gradients(&m, &seq).unwrap();
        assert!((l - loss(&m, &seq).unwrap()).abs() < 1e-14);
    }
}
