//! Backpropagation through time checked against central finite differences.

use music_embed::seqmodel::loss_and_gradients;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod support;
use support::{random_model, worst_gradient_error, GRADIENT_TOLERANCE};

#[test]
fn bptt_matches_finite_differences() {
    let (vocab, dim, hidden, steps) = (5, 4, 3, 6);
    for seed in 0..3 {
        let model = random_model(vocab, dim, hidden, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let seq: Vec<usize> = (0..=steps).map(|_| rng.random_range(0..vocab)).collect();
        let (err, at) = worst_gradient_error(&model, &seq);
        assert!(err < GRADIENT_TOLERANCE, "seed {seed}: relative error {err:e} at {at}");
    }
}

#[test]
fn gradients_cover_every_tensor() {
    let model = random_model(5, 4, 3, 7);
    let (_, grads) = loss_and_gradients(&model, &[0, 1, 2, 3, 4, 0, 1]).unwrap();
    for (name, g) in grads.tensors() {
        assert!(g.iter().any(|&v| v != 0.0), "{name} has an all-zero gradient");
    }
}
