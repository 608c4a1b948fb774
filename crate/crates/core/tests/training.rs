use music_embed::corpus::{build_control, TrainingCorpus};
use music_embed::seqmodel::{train, TrainConfig};
use music_embed::Variant;

mod support;
use support::fixture_pieces;

fn alternating(len: usize) -> TrainingCorpus {
    let seq: Vec<i32> = (0..len).map(|i| (i % 2) as i32).collect();
    TrainingCorpus::from_token_sequences(Variant::Interval, vec![seq]).unwrap()
}

#[test]
fn memorizes_alternating_corpus() {
    let config = TrainConfig { epochs: 200, ..Default::default() };
    let history = train::<f32>(&alternating(129), &config).unwrap().loss_history;
    let ln2 = std::f64::consts::LN_2;
    assert!((history[0] - ln2).abs() < 0.1 * ln2, "epoch 0 loss {}", history[0]);
    assert!(history.iter().any(|&l| l < 0.1), "best loss {:?}", history.iter().cloned().fold(f64::MAX, f64::min));
    assert!(*history.last().unwrap() < 0.1);
}

#[test]
fn smoothed_loss_never_increases() {
    let config = TrainConfig { epochs: 200, embedding_dim: 32, hidden_size: 32, ..Default::default() };
    let history = train::<f64>(&alternating(129), &config).unwrap().loss_history;
    let means: Vec<f64> = history.chunks(10).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
    for (i, pair) in means.windows(2).enumerate() {
        assert!(pair[1] <= pair[0], "window {} rose: {} -> {}", i + 1, pair[0], pair[1]);
    }
}

#[test]
fn same_seed_gives_identical_history() {
    let corpus = build_control(&fixture_pieces()).unwrap();
    let config = TrainConfig { epochs: 3, embedding_dim: 8, hidden_size: 8, seed: 11, ..Default::default() };
    let a = train::<f32>(&corpus, &config).unwrap();
    let b = train::<f32>(&corpus, &config).unwrap();
    let bits = |h: &[f64]| h.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.loss_history), bits(&b.loss_history));
    assert_eq!(a.model, b.model);
    let c = train::<f32>(&corpus, &TrainConfig { seed: 12, ..config }).unwrap();
    assert_ne!(a.model, c.model);
}

#[test]
fn stays_finite_for_a_thousand_epochs() {
    let corpus = build_control(&fixture_pieces()).unwrap();
    // A large step makes divergence likely if clipping were broken.
    let config =
        TrainConfig { epochs: 1000, embedding_dim: 8, hidden_size: 8, learning_rate: 0.05, ..Default::default() };
    let out = train::<f32>(&corpus, &config).unwrap();
    assert_eq!(out.loss_history.len(), 1000);
    assert!(out.loss_history.iter().all(|l| l.is_finite()));
    assert!(out.model.is_finite());
}
