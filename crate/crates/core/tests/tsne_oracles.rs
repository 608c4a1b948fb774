//! t-SNE checked against direct formulas evaluated in double-double
//! arithmetic, and against finite differences.

use music_embed::tsne::{
    compute_affinities, kl_divergence, kl_gradient, perplexity_search, squared_distances, tsne_optimize, TsneConfig,
};
use twofloat::TwoFloat;

mod support;
use support::{clusters, gaussian, knn_purity, oracle_affinities, oracle_beta, oracle_sq_dist, tf};

#[test]
fn sigma_matches_high_precision_bisection() {
    let x = gaussian(10, 3, 42);
    let d = squared_distances(&x);
    for i in 0..10 {
        let row: Vec<f64> = (0..10).filter(|&j| j != i).map(|j| d.get(i, j)).collect();
        let sigma = perplexity_search(&row, 5.0).unwrap();
        let exact_row: Vec<TwoFloat> =
            (0..10).filter(|&j| j != i).map(|j| oracle_sq_dist(x.row(i), x.row(j))).collect();
        let expected = (tf(0.5) / oracle_beta(&exact_row, 5.0)).sqrt().hi();
        assert!((sigma - expected).abs() < 1e-6, "row {i}: {sigma} vs {expected}");
    }
}

#[test]
fn affinities_match_extended_precision_oracle() {
    let x = gaussian(8, 3, 7);
    let aff = compute_affinities(&x, 3.0).unwrap();
    let expected = oracle_affinities(&x, 3.0);
    let mut total = 0.0;
    for i in 0..8 {
        for j in 0..8 {
            let p = aff.p.get(i, j);
            let e = expected[i][j].hi();
            assert!((p - e).abs() < 1e-10, "P[{i}][{j}] = {p}, oracle {e}");
            assert_eq!(p, aff.p.get(j, i));
            total += p;
        }
        assert_eq!(aff.p.get(i, i), 0.0);
    }
    assert!((total - 1.0).abs() < 1e-9);
}

#[test]
fn kl_matches_extended_precision_oracle() {
    let x = gaussian(8, 3, 3);
    let p = compute_affinities(&x, 3.0).unwrap().p;
    let y = gaussian(8, 2, 4);
    let n = 8;
    let mut q = vec![vec![tf(0.0); n]; n];
    let mut sum = tf(0.0);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                q[i][j] = tf(1.0) / (tf(1.0) + oracle_sq_dist(y.row(i), y.row(j)));
                sum += q[i][j];
            }
        }
    }
    let mut kl = tf(0.0);
    for i in 0..n {
        for j in 0..n {
            let pij = tf(p.get(i, j));
            if i != j && pij > tf(0.0) {
                kl += pij * (pij * sum / q[i][j]).ln();
            }
        }
    }
    let got = kl_divergence(&p, &y);
    assert!((got - kl.hi()).abs() < 1e-10, "{got} vs {}", kl.hi());
}

#[test]
fn kl_gradient_matches_finite_differences() {
    const STEP: f64 = 1e-5;
    for seed in 0..5 {
        let p = compute_affinities(&gaussian(6, 4, seed), 3.0).unwrap().p;
        let mut y = gaussian(6, 2, seed + 100);
        let grad = kl_gradient(&p, &y, 1.0);
        for i in 0..6 {
            for d in 0..2 {
                let original = y.get(i, d);
                y.set(i, d, original + STEP);
                let plus = kl_divergence(&p, &y);
                y.set(i, d, original - STEP);
                let minus = kl_divergence(&p, &y);
                y.set(i, d, original);
                let numeric = (plus - minus) / (2.0 * STEP);
                let analytic = grad.get(i, d);
                let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-9);
                assert!(err < 1e-4, "seed {seed} y[{i}][{d}]: {analytic} vs {numeric}");
            }
        }
    }
}

#[test]
fn recovers_three_clusters() {
    let mut passed = 0;
    for seed in 0..5 {
        let (x, labels) = clusters(seed);
        let aff = compute_affinities(&x, 15.0).unwrap();
        let proj = tsne_optimize(&aff, &TsneConfig { seed, ..Default::default() }).unwrap();
        let purity = knn_purity(&proj.y, &labels, 5);
        assert!(proj.improved_after_exaggeration(250));
        if purity >= 0.9 {
            passed += 1;
        }
    }
    assert!(passed >= 4, "only {passed} of 5 seeds reached purity 0.9");
}
