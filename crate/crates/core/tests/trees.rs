mod oracles;

use oracles::{shapley, tables};
use plgg_core::exec::Sequential;
use plgg_core::trees::search::{rank_candidates, sample_candidates, EvalSet};
use plgg_core::trees::shap::fold_mean_abs_shap;
use plgg_core::trees::{
    fit_gbt, fit_gbt_traced, mean_abs_shap, random_search, select_model, shap_values, GbtParams, GbtSpace, Node,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_params<R: Rng>(rng: &mut R, full_sampling: bool) -> GbtParams {
    GbtParams {
        max_depth: rng.random_range(1..=5),
        min_child_weight: rng.random_range(0..=3) as f64 * 0.5,
        subsample: if full_sampling { 1.0 } else { rng.random_range(0.5..=1.0) },
        colsample_bytree: if full_sampling { 1.0 } else { rng.random_range(0.5..=1.0) },
        learning_rate: rng.random_range(0.01..=0.3),
        alpha: rng.random_range(0.0..=2.0),
        lambda: rng.random_range(0.0..=4.0),
        gamma: if full_sampling { 0.0 } else { rng.random_range(0.0..=0.5) },
        n_rounds: rng.random_range(1..=20),
        base_score: 0.5,
        seed: rng.random(),
    }
}

#[test]
fn shap_matches_exhaustive_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..30 {
        let m = rng.random_range(2..=8);
        let table = tables::random_table(&mut rng, 40, m);
        let model = fit_gbt(&tables::training(&table), &random_params(&mut rng, false)).unwrap();
        for row in table.rows.iter().take(3) {
            let fast = shap_values(&model, &row.values).unwrap();
            let (phi, base) = shapley::exhaustive(&model, &row.values);
            assert!((fast.base - base).abs() < 1e-9, "case {case}");
            for (a, b) in fast.values.iter().zip(&phi) {
                assert!((a - b).abs() < 1e-9, "case {case}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn training_loss_never_increases_with_full_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let table = tables::random_table(&mut rng, 60, 5);
        let params = random_params(&mut rng, true);
        let (_, trace) = fit_gbt_traced(&tables::training(&table), &params).unwrap();
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{params:?}: {} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn structural_invariants_hold() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..20 {
        let table = tables::random_table(&mut rng, 50, 6);
        let params = random_params(&mut rng, false);
        let model = fit_gbt(&tables::training(&table), &params).unwrap();
        for t in &model.trees {
            assert!(t.depth() <= params.max_depth);
            for node in &t.nodes {
                match *node {
                    Node::Split { gain, .. } => assert!(gain > 0.0),
                    Node::Leaf { cover, .. } => {
                        if t.nodes.len() > 1 {
                            assert!(cover >= params.min_child_weight);
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn predictions_are_deterministic_and_margin_ordered() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let table = tables::random_table(&mut rng, 50, 4);
    let params = random_params(&mut rng, false);
    let a = fit_gbt(&tables::training(&table), &params).unwrap();
    let b = fit_gbt(&tables::training(&table), &params).unwrap();
    assert_eq!(a, b);
    let mut pairs: Vec<(f64, f64)> =
        table.rows.iter().map(|r| (a.margin(&r.values), a.predict_prob(&r.values))).collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    assert!(pairs.windows(2).all(|w| w[0].1 <= w[1].1));
}

#[test]
fn search_selects_by_validation_then_depth() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let table = tables::random_table(&mut rng, 60, 4);
    let train = tables::training(&table.select(&(0..40).collect::<Vec<_>>()));
    let rows: Vec<Vec<f64>> = table.rows.iter().map(|r| r.values.clone()).collect();
    let labels = table.labels();
    let val = EvalSet { rows: &rows[40..50], labels: &labels[40..50] };
    let test = EvalSet { rows: &rows[50..], labels: &labels[50..] };
    let candidates = sample_candidates(&GbtSpace::standard(), 30, 4).unwrap();
    let result = random_search(candidates, &train, val, test, &Sequential).unwrap();
    let depths: Vec<usize> = result.candidates.iter().map(|c| c.max_depth).collect();
    let best = result.val_scores.iter().cloned().fold(f64::MIN, f64::max);
    let chosen = result.chosen;
    assert_eq!(result.val_scores[chosen], best);
    for (i, &s) in result.val_scores.iter().enumerate() {
        if s == best {
            assert!(depths[i] > depths[chosen] || (depths[i] == depths[chosen] && i >= chosen));
        }
    }
    assert_eq!(rank_candidates(&result.val_scores, &depths)[0], select_model(&result.val_scores, &depths));
}

#[test]
fn ranking_ignores_row_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let table = tables::random_table(&mut rng, 40, 5);
    let model = fit_gbt(&tables::training(&table), &GbtParams { n_rounds: 10, ..GbtParams::default() }).unwrap();
    let mut rows: Vec<Vec<f64>> = table.rows.iter().map(|r| r.values.clone()).collect();
    let a = fold_mean_abs_shap(&model, &rows).unwrap();
    rows.reverse();
    rows.rotate_left(11);
    let b = fold_mean_abs_shap(&model, &rows).unwrap();
    assert_eq!(a, b);
    let r = mean_abs_shap(&table.names, &[a.clone(), a]);
    assert!(r.entries.iter().all(|e| e.std == 0.0));
    // The label is driven by the first column.
    assert_eq!(r.entries[0].feature, "x0");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn local_accuracy(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = rng.random_range(1..=10);
        let table = tables::random_table(&mut rng, 30, m);
        let model = fit_gbt(&tables::training(&table), &random_params(&mut rng, false)).unwrap();
        let x: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..6.0)).collect();
        let s = shap_values(&model, &x).unwrap();
        let total: f64 = s.values.iter().sum::<f64>() + s.base;
        prop_assert!((total - model.margin(&x)).abs() <= 1e-9);
    }
}
