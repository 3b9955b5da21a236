use plgg_core::image::*;
use plgg_core::labeling::Outcome;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_sample<R: Rng>(rng: &mut R) -> ImageSample {
    let mut s = ImageSample::zeros("r");
    for (c, ch) in s.channels.iter_mut().enumerate() {
        for v in ch.iter_mut() {
            *v = if c < INTENSITY_CHANNELS { rng.random_range(-2.0..2.0) } else { rng.random_range(0..2) as f64 };
        }
    }
    s
}

#[test]
fn pooling_commutes_with_geometric_augmentation() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let sample = random_sample(&mut rng);
    let pooled = extract_embedding(&sample).unwrap();
    for seed in 0..12 {
        let full = augment(&sample, &mut ChaCha8Rng::seed_from_u64(seed), 0.0);
        let a = extract_embedding(&full).unwrap();
        let b = augment_pooled(&pooled, &mut ChaCha8Rng::seed_from_u64(seed), 0.0);
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12), "seed {seed}");
    }
}

#[test]
fn pooled_noise_matches_averaged_voxel_noise() {
    let zero = ImageSample::zeros("z");
    let sigma = 0.3;
    let (mut full, mut pooled) = (Vec::new(), Vec::new());
    for seed in 0..4 {
        let e = extract_embedding(&augment(&zero, &mut ChaCha8Rng::seed_from_u64(seed), sigma)).unwrap();
        full.extend_from_slice(&e[..INTENSITY_CHANNELS * 512]);
        assert!(e[INTENSITY_CHANNELS * 512..].iter().all(|&v| v == 0.0));
        let p = augment_pooled(&vec![0.0; EMBED_DIM], &mut ChaCha8Rng::seed_from_u64(seed), sigma);
        pooled.extend_from_slice(&p[..INTENSITY_CHANNELS * 512]);
    }
    let var = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64;
    let expected = sigma * sigma / 512.0;
    // 8192 draws: the sample variance is within 5% with overwhelming probability.
    assert!((var(&full) / expected - 1.0).abs() < 0.05);
    assert!((var(&pooled) / expected - 1.0).abs() < 0.05);
}

proptest! {
    #[test]
    fn geometric_draws_permute_voxels(
        flips in prop::array::uniform3(any::<bool>()),
        turns in 0u8..4,
        axis in 0u8..3,
        side in 1usize..7,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..side * side * side).map(|_| rng.random()).collect();
        let out = GeometricDraw { flips, turns, axis }.apply(&data, side);
        let (mut a, mut b) = (data.clone(), out);
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        prop_assert_eq!(a, b);
    }
}

fn loss(w: &[f64], b: f64, batch: &[(&[f64], f64)], l2: f64) -> f64 {
    loss_and_grad(w, b, batch, l2).0
}

#[test]
fn analytic_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let n = rng.random_range(1..=8);
        let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..EMBED_DIM).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.random_range(0..2) as f64).collect();
        let batch: Vec<(&[f64], f64)> = xs.iter().map(|x| x.as_slice()).zip(ys.iter().copied()).collect();
        let w: Vec<f64> = (0..EMBED_DIM).map(|_| rng.random_range(-0.02..0.02)).collect();
        let b = rng.random_range(-0.5..0.5);
        let l2 = 1e-2;
        let (_, grad, grad_b) = loss_and_grad(&w, b, &batch, l2);
        let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-3);
        for _ in 0..40 {
            let k = rng.random_range(0..EMBED_DIM);
            let (mut wp, mut wm) = (w.clone(), w.clone());
            wp[k] += h;
            wm[k] -= h;
            let numeric = (loss(&wp, b, &batch, l2) - loss(&wm, b, &batch, l2)) / (2.0 * h);
            worst = worst.max(rel(grad[k], numeric));
        }
        let numeric_b = (loss(&w, b + h, &batch, l2) - loss(&w, b - h, &batch, l2)) / (2.0 * h);
        worst = worst.max(rel(grad_b, numeric_b));
    }
    assert!(worst < 1e-5, "worst relative error {worst}");
}

fn planted(n: usize, seed: u64) -> Vec<PooledSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let label = (i % 2) as f64;
            let embedding = (0..EMBED_DIM)
                .map(|k| {
                    let base: f64 = rng.random_range(-1.0..1.0);
                    // Signal in every intensity cell so that it survives flips and turns.
                    if k < INTENSITY_CHANNELS * 512 {
                        base + 1.5 * (2.0 * label - 1.0)
                    } else {
                        base
                    }
                })
                .collect();
            PooledSample { case_id: format!("s{i}"), embedding, label }
        })
        .collect()
}

#[test]
fn baseline_learns_a_separable_signal() {
    let (train, val) = (planted(40, 3), planted(10, 4));
    let cfg = TrainConfig { epochs: 30, learning_rate: 1e-3, ..Default::default() };
    let model = train_baseline(&train, &val, &cfg).unwrap();
    let correct = val.iter().filter(|s| (model.predict_embedding(&s.embedding) >= 0.5) as u8 as f64 == s.label).count();
    assert_eq!(correct, val.len());
    assert_eq!(model, train_baseline(&train, &val, &cfg).unwrap());
    let other = train_baseline(&train, &val, &TrainConfig { seed: 9, ..cfg }).unwrap();
    assert_ne!(model.weights, other.weights);
}

#[test]
fn single_class_training_is_rejected() {
    let mut train = planted(6, 5);
    train.iter_mut().for_each(|s| s.label = 1.0);
    assert!(train_baseline(&train, &[], &TrainConfig::default()).is_err());
}

#[test]
fn sample_labels_round_trip() {
    let mut s = ImageSample::zeros("a");
    s.label = Some(Outcome::Effective);
    assert_eq!(extract_embedding(&s).unwrap().len(), EMBED_DIM);
}
