//! Bounded random search over model parameters and validation-based
//! selection.

use alloc::vec::Vec;

use rand::distr::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::forest::{fit_random_forest, ForestParams};
use super::gbt::{fit_gbt, GbtParams};
use super::TrainingData;
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::math;

/// Inclusive bounds for every sampled boosting parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbtSpace {
    pub max_depth: (usize, usize),
    pub min_child_weight: (usize, usize),
    pub subsample: (f64, f64),
    pub colsample_bytree: (f64, f64),
    pub learning_rate: (f64, f64),
    pub alpha: (f64, f64),
    pub lambda: (f64, f64),
    pub gamma: (f64, f64),
    /// Fixed, not sampled.
    pub n_rounds: usize,
    pub base_score: f64,
}

impl Default for GbtSpace {
    fn default() -> Self {
        GbtSpace::standard()
    }
}

impl GbtSpace {
    /// Ranges used for the tabular model.
    pub fn standard() -> Self {
        GbtSpace {
            max_depth: (2, 7),
            min_child_weight: (1, 6),
            subsample: (0.6, 0.85),
            colsample_bytree: (0.6, 0.85),
            learning_rate: (0.01, 0.05),
            alpha: (0.0, 4.0),
            lambda: (0.0, 4.0),
            gamma: (0.0, 0.5),
            n_rounds: 100,
            base_score: 0.5,
        }
    }

    /// Ranges used when image embeddings are appended to the table.
    pub fn feature_fuse() -> Self {
        GbtSpace {
            max_depth: (3, 8),
            min_child_weight: (2, 14),
            subsample: (0.6, 1.0),
            colsample_bytree: (0.6, 1.0),
            learning_rate: (0.01, 0.3),
            ..GbtSpace::standard()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ordered = |what: &'static str, lo: f64, hi: f64| {
            if lo.is_finite() && hi.is_finite() && lo <= hi {
                Ok(())
            } else {
                Err(Error::Range { what, value: lo })
            }
        };
        ordered("max_depth", self.max_depth.0 as f64, self.max_depth.1 as f64)?;
        ordered("min_child_weight", self.min_child_weight.0 as f64, self.min_child_weight.1 as f64)?;
        ordered("subsample", self.subsample.0, self.subsample.1)?;
        ordered("colsample_bytree", self.colsample_bytree.0, self.colsample_bytree.1)?;
        ordered("learning_rate", self.learning_rate.0, self.learning_rate.1)?;
        ordered("alpha", self.alpha.0, self.alpha.1)?;
        ordered("lambda", self.lambda.0, self.lambda.1)?;
        ordered("gamma", self.gamma.0, self.gamma.1)?;
        // Every candidate must be a valid parameter set.
        let corner = GbtParams {
            max_depth: self.max_depth.0,
            min_child_weight: self.min_child_weight.0 as f64,
            subsample: self.subsample.0,
            colsample_bytree: self.colsample_bytree.0,
            learning_rate: self.learning_rate.0,
            alpha: self.alpha.0,
            lambda: self.lambda.0,
            gamma: self.gamma.0,
            n_rounds: self.n_rounds,
            base_score: self.base_score,
            seed: 0,
        };
        corner.validate()?;
        GbtParams { subsample: self.subsample.1, colsample_bytree: self.colsample_bytree.1, ..corner }.validate()
    }
}

fn round_to(x: f64, decimals: i32) -> f64 {
    let scale = math::powi(10.0, decimals);
    math::round(x * scale) / scale
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        return lo;
    }
    Uniform::new_inclusive(lo, hi).expect("validated range").sample(rng)
}

/// `n` candidates: integer depth and child weight, two decimals for the
/// sampling fractions and learning rate, one decimal for α, λ and γ. Each
/// candidate also gets its own training seed.
pub fn sample_candidates(space: &GbtSpace, n: usize, seed: u64) -> Result<Vec<GbtParams>> {
    space.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| GbtParams {
            max_depth: rng.random_range(space.max_depth.0..=space.max_depth.1),
            min_child_weight: rng.random_range(space.min_child_weight.0..=space.min_child_weight.1) as f64,
            subsample: round_to(uniform(&mut rng, space.subsample), 2),
            colsample_bytree: round_to(uniform(&mut rng, space.colsample_bytree), 2),
            learning_rate: round_to(uniform(&mut rng, space.learning_rate), 2),
            alpha: round_to(uniform(&mut rng, space.alpha), 1),
            lambda: round_to(uniform(&mut rng, space.lambda), 1),
            gamma: round_to(uniform(&mut rng, space.gamma), 1),
            n_rounds: space.n_rounds,
            base_score: space.base_score,
            seed: rng.random(),
        })
        .collect())
}

/// Held-out rows with 0/1 targets.
#[derive(Debug, Clone, Copy)]
pub struct EvalSet<'a> {
    pub rows: &'a [Vec<f64>],
    pub labels: &'a [f64],
}

impl EvalSet<'_> {
    /// Accuracy of `predict` at the 0.5 threshold.
    pub fn accuracy(&self, predict: impl Fn(&[f64]) -> f64) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        let correct =
            self.rows.iter().zip(self.labels).filter(|(x, &y)| ((predict(x) >= 0.5) as u8 as f64) == y).count();
        correct as f64 / self.rows.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult<P = GbtParams> {
    pub candidates: Vec<P>,
    pub val_scores: Vec<f64>,
    /// Test accuracy of every candidate, logged for top-k reporting only.
    pub test_scores: Vec<f64>,
    pub chosen: usize,
}

/// Fits every candidate on `train`, scores validation (and test, for the
/// log) accuracy and selects by validation score.
pub fn random_search<E: Executor>(
    candidates: Vec<GbtParams>,
    train: &TrainingData,
    val: EvalSet<'_>,
    test: EvalSet<'_>,
    exec: &E,
) -> Result<SearchResult> {
    let scores = exec.map(candidates.len(), |i| -> Result<(f64, f64)> {
        let model = fit_gbt(train, &candidates[i])?;
        Ok((val.accuracy(|x| model.predict_prob(x)), test.accuracy(|x| model.predict_prob(x))))
    });
    finish(candidates, scores, |p| p.max_depth)
}

pub fn random_search_forest<E: Executor>(
    candidates: Vec<ForestParams>,
    train: &TrainingData,
    val: EvalSet<'_>,
    test: EvalSet<'_>,
    exec: &E,
) -> Result<SearchResult<ForestParams>> {
    let scores = exec.map(candidates.len(), |i| -> Result<(f64, f64)> {
        let model = fit_random_forest(train, &candidates[i])?;
        Ok((val.accuracy(|x| model.predict_prob(x)), test.accuracy(|x| model.predict_prob(x))))
    });
    finish(candidates, scores, |p| p.max_depth)
}

fn finish<P>(
    candidates: Vec<P>,
    scores: Vec<Result<(f64, f64)>>,
    depth: impl Fn(&P) -> usize,
) -> Result<SearchResult<P>> {
    let mut val_scores = Vec::with_capacity(scores.len());
    let mut test_scores = Vec::with_capacity(scores.len());
    for s in scores {
        let (v, t) = s?;
        val_scores.push(v);
        test_scores.push(t);
    }
    if candidates.is_empty() {
        return Err(Error::EmptyEval);
    }
    let depths: Vec<usize> = candidates.iter().map(depth).collect();
    let chosen = select_model(&val_scores, &depths);
    Ok(SearchResult { candidates, val_scores, test_scores, chosen })
}

/// Candidate indices from best to worst: higher validation score, then
/// smaller depth, then lower index.
pub fn rank_candidates(val_scores: &[f64], depths: &[usize]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..val_scores.len()).collect();
    order.sort_by(|&a, &b| val_scores[b].total_cmp(&val_scores[a]).then(depths[a].cmp(&depths[b])).then(a.cmp(&b)));
    order
}

pub fn select_model(val_scores: &[f64], depths: &[usize]) -> usize {
    rank_candidates(val_scores, depths)[0]
}

/// Sampling bounds for the forest baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestSpace {
    pub n_estimators: (usize, usize),
    pub max_depth: (usize, usize),
    pub min_samples_split: (usize, usize),
    pub min_samples_leaf: (usize, usize),
}

impl Default for ForestSpace {
    fn default() -> Self {
        ForestSpace {
            n_estimators: (100, 1000),
            max_depth: (5, 50),
            min_samples_split: (2, 20),
            min_samples_leaf: (1, 10),
        }
    }
}

pub fn sample_forest_candidates(space: &ForestSpace, n: usize, seed: u64) -> Vec<ForestParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| ForestParams {
            n_estimators: rng.random_range(space.n_estimators.0..=space.n_estimators.1),
            max_depth: rng.random_range(space.max_depth.0..=space.max_depth.1),
            min_samples_split: rng.random_range(space.min_samples_split.0..=space.min_samples_split.1),
            min_samples_leaf: rng.random_range(space.min_samples_leaf.0..=space.min_samples_leaf.1),
            bootstrap: true,
            seed: rng.random(),
        })
        .collect()
}
