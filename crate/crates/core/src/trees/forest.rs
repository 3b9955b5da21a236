//! Random-forest baseline: bootstrapped CART trees with Gini splits, each
//! split drawing √m candidate features. The forest probability is the mean
//! of the leaves' positive fractions.

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gbt::sample_without_replacement;
use super::{Node, TrainingData, Tree};
use crate::error::{Error, Result};
use crate::math;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_estimators: 100,
            max_depth: 10,
            min_samples_split: 2,
            min_samples_leaf: 1,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(Error::Range { what: "n_estimators", value: 0.0 });
        }
        if self.min_samples_split < 2 {
            return Err(Error::Range { what: "min_samples_split", value: self.min_samples_split as f64 });
        }
        if self.min_samples_leaf < 1 {
            return Err(Error::Range { what: "min_samples_leaf", value: 0.0 });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub params: ForestParams,
    pub feature_names: Vec<String>,
    pub trees: Vec<Tree>,
    /// Rows left out of each tree's bootstrap sample.
    pub out_of_bag: Vec<Vec<usize>>,
}

impl ForestModel {
    pub fn predict_prob(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}

pub fn fit_random_forest(data: &TrainingData, params: &ForestParams) -> Result<ForestModel> {
    params.validate()?;
    data.check_both_classes()?;
    let n = data.n_rows();
    let m = data.n_features();
    let max_features = (math::floor(math::sqrt(m as f64)) as usize).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut trees = Vec::with_capacity(params.n_estimators);
    let mut out_of_bag = Vec::with_capacity(params.n_estimators);
    for _ in 0..params.n_estimators {
        let rows: Vec<usize> =
            if params.bootstrap { (0..n).map(|_| rng.random_range(0..n)).collect() } else { (0..n).collect() };
        let mut drawn = alloc::vec![false; n];
        rows.iter().for_each(|&r| drawn[r] = true);
        out_of_bag.push((0..n).filter(|&r| !drawn[r]).collect());
        trees.push(grow(data, rows, max_features, params, &mut rng));
    }
    Ok(ForestModel { params: params.clone(), feature_names: data.names.clone(), trees, out_of_bag })
}

fn positive_fraction(data: &TrainingData, rows: &[usize]) -> f64 {
    rows.iter().map(|&r| data.labels[r]).sum::<f64>() / rows.len() as f64
}

fn gini(pos: f64, n: f64) -> f64 {
    let p = pos / n;
    2.0 * p * (1.0 - p)
}

fn grow(data: &TrainingData, rows: Vec<usize>, max_features: usize, p: &ForestParams, rng: &mut ChaCha8Rng) -> Tree {
    let mut nodes: Vec<Node> = Vec::new();
    // (node slot, rows, depth)
    let mut stack = alloc::vec![(0usize, rows, 0usize)];
    nodes.push(Node::Leaf { value: 0.0, cover: 0.0 });
    while let Some((id, rows, depth)) = stack.pop() {
        let n = rows.len();
        let frac = positive_fraction(data, &rows);
        let leaf = Node::Leaf { value: frac, cover: n as f64 };
        if depth >= p.max_depth || n < p.min_samples_split || frac == 0.0 || frac == 1.0 {
            nodes[id] = leaf;
            continue;
        }
        let features =
            sample_without_replacement(rng, data.n_features(), max_features as f64 / data.n_features() as f64, true);
        let parent = gini(frac * n as f64, n as f64);
        let total_pos = frac * n as f64;
        let mut best: Option<(f64, usize, f64)> = None;
        let mut sorted = rows.clone();
        for &f in &features {
            let col = &data.columns[f];
            sorted.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
            let mut left_pos = 0.0;
            for k in 1..n {
                left_pos += data.labels[sorted[k - 1]];
                let (lo, hi) = (col[sorted[k - 1]], col[sorted[k]]);
                if hi <= lo || k < p.min_samples_leaf || n - k < p.min_samples_leaf {
                    continue;
                }
                let (nl, nr) = (k as f64, (n - k) as f64);
                let child = (nl * gini(left_pos, nl) + nr * gini(total_pos - left_pos, nr)) / n as f64;
                let decrease = parent - child;
                if decrease > best.map_or(0.0, |b| b.0) {
                    let mid = lo + (hi - lo) / 2.0;
                    best = Some((decrease, f, if mid > lo { mid } else { hi }));
                }
            }
        }
        let Some((gain, feature, threshold)) = best else {
            nodes[id] = leaf;
            continue;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| data.columns[feature][i] < threshold);
        let left = nodes.len();
        nodes.push(Node::Leaf { value: 0.0, cover: 0.0 });
        nodes.push(Node::Leaf { value: 0.0, cover: 0.0 });
        nodes[id] = Node::Split { feature, threshold, left, right: left + 1, gain, cover: n as f64 };
        stack.push((left + 1, r, depth + 1));
        stack.push((left, l, depth + 1));
    }
    Tree { nodes }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::{FeatureRow, Table};
    use crate::labeling::Outcome;
    use alloc::string::ToString;
    use alloc::vec;

    fn data() -> TrainingData {
        let rows = vec![
            FeatureRow { case_id: "a".to_string(), values: vec![0.0], label: Outcome::NotEffective },
            FeatureRow { case_id: "b".to_string(), values: vec![1.0], label: Outcome::Effective },
        ];
        TrainingData::from_table(&Table::new(vec!["x".to_string()], rows).unwrap()).unwrap()
    }

    #[test]
    fn separable_pair_is_fit_exactly() {
        let p = ForestParams { n_estimators: 1, max_depth: 1, bootstrap: false, ..ForestParams::default() };
        let f = fit_random_forest(&data(), &p).unwrap();
        assert_eq!(f.predict_prob(&[0.0]), 0.0);
        assert_eq!(f.predict_prob(&[1.0]), 1.0);
    }

    #[test]
    fn identical_trees_vote_like_one() {
        let p = ForestParams { n_estimators: 5, bootstrap: false, ..ForestParams::default() };
        let f = fit_random_forest(&data(), &p).unwrap();
        assert!(f.trees.windows(2).all(|w| w[0] == w[1]));
        assert_eq!(f.predict_prob(&[0.2]), f.trees[0].predict(&[0.2]));
    }

    #[test]
    fn bootstrap_leaves_rows_out() {
        let p = ForestParams { n_estimators: 20, ..ForestParams::default() };
        let f = fit_random_forest(&data(), &p).unwrap();
        assert!(f.out_of_bag.iter().any(|o| !o.is_empty()));
    }
}
