//! Second-order gradient boosting with logistic loss.
//!
//! Each round fits one regression tree to the gradients `g = p − y` and
//! hessians `h = p(1 − p)`. With `T(G) = sign(G)·max(|G| − α, 0)` the split
//! gain is `½[T(G_L)²/(H_L+λ) + T(G_R)²/(H_R+λ) − T(G)²/(H+λ)] − γ` and a
//! leaf weight is `−T(G)/(H+λ)`. Splits are found by exact greedy search over
//! presorted columns, one tree level at a time.

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Node, TrainingData, Tree};
use crate::error::{Error, Result};
use crate::math;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtParams {
    pub max_depth: usize,
    /// Minimum hessian sum in each child of a split.
    pub min_child_weight: f64,
    /// Fraction of rows drawn (without replacement) per round.
    pub subsample: f64,
    /// Fraction of columns drawn per tree.
    pub colsample_bytree: f64,
    pub learning_rate: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub n_rounds: usize,
    pub base_score: f64,
    pub seed: u64,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams {
            max_depth: 6,
            min_child_weight: 1.0,
            subsample: 1.0,
            colsample_bytree: 1.0,
            learning_rate: 0.3,
            alpha: 0.0,
            lambda: 1.0,
            gamma: 0.0,
            n_rounds: 100,
            base_score: 0.5,
            seed: 0,
        }
    }
}

impl GbtParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &'static str, value: f64| Err(Error::Range { what, value });
        if self.max_depth < 1 {
            return bad("max_depth", self.max_depth as f64);
        }
        for (what, v) in [("subsample", self.subsample), ("colsample_bytree", self.colsample_bytree)] {
            if !(v > 0.0 && v <= 1.0) {
                return bad(what, v);
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate", self.learning_rate);
        }
        for (what, v) in [
            ("alpha", self.alpha),
            ("lambda", self.lambda),
            ("gamma", self.gamma),
            ("min_child_weight", self.min_child_weight),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(what, v);
            }
        }
        if !(self.base_score > 0.0 && self.base_score < 1.0) {
            return bad("base_score", self.base_score);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub params: GbtParams,
    pub feature_names: Vec<String>,
    pub base_margin: f64,
    /// Raw leaf weights; each tree's output is scaled by the learning rate.
    pub trees: Vec<Tree>,
}

impl GbtModel {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn margin(&self, x: &[f64]) -> f64 {
        let lr = self.params.learning_rate;
        self.trees.iter().fold(self.base_margin, |m, t| m + lr * t.predict(x))
    }

    pub fn predict_prob(&self, x: &[f64]) -> f64 {
        math::sigmoid(self.margin(x))
    }

    pub fn check_row(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features() {
            return Err(Error::Shape { expected: self.n_features(), found: x.len() });
        }
        Ok(())
    }
}

pub fn fit_gbt(data: &TrainingData, params: &GbtParams) -> Result<GbtModel> {
    fit_gbt_traced(data, params).map(|(m, _)| m)
}

/// Fits a model and also returns the mean training log-loss before the
/// first round and after every round.
pub fn fit_gbt_traced(data: &TrainingData, params: &GbtParams) -> Result<(GbtModel, Vec<f64>)> {
    params.validate()?;
    data.check_both_classes()?;
    let n = data.n_rows();
    let m = data.n_features();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let base_margin = math::logit(params.base_score);
    let mut margins = alloc::vec![base_margin; n];
    let mut trace = Vec::with_capacity(params.n_rounds + 1);
    trace.push(mean_loss(&margins, &data.labels));
    let mut trees = Vec::with_capacity(params.n_rounds);
    let mut grad = alloc::vec![0.0; n];
    let mut hess = alloc::vec![0.0; n];
    let mut in_bag = alloc::vec![false; n];

    for _ in 0..params.n_rounds {
        for i in 0..n {
            let p = math::sigmoid(margins[i]);
            grad[i] = p - data.labels[i];
            hess[i] = p * (1.0 - p);
        }
        let rows = sample_without_replacement(&mut rng, n, params.subsample, false);
        in_bag.iter_mut().for_each(|b| *b = false);
        rows.iter().for_each(|&r| in_bag[r] = true);
        let features = sample_without_replacement(&mut rng, m, params.colsample_bytree, true);

        let tree = grow_tree(data, &grad, &hess, &in_bag, &features, params);
        for (i, margin) in margins.iter_mut().enumerate() {
            *margin += params.learning_rate * predict_column_major(&tree, data, i);
        }
        trace.push(mean_loss(&margins, &data.labels));
        trees.push(tree);
    }
    let model = GbtModel { params: params.clone(), feature_names: data.names.clone(), base_margin, trees };
    Ok((model, trace))
}

fn mean_loss(margins: &[f64], labels: &[f64]) -> f64 {
    margins.iter().zip(labels).map(|(&m, &y)| math::logistic_loss(m, y)).sum::<f64>() / margins.len() as f64
}

/// `k` distinct indices from `0..n` by partial Fisher–Yates, where
/// `k = max(1, round(fraction·n))` (or `floor` when `floor_count`). The full
/// range is returned without drawing when `k = n`. Output is ascending.
pub(crate) fn sample_without_replacement(
    rng: &mut ChaCha8Rng,
    n: usize,
    fraction: f64,
    floor_count: bool,
) -> Vec<usize> {
    let raw = fraction * n as f64;
    let k = (if floor_count { math::floor(raw) } else { math::round(raw) } as usize).clamp(1, n);
    let mut idx: Vec<usize> = (0..n).collect();
    if k == n {
        return idx;
    }
    for i in 0..k {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

fn predict_column_major(tree: &Tree, data: &TrainingData, row: usize) -> f64 {
    let mut i = 0;
    loop {
        match tree.nodes[i] {
            Node::Leaf { value, .. } => return value,
            Node::Split { feature, threshold, left, right, .. } => {
                i = if data.columns[feature][row] < threshold { left } else { right };
            }
        }
    }
}

#[inline]
fn soft_threshold(g: f64, alpha: f64) -> f64 {
    if g > alpha {
        g - alpha
    } else if g < -alpha {
        g + alpha
    } else {
        0.0
    }
}

#[inline]
fn score(g: f64, h: f64, p: &GbtParams) -> f64 {
    let denom = h + p.lambda;
    if denom <= 0.0 {
        return 0.0;
    }
    let t = soft_threshold(g, p.alpha);
    t * t / denom
}

#[inline]
fn leaf_weight(g: f64, h: f64, p: &GbtParams) -> f64 {
    let denom = h + p.lambda;
    if denom <= 0.0 {
        return 0.0;
    }
    -soft_threshold(g, p.alpha) / denom
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

struct GrowNode {
    g: f64,
    h: f64,
    split: Option<(Candidate, usize)>,
}

const UNASSIGNED: u32 = u32::MAX;

fn grow_tree(
    data: &TrainingData,
    grad: &[f64],
    hess: &[f64],
    in_bag: &[bool],
    features: &[usize],
    p: &GbtParams,
) -> Tree {
    let n = data.n_rows();
    let mut node_of: Vec<u32> = in_bag.iter().map(|&b| if b { 0 } else { UNASSIGNED }).collect();
    let (mut g0, mut h0) = (0.0, 0.0);
    for i in (0..n).filter(|&i| in_bag[i]) {
        g0 += grad[i];
        h0 += hess[i];
    }
    let mut nodes = alloc::vec![GrowNode { g: g0, h: h0, split: None }];
    let mut frontier: Vec<usize> = alloc::vec![0];

    for _depth in 0..p.max_depth {
        if frontier.is_empty() {
            break;
        }
        // slot[node] is the node's position in the frontier, or usize::MAX.
        let mut slot = alloc::vec![usize::MAX; nodes.len()];
        for (s, &id) in frontier.iter().enumerate() {
            slot[id] = s;
        }
        let mut best: Vec<Option<Candidate>> = alloc::vec![None; frontier.len()];
        let mut gl = alloc::vec![0.0; frontier.len()];
        let mut hl = alloc::vec![0.0; frontier.len()];
        let mut last: Vec<Option<f64>> = alloc::vec![None; frontier.len()];
        for &f in features {
            gl.iter_mut().for_each(|v| *v = 0.0);
            hl.iter_mut().for_each(|v| *v = 0.0);
            last.iter_mut().for_each(|v| *v = None);
            let col = &data.columns[f];
            for &r in &data.sorted[f] {
                let r = r as usize;
                let id = node_of[r];
                if id == UNASSIGNED {
                    continue;
                }
                let s = slot[id as usize];
                if s == usize::MAX {
                    continue;
                }
                let v = col[r];
                if let Some(prev) = last[s] {
                    if v > prev {
                        let node = &nodes[frontier[s]];
                        let (hr, gr) = (node.h - hl[s], node.g - gl[s]);
                        if hl[s] >= p.min_child_weight && hr >= p.min_child_weight {
                            let gain =
                                0.5 * (score(gl[s], hl[s], p) + score(gr, hr, p) - score(node.g, node.h, p)) - p.gamma;
                            if gain > best[s].map_or(0.0, |b| b.gain) {
                                best[s] = Some(Candidate { gain, feature: f, threshold: midpoint(prev, v) });
                            }
                        }
                    }
                }
                gl[s] += grad[r];
                hl[s] += hess[r];
                last[s] = Some(v);
            }
        }

        let mut next = Vec::new();
        for (s, &id) in frontier.iter().enumerate() {
            if let Some(c) = best[s] {
                let left = nodes.len();
                nodes.push(GrowNode { g: 0.0, h: 0.0, split: None });
                nodes.push(GrowNode { g: 0.0, h: 0.0, split: None });
                nodes[id].split = Some((c, left));
                next.push(left);
                next.push(left + 1);
            }
        }
        if next.is_empty() {
            break;
        }
        for r in 0..n {
            let id = node_of[r];
            if id == UNASSIGNED {
                continue;
            }
            if let Some((c, left)) = nodes[id as usize].split {
                let child = if data.columns[c.feature][r] < c.threshold { left } else { left + 1 };
                node_of[r] = child as u32;
                nodes[child].g += grad[r];
                nodes[child].h += hess[r];
            }
        }
        frontier = next;
    }

    Tree {
        nodes: nodes
            .iter()
            .map(|node| match node.split {
                Some((c, left)) => Node::Split {
                    feature: c.feature,
                    threshold: c.threshold,
                    left,
                    right: left + 1,
                    gain: c.gain,
                    cover: node.h,
                },
                None => Node::Leaf { value: leaf_weight(node.g, node.h, p), cover: node.h },
            })
            .collect(),
    }
}

/// Midpoint that stays strictly above `lo` even when the two values are
/// adjacent floats.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid > lo {
        mid
    } else {
        hi
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::{FeatureRow, Table};
    use crate::labeling::Outcome;
    use alloc::string::ToString;
    use alloc::vec;

    fn table(x: &[&[f64]], y: &[u8]) -> TrainingData {
        let m = x[0].len();
        let rows = x
            .iter()
            .zip(y)
            .enumerate()
            .map(|(i, (v, &l))| FeatureRow {
                case_id: i.to_string(),
                values: v.to_vec(),
                label: if l == 1 { Outcome::Effective } else { Outcome::NotEffective },
            })
            .collect();
        let names = (0..m).map(|i| alloc::format!("f{i}")).collect();
        TrainingData::from_table(&Table::new(names, rows).unwrap()).unwrap()
    }

    fn stump(lambda: f64) -> GbtParams {
        GbtParams {
            max_depth: 1,
            min_child_weight: 0.0,
            learning_rate: 1.0,
            lambda,
            n_rounds: 1,
            ..GbtParams::default()
        }
    }

    #[test]
    fn two_sample_stump() {
        let data = table(&[&[0.0], &[1.0]], &[0, 1]);
        let model = fit_gbt(&data, &stump(0.0)).unwrap();
        let leaves: Vec<f64> = model.trees[0].leaves().map(|l| l.0).collect();
        assert_eq!(leaves, [-2.0, 2.0]);
        assert!((model.predict_prob(&[0.0]) - 0.11920292202211755).abs() < 1e-12);
        // λ = 1: ∓0.5 / (0.25 + 1).
        let model = fit_gbt(&data, &stump(1.0)).unwrap();
        let leaves: Vec<f64> = model.trees[0].leaves().map(|l| l.0).collect();
        assert_eq!(leaves, [-0.4, 0.4]);
    }

    #[test]
    fn constant_column_is_never_split() {
        let data = table(&[&[3.0, 0.0], &[3.0, 1.0], &[3.0, 2.0], &[3.0, 3.0]], &[0, 0, 1, 1]);
        let model = fit_gbt(&data, &GbtParams { min_child_weight: 0.0, n_rounds: 5, ..GbtParams::default() }).unwrap();
        for t in &model.trees {
            for n in &t.nodes {
                if let Node::Split { feature, .. } = n {
                    assert_eq!(*feature, 1);
                }
            }
        }
    }

    #[test]
    fn zero_rounds_predicts_base_score() {
        let data = table(&[&[0.0], &[1.0]], &[0, 1]);
        let model = fit_gbt(&data, &GbtParams { n_rounds: 0, base_score: 0.3, ..GbtParams::default() }).unwrap();
        assert!((model.predict_prob(&[5.0]) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn single_class_is_rejected() {
        let data = table(&[&[0.0], &[1.0]], &[1, 1]);
        assert_eq!(fit_gbt(&data, &GbtParams::default()), Err(Error::DegenerateLabels));
    }

    #[test]
    fn invalid_params_are_rejected() {
        let data = table(&[&[0.0], &[1.0]], &[0, 1]);
        for p in [
            GbtParams { max_depth: 0, ..GbtParams::default() },
            GbtParams { subsample: 0.0, ..GbtParams::default() },
            GbtParams { colsample_bytree: 1.5, ..GbtParams::default() },
            GbtParams { learning_rate: 0.0, ..GbtParams::default() },
            GbtParams { lambda: -1.0, ..GbtParams::default() },
        ] {
            assert!(matches!(fit_gbt(&data, &p), Err(Error::Range { .. })));
        }
    }

    #[test]
    fn sampling_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_without_replacement(&mut rng, 10, 0.75, false).len(), 8);
        assert_eq!(sample_without_replacement(&mut rng, 10, 0.75, true).len(), 7);
        assert_eq!(sample_without_replacement(&mut rng, 10, 0.01, true).len(), 1);
        let s = sample_without_replacement(&mut rng, 10, 0.5, false);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(sample_without_replacement(&mut rng, 4, 1.0, false), vec![0, 1, 2, 3]);
    }

    #[test]
    fn l1_shrinks_leaves_to_zero() {
        let data = table(&[&[0.0], &[1.0]], &[0, 1]);
        let model = fit_gbt(&data, &GbtParams { alpha: 1.0, ..stump(0.0) }).unwrap();
        assert_eq!(model.trees[0].nodes.len(), 1);
        assert_eq!(model.trees[0].predict(&[0.0]), 0.0);
    }
}
