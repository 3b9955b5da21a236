//! Path-dependent TreeSHAP on the margin scale.
//!
//! Missing features are integrated out by following both children of a
//! split in proportion to their training cover. Attributions satisfy
//! `Σφ + base = margin(x)`, where `base` is the cover-weighted expected
//! margin.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{GbtModel, Node, Tree};
use crate::error::Result;
use crate::math;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapVector {
    pub values: Vec<f64>,
    pub base: f64,
}

pub fn shap_values(model: &GbtModel, x: &[f64]) -> Result<ShapVector> {
    model.check_row(x)?;
    let lr = model.params.learning_rate;
    let mut values = alloc::vec![0.0; model.n_features()];
    let mut base = model.base_margin;
    let mut phi = alloc::vec![0.0; model.n_features()];
    for tree in &model.trees {
        phi.iter_mut().for_each(|v| *v = 0.0);
        tree_shap(tree, x, &mut phi);
        for (v, p) in values.iter_mut().zip(&phi) {
            *v += lr * p;
        }
        base += lr * expected_value(tree);
    }
    Ok(ShapVector { values, base })
}

/// Fractions of the parent's cover sent to each child. Zero-cover parents
/// split evenly.
fn child_fractions(tree: &Tree, node: usize) -> (f64, f64) {
    let Node::Split { left, right, cover, .. } = tree.nodes[node] else {
        return (0.0, 0.0);
    };
    if cover > 0.0 {
        (tree.nodes[left].cover() / cover, tree.nodes[right].cover() / cover)
    } else {
        (0.5, 0.5)
    }
}

/// Cover-weighted mean output of one tree.
pub fn expected_value(tree: &Tree) -> f64 {
    fn go(tree: &Tree, i: usize) -> f64 {
        match tree.nodes[i] {
            Node::Leaf { value, .. } => value,
            Node::Split { left, right, .. } => {
                let (fl, fr) = child_fractions(tree, i);
                fl * go(tree, left) + fr * go(tree, right)
            }
        }
    }
    go(tree, 0)
}

#[derive(Clone, Copy, Default)]
struct PathElement {
    feature: Option<usize>,
    zero_fraction: f64,
    one_fraction: f64,
    weight: f64,
}

fn extend_path(path: &mut [PathElement], depth: usize, zero: f64, one: f64, feature: Option<usize>) {
    path[depth] =
        PathElement { feature, zero_fraction: zero, one_fraction: one, weight: if depth == 0 { 1.0 } else { 0.0 } };
    let d = depth as f64;
    for i in (0..depth).rev() {
        let fi = i as f64;
        path[i + 1].weight += one * path[i].weight * (fi + 1.0) / (d + 1.0);
        path[i].weight = zero * path[i].weight * (d - fi) / (d + 1.0);
    }
}

fn unwind_path(path: &mut [PathElement], depth: usize, index: usize) {
    let one = path[index].one_fraction;
    let zero = path[index].zero_fraction;
    let d = depth as f64;
    let mut next_one = path[depth].weight;
    for i in (0..depth).rev() {
        let fi = i as f64;
        if one != 0.0 {
            let tmp = path[i].weight;
            path[i].weight = next_one * (d + 1.0) / ((fi + 1.0) * one);
            next_one = tmp - path[i].weight * zero * (d - fi) / (d + 1.0);
        } else {
            path[i].weight = path[i].weight * (d + 1.0) / (zero * (d - fi));
        }
    }
    for i in index..depth {
        path[i].feature = path[i + 1].feature;
        path[i].zero_fraction = path[i + 1].zero_fraction;
        path[i].one_fraction = path[i + 1].one_fraction;
    }
}

fn unwound_path_sum(path: &[PathElement], depth: usize, index: usize) -> f64 {
    let one = path[index].one_fraction;
    let zero = path[index].zero_fraction;
    let d = depth as f64;
    let mut next_one = path[depth].weight;
    let mut total = 0.0;
    for i in (0..depth).rev() {
        let fi = i as f64;
        if one != 0.0 {
            let tmp = next_one * (d + 1.0) / ((fi + 1.0) * one);
            total += tmp;
            next_one = path[i].weight - tmp * zero * (d - fi) / (d + 1.0);
        } else if zero != 0.0 {
            total += path[i].weight / zero / ((d - fi) / (d + 1.0));
        }
    }
    total
}

/// Adds one tree's attributions (unscaled) into `phi`.
pub fn tree_shap(tree: &Tree, x: &[f64], phi: &mut [f64]) {
    let path = alloc::vec![PathElement::default(); tree.depth() + 2];
    recurse(tree, x, phi, 0, &path, 0, 1.0, 1.0, None);
}

#[allow(clippy::too_many_arguments)]
fn recurse(
    tree: &Tree,
    x: &[f64],
    phi: &mut [f64],
    node: usize,
    parent_path: &[PathElement],
    depth: usize,
    zero: f64,
    one: f64,
    feature: Option<usize>,
) {
    let mut path: Vec<PathElement> = parent_path.to_vec();
    extend_path(&mut path, depth, zero, one, feature);
    let mut depth = depth;
    match tree.nodes[node] {
        Node::Leaf { value, .. } => {
            for i in 1..=depth {
                let w = unwound_path_sum(&path, depth, i);
                let el = path[i];
                if let Some(f) = el.feature {
                    phi[f] += w * (el.one_fraction - el.zero_fraction) * value;
                }
            }
        }
        Node::Split { feature: f, threshold, left, right, .. } => {
            let (fl, fr) = child_fractions(tree, node);
            let (hot, cold, hot_frac, cold_frac) =
                if x[f] < threshold { (left, right, fl, fr) } else { (right, left, fr, fl) };
            let (mut incoming_zero, mut incoming_one) = (1.0, 1.0);
            if let Some(k) = (1..=depth).find(|&k| path[k].feature == Some(f)) {
                incoming_zero = path[k].zero_fraction;
                incoming_one = path[k].one_fraction;
                unwind_path(&mut path, depth, k);
                depth -= 1;
            }
            recurse(tree, x, phi, hot, &path, depth + 1, hot_frac * incoming_zero, incoming_one, Some(f));
            recurse(tree, x, phi, cold, &path, depth + 1, cold_frac * incoming_zero, 0.0, Some(f));
        }
    }
}

/// Mean |φ| per feature over `rows`. Each mean is summed in sorted order so
/// that it does not depend on row order.
pub fn fold_mean_abs_shap(model: &GbtModel, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    let m = model.n_features();
    let mut per_feature: Vec<Vec<f64>> = alloc::vec![Vec::with_capacity(rows.len()); m];
    for row in rows {
        let s = shap_values(model, row)?;
        for (acc, v) in per_feature.iter_mut().zip(&s.values) {
            acc.push(v.abs());
        }
    }
    Ok(per_feature
        .into_iter()
        .map(|mut v| {
            if v.is_empty() {
                return 0.0;
            }
            v.sort_by(f64::total_cmp);
            v.iter().sum::<f64>() / v.len() as f64
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapEntry {
    pub feature: String,
    pub mean: f64,
    pub std: f64,
}

/// Features ordered by decreasing mean |φ| across folds (ties by column).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapRanking {
    pub entries: Vec<ShapEntry>,
}

/// Aggregates per-fold mean |φ| vectors into mean ± population std.
pub fn mean_abs_shap(names: &[String], per_fold: &[Vec<f64>]) -> ShapRanking {
    let mut stats: Vec<(usize, f64, f64)> = (0..names.len())
        .map(|j| {
            let values: Vec<f64> = per_fold.iter().map(|f| f[j]).collect();
            let (mean, std) = math::mean_std(&values);
            (j, mean, std)
        })
        .collect();
    stats.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ShapRanking {
        entries: stats.into_iter().map(|(j, mean, std)| ShapEntry { feature: names[j].clone(), mean, std }).collect(),
    }
}
