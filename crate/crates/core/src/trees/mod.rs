//! Tree ensembles for the tabular branch: gradient boosting, a random-forest
//! baseline, bounded random search over their parameters and TreeSHAP.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::Table;

pub mod forest;
pub mod gbt;
pub mod search;
pub mod shap;

pub use forest::{fit_random_forest, ForestModel, ForestParams};
pub use gbt::{fit_gbt, fit_gbt_traced, GbtModel, GbtParams};
pub use search::{random_search, select_model, GbtSpace, SearchResult};
pub use shap::{mean_abs_shap, shap_values, ShapRanking, ShapVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    /// Rows with `x[feature] < threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        gain: f64,
        cover: f64,
    },
    Leaf {
        value: f64,
        cover: f64,
    },
}

impl Node {
    pub fn cover(&self) -> f64 {
        match *self {
            Node::Split { cover, .. } | Node::Leaf { cover, .. } => cover,
        }
    }
}

/// Binary tree stored as a node array with the root at index 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(value: f64, cover: f64) -> Self {
        Tree { nodes: alloc::vec![Node::Leaf { value, cover }] }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value, .. } => return value,
                Node::Split { feature, threshold, left, right, .. } => {
                    i = if x[feature] < threshold { left } else { right };
                }
            }
        }
    }

    /// Number of split levels on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }

    pub fn leaves(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().filter_map(|n| match *n {
            Node::Leaf { value, cover } => Some((value, cover)),
            Node::Split { .. } => None,
        })
    }
}

/// Column-major copy of a table with every column presorted, shared by all
/// fits on the same rows.
#[derive(Debug, Clone)]
pub struct TrainingData {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
    /// Per column, row indices ordered by value (ties by row index).
    pub sorted: Vec<Vec<u32>>,
    /// 0/1 targets.
    pub labels: Vec<f64>,
}

impl TrainingData {
    pub fn from_table(table: &Table) -> Result<Self> {
        if table.is_empty() {
            return Err(Error::EmptyEval);
        }
        let n = table.len();
        let m = table.n_features();
        let columns: Vec<Vec<f64>> = (0..m).map(|f| table.rows.iter().map(|r| r.values[f]).collect()).collect();
        if columns.iter().flatten().any(|v| v.is_nan()) {
            return Err(Error::InvalidParams("NaN feature value".into()));
        }
        let sorted = columns
            .iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..n as u32).collect();
                idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Ok(TrainingData { names: table.names.clone(), columns, sorted, labels: table.labels() })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    pub(crate) fn check_both_classes(&self) -> Result<()> {
        let positives = self.labels.iter().filter(|&&y| y == 1.0).count();
        if positives == 0 || positives == self.n_rows() {
            return Err(Error::DegenerateLabels);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tree_routing_and_depth() {
        let t = Tree {
            nodes: alloc::vec![
                Node::Split { feature: 0, threshold: 0.5, left: 1, right: 2, gain: 1.0, cover: 2.0 },
                Node::Leaf { value: -1.0, cover: 1.0 },
                Node::Leaf { value: 1.0, cover: 1.0 },
            ],
        };
        assert_eq!(t.predict(&[0.0]), -1.0);
        assert_eq!(t.predict(&[0.5]), 1.0);
        assert_eq!(t.depth(), 1);
        assert_eq!(Tree::leaf(0.0, 1.0).depth(), 0);
    }
}
