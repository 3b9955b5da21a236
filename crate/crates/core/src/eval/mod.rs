//! Ensembling, the cross-validation fold plan, classification metrics and
//! the cross-validation driver.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::trees::search::rank_candidates;
use crate::trees::SearchResult;

pub mod cv;

pub use cv::{
    case_features, evaluate_folds, plan_folds, predict_case, run_cv, train_folds, CasePrediction, CohortCase, CvConfig,
    CvReport, FeatureFuseConfig, FeatureSet, FoldArtifacts, ForestConfig, ImageBranchConfig, LeakageAudit,
};

pub const THRESHOLD: f64 = 0.5;

/// Mean of the image and tabular probabilities.
pub fn ensemble_prob(p_img: f64, p_tab: f64) -> Result<f64> {
    for p in [p_img, p_tab] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Range { what: "probability", value: p });
        }
    }
    Ok((p_img + p_tab) / 2.0)
}

/// Class at the decision threshold (`p ≥ 0.5` is class 1).
pub fn decide(p: f64) -> u8 {
    (p >= THRESHOLD) as u8
}

/// Independent stream seed derived from a base seed (SplitMix64 finalizer).
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: Vec<Fold>,
}

pub const MIN_COHORT: usize = 10;

/// Seeded shuffle cut into `k` test blocks (the first `n mod k` one larger).
/// The rest of each fold is reshuffled and split into
/// `max(1, n/10)` validation cases and the remaining training cases.
pub fn make_folds(case_ids: &[String], k: usize, seed: u64) -> Result<FoldPlan> {
    let n = case_ids.len();
    if n < MIN_COHORT {
        return Err(Error::CohortTooSmall { n, min: MIN_COHORT });
    }
    if k < 2 || k > n {
        return Err(Error::Range { what: "fold count", value: k as f64 });
    }
    let mut seen = BTreeSet::new();
    for id in case_ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::Duplicate(id.clone()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<String> = case_ids.to_vec();
    order.shuffle(&mut rng);
    let n_val = (n / 10).max(1);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = n / k + usize::from(f < n % k);
        let test: Vec<String> = order[start..start + size].to_vec();
        let mut rest: Vec<String> = order[..start].iter().chain(&order[start + size..]).cloned().collect();
        rest.shuffle(&mut rng);
        let train = rest.split_off(n_val);
        folds.push(Fold { train, validation: rest, test });
        start += size;
    }
    Ok(FoldPlan { folds })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    /// Rows are true classes, columns predicted classes.
    pub confusion: [[usize; 2]; 2],
    pub accuracy: f64,
    pub classes: [ClassMetrics; 2],
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    /// Present when both classes occur.
    pub auc: Option<f64>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn metrics_from_confusion(confusion: [[usize; 2]; 2]) -> Result<MetricsReport> {
    let n: usize = confusion.iter().flatten().sum();
    if n == 0 {
        return Err(Error::EmptyEval);
    }
    let mut classes = [ClassMetrics::default(); 2];
    for (c, m) in classes.iter_mut().enumerate() {
        let tp = confusion[c][c];
        m.precision = ratio(tp, confusion[0][c] + confusion[1][c]);
        m.recall = ratio(tp, confusion[c][0] + confusion[c][1]);
        m.f1 = if m.precision + m.recall > 0.0 { 2.0 * m.precision * m.recall / (m.precision + m.recall) } else { 0.0 };
    }
    Ok(MetricsReport {
        n,
        confusion,
        accuracy: ratio(confusion[0][0] + confusion[1][1], n),
        classes,
        macro_precision: (classes[0].precision + classes[1].precision) / 2.0,
        macro_recall: (classes[0].recall + classes[1].recall) / 2.0,
        macro_f1: (classes[0].f1 + classes[1].f1) / 2.0,
        auc: None,
    })
}

/// Metrics of predicted classes against 0/1 labels.
pub fn compute_metrics(predicted: &[u8], labels: &[u8]) -> Result<MetricsReport> {
    if predicted.len() != labels.len() {
        return Err(Error::Shape { expected: labels.len(), found: predicted.len() });
    }
    let mut confusion = [[0usize; 2]; 2];
    for (&p, &y) in predicted.iter().zip(labels) {
        if p > 1 || y > 1 {
            return Err(Error::Range { what: "class", value: p.max(y) as f64 });
        }
        confusion[y as usize][p as usize] += 1;
    }
    metrics_from_confusion(confusion)
}

/// Metrics at the 0.5 threshold plus AUC when both classes are present.
pub fn score_probabilities(probs: &[f64], labels: &[u8]) -> Result<MetricsReport> {
    let predicted: Vec<u8> = probs.iter().map(|&p| decide(p)).collect();
    let mut report = compute_metrics(&predicted, labels)?;
    report.auc = roc_auc(probs, labels).ok().map(|(_, auc)| auc);
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Scores at or above this value are called positive. `None` for the
    /// origin, where nothing is.
    pub threshold: Option<f64>,
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC points at every distinct score (descending) and the AUC computed from
/// mid-ranks, which counts tied positive/negative pairs as one half.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<(Vec<RocPoint>, f64)> {
    if scores.len() != labels.len() {
        return Err(Error::Shape { expected: labels.len(), found: scores.len() });
    }
    if scores.is_empty() {
        return Err(Error::EmptyEval);
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Range { what: "score", value: f64::NAN });
    }
    let pos = labels.iter().filter(|&&y| y == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::DegenerateLabels);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid_rank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += mid_rank * order[i..=j].iter().filter(|&&k| labels[k] == 1).count() as f64;
        i = j + 1;
    }
    let (p, q) = (pos as f64, neg as f64);
    let auc = (rank_sum - p * (p + 1.0) / 2.0) / (p * q);

    let mut points = alloc::vec![RocPoint { threshold: None, fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut k = order.len();
    while k > 0 {
        let s = scores[order[k - 1]];
        while k > 0 && scores[order[k - 1]] == s {
            if labels[order[k - 1]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            k -= 1;
        }
        points.push(RocPoint { threshold: Some(s), fpr: fp as f64 / q, tpr: tp as f64 / p });
    }
    Ok((points, auc))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let (mean, std) = math::mean_std(values);
        MeanStd { mean, std }
    }
}

/// One row of the per-model results table, as mean ± std across folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub precision_0: MeanStd,
    pub recall_0: MeanStd,
    pub f1_0: MeanStd,
    pub precision_1: MeanStd,
    pub recall_1: MeanStd,
    pub f1_1: MeanStd,
    /// Percent.
    pub accuracy: MeanStd,
    pub precision_avg: MeanStd,
    pub recall_avg: MeanStd,
    pub f1_avg: MeanStd,
}

pub fn summary_row(folds: &[MetricsReport]) -> SummaryRow {
    let col = |f: &dyn Fn(&MetricsReport) -> f64| MeanStd::of(&folds.iter().map(f).collect::<Vec<_>>());
    SummaryRow {
        precision_0: col(&|m| m.classes[0].precision),
        recall_0: col(&|m| m.classes[0].recall),
        f1_0: col(&|m| m.classes[0].f1),
        precision_1: col(&|m| m.classes[1].precision),
        recall_1: col(&|m| m.classes[1].recall),
        f1_1: col(&|m| m.classes[1].f1),
        accuracy: col(&|m| 100.0 * m.accuracy),
        precision_avg: col(&|m| m.macro_precision),
        recall_avg: col(&|m| m.macro_recall),
        f1_avg: col(&|m| m.macro_f1),
    }
}

/// Mean test accuracy of the `k` best candidates by validation score (ties
/// by smaller depth, then index).
pub fn topk_average<P>(result: &SearchResult<P>, depths: &[usize], k: usize) -> Result<f64> {
    if k == 0 || result.val_scores.is_empty() {
        return Err(Error::EmptyEval);
    }
    let order = rank_candidates(&result.val_scores, depths);
    let top = &order[..k.min(order.len())];
    Ok(top.iter().map(|&i| result.test_scores[i]).sum::<f64>() / top.len() as f64)
}

/// Per-fold top-k averages summarised across folds.
pub fn topk_across_folds(per_fold: &[f64]) -> MeanStd {
    MeanStd::of(per_fold)
}
