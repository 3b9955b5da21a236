//! Per-fold training of both branches and the evaluation report.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{
    derive_seed, ensemble_prob, make_folds, roc_auc, score_probabilities, summary_row, topk_average, Fold, FoldPlan,
    MeanStd, MetricsReport, RocPoint, SummaryRow,
};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::fusion::{
    embedding_names, encode_clinical, fuse, fuse_with_embedding, fused_names, EncodingDictionary, FeatureRow, Table,
    FUSED_COUNT,
};
use crate::grid::{CaseBundle, Sequence};
use crate::image::{crop_and_resize, extract_embedding, DEFAULT_MARGIN};
use crate::image::{train_baseline, ExternalProbs, ImgModel, PooledSample, TrainConfig, EMBED_DIM};
use crate::labeling::{derive_outcome, ClinicalRecord, Outcome};
use crate::radiomics::FEATURE_COUNT;
use crate::radiomics::{extract_features, RadiomicsConfig};
use crate::segmentation::{merge_masks, recombine_wt};
use crate::trees::search::{
    random_search, random_search_forest, sample_candidates, sample_forest_candidates, EvalSet, ForestSpace,
};
use crate::trees::shap::fold_mean_abs_shap;
use crate::trees::{
    fit_gbt, fit_random_forest, mean_abs_shap, ForestModel, ForestParams, GbtModel, GbtParams, GbtSpace, SearchResult,
    ShapRanking, TrainingData,
};

/// One patient as seen by the cross-validation driver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortCase {
    pub record: ClinicalRecord,
    pub radiomics: Vec<f64>,
    /// Pooled image embedding. Needed by the baseline image branch and by
    /// FeatureFuse.
    pub embedding: Option<Vec<f64>>,
}

impl CohortCase {
    pub fn case_id(&self) -> &str {
        &self.record.case_id
    }

    /// Merges the masks, extracts radiomics from T2 inside the whole tumour
    /// and, when asked, the pooled image embedding.
    pub fn from_bundle(
        bundle: &CaseBundle,
        record: ClinicalRecord,
        radiomics: &RadiomicsConfig,
        with_embedding: bool,
    ) -> Result<Self> {
        let (features, embedding) = case_features(bundle, radiomics, with_embedding)?;
        Ok(CohortCase { record, radiomics: features, embedding })
    }
}

/// Radiomic features and, optionally, the pooled image embedding of one case.
pub fn case_features(
    bundle: &CaseBundle,
    radiomics: &RadiomicsConfig,
    with_embedding: bool,
) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    let merged = merge_masks(&bundle.masks)?;
    let wt = recombine_wt(&merged)?;
    let features = extract_features(bundle.sequence(Sequence::T2), &wt, radiomics)?;
    let embedding = if with_embedding {
        Some(extract_embedding(&crop_and_resize(bundle, &merged, DEFAULT_MARGIN)?)?)
    } else {
        None
    };
    Ok((features.values, embedding))
}

/// Column subsets of the fused table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    Combined,
    Clinical,
    Radiomics,
}

impl FeatureSet {
    pub fn columns(self) -> Vec<usize> {
        match self {
            FeatureSet::Combined => (0..FUSED_COUNT).collect(),
            FeatureSet::Clinical => (FEATURE_COUNT..FUSED_COUNT).collect(),
            FeatureSet::Radiomics => (0..FEATURE_COUNT).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageBranchConfig {
    /// Linear head on pooled embeddings, trained per fold.
    Baseline(TrainConfig),
    /// Probabilities supplied from outside, keyed by case id.
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureFuseConfig {
    pub space: GbtSpace,
    pub n_candidates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestConfig {
    pub space: ForestSpace,
    pub n_candidates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    pub folds: usize,
    pub fold_seed: u64,
    pub search_seed: u64,
    pub n_candidates: usize,
    pub space: GbtSpace,
    pub image: ImageBranchConfig,
    pub feature_fuse: Option<FeatureFuseConfig>,
    /// Random-forest baseline on the fused table.
    pub forest: Option<ForestConfig>,
    /// Column subsets searched in addition to the combined table, for the
    /// top-k comparison only.
    pub subsets: Vec<FeatureSet>,
    pub top_k: usize,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            folds: 5,
            fold_seed: 0,
            search_seed: 0,
            n_candidates: 1000,
            space: GbtSpace::standard(),
            image: ImageBranchConfig::Baseline(TrainConfig::default()),
            feature_fuse: None,
            forest: None,
            subsets: alloc::vec![FeatureSet::Clinical, FeatureSet::Radiomics],
            top_k: 10,
        }
    }
}

impl CvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::Range { what: "folds", value: self.folds as f64 });
        }
        if self.n_candidates == 0 {
            return Err(Error::Range { what: "n_candidates", value: 0.0 });
        }
        if self.top_k == 0 {
            return Err(Error::Range { what: "top_k", value: 0.0 });
        }
        self.space.validate()?;
        if let ImageBranchConfig::Baseline(tc) = &self.image {
            tc.validate()?;
        }
        if let Some(ff) = &self.feature_fuse {
            ff.space.validate()?;
            if ff.n_candidates == 0 {
                return Err(Error::Range { what: "feature_fuse.n_candidates", value: 0.0 });
            }
        }
        if let Some(f) = &self.forest {
            if f.n_candidates == 0 {
                return Err(Error::Range { what: "forest.n_candidates", value: 0.0 });
            }
            let s = &f.space;
            for (what, (lo, hi)) in [
                ("forest.n_estimators", s.n_estimators),
                ("forest.max_depth", s.max_depth),
                ("forest.min_samples_split", s.min_samples_split),
                ("forest.min_samples_leaf", s.min_samples_leaf),
            ] {
                if lo > hi {
                    return Err(Error::Range { what, value: lo as f64 });
                }
            }
            ForestParams {
                n_estimators: s.n_estimators.0,
                max_depth: s.max_depth.0,
                min_samples_split: s.min_samples_split.0,
                min_samples_leaf: s.min_samples_leaf.0,
                ..ForestParams::default()
            }
            .validate()?;
        }
        Ok(())
    }
}

/// Case ids that fed each fitted or selection-scored structure of a fold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakageAudit {
    pub fold: usize,
    pub dictionary: Vec<String>,
    pub fit: Vec<String>,
    pub selection: Vec<String>,
    pub image_fit: Vec<String>,
    pub image_selection: Vec<String>,
    pub test: Vec<String>,
}

impl LeakageAudit {
    /// Test ids found in any training-side structure.
    pub fn violations(&self) -> Vec<String> {
        let test: alloc::collections::BTreeSet<&str> = self.test.iter().map(String::as_str).collect();
        let sides = [
            ("dictionary", &self.dictionary),
            ("fit", &self.fit),
            ("selection", &self.selection),
            ("image_fit", &self.image_fit),
            ("image_selection", &self.image_selection),
        ];
        let mut out = Vec::new();
        for (what, ids) in sides {
            for id in ids.iter().filter(|id| test.contains(id.as_str())) {
                out.push(format!("fold {}: {id} in {what}", self.fold));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ImageFold {
    Baseline(ImgModel),
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularFit {
    pub search: SearchResult,
    pub model: GbtModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestFit {
    pub search: SearchResult<ForestParams>,
    pub model: ForestModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetSearch {
    pub features: FeatureSet,
    pub search: SearchResult,
}

/// Everything fitted in one fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldArtifacts {
    pub fold: usize,
    pub split: Fold,
    pub dictionary: EncodingDictionary,
    pub tabular: TabularFit,
    pub image: ImageFold,
    pub feature_fuse: Option<TabularFit>,
    pub forest: Option<ForestFit>,
    pub subsets: Vec<SubsetSearch>,
    pub audit: LeakageAudit,
}

/// Labeled cases by id. Records the labeling rule excludes are set aside.
struct Cohort<'a> {
    cases: BTreeMap<&'a str, (&'a CohortCase, Outcome)>,
    ids: Vec<String>,
    excluded: Vec<String>,
}

impl<'a> Cohort<'a> {
    fn new(cases: &'a [CohortCase]) -> Result<Self> {
        let mut map = BTreeMap::new();
        let (mut ids, mut excluded) = (Vec::new(), Vec::new());
        for case in cases {
            if case.radiomics.len() != FEATURE_COUNT {
                return Err(Error::Shape { expected: FEATURE_COUNT, found: case.radiomics.len() });
            }
            if let Some(e) = &case.embedding {
                if e.len() != EMBED_DIM {
                    return Err(Error::Shape { expected: EMBED_DIM, found: e.len() });
                }
            }
            match derive_outcome(&case.record).outcome() {
                Some(label) => {
                    if map.insert(case.case_id(), (case, label)).is_some() {
                        return Err(Error::Duplicate(case.case_id().to_string()));
                    }
                    ids.push(case.case_id().to_string());
                }
                None => excluded.push(case.case_id().to_string()),
            }
        }
        Ok(Cohort { cases: map, ids, excluded })
    }

    fn get(&self, id: &str) -> Result<(&'a CohortCase, Outcome)> {
        self.cases.get(id).copied().ok_or_else(|| Error::NotFound(id.to_string()))
    }

    fn rows(&self, ids: &[String], dict: &EncodingDictionary) -> Result<Vec<FeatureRow>> {
        ids.iter()
            .map(|id| {
                let (case, label) = self.get(id)?;
                fuse(id, &case.radiomics, &encode_clinical(&case.record, dict), label)
            })
            .collect()
    }

    fn embedding(&self, id: &str) -> Result<&'a [f64]> {
        self.get(id)?.0.embedding.as_deref().ok_or_else(|| Error::MissingEmbedding(id.to_string()))
    }

    fn pooled(&self, ids: &[String]) -> Result<Vec<PooledSample>> {
        ids.iter()
            .map(|id| {
                Ok(PooledSample {
                    case_id: id.clone(),
                    embedding: self.embedding(id)?.to_vec(),
                    label: self.get(id)?.1.as_f64(),
                })
            })
            .collect()
    }

    fn with_embeddings(&self, rows: &[FeatureRow]) -> Result<Vec<FeatureRow>> {
        rows.iter().map(|r| Ok(fuse_with_embedding(r, self.embedding(&r.case_id)?))).collect()
    }
}

fn xy(rows: &[FeatureRow]) -> (Vec<Vec<f64>>, Vec<f64>) {
    (rows.iter().map(|r| r.values.clone()).collect(), rows.iter().map(|r| r.label.as_f64()).collect())
}

fn project(rows: &[Vec<f64>], columns: &[usize]) -> Vec<Vec<f64>> {
    rows.iter().map(|r| columns.iter().map(|&c| r[c]).collect()).collect()
}

fn fused_with_embedding_names() -> Vec<String> {
    let mut names = fused_names();
    names.extend(embedding_names(EMBED_DIM));
    names
}

fn train_fold<E: Executor>(
    fold: usize,
    split: &Fold,
    cohort: &Cohort<'_>,
    cfg: &CvConfig,
    exec: &E,
) -> Result<FoldArtifacts> {
    let mut train_records: Vec<&ClinicalRecord> = Vec::with_capacity(split.train.len());
    for id in &split.train {
        train_records.push(&cohort.get(id)?.0.record);
    }
    let dictionary = EncodingDictionary::fit(train_records);

    let train_rows = cohort.rows(&split.train, &dictionary)?;
    let val_rows = cohort.rows(&split.validation, &dictionary)?;
    let test_rows = cohort.rows(&split.test, &dictionary)?;
    let positives = train_rows.iter().filter(|r| r.label == Outcome::Effective).count();
    if positives == 0 || positives == train_rows.len() {
        return Err(Error::FoldDegenerate { fold });
    }

    let train_table = Table::new(fused_names(), train_rows.clone())?;
    let data = TrainingData::from_table(&train_table)?;
    let (val_x, val_y) = xy(&val_rows);
    let (test_x, test_y) = xy(&test_rows);
    let fold_seed = derive_seed(cfg.search_seed, fold as u64);
    let candidates = sample_candidates(&cfg.space, cfg.n_candidates, fold_seed)?;

    let search = random_search(
        candidates.clone(),
        &data,
        EvalSet { rows: &val_x, labels: &val_y },
        EvalSet { rows: &test_x, labels: &test_y },
        exec,
    )?;
    let model = fit_gbt(&data, &search.candidates[search.chosen])?;

    let mut subsets = Vec::with_capacity(cfg.subsets.len());
    for &features in &cfg.subsets {
        let columns = features.columns();
        let sub = TrainingData::from_table(&train_table.project(&columns))?;
        let (sv, st) = (project(&val_x, &columns), project(&test_x, &columns));
        let search = random_search(
            candidates.clone(),
            &sub,
            EvalSet { rows: &sv, labels: &val_y },
            EvalSet { rows: &st, labels: &test_y },
            exec,
        )?;
        subsets.push(SubsetSearch { features, search });
    }

    let (image, image_fit, image_selection) = match &cfg.image {
        ImageBranchConfig::Baseline(tc) => {
            let tc = TrainConfig { seed: derive_seed(tc.seed, fold as u64), ..tc.clone() };
            let model = train_baseline(&cohort.pooled(&split.train)?, &cohort.pooled(&split.validation)?, &tc)?;
            (ImageFold::Baseline(model), split.train.clone(), split.validation.clone())
        }
        ImageBranchConfig::External => (ImageFold::External, Vec::new(), Vec::new()),
    };

    let feature_fuse = match &cfg.feature_fuse {
        None => None,
        Some(ff) => {
            let table = Table::new(fused_with_embedding_names(), cohort.with_embeddings(&train_rows)?)?;
            let data = TrainingData::from_table(&table)?;
            let (vx, _) = xy(&cohort.with_embeddings(&val_rows)?);
            let (tx, _) = xy(&cohort.with_embeddings(&test_rows)?);
            let candidates = sample_candidates(&ff.space, ff.n_candidates, derive_seed(fold_seed, 1))?;
            let search = random_search(
                candidates,
                &data,
                EvalSet { rows: &vx, labels: &val_y },
                EvalSet { rows: &tx, labels: &test_y },
                exec,
            )?;
            let model = fit_gbt(&data, &search.candidates[search.chosen])?;
            Some(TabularFit { search, model })
        }
    };

    let forest = match &cfg.forest {
        None => None,
        Some(fc) => {
            let candidates = sample_forest_candidates(&fc.space, fc.n_candidates, derive_seed(fold_seed, 2));
            let search = random_search_forest(
                candidates,
                &data,
                EvalSet { rows: &val_x, labels: &val_y },
                EvalSet { rows: &test_x, labels: &test_y },
                exec,
            )?;
            let model = fit_random_forest(&data, &search.candidates[search.chosen])?;
            Some(ForestFit { search, model })
        }
    };

    let audit = LeakageAudit {
        fold,
        dictionary: split.train.clone(),
        fit: split.train.clone(),
        selection: split.validation.clone(),
        image_fit,
        image_selection,
        test: split.test.clone(),
    };
    Ok(FoldArtifacts {
        fold,
        split: split.clone(),
        dictionary,
        tabular: TabularFit { search, model },
        image,
        feature_fuse,
        forest,
        subsets,
        audit,
    })
}

/// Fold plan over the labeled cases; excluded records take no part.
pub fn plan_folds(cases: &[CohortCase], cfg: &CvConfig) -> Result<FoldPlan> {
    cfg.validate()?;
    let cohort = Cohort::new(cases)?;
    make_folds(&cohort.ids, cfg.folds, cfg.fold_seed)
}

/// Fits every fold of `plan`. Folds run through `exec`, and so do the
/// candidate fits inside each fold.
pub fn train_folds<E: Executor>(
    cases: &[CohortCase],
    plan: &FoldPlan,
    cfg: &CvConfig,
    exec: &E,
) -> Result<Vec<FoldArtifacts>> {
    cfg.validate()?;
    let cohort = Cohort::new(cases)?;
    exec.map(plan.folds.len(), |f| train_fold(f, &plan.folds[f], &cohort, cfg, exec)).into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CasePrediction {
    pub case_id: String,
    pub fold: usize,
    pub label: u8,
    pub p_tabular: f64,
    pub p_image: f64,
    pub p_ensemble: f64,
    pub p_feature_fuse: Option<f64>,
    pub p_forest: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchReports {
    pub tabular: MetricsReport,
    pub image: MetricsReport,
    pub ensemble: MetricsReport,
    pub feature_fuse: Option<MetricsReport>,
    pub forest: Option<MetricsReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub chosen_index: usize,
    pub chosen: GbtParams,
    pub validation_accuracy: f64,
    pub test_accuracy: f64,
    pub metrics: BranchReports,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRow {
    pub model: String,
    pub row: SummaryRow,
}

/// Mean test accuracy of the best `k` candidates, per fold and summarised.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopK {
    pub features: FeatureSet,
    pub k: usize,
    pub per_fold: Vec<f64>,
    pub summary: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub n_cases: usize,
    pub excluded: Vec<String>,
    pub per_fold: Vec<FoldReport>,
    /// Metrics over the concatenated test folds.
    pub pooled: BranchReports,
    /// Ensemble row, mean ± std across folds.
    pub table2_row: SummaryRow,
    /// Same summary for every model: tabular, image, ensemble, then the
    /// optional FeatureFuse and forest baselines.
    pub model_rows: Vec<ModelRow>,
    /// Pooled ensemble confusion matrix, rows are true classes.
    pub confusion: [[usize; 2]; 2],
    pub roc: Vec<RocPoint>,
    pub auc: f64,
    pub shap_ranking: ShapRanking,
    pub topk: Vec<TopK>,
    pub predictions: Vec<CasePrediction>,
    pub leakage_violations: Vec<String>,
}

fn image_prob(art: &FoldArtifacts, cohort: &Cohort<'_>, id: &str, external: Option<&ExternalProbs>) -> Result<f64> {
    match &art.image {
        ImageFold::Baseline(m) => Ok(m.predict_embedding(cohort.embedding(id)?)),
        ImageFold::External => external.ok_or_else(|| Error::MissingProb(id.to_string()))?.get(id),
    }
}

fn predict_in_fold(
    art: &FoldArtifacts,
    cohort: &Cohort<'_>,
    id: &str,
    external: Option<&ExternalProbs>,
) -> Result<CasePrediction> {
    let (case, label) = cohort.get(id)?;
    let row = fuse(id, &case.radiomics, &encode_clinical(&case.record, &art.dictionary), label)?;
    let p_tabular = art.tabular.model.predict_prob(&row.values);
    let p_image = image_prob(art, cohort, id, external)?;
    let p_feature_fuse = match &art.feature_fuse {
        Some(ff) => Some(ff.model.predict_prob(&fuse_with_embedding(&row, cohort.embedding(id)?).values)),
        None => None,
    };
    Ok(CasePrediction {
        case_id: id.to_string(),
        fold: art.fold,
        label: label.as_u8(),
        p_tabular,
        p_image,
        p_ensemble: ensemble_prob(p_image, p_tabular)?,
        p_feature_fuse,
        p_forest: art.forest.as_ref().map(|f| f.model.predict_prob(&row.values)),
    })
}

fn branch_reports(preds: &[&CasePrediction]) -> Result<BranchReports> {
    let labels: Vec<u8> = preds.iter().map(|p| p.label).collect();
    let score = |f: &dyn Fn(&CasePrediction) -> f64| {
        score_probabilities(&preds.iter().map(|p| f(p)).collect::<Vec<_>>(), &labels)
    };
    let optional = |f: fn(&CasePrediction) -> Option<f64>| -> Result<Option<MetricsReport>> {
        if !preds.is_empty() && preds.iter().all(|p| f(p).is_some()) {
            Ok(Some(score(&|p| f(p).unwrap_or_default())?))
        } else {
            Ok(None)
        }
    };
    Ok(BranchReports {
        tabular: score(&|p| p.p_tabular)?,
        image: score(&|p| p.p_image)?,
        ensemble: score(&|p| p.p_ensemble)?,
        feature_fuse: optional(|p| p.p_feature_fuse)?,
        forest: optional(|p| p.p_forest)?,
    })
}

/// Test-fold predictions, metrics, SHAP ranking and top-k summaries.
pub fn evaluate_folds(
    cases: &[CohortCase],
    artifacts: &[FoldArtifacts],
    external: Option<&ExternalProbs>,
    top_k: usize,
) -> Result<CvReport> {
    let cohort = Cohort::new(cases)?;
    if artifacts.is_empty() {
        return Err(Error::EmptyEval);
    }
    let mut predictions = Vec::with_capacity(cohort.ids.len());
    let mut per_fold = Vec::with_capacity(artifacts.len());
    for art in artifacts {
        let fold_preds: Vec<CasePrediction> =
            art.split.test.iter().map(|id| predict_in_fold(art, &cohort, id, external)).collect::<Result<_>>()?;
        let refs: Vec<&CasePrediction> = fold_preds.iter().collect();
        let s = &art.tabular.search;
        per_fold.push(FoldReport {
            fold: art.fold,
            chosen_index: s.chosen,
            chosen: s.candidates[s.chosen].clone(),
            validation_accuracy: s.val_scores[s.chosen],
            test_accuracy: s.test_scores[s.chosen],
            metrics: branch_reports(&refs)?,
        });
        predictions.extend(fold_preds);
    }
    let mut seen = alloc::collections::BTreeSet::new();
    for p in &predictions {
        if !seen.insert(p.case_id.as_str()) {
            return Err(Error::Duplicate(p.case_id.clone()));
        }
    }

    let refs: Vec<&CasePrediction> = predictions.iter().collect();
    let pooled = branch_reports(&refs)?;
    let labels: Vec<u8> = predictions.iter().map(|p| p.label).collect();
    let ens: Vec<f64> = predictions.iter().map(|p| p.p_ensemble).collect();
    let (roc, auc) = roc_auc(&ens, &labels)?;

    let rows_of = |pick: fn(&BranchReports) -> Option<&MetricsReport>| -> Option<SummaryRow> {
        let reports: Option<Vec<MetricsReport>> = per_fold.iter().map(|f| pick(&f.metrics).cloned()).collect();
        reports.map(|r| summary_row(&r))
    };
    let mut model_rows = Vec::new();
    let named: [(&str, fn(&BranchReports) -> Option<&MetricsReport>); 5] = [
        ("tabular", |b| Some(&b.tabular)),
        ("image", |b| Some(&b.image)),
        ("ensemble", |b| Some(&b.ensemble)),
        ("feature_fuse", |b| b.feature_fuse.as_ref()),
        ("forest", |b| b.forest.as_ref()),
    ];
    for (model, pick) in named {
        if let Some(row) = rows_of(pick) {
            model_rows.push(ModelRow { model: model.to_string(), row });
        }
    }
    let table2_row = summary_row(&per_fold.iter().map(|f| f.metrics.ensemble.clone()).collect::<Vec<_>>());

    let mut shap_per_fold = Vec::with_capacity(artifacts.len());
    for art in artifacts {
        let rows: Vec<Vec<f64>> = cohort.rows(&cohort.ids, &art.dictionary)?.into_iter().map(|r| r.values).collect();
        shap_per_fold.push(fold_mean_abs_shap(&art.tabular.model, &rows)?);
    }
    let shap_ranking = mean_abs_shap(&fused_names(), &shap_per_fold);

    let mut topk = Vec::new();
    let depths = |s: &SearchResult| s.candidates.iter().map(|p| p.max_depth).collect::<Vec<_>>();
    let combined: Vec<f64> = artifacts
        .iter()
        .map(|a| topk_average(&a.tabular.search, &depths(&a.tabular.search), top_k))
        .collect::<Result<_>>()?;
    topk.push(TopK { features: FeatureSet::Combined, k: top_k, summary: MeanStd::of(&combined), per_fold: combined });
    let mut sets: Vec<FeatureSet> = artifacts[0].subsets.iter().map(|s| s.features).collect();
    sets.dedup();
    for set in sets {
        let mut per = Vec::with_capacity(artifacts.len());
        for a in artifacts {
            if let Some(s) = a.subsets.iter().find(|s| s.features == set) {
                per.push(topk_average(&s.search, &depths(&s.search), top_k)?);
            }
        }
        topk.push(TopK { features: set, k: top_k, summary: MeanStd::of(&per), per_fold: per });
    }

    let leakage_violations = artifacts.iter().flat_map(|a| a.audit.violations()).collect();
    Ok(CvReport {
        n_cases: predictions.len(),
        excluded: cohort.excluded.clone(),
        confusion: pooled.ensemble.confusion,
        pooled,
        per_fold,
        table2_row,
        model_rows,
        roc,
        auc,
        shap_ranking,
        topk,
        predictions,
        leakage_violations,
    })
}

/// Folds the labeled cases, fits every fold and evaluates.
pub fn run_cv<E: Executor>(
    cases: &[CohortCase],
    cfg: &CvConfig,
    external: Option<&ExternalProbs>,
    exec: &E,
) -> Result<(CvReport, Vec<FoldArtifacts>)> {
    let plan = plan_folds(cases, cfg)?;
    let artifacts = train_folds(cases, &plan, cfg, exec)?;
    let report = evaluate_folds(cases, &artifacts, external, cfg.top_k)?;
    Ok((report, artifacts))
}

/// Prediction for one cohort case from the fold that held it out.
pub fn predict_case(
    cases: &[CohortCase],
    artifacts: &[FoldArtifacts],
    case_id: &str,
    external: Option<&ExternalProbs>,
) -> Result<CasePrediction> {
    let cohort = Cohort::new(cases)?;
    let art = artifacts
        .iter()
        .find(|a| a.split.test.iter().any(|id| id == case_id))
        .ok_or_else(|| Error::NotFound(case_id.to_string()))?;
    predict_in_fold(art, &cohort, case_id, external)
}
