//! One function per CLI command. Each reads and writes files under the
//! configured paths and returns a short summary for the terminal.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use plgg_core::error::Error as CoreError;
use plgg_core::eval::{
    case_features, evaluate_folds, plan_folds, predict_case, train_folds, CasePrediction, CohortCase, CvReport,
    FoldArtifacts, FoldPlan, ImageBranchConfig,
};
use plgg_core::exec::Executor;
use plgg_core::fusion::{embedding_names, encode_clinical, fuse, fused_names, Table};
use plgg_core::grid::{CaseBundle, LabelVocabulary, Sequence};
use plgg_core::image::{ExternalProbs, EMBED_DIM};
use plgg_core::labeling::{cohort_summary, derive_outcome, ClinicalRecord, CohortSummary};
use plgg_core::segmentation::{merge_masks, SubregionMasks};
use plgg_core::synth::generate_cohort;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::nifti::{self, Datatype};
use crate::tables::{self, Rows};

/// Subregion mask file stems, in [`SubregionMasks`] field order.
pub const MASK_NAMES: [&str; 4] = ["et", "cc", "ed", "wt"];

pub fn image_path(image_dir: &Path, case_id: &str, s: Sequence) -> PathBuf {
    image_dir.join(case_id).join(format!("{}.nii.gz", s.name()))
}

pub fn mask_path(mask_dir: &Path, case_id: &str, name: &str) -> PathBuf {
    mask_dir.join(case_id).join(format!("{name}.nii.gz"))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(Error::io(parent))?;
    }
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| Error::Json { path: path.into(), message: e.to_string() })?;
    text.push('\n');
    std::fs::write(path, text).map_err(Error::io(path))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    serde_json::from_str(&text).map_err(|e| Error::Json { path: path.into(), message: e.to_string() })
}

fn wants_embedding(cfg: &RunConfig) -> bool {
    matches!(cfg.cv.image, ImageBranchConfig::Baseline(_)) || cfg.cv.feature_fuse.is_some()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SynthSummary {
    pub n_cases: usize,
    pub effective: usize,
    pub not_effective: usize,
    pub output_dir: PathBuf,
}

/// Writes a synthetic cohort in the on-disk layout the other commands read.
pub fn synth<E: Executor>(cfg: &RunConfig, exec: &E) -> Result<SynthSummary> {
    let cases = generate_cohort(&cfg.synth, exec)?;
    let (image_dir, mask_dir) = (cfg.paths.image_dir(), cfg.paths.mask_dir());
    let written: Vec<Result<()>> = exec.map(cases.len(), |i| {
        let case = &cases[i];
        let id = &case.bundle.case_id;
        for s in Sequence::ALL {
            nifti::write_volume(case.bundle.sequence(s), image_path(&image_dir, id, s), Datatype::I16)?;
        }
        for (name, mask) in MASK_NAMES.iter().zip(case.bundle.masks.iter()) {
            nifti::write_mask(mask, mask_path(&mask_dir, id, name))?;
        }
        Ok(())
    });
    written.into_iter().collect::<Result<()>>()?;
    let records: Vec<ClinicalRecord> = cases.iter().map(|c| c.record.clone()).collect();
    tables::write_cohort(cfg.paths.cohort_csv(), &records)?;
    let summary = cohort_summary(&records);
    Ok(SynthSummary {
        n_cases: cases.len(),
        effective: summary.effective,
        not_effective: summary.not_effective,
        output_dir: cfg.paths.output_dir.clone(),
    })
}

/// Reads the four sequences and four subregion masks of one case.
pub fn load_bundle(image_dir: &Path, mask_dir: &Path, case_id: &str) -> Result<CaseBundle> {
    let sequences = [
        nifti::read_volume(image_path(image_dir, case_id, Sequence::T1))?,
        nifti::read_volume(image_path(image_dir, case_id, Sequence::T1ce))?,
        nifti::read_volume(image_path(image_dir, case_id, Sequence::T2))?,
        nifti::read_volume(image_path(image_dir, case_id, Sequence::Flair))?,
    ];
    let mask = |name| nifti::read_mask(mask_path(mask_dir, case_id, name), LabelVocabulary::Binary);
    let masks = SubregionMasks { et: mask("et")?, cc: mask("cc")?, ed: mask("ed")?, wt: mask("wt")? };
    Ok(CaseBundle::new(case_id.to_string(), sequences, masks)?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExtractSummary {
    pub extracted: usize,
    pub skipped: Vec<(String, String)>,
}

/// Radiomics (and embeddings when a branch needs them) for every cohort
/// case. A case that fails is quarantined in `skipped.csv`; the run goes on.
pub fn extract<E: Executor>(cfg: &RunConfig, exec: &E) -> Result<ExtractSummary> {
    let cohort_csv = cfg.paths.cohort_csv();
    RunConfig::require("paths.cohort_csv", &cohort_csv)?;
    let (image_dir, mask_dir) = (cfg.paths.image_dir(), cfg.paths.mask_dir());
    RunConfig::require("paths.image_dir", &image_dir)?;
    RunConfig::require("paths.mask_dir", &mask_dir)?;
    let records = tables::read_cohort(&cohort_csv)?;
    let with_embedding = wants_embedding(cfg);
    let merged_dir = cfg.paths.output_dir.join("merged");

    let results = exec.map(records.len(), |i| -> Result<(Vec<f64>, Option<Vec<f64>>)> {
        let id = &records[i].case_id;
        let bundle = load_bundle(&image_dir, &mask_dir, id)?;
        let features = case_features(&bundle, &cfg.radiomics, with_embedding)?;
        let merged = merge_masks(&bundle.masks)?;
        nifti::write_mask(&merged.labels, merged_dir.join(format!("{id}.nii.gz")))?;
        Ok(features)
    });

    let mut radiomics = Rows::new();
    let mut embeddings = Rows::new();
    let mut skipped = Vec::new();
    for (rec, result) in records.iter().zip(results) {
        match result {
            Ok((features, embedding)) => {
                radiomics.insert(rec.case_id.clone(), features);
                if let Some(e) = embedding {
                    embeddings.insert(rec.case_id.clone(), e);
                }
            }
            Err(e) => skipped.push((rec.case_id.clone(), e.to_string())),
        }
    }
    tables::write_radiomics(cfg.paths.radiomics_csv(), &radiomics)?;
    if with_embedding {
        let names = embedding_names(EMBED_DIM);
        tables::write_numeric(
            cfg.paths.embeddings_csv(),
            &names,
            embeddings.iter().map(|(k, v)| (k.as_str(), v.as_slice())),
        )?;
    }
    tables::write_skipped(cfg.paths.skipped_csv(), &skipped)?;
    Ok(ExtractSummary { extracted: radiomics.len(), skipped })
}

/// Joins the cohort CSV with the extracted features. Quarantined cases are
/// dropped; any other case without features is an error.
pub fn load_cases(cfg: &RunConfig) -> Result<Vec<CohortCase>> {
    let cohort_csv = cfg.paths.cohort_csv();
    RunConfig::require("paths.cohort_csv", &cohort_csv)?;
    let radiomics_csv = cfg.paths.radiomics_csv();
    RunConfig::require("paths.output_dir (radiomics.csv; run extract first)", &radiomics_csv)?;
    let records = tables::read_cohort(&cohort_csv)?;
    let mut radiomics = tables::read_radiomics(&radiomics_csv)?;
    let mut embeddings = if wants_embedding(cfg) {
        let path = cfg.paths.embeddings_csv();
        RunConfig::require("paths.output_dir (embeddings.csv; run extract first)", &path)?;
        let names = embedding_names(EMBED_DIM);
        tables::read_numeric(&path, Some(&names))?.1
    } else {
        Rows::new()
    };
    let skipped_csv = cfg.paths.skipped_csv();
    let skipped: BTreeSet<String> = if skipped_csv.exists() {
        tables::read_skipped(&skipped_csv)?.into_iter().map(|(id, _)| id).collect()
    } else {
        BTreeSet::new()
    };
    let mut cases = Vec::with_capacity(records.len());
    for record in records {
        if skipped.contains(&record.case_id) {
            continue;
        }
        let features = radiomics
            .remove(&record.case_id)
            .ok_or_else(|| CoreError::NotFound(format!("radiomics for {}", record.case_id)))?;
        let embedding = embeddings.remove(&record.case_id);
        cases.push(CohortCase { record, radiomics: features, embedding });
    }
    Ok(cases)
}

/// External image-branch probabilities, when the configuration uses them.
pub fn load_external(cfg: &RunConfig) -> Result<Option<ExternalProbs>> {
    match (&cfg.cv.image, &cfg.external_probs) {
        (ImageBranchConfig::External, Some(path)) => {
            RunConfig::require("external_probs", path)?;
            Ok(Some(tables::read_external_probs(path)?))
        }
        (ImageBranchConfig::External, None) => {
            Err(Error::config("external_probs", "required by the external image branch"))
        }
        _ => Ok(None),
    }
}

fn plan_path(cfg: &RunConfig) -> PathBuf {
    cfg.paths.models_dir().join("plan.json")
}

fn fold_path(cfg: &RunConfig, fold: usize) -> PathBuf {
    cfg.paths.models_dir().join("folds").join(format!("fold_{fold}.json"))
}

/// Fused table of `cases` (labeled only) encoded with one fold's dictionary.
fn fold_table(cases: &[CohortCase], art: &FoldArtifacts) -> Result<Table> {
    let mut rows = Vec::new();
    for case in cases {
        if let Some(label) = derive_outcome(&case.record).outcome() {
            let clinical = encode_clinical(&case.record, &art.dictionary);
            rows.push(fuse(case.case_id(), &case.radiomics, &clinical, label)?);
        }
    }
    Ok(Table::new(fused_names(), rows)?)
}

fn write_search_log(path: &Path, art: &FoldArtifacts) -> Result<()> {
    let s = &art.tabular.search;
    let header = [
        "candidate",
        "max_depth",
        "min_child_weight",
        "subsample",
        "colsample_bytree",
        "learning_rate",
        "alpha",
        "lambda",
        "gamma",
        "n_rounds",
        "val_accuracy",
        "test_accuracy",
        "chosen",
    ];
    let rows = s.candidates.iter().enumerate().map(|(i, p)| {
        vec![
            i.to_string(),
            p.max_depth.to_string(),
            p.min_child_weight.to_string(),
            p.subsample.to_string(),
            p.colsample_bytree.to_string(),
            p.learning_rate.to_string(),
            p.alpha.to_string(),
            p.lambda.to_string(),
            p.gamma.to_string(),
            p.n_rounds.to_string(),
            s.val_scores[i].to_string(),
            s.test_scores[i].to_string(),
            (i == s.chosen).to_string(),
        ]
    });
    tables::write_rows(path, &header, rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSummary {
    pub folds: usize,
    pub candidates_per_fold: usize,
    pub leakage_violations: Vec<String>,
}

/// Plans folds, runs the searches and fits every branch; writes the plan,
/// per-fold models, fused tables and search logs.
pub fn train<E: Executor>(cfg: &RunConfig, exec: &E) -> Result<TrainSummary> {
    let cases = load_cases(cfg)?;
    let plan = plan_folds(&cases, &cfg.cv)?;
    let artifacts = train_folds(&cases, &plan, &cfg.cv, exec)?;
    write_json(&plan_path(cfg), &plan)?;
    let models = cfg.paths.models_dir();
    let mut violations = Vec::new();
    for art in &artifacts {
        write_json(&fold_path(cfg, art.fold), art)?;
        write_search_log(&models.join("search_logs").join(format!("fold_{}.csv", art.fold)), art)?;
        tables::write_table(models.join("tables").join(format!("fold_{}.csv", art.fold)), &fold_table(&cases, art)?)?;
        violations.extend(art.audit.violations());
    }
    Ok(TrainSummary {
        folds: artifacts.len(),
        candidates_per_fold: cfg.cv.n_candidates,
        leakage_violations: violations,
    })
}

/// Reads the fold models written by [`train`].
pub fn load_artifacts(cfg: &RunConfig) -> Result<Vec<FoldArtifacts>> {
    let plan_file = plan_path(cfg);
    RunConfig::require("paths.output_dir (models/plan.json; run train first)", &plan_file)?;
    let plan: FoldPlan = read_json(&plan_file)?;
    (0..plan.folds.len()).map(|f| read_json(&fold_path(cfg, f))).collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|p| p.to_string()).unwrap_or_default()
}

/// Writes the report JSON and its CSV companions.
pub fn write_report(dir: &Path, report: &CvReport) -> Result<()> {
    write_json(&dir.join("report.json"), report)?;
    tables::write_rows(
        dir.join("roc.csv"),
        &["threshold", "fpr", "tpr"],
        report.roc.iter().map(|p| vec![opt(p.threshold), p.fpr.to_string(), p.tpr.to_string()]),
    )?;
    tables::write_rows(
        dir.join("shap.csv"),
        &["rank", "feature", "mean_abs_shap", "std"],
        report
            .shap_ranking
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| vec![(i + 1).to_string(), e.feature.clone(), e.mean.to_string(), e.std.to_string()]),
    )?;
    let metric_header = [
        "model",
        "precision_0",
        "recall_0",
        "f1_0",
        "precision_1",
        "recall_1",
        "f1_1",
        "accuracy",
        "precision_avg",
        "recall_avg",
        "f1_avg",
    ];
    tables::write_rows(
        dir.join("models.csv"),
        &metric_header,
        report.model_rows.iter().map(|m| {
            let r = &m.row;
            let cells = [
                r.precision_0,
                r.recall_0,
                r.f1_0,
                r.precision_1,
                r.recall_1,
                r.f1_1,
                r.accuracy,
                r.precision_avg,
                r.recall_avg,
                r.f1_avg,
            ];
            std::iter::once(m.model.clone())
                .chain(cells.iter().map(|c| format!("{:.4} ± {:.4}", c.mean, c.std)))
                .collect::<Vec<_>>()
        }),
    )?;
    tables::write_rows(
        dir.join("topk.csv"),
        &["features", "k", "mean", "std", "per_fold"],
        report.topk.iter().map(|t| {
            let per_fold: Vec<String> = t.per_fold.iter().map(f64::to_string).collect();
            vec![
                serde_json::to_value(t.features).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                t.k.to_string(),
                t.summary.mean.to_string(),
                t.summary.std.to_string(),
                per_fold.join(";"),
            ]
        }),
    )?;
    tables::write_rows(
        dir.join("predictions.csv"),
        &["case_id", "fold", "label", "p_tabular", "p_image", "p_ensemble", "p_feature_fuse", "p_forest"],
        report.predictions.iter().map(|p| {
            vec![
                p.case_id.clone(),
                p.fold.to_string(),
                p.label.to_string(),
                p.p_tabular.to_string(),
                p.p_image.to_string(),
                p.p_ensemble.to_string(),
                opt(p.p_feature_fuse),
                opt(p.p_forest),
            ]
        }),
    )
}

/// Scores the trained folds and writes the report directory.
pub fn evaluate(cfg: &RunConfig) -> Result<CvReport> {
    let cases = load_cases(cfg)?;
    let artifacts = load_artifacts(cfg)?;
    let external = load_external(cfg)?;
    let report = evaluate_folds(&cases, &artifacts, external.as_ref(), cfg.cv.top_k)?;
    write_report(&cfg.paths.report_dir(), &report)?;
    Ok(report)
}

/// The held-out prediction for one case with its per-branch breakdown.
pub fn predict(cfg: &RunConfig, case_id: &str) -> Result<CasePrediction> {
    let cases = load_cases(cfg)?;
    let artifacts = load_artifacts(cfg)?;
    let external = load_external(cfg)?;
    Ok(predict_case(&cases, &artifacts, case_id, external.as_ref())?)
}

/// Outcome-rule counts for the cohort CSV.
pub fn label_audit(cfg: &RunConfig) -> Result<CohortSummary> {
    let cohort_csv = cfg.paths.cohort_csv();
    RunConfig::require("paths.cohort_csv", &cohort_csv)?;
    Ok(cohort_summary(&tables::read_cohort(&cohort_csv)?))
}
