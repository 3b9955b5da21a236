//! The fused tabular layout: 102 radiomic columns followed by 12 encoded
//! clinical columns, optionally extended with image embeddings.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeling::{ClinicalRecord, Outcome, AGE_FEATURE, CLINICAL_FEATURES};
use crate::radiomics::{feature_names, FEATURE_COUNT};

pub const CLINICAL_COUNT: usize = 12;
pub const FUSED_COUNT: usize = FEATURE_COUNT + CLINICAL_COUNT;

/// Code for missing or unseen categories.
pub const UNKNOWN_CODE: f64 = -1.0;

/// Ordinal codes for the 11 categorical clinical columns.
///
/// Each vocabulary is sorted, so codes do not depend on record order.
/// Multi-valued fields are treated as one category per distinct string.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EncodingDictionary {
    /// Per categorical column, in [`ClinicalRecord::categoricals`] order.
    pub vocabularies: Vec<Vec<String>>,
}

impl EncodingDictionary {
    pub fn fit<'a, I>(records: I) -> Self
    where
        I: IntoIterator<Item = &'a ClinicalRecord>,
    {
        let mut sets: Vec<BTreeSet<String>> = (0..CLINICAL_COUNT - 1).map(|_| BTreeSet::new()).collect();
        for rec in records {
            for (set, value) in sets.iter_mut().zip(rec.categoricals()) {
                if let Some(v) = value {
                    set.insert(v.to_string());
                }
            }
        }
        EncodingDictionary { vocabularies: sets.into_iter().map(|s| s.into_iter().collect()).collect() }
    }

    /// Code of `value` in categorical column `column`, or −1.
    pub fn code(&self, column: usize, value: Option<&str>) -> f64 {
        value
            .and_then(|v| self.vocabularies.get(column)?.binary_search_by(|w| w.as_str().cmp(v)).ok())
            .map_or(UNKNOWN_CODE, |i| i as f64)
    }

    pub fn decode(&self, column: usize, code: f64) -> Option<&str> {
        if code < 0.0 || crate::math::floor(code) != code {
            return None;
        }
        self.vocabularies.get(column)?.get(code as usize).map(String::as_str)
    }
}

/// Age in days at its column, categoricals coded through `dict`.
pub fn encode_clinical(rec: &ClinicalRecord, dict: &EncodingDictionary) -> [f64; CLINICAL_COUNT] {
    let mut out = [0.0; CLINICAL_COUNT];
    let mut column = 0;
    for (slot, value) in out.iter_mut().enumerate() {
        if slot == AGE_FEATURE {
            *value = rec.age_at_event_days as f64;
        } else {
            *value = dict.code(column, rec.categoricals()[column]);
            column += 1;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub case_id: String,
    pub values: Vec<f64>,
    pub label: Outcome,
}

pub fn fuse(case_id: &str, radiomics: &[f64], clinical: &[f64], label: Outcome) -> Result<FeatureRow> {
    if radiomics.len() != FEATURE_COUNT {
        return Err(Error::Shape { expected: FEATURE_COUNT, found: radiomics.len() });
    }
    if clinical.len() != CLINICAL_COUNT {
        return Err(Error::Shape { expected: CLINICAL_COUNT, found: clinical.len() });
    }
    let mut values = Vec::with_capacity(FUSED_COUNT);
    values.extend_from_slice(radiomics);
    values.extend_from_slice(clinical);
    Ok(FeatureRow { case_id: case_id.to_string(), values, label })
}

/// Appends embedding columns after the existing ones.
pub fn fuse_with_embedding(row: &FeatureRow, embedding: &[f64]) -> FeatureRow {
    let mut values = row.values.clone();
    values.extend_from_slice(embedding);
    FeatureRow { case_id: row.case_id.clone(), values, label: row.label }
}

/// Column names of the fused layout.
pub fn fused_names() -> Vec<String> {
    let mut names = feature_names();
    names.extend(CLINICAL_FEATURES.iter().map(|s| s.to_string()));
    names
}

pub fn embedding_names(dim: usize) -> Vec<String> {
    (0..dim).map(|i| format!("emb_{i}")).collect()
}

/// Rows sharing one column layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub names: Vec<String>,
    pub rows: Vec<FeatureRow>,
}

impl Table {
    pub fn new(names: Vec<String>, rows: Vec<FeatureRow>) -> Result<Self> {
        if let Some(bad) = rows.iter().find(|r| r.values.len() != names.len()) {
            return Err(Error::Shape { expected: names.len(), found: bad.values.len() });
        }
        Ok(Table { names, rows })
    }

    pub fn n_features(&self) -> usize {
        self.names.len()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Table {
        Table { names: self.names.clone(), rows: indices.iter().map(|&i| self.rows[i].clone()).collect() }
    }

    /// Keeps only the columns at `columns`, in that order.
    pub fn project(&self, columns: &[usize]) -> Table {
        Table {
            names: columns.iter().map(|&c| self.names[c].clone()).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| FeatureRow {
                    case_id: r.case_id.clone(),
                    values: columns.iter().map(|&c| r.values[c]).collect(),
                    label: r.label,
                })
                .collect(),
        }
    }

    pub fn labels(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.label.as_f64()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn rec(sex: Option<&str>, loc: Option<&str>, age: u32) -> ClinicalRecord {
        ClinicalRecord {
            legal_sex: sex.map(String::from),
            tumor_locations: loc.map(String::from),
            age_at_event_days: age,
            ..Default::default()
        }
    }

    #[test]
    fn age_passes_through() {
        let train = [rec(Some("Male"), Some("Cerebellum"), 10)];
        let dict = EncodingDictionary::fit(&train);
        let enc = encode_clinical(&rec(Some("Male"), Some("Cerebellum"), 2973), &dict);
        assert_eq!(enc[AGE_FEATURE], 2973.0);
        assert_eq!(enc[0], 0.0);
        assert_eq!(enc[5], 0.0);
    }

    #[test]
    fn unseen_and_missing_are_minus_one() {
        let dict = EncodingDictionary::fit(&[rec(Some("Female"), None, 1)]);
        let enc = encode_clinical(&rec(Some("Other"), Some("Brainstem"), 5), &dict);
        assert_eq!(enc.iter().filter(|&&v| v == UNKNOWN_CODE).count(), 11);
        assert_eq!(enc[AGE_FEATURE], 5.0);
    }

    #[test]
    fn codes_are_order_free_and_round_trip() {
        let a = [rec(Some("b"), Some("x;y"), 1), rec(Some("a"), Some("z"), 2)];
        let b = [a[1].clone(), a[0].clone()];
        let dict = EncodingDictionary::fit(&a);
        assert_eq!(dict, EncodingDictionary::fit(&b));
        for r in &a {
            for (col, v) in r.categoricals().iter().enumerate() {
                if let Some(v) = v {
                    assert_eq!(dict.decode(col, dict.code(col, Some(v))), Some(*v));
                }
            }
        }
    }

    #[test]
    fn fuse_layout() {
        let row = fuse("c", &[0.0; FEATURE_COUNT], &[1.0; CLINICAL_COUNT], Outcome::Effective).unwrap();
        assert_eq!(row.values.len(), FUSED_COUNT);
        assert_eq!(row.values[FEATURE_COUNT], 1.0);
        assert!(matches!(fuse("c", &[0.0; 3], &[0.0; 12], Outcome::Effective), Err(Error::Shape { .. })));
        let ext = fuse_with_embedding(&row, &vec![0.5; 4096]);
        assert_eq!(ext.values.len(), 4210);
        assert_eq!(fuse_with_embedding(&row, &[]), row);
        assert_eq!(fused_names().len(), FUSED_COUNT);
        assert_eq!(embedding_names(3), ["emb_0", "emb_1", "emb_2"]);
    }
}
