//! CSV tables: clinical cohort, radiomic features, embeddings, external
//! probabilities and the skipped-case sidecar.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! written table reads back bit-identical.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use plgg_core::error::Error as CoreError;
use plgg_core::fusion::Table;
use plgg_core::image::ExternalProbs;
use plgg_core::labeling::ClinicalRecord;
use plgg_core::radiomics::{feature_names, FEATURE_COUNT};

use crate::error::{Error, Result};

/// Clinical CSV header, in column order.
pub const COHORT_COLUMNS: [&str; 18] = [
    "case_id",
    "legal_sex",
    "ethnicity",
    "race",
    "age_at_event_days",
    "molecular_subtype",
    "tumor_locations",
    "initial_surgery_status",
    "metastatic_status",
    "metastasis_location",
    "chemotherapy_type",
    "protocol_name",
    "chemotherapy_agents",
    "t_chemo_start",
    "t_chemo_end",
    "t_efs",
    "has_subsequent_efs",
    "deceased_due_to_illness",
];

fn is_missing(cell: &str) -> bool {
    let cell = cell.trim();
    cell.is_empty() || cell == "NA"
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let row = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io { path: path.into(), source },
        other => Error::Parse { path: path.into(), row, message: format!("{other:?}") },
    }
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(Error::io(path))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(Error::io(parent))?;
    }
    let file = std::fs::File::create(path).map_err(Error::io(path))?;
    Ok(csv::Writer::from_writer(file))
}

/// Column positions for `wanted`, or a schema error naming the first absent
/// one.
fn locate(path: &Path, header: &csv::StringRecord, wanted: &[&str]) -> Result<Vec<usize>> {
    wanted
        .iter()
        .map(|name| {
            header
                .iter()
                .position(|h| h == *name)
                .ok_or_else(|| Error::Schema { path: path.into(), column: name.to_string() })
        })
        .collect()
}

/// Row numbers in messages count the header as row 1.
struct Cells<'a> {
    path: &'a Path,
    row: usize,
    record: &'a csv::StringRecord,
    index: &'a [usize],
}

impl Cells<'_> {
    fn raw(&self, column: usize) -> &str {
        self.record.get(self.index[column]).unwrap_or("")
    }

    fn fail(&self, column: usize, what: &str) -> Error {
        Error::Parse {
            path: self.path.into(),
            row: self.row,
            message: format!("{}: {what}: {:?}", COHORT_COLUMNS[column], self.raw(column)),
        }
    }

    fn text(&self, column: usize) -> Option<String> {
        let cell = self.raw(column);
        (!is_missing(cell)).then(|| cell.trim().to_string())
    }

    fn day(&self, column: usize) -> Result<Option<i64>> {
        let cell = self.raw(column);
        if is_missing(cell) {
            return Ok(None);
        }
        cell.trim().parse().map(Some).map_err(|_| self.fail(column, "expected an integer day"))
    }

    fn flag(&self, column: usize) -> Result<bool> {
        match self.raw(column).trim().to_ascii_lowercase().as_str() {
            "" | "na" | "0" | "false" | "no" => Ok(false),
            "1" | "true" | "yes" => Ok(true),
            _ => Err(self.fail(column, "expected a boolean")),
        }
    }
}

/// Reads the clinical cohort. Every declared column must be present; extra
/// columns are ignored.
pub fn read_cohort(path: impl AsRef<Path>) -> Result<Vec<ClinicalRecord>> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let index = locate(path, &header, &COHORT_COLUMNS)?;
    let mut records = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, result) in rdr.records().enumerate() {
        let record = result.map_err(|e| csv_error(path, e))?;
        let c = Cells { path, row: i + 2, record: &record, index: &index };
        let case_id = c.text(0).ok_or_else(|| c.fail(0, "missing case id"))?;
        if !seen.insert(case_id.clone()) {
            return Err(CoreError::Duplicate(case_id).into());
        }
        let age = match c.day(4)? {
            Some(d) => u32::try_from(d).map_err(|_| c.fail(4, "age out of range"))?,
            None => return Err(c.fail(4, "missing age")),
        };
        records.push(ClinicalRecord {
            case_id,
            legal_sex: c.text(1),
            ethnicity: c.text(2),
            race: c.text(3),
            age_at_event_days: age,
            molecular_subtype: c.text(5),
            tumor_locations: c.text(6),
            initial_surgery_status: c.text(7),
            metastatic_status: c.text(8),
            metastasis_location: c.text(9),
            chemotherapy_type: c.text(10),
            protocol_name: c.text(11),
            chemotherapy_agents: c.text(12),
            t_chemo_start: c.day(13)?,
            t_chemo_end: c.day(14)?,
            t_efs: c.day(15)?,
            has_subsequent_efs: c.flag(16)?,
            deceased_due_to_illness: c.flag(17)?,
        });
    }
    Ok(records)
}

pub fn write_cohort(path: impl AsRef<Path>, records: &[ClinicalRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    let text = |v: &Option<String>| v.clone().unwrap_or_default();
    let day = |v: Option<i64>| v.map(|d| d.to_string()).unwrap_or_default();
    let flag = |b: bool| if b { "true" } else { "false" }.to_string();
    let mut out = || -> std::result::Result<(), csv::Error> {
        w.write_record(COHORT_COLUMNS)?;
        for r in records {
            w.write_record([
                r.case_id.clone(),
                text(&r.legal_sex),
                text(&r.ethnicity),
                text(&r.race),
                r.age_at_event_days.to_string(),
                text(&r.molecular_subtype),
                text(&r.tumor_locations),
                text(&r.initial_surgery_status),
                text(&r.metastatic_status),
                text(&r.metastasis_location),
                text(&r.chemotherapy_type),
                text(&r.protocol_name),
                text(&r.chemotherapy_agents),
                day(r.t_chemo_start),
                day(r.t_chemo_end),
                day(r.t_efs),
                flag(r.has_subsequent_efs),
                flag(r.deceased_due_to_illness),
            ])?;
        }
        w.flush()?;
        Ok(())
    };
    out().map_err(|e| csv_error(path, e))
}

/// `case_id` followed by numeric columns.
pub type Rows = BTreeMap<String, Vec<f64>>;

/// Reads a `case_id` + numeric-columns table. `columns` fixes the expected
/// names; `None` accepts any names and returns them.
pub fn read_numeric(path: impl AsRef<Path>, columns: Option<&[String]>) -> Result<(Vec<String>, Rows)> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.get(0) != Some("case_id") {
        return Err(Error::Schema { path: path.into(), column: "case_id".into() });
    }
    let names: Vec<String> = header.iter().skip(1).map(String::from).collect();
    if let Some(expected) = columns {
        let index = locate(path, &header, &expected.iter().map(String::as_str).collect::<Vec<_>>())?;
        if index.iter().enumerate().any(|(i, &j)| j != i + 1) || names.len() != expected.len() {
            let column = names.iter().zip(expected).find(|(a, b)| a != b).map_or("(extra)", |(a, _)| a.as_str());
            return Err(Error::Schema { path: path.into(), column: column.into() });
        }
    }
    let mut rows = Rows::new();
    for (i, result) in rdr.records().enumerate() {
        let row = i + 2;
        let record = result.map_err(|e| csv_error(path, e))?;
        let id = record.get(0).unwrap_or("").to_string();
        let values = record
            .iter()
            .skip(1)
            .zip(&names)
            .map(|(cell, name)| {
                cell.parse::<f64>().map_err(|_| Error::Parse {
                    path: path.into(),
                    row,
                    message: format!("{name}: expected a number: {cell:?}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if rows.insert(id.clone(), values).is_some() {
            return Err(CoreError::Duplicate(id).into());
        }
    }
    Ok((names, rows))
}

pub fn write_numeric<'a, I>(path: impl AsRef<Path>, names: &[String], rows: I) -> Result<()>
where
    I: IntoIterator<Item = (&'a str, &'a [f64])>,
{
    let path = path.as_ref();
    let mut w = writer(path)?;
    let out = || -> std::result::Result<(), csv::Error> {
        w.write_field("case_id")?;
        w.write_record(names)?;
        for (id, values) in rows {
            w.write_field(id)?;
            w.write_record(values.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    };
    out().map_err(|e| csv_error(path, e))
}

/// Radiomic features keyed by case id, in roster order.
pub fn read_radiomics(path: impl AsRef<Path>) -> Result<Rows> {
    let names = feature_names();
    debug_assert_eq!(names.len(), FEATURE_COUNT);
    Ok(read_numeric(path, Some(&names))?.1)
}

pub fn write_radiomics(path: impl AsRef<Path>, rows: &Rows) -> Result<()> {
    write_numeric(path, &feature_names(), rows.iter().map(|(k, v)| (k.as_str(), v.as_slice())))
}

/// `case_id,prob` pairs for the external image branch.
pub fn read_external_probs(path: impl AsRef<Path>) -> Result<ExternalProbs> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let index = locate(path, &header, &["case_id", "prob"])?;
    let mut pairs = Vec::new();
    for (i, result) in rdr.records().enumerate() {
        let record = result.map_err(|e| csv_error(path, e))?;
        let id = record.get(index[0]).unwrap_or("").to_string();
        let cell = record.get(index[1]).unwrap_or("");
        let p = cell.parse::<f64>().map_err(|_| Error::Parse {
            path: path.into(),
            row: i + 2,
            message: format!("prob: expected a number: {cell:?}"),
        })?;
        pairs.push((id, p));
    }
    Ok(ExternalProbs::from_pairs(pairs)?)
}

pub fn write_external_probs(path: impl AsRef<Path>, probs: &ExternalProbs) -> Result<()> {
    let rows: Vec<(String, [f64; 1])> = probs.probs.iter().map(|(k, &p)| (k.clone(), [p])).collect();
    write_numeric(path, &["prob".to_string()], rows.iter().map(|(k, v)| (k.as_str(), v.as_slice())))
}

/// Cases dropped during extraction, with the reason.
pub fn write_skipped(path: impl AsRef<Path>, skipped: &[(String, String)]) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    let mut out = || -> std::result::Result<(), csv::Error> {
        w.write_record(["case_id", "reason"])?;
        for (id, reason) in skipped {
            w.write_record([id, reason])?;
        }
        w.flush()?;
        Ok(())
    };
    out().map_err(|e| csv_error(path, e))
}

pub fn read_skipped(path: impl AsRef<Path>) -> Result<Vec<(String, String)>> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let index = locate(path, &header, &["case_id", "reason"])?;
    rdr.records()
        .map(|r| {
            let r = r.map_err(|e| csv_error(path, e))?;
            Ok((r.get(index[0]).unwrap_or("").into(), r.get(index[1]).unwrap_or("").into()))
        })
        .collect()
}

/// A fused feature table with a trailing `label` column.
pub fn write_table(path: impl AsRef<Path>, table: &Table) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    let mut out = || -> std::result::Result<(), csv::Error> {
        w.write_field("case_id")?;
        for n in &table.names {
            w.write_field(n)?;
        }
        w.write_record(["label"])?;
        for row in &table.rows {
            w.write_field(&row.case_id)?;
            for v in &row.values {
                w.write_field(v.to_string())?;
            }
            w.write_record([row.label.as_u8().to_string()])?;
        }
        w.flush()?;
        Ok(())
    };
    out().map_err(|e| csv_error(path, e))
}

/// Writes arbitrary string rows under `header`.
pub fn write_rows<I, R>(path: impl AsRef<Path>, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let path = path.as_ref();
    let mut w = writer(path)?;
    let out = || -> std::result::Result<(), csv::Error> {
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    };
    out().map_err(|e| csv_error(path, e))
}
