//! Clinical records and the chemotherapy-response outcome rule.

use alloc::string::String;

use serde::{Deserialize, Serialize};

/// Binary response class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Outcome {
    NotEffective = 0,
    Effective = 1,
}

impl Outcome {
    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn as_f64(self) -> f64 {
        self as u8 as f64
    }

    pub fn from_prob(p: f64, threshold: f64) -> Outcome {
        if p >= threshold {
            Outcome::Effective
        } else {
            Outcome::NotEffective
        }
    }
}

/// Outcome of a record: a class, or excluded for missing chemotherapy dates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OutcomeLabel {
    Labeled(Outcome),
    Excluded,
}

impl OutcomeLabel {
    pub fn outcome(self) -> Option<Outcome> {
        match self {
            OutcomeLabel::Labeled(o) => Some(o),
            OutcomeLabel::Excluded => None,
        }
    }
}

/// Which arm of the labeling rule decided a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OutcomeBranch {
    /// Deceased due to illness: not effective.
    Deceased,
    /// No EFS event: effective.
    NoEvent,
    /// First EFS event before chemotherapy started, no later events: effective.
    BeforeChemo,
    /// EFS event before chemotherapy but followed by further events.
    BeforeChemoWithRecurrence,
    /// EFS event between start and end of chemotherapy (boundaries included).
    DuringChemo,
    /// EFS event after chemotherapy ended.
    AfterChemo,
    /// A needed chemotherapy date is missing.
    Excluded,
}

impl OutcomeBranch {
    pub fn label(self) -> OutcomeLabel {
        use OutcomeBranch::*;
        match self {
            Deceased | BeforeChemoWithRecurrence | DuringChemo | AfterChemo => {
                OutcomeLabel::Labeled(Outcome::NotEffective)
            }
            NoEvent | BeforeChemo => OutcomeLabel::Labeled(Outcome::Effective),
            Excluded => OutcomeLabel::Excluded,
        }
    }
}

/// One patient's clinical variables plus the timing fields used for labeling.
///
/// Categorical fields are `None` when missing. Ages are in days.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ClinicalRecord {
    pub case_id: String,
    pub legal_sex: Option<String>,
    pub ethnicity: Option<String>,
    pub race: Option<String>,
    pub age_at_event_days: u32,
    pub molecular_subtype: Option<String>,
    pub tumor_locations: Option<String>,
    pub initial_surgery_status: Option<String>,
    pub metastatic_status: Option<String>,
    pub metastasis_location: Option<String>,
    pub chemotherapy_type: Option<String>,
    pub protocol_name: Option<String>,
    pub chemotherapy_agents: Option<String>,
    pub t_chemo_start: Option<i64>,
    pub t_chemo_end: Option<i64>,
    pub t_efs: Option<i64>,
    pub has_subsequent_efs: bool,
    pub deceased_due_to_illness: bool,
}

/// Names of the 12 clinical model features, in feature order.
pub const CLINICAL_FEATURES: [&str; 12] = [
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
];

/// Position of `age_at_event_days` in [`CLINICAL_FEATURES`].
pub const AGE_FEATURE: usize = 3;

impl ClinicalRecord {
    /// The 11 categorical features in [`CLINICAL_FEATURES`] order (age skipped).
    pub fn categoricals(&self) -> [Option<&str>; 11] {
        [
            self.legal_sex.as_deref(),
            self.ethnicity.as_deref(),
            self.race.as_deref(),
            self.molecular_subtype.as_deref(),
            self.tumor_locations.as_deref(),
            self.initial_surgery_status.as_deref(),
            self.metastatic_status.as_deref(),
            self.metastasis_location.as_deref(),
            self.chemotherapy_type.as_deref(),
            self.protocol_name.as_deref(),
            self.chemotherapy_agents.as_deref(),
        ]
    }

    /// True when start and end are both present and out of order.
    pub fn has_inverted_chemo_window(&self) -> bool {
        matches!((self.t_chemo_start, self.t_chemo_end), (Some(s), Some(e)) if s > e)
    }
}

/// Applies the outcome rule and reports which arm fired.
///
/// Arms are evaluated in order: death from illness, no EFS event, event
/// before chemotherapy, event during chemotherapy, event after. An event on
/// the start or end day counts as during chemotherapy. A record is excluded
/// only when the comparison that decides it needs a missing date.
pub fn outcome_branch(rec: &ClinicalRecord) -> OutcomeBranch {
    if rec.deceased_due_to_illness {
        return OutcomeBranch::Deceased;
    }
    let Some(efs) = rec.t_efs else {
        return OutcomeBranch::NoEvent;
    };
    let Some(start) = rec.t_chemo_start else {
        return OutcomeBranch::Excluded;
    };
    if efs < start {
        return if rec.has_subsequent_efs {
            OutcomeBranch::BeforeChemoWithRecurrence
        } else {
            OutcomeBranch::BeforeChemo
        };
    }
    if efs == start {
        return OutcomeBranch::DuringChemo;
    }
    match rec.t_chemo_end {
        None => OutcomeBranch::Excluded,
        Some(end) if efs <= end => OutcomeBranch::DuringChemo,
        Some(_) => OutcomeBranch::AfterChemo,
    }
}

pub fn derive_outcome(rec: &ClinicalRecord) -> OutcomeLabel {
    outcome_branch(rec).label()
}

/// Per-arm and per-label counts over a cohort.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortSummary {
    pub deceased: usize,
    pub no_event: usize,
    pub before_chemo: usize,
    pub before_chemo_with_recurrence: usize,
    pub during_chemo: usize,
    pub after_chemo: usize,
    pub excluded: usize,
    pub effective: usize,
    pub not_effective: usize,
}

impl CohortSummary {
    pub fn labeled(&self) -> usize {
        self.effective + self.not_effective
    }

    /// Histogram over (deceased, no event, before chemo, during-or-after).
    pub fn branch_histogram(&self) -> [usize; 4] {
        [
            self.deceased,
            self.no_event,
            self.before_chemo,
            self.during_chemo + self.after_chemo + self.before_chemo_with_recurrence,
        ]
    }
}

pub fn cohort_summary<'a, I>(records: I) -> CohortSummary
where
    I: IntoIterator<Item = &'a ClinicalRecord>,
{
    let mut s = CohortSummary::default();
    for rec in records {
        let branch = outcome_branch(rec);
        match branch {
            OutcomeBranch::Deceased => s.deceased += 1,
            OutcomeBranch::NoEvent => s.no_event += 1,
            OutcomeBranch::BeforeChemo => s.before_chemo += 1,
            OutcomeBranch::BeforeChemoWithRecurrence => s.before_chemo_with_recurrence += 1,
            OutcomeBranch::DuringChemo => s.during_chemo += 1,
            OutcomeBranch::AfterChemo => s.after_chemo += 1,
            OutcomeBranch::Excluded => s.excluded += 1,
        }
        match branch.label() {
            OutcomeLabel::Labeled(Outcome::Effective) => s.effective += 1,
            OutcomeLabel::Labeled(Outcome::NotEffective) => s.not_effective += 1,
            OutcomeLabel::Excluded => {}
        }
    }
    s
}
