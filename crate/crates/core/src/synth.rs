//! Synthetic cohorts with a plantable outcome signal.
//!
//! Each case is an ellipsoidal tumour inside a spherical head. Effective cases
//! get rounder tumours and younger ages; `effect` sets how often a case's
//! draw follows its class rather than the shared uniform range.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::derive_seed;
use crate::exec::Executor;
use crate::grid::{CaseBundle, Dims, Geometry, LabelMask, Volume3D};
use crate::labeling::{ClinicalRecord, Outcome};
use crate::segmentation::{SubregionMasks, BACKGROUND, CC, ED, ET, NET};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_cases: usize,
    pub grid: Dims,
    pub spacing: [f64; 3],
    /// Signal strength in [0, 1]. Zero makes labels independent of features.
    pub effect: f64,
    /// Target fraction of effective cases.
    pub class_balance: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { n_cases: 105, grid: [48; 3], spacing: [1.0; 3], effect: 0.8, class_balance: 0.4, seed: 0 }
    }
}

pub const MIN_CASES: usize = 4;
pub const MIN_SIDE: usize = 16;

/// Age range in days shared by both classes.
pub const AGE_RANGE: (f64, f64) = (129.0, 7019.0);
/// Effective cases draw below this age, non-effective cases above it.
pub const AGE_SPLIT: f64 = 2500.0;

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_cases < MIN_CASES {
            return Err(Error::CohortTooSmall { n: self.n_cases, min: MIN_CASES });
        }
        if !(0.0..=1.0).contains(&self.effect) {
            return Err(Error::Range { what: "effect", value: self.effect });
        }
        if self.grid.iter().any(|&d| d < MIN_SIDE) {
            return Err(Error::InvalidGrid(format!("synthetic grid sides must be at least {MIN_SIDE}")));
        }
        Geometry::new(self.grid, self.spacing)?;
        self.effective_count().map(|_| ())
    }

    /// Number of effective cases, `round(class_balance · n)`, which must
    /// leave at least one case in each class.
    pub fn effective_count(&self) -> Result<usize> {
        let n = self.n_cases;
        if !(0.0..=1.0).contains(&self.class_balance) {
            return Err(Error::Range { what: "class_balance", value: self.class_balance });
        }
        let effective = crate::math::round(self.class_balance * n as f64) as usize;
        if effective == 0 || effective >= n {
            return Err(Error::Balance { effective, n });
        }
        Ok(effective)
    }
}

/// One generated patient.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthCase {
    pub bundle: CaseBundle,
    pub record: ClinicalRecord,
    pub label: Outcome,
    /// Planted shape draw in [0, 1]; larger is more elongated.
    pub eccentricity: f64,
}

/// Per-channel (T1, T1CE, T2, FLAIR) means for background tissue, ET, NET,
/// CC and ED.
const MEANS: [[f64; 5]; 4] = [
    [300.0, 260.0, 220.0, 150.0, 240.0],
    [320.0, 520.0, 260.0, 160.0, 280.0],
    [280.0, 360.0, 420.0, 600.0, 450.0],
    [300.0, 400.0, 420.0, 220.0, 480.0],
];
const NOISE_SIGMA: f64 = 20.0;

const CATEGORIES: [&[&str]; 11] = [
    &["Female", "Male"],
    &["Hispanic or Latino", "Not Hispanic or Latino", "Unavailable"],
    &["Asian", "Black or African American", "Other", "White"],
    &["BRAF V600E", "KIAA1549-BRAF", "NF1", "Wildtype"],
    &["Brain Stem", "Cerebellum/Posterior Fossa", "Optic Pathway", "Suprasellar/Hypothalamic", "Temporal Lobe"],
    &["Biopsy only", "Gross/Near total resection", "Not Reported", "Partial resection"],
    &["No", "Yes"],
    &["Leptomeningeal", "None", "Spine"],
    &["Treatment following progression", "Upfront therapy"],
    &["COG A9952", "COG ACNS0221", "Not on protocol"],
    &["Carboplatin", "Selumetinib", "Vinblastine", "Vincristine;Carboplatin"],
];
const MISSING_RATE: f64 = 0.05;

/// Draw in [0, 1]: from the class half with probability `effect`, else
/// from the whole interval. `low` picks the lower half.
fn planted<R: Rng>(rng: &mut R, effect: f64, low: bool) -> f64 {
    let follow = rng.random::<f64>() < effect;
    let u: f64 = rng.random();
    if follow {
        if low {
            u / 2.0
        } else {
            0.5 + u / 2.0
        }
    } else {
        u
    }
}

fn planted_age<R: Rng>(rng: &mut R, effect: f64, effective: bool) -> u32 {
    let follow = rng.random::<f64>() < effect;
    let (lo, hi) = match (follow, effective) {
        (false, _) => AGE_RANGE,
        (true, true) => (AGE_RANGE.0, AGE_SPLIT),
        (true, false) => (AGE_SPLIT, AGE_RANGE.1),
    };
    rng.random_range(lo..hi) as u32
}

fn categorical<R: Rng>(rng: &mut R, choices: &[&str]) -> Option<String> {
    if rng.random::<f64>() < MISSING_RATE {
        None
    } else {
        Some(choices[rng.random_range(0..choices.len())].to_string())
    }
}

/// Timing fields that send the record down the given labeling arm.
fn timing<R: Rng>(rng: &mut R, rec: &mut ClinicalRecord, label: Outcome) {
    let age = rec.age_at_event_days as i64;
    let start = age + rng.random_range(0..400);
    let end = start + rng.random_range(180..540);
    rec.t_chemo_start = Some(start);
    rec.t_chemo_end = Some(end);
    match label {
        Outcome::Effective => {
            // 41 : 1 between no event and a single event before chemotherapy.
            if rng.random_range(0..42) == 0 {
                rec.t_efs = Some(start - rng.random_range(1..60));
            }
        }
        Outcome::NotEffective => match rng.random_range(0..63) {
            0..7 => {
                rec.deceased_due_to_illness = true;
                rec.t_efs = Some(start + rng.random_range(0..900));
            }
            7..35 => rec.t_efs = Some(rng.random_range(start..=end)),
            _ => rec.t_efs = Some(end + rng.random_range(1..1500)),
        },
    }
}

/// Generates case `index` with the given class.
pub fn generate_case(cfg: &SynthConfig, index: usize, label: Outcome) -> Result<SynthCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, index as u64));
    let effective = label == Outcome::Effective;
    let case_id = format!("SYN{index:04}");

    let mut record = ClinicalRecord { case_id: case_id.clone(), ..Default::default() };
    record.age_at_event_days = planted_age(&mut rng, cfg.effect, effective);
    let values: Vec<Option<String>> = CATEGORIES.iter().map(|c| categorical(&mut rng, c)).collect();
    let mut it = values.into_iter();
    let mut next = || it.next().flatten();
    record.legal_sex = next();
    record.ethnicity = next();
    record.race = next();
    record.molecular_subtype = next();
    record.tumor_locations = next();
    record.initial_surgery_status = next();
    record.metastatic_status = next();
    record.metastasis_location = next();
    record.chemotherapy_type = next();
    record.protocol_name = next();
    record.chemotherapy_agents = next();
    timing(&mut rng, &mut record, label);

    let eccentricity = planted(&mut rng, cfg.effect, effective);
    let geometry = Geometry::new(cfg.grid, cfg.spacing)?;
    let labels = phantom(&mut rng, cfg.grid, eccentricity);

    let noise = Normal::new(0.0, NOISE_SIGMA).expect("finite sigma");
    let [nx, ny, nz] = cfg.grid;
    let head_r = 0.45 * nx.min(ny).min(nz) as f64;
    let mut channels: Vec<Vec<f64>> = (0..4).map(|_| Vec::with_capacity(geometry.len())).collect();
    for (i, &l) in labels.iter().enumerate() {
        let [x, y, z] = geometry.coords(i);
        let d2 = [(x, nx), (y, ny), (z, nz)]
            .iter()
            .map(|&(c, n)| {
                let d = c as f64 + 0.5 - n as f64 / 2.0;
                d * d
            })
            .sum::<f64>();
        let in_head = l != BACKGROUND || d2 <= head_r * head_r;
        for (c, out) in channels.iter_mut().enumerate() {
            let v = if in_head { MEANS[c][l as usize] + noise.sample(&mut rng) } else { 0.0 };
            out.push(crate::math::round(v.max(0.0)));
        }
    }
    let mut it = channels.into_iter();
    let mut volume = || Volume3D::new(geometry.clone(), it.next().expect("four channels"));
    let sequences = [volume()?, volume()?, volume()?, volume()?];

    let pick = |which: &dyn Fn(u8) -> bool| {
        LabelMask::binary(geometry.clone(), labels.iter().map(|&l| which(l) as u8).collect())
    };
    let masks = SubregionMasks {
        et: pick(&|l| l == ET)?,
        cc: pick(&|l| l == CC)?,
        ed: pick(&|l| l == ED)?,
        wt: pick(&|l| l != BACKGROUND)?,
    };
    let bundle = CaseBundle::new(case_id, sequences, masks)?;
    Ok(SynthCase { bundle, record, label, eccentricity })
}

/// Subregion labels of a randomly placed ellipsoid. The outer shell is ED,
/// the core holds an ET rim, a CC cyst and NET in between.
fn phantom<R: Rng>(rng: &mut R, dims: Dims, eccentricity: f64) -> Vec<u8> {
    let side = dims.iter().copied().min().unwrap_or(0) as f64;
    let r0 = side * rng.random_range(0.13..0.19);
    let mut radii =
        [r0 * (1.0 + 0.6 * eccentricity), r0 * (1.0 - 0.15 * eccentricity), r0 * (1.0 - 0.35 * eccentricity)];
    radii.shuffle(rng);
    let jitter = side * 0.06;
    let centre: [f64; 3] = core::array::from_fn(|k| dims[k] as f64 / 2.0 + rng.random_range(-jitter..jitter));
    let cyst_offset: [f64; 3] = core::array::from_fn(|k| radii[k] * rng.random_range(-0.2..0.2));

    let [nx, ny, _] = dims;
    let len = dims.iter().product();
    let mut out = alloc::vec![BACKGROUND; len];
    for (i, slot) in out.iter_mut().enumerate() {
        let p = [i % nx, (i / nx) % ny, i / (nx * ny)];
        let mut rho2 = 0.0;
        let mut cyst2 = 0.0;
        for k in 0..3 {
            let d = p[k] as f64 + 0.5 - centre[k];
            let (a, b) = (d / radii[k], (d - cyst_offset[k]) / radii[k]);
            rho2 += a * a;
            cyst2 += b * b;
        }
        *slot = if rho2 > 1.0 {
            BACKGROUND
        } else if rho2 > 0.75 * 0.75 {
            ED
        } else if cyst2 < 0.3 * 0.3 {
            CC
        } else if rho2 > 0.55 * 0.55 {
            ET
        } else {
            NET
        };
    }
    out
}

/// Class of every case: exactly `round(balance · n)` effective, in seeded
/// random order.
pub fn assign_labels(cfg: &SynthConfig) -> Result<Vec<Outcome>> {
    let effective = cfg.effective_count()?;
    let mut labels: Vec<Outcome> =
        (0..cfg.n_cases).map(|i| if i < effective { Outcome::Effective } else { Outcome::NotEffective }).collect();
    labels.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    Ok(labels)
}

/// Generates every case, one job per case.
pub fn generate_cohort<E: Executor>(cfg: &SynthConfig, exec: &E) -> Result<Vec<SynthCase>> {
    cfg.validate()?;
    let labels = assign_labels(cfg)?;
    exec.map(cfg.n_cases, |i| generate_case(cfg, i, labels[i])).into_iter().collect()
}

/// 105 timing-only records hitting the labeling arms 7 / 41 / 1 / 56 times
/// (deceased, no event, event before chemotherapy, event during or after).
pub fn reference_cohort_records() -> Vec<ClinicalRecord> {
    let rec =
        |i: usize| ClinicalRecord { case_id: format!("REPLAY{i:03}"), age_at_event_days: 2000, ..Default::default() };
    let mut out = Vec::with_capacity(105);
    for i in 0..105 {
        let mut r = rec(i);
        let (start, end) = (2100, 2400);
        r.t_chemo_start = Some(start);
        r.t_chemo_end = Some(end);
        match i {
            0..7 => {
                r.deceased_due_to_illness = true;
                r.t_efs = Some(2200);
            }
            7..48 => {}
            48 => r.t_efs = Some(2050),
            49..77 => r.t_efs = Some(2300),
            _ => r.t_efs = Some(2600),
        }
        out.push(r);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use crate::labeling::{cohort_summary, derive_outcome};
    use crate::segmentation::merge_masks;

    fn small(seed: u64, effect: f64) -> SynthConfig {
        SynthConfig { n_cases: 12, grid: [24; 3], effect, seed, ..Default::default() }
    }

    #[test]
    fn replay_counts() {
        let s = cohort_summary(&reference_cohort_records());
        assert_eq!((s.effective, s.not_effective, s.excluded), (42, 63, 0));
        assert_eq!(s.branch_histogram(), [7, 41, 1, 56]);
    }

    #[test]
    fn labels_follow_timing() {
        let cohort = generate_cohort(&small(3, 0.5), &Sequential).unwrap();
        for c in &cohort {
            assert_eq!(derive_outcome(&c.record).outcome(), Some(c.label));
            merge_masks(&c.bundle.masks).unwrap();
            c.bundle.check_congruent().unwrap();
            assert!(c.bundle.masks.wt.count_nonzero() > 0);
            assert!(c.bundle.masks.et.count_nonzero() > 0);
        }
    }

    #[test]
    fn balance() {
        let cfg = SynthConfig { n_cases: 105, class_balance: 0.4, ..Default::default() };
        let labels = assign_labels(&cfg).unwrap();
        assert_eq!(labels.iter().filter(|&&l| l == Outcome::Effective).count(), 42);
        let bad = SynthConfig { n_cases: 5, class_balance: 0.05, ..Default::default() };
        assert_eq!(bad.validate(), Err(Error::Balance { effective: 0, n: 5 }));
        let all = SynthConfig { class_balance: 1.0, ..Default::default() };
        assert!(matches!(all.validate(), Err(Error::Balance { .. })));
        let tiny = SynthConfig { n_cases: 3, ..Default::default() };
        assert!(matches!(tiny.validate(), Err(Error::CohortTooSmall { .. })));
    }

    #[test]
    fn deterministic() {
        let a = generate_cohort(&small(9, 0.8), &Sequential).unwrap();
        let b = generate_cohort(&small(9, 0.8), &Sequential).unwrap();
        assert_eq!(a, b);
        let c = generate_cohort(&small(10, 0.8), &Sequential).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn full_effect_separates_age() {
        let cohort = generate_cohort(&SynthConfig { effect: 1.0, ..small(1, 1.0) }, &Sequential).unwrap();
        for c in &cohort {
            let young = (c.record.age_at_event_days as f64) < AGE_SPLIT;
            assert_eq!(young, c.label == Outcome::Effective);
            assert_eq!(c.eccentricity < 0.5, c.label == Outcome::Effective);
        }
    }
}
