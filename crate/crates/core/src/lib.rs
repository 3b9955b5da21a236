//! Core algorithms of the pLGG chemotherapy-response pipeline.
//!
//! Everything here is pure computation over in-memory grids and tables and
//! builds without `std` (an allocator is required). File formats, the CLI
//! and thread-pool execution live in the companion `plgg` crate.
//!
//! Module map:
//!
//! * [`grid`]: volumes, label masks, grid congruence and resampling.
//! * [`labeling`]: clinical records and the chemotherapy outcome rule.
//! * [`segmentation`]: merging subregion masks into the four-label mask.
//! * [`radiomics`]: the 102-feature radiomic vector.
//! * [`fusion`]: clinical encoding and the fused feature table.
//! * [`trees`]: boosted trees, a forest baseline, parameter search and TreeSHAP.
//! * [`image`]: image-branch preprocessing, augmentation and baseline model.
//! * [`eval`]: ensembling, fold planning, metrics and the CV driver.
//! * [`synth`]: synthetic cohorts with a plantable outcome signal.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod error;
pub mod eval;
pub mod exec;
pub mod fusion;
pub mod grid;
pub mod image;
pub mod labeling;
pub(crate) mod linalg;
pub(crate) mod math;
pub mod radiomics;
pub mod segmentation;
pub mod synth;
pub mod trees;

pub use error::{Error, Result};
