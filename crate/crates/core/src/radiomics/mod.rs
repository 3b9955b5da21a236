//! The 102-feature radiomic vector computed from one intensity volume inside
//! a binary region of interest.
//!
//! Roster (in output order): shape 14, firstorder 18, glcm 24, glrlm 16,
//! glszm 16, gldm 14. Names are `<family>_<Feature>`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{LabelMask, Volume3D};

mod discretize;
mod emphasis;
pub mod firstorder;
pub mod glcm;
pub mod gldm;
pub mod glrlm;
pub mod glszm;
mod mesh;
pub mod shape;

pub use discretize::{discretize, DiscretizedRoi};

pub const FEATURE_COUNT: usize = 102;

/// Neighbourhood used for zone and dependence computations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connectivity {
    Six,
    Eighteen,
    TwentySix,
}

impl Connectivity {
    /// Neighbour offsets, excluding the centre voxel.
    pub fn offsets(self) -> Vec<[isize; 3]> {
        let mut out = Vec::new();
        for dz in -1isize..=1 {
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    let manhattan = dx.abs() + dy.abs() + dz.abs();
                    let keep = match self {
                        Connectivity::Six => manhattan == 1,
                        Connectivity::Eighteen => manhattan == 1 || manhattan == 2,
                        Connectivity::TwentySix => manhattan > 0,
                    };
                    if keep {
                        out.push([dx, dy, dz]);
                    }
                }
            }
        }
        out
    }
}

/// The 13 unique unit-distance 3D directions (one of each ± pair).
pub const DIRECTIONS: [[isize; 3]; 13] = [
    [1, 0, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 1, 0],
    [1, -1, 0],
    [1, 0, 1],
    [1, 0, -1],
    [0, 1, 1],
    [0, 1, -1],
    [1, 1, 1],
    [1, 1, -1],
    [1, -1, 1],
    [1, -1, -1],
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadiomicsConfig {
    /// Intensity units per gray level.
    pub bin_width: f64,
    pub glszm_connectivity: Connectivity,
    /// Maximum level difference for two voxels to count as dependent.
    pub gldm_alpha: u16,
    pub gldm_connectivity: Connectivity,
}

impl Default for RadiomicsConfig {
    fn default() -> Self {
        RadiomicsConfig {
            bin_width: 25.0,
            glszm_connectivity: Connectivity::TwentySix,
            gldm_alpha: 0,
            gldm_connectivity: Connectivity::TwentySix,
        }
    }
}

impl RadiomicsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.bin_width.is_finite() && self.bin_width > 0.0) {
            return Err(Error::Range { what: "bin_width", value: self.bin_width });
        }
        Ok(())
    }
}

/// Dense count matrix indexed from zero; row `i` is gray level `i + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: alloc::vec![0.0; rows * cols] }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] += v;
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Copy scaled to unit sum; an all-zero matrix is returned unchanged.
    pub fn normalized(&self) -> Matrix {
        let s = self.sum();
        let mut m = self.clone();
        if s > 0.0 {
            m.data.iter_mut().for_each(|v| *v /= s);
        }
        m
    }
}

/// Radiomic values in roster order; see [`feature_names`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        feature_names().iter().position(|n| n == name).map(|i| self.values[i])
    }
}

/// Families in output order with their feature lists.
pub fn families() -> [(&'static str, &'static [&'static str]); 6] {
    [
        ("shape", &shape::NAMES),
        ("firstorder", &firstorder::NAMES),
        ("glcm", &glcm::NAMES),
        ("glrlm", &glrlm::NAMES),
        ("glszm", &glszm::NAMES),
        ("gldm", &gldm::NAMES),
    ]
}

pub fn feature_names() -> Vec<String> {
    families().iter().flat_map(|(family, names)| names.iter().map(move |n| format!("{family}_{n}"))).collect()
}

/// Computes the full vector from an intensity volume and binary ROI mask.
pub fn extract_features(volume: &Volume3D, roi: &LabelMask, cfg: &RadiomicsConfig) -> Result<FeatureVector> {
    cfg.validate()?;
    volume.geometry().check_congruent(roi.geometry())?;
    let discretized = discretize(volume, roi, cfg)?;
    let values: Vec<f64> = roi.labels().iter().zip(volume.data()).filter(|(l, _)| **l != 0).map(|(_, v)| *v).collect();

    let mut out = Vec::with_capacity(FEATURE_COUNT);
    out.extend_from_slice(&shape::shape_features(roi)?);
    out.extend_from_slice(&firstorder::firstorder_features(&values, cfg.bin_width, roi.geometry().voxel_volume())?);
    out.extend_from_slice(&glcm::glcm_features(&discretized));
    out.extend_from_slice(&glrlm::glrlm_features(&discretized));
    out.extend_from_slice(&glszm::glszm_features(&discretized, cfg.glszm_connectivity));
    out.extend_from_slice(&gldm::gldm_features(&discretized, cfg.gldm_alpha, cfg.gldm_connectivity));
    debug_assert_eq!(out.len(), FEATURE_COUNT);
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidGrid("non-finite radiomic feature".into()));
    }
    Ok(FeatureVector { values: out })
}
