use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::RadiomicsConfig;
use crate::error::{Error, Result};
use crate::grid::{Dims, LabelMask, Volume3D};
use crate::math;

/// ROI voxels binned into gray levels `1..=ng`; level 0 marks voxels outside
/// the ROI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizedRoi {
    pub dims: Dims,
    pub spacing: [f64; 3],
    pub levels: Vec<u16>,
    pub ng: u16,
}

impl DiscretizedRoi {
    /// Builds an ROI directly from levels (0 = outside). `ng` is the largest
    /// level present.
    pub fn from_levels(dims: Dims, spacing: [f64; 3], levels: Vec<u16>) -> Result<Self> {
        if levels.len() != dims[0] * dims[1] * dims[2] {
            return Err(Error::Shape { expected: dims[0] * dims[1] * dims[2], found: levels.len() });
        }
        let ng = levels.iter().copied().max().unwrap_or(0);
        if ng == 0 {
            return Err(Error::EmptyRoi);
        }
        Ok(DiscretizedRoi { dims, spacing, levels, ng })
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    /// Level at a possibly out-of-bounds position (0 outside the grid).
    #[inline]
    pub fn level_at(&self, x: isize, y: isize, z: isize) -> u16 {
        if x < 0 || y < 0 || z < 0 {
            return 0;
        }
        let (x, y, z) = (x as usize, y as usize, z as usize);
        if x >= self.dims[0] || y >= self.dims[1] || z >= self.dims[2] {
            return 0;
        }
        self.levels[self.index(x, y, z)]
    }

    pub fn voxel_count(&self) -> usize {
        self.levels.iter().filter(|&&l| l != 0).count()
    }

    /// ROI voxels as `(x, y, z, level)` in storage order.
    pub fn voxels(&self) -> impl Iterator<Item = (usize, usize, usize, u16)> + '_ {
        let (nx, ny) = (self.dims[0], self.dims[1]);
        self.levels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l != 0)
            .map(move |(i, &l)| (i % nx, (i / nx) % ny, i / (nx * ny), l))
    }
}

/// Fixed-bin-width discretization anchored at the ROI minimum:
/// `level = floor((x − min) / bin_width) + 1`.
pub fn discretize(volume: &Volume3D, roi: &LabelMask, cfg: &RadiomicsConfig) -> Result<DiscretizedRoi> {
    cfg.validate()?;
    volume.geometry().check_congruent(roi.geometry())?;
    let inside = || roi.labels().iter().zip(volume.data()).filter(|(l, _)| **l != 0).map(|(_, v)| *v);
    let min = inside().fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return Err(Error::EmptyRoi);
    }
    let max_level = bin_index(inside().fold(f64::NEG_INFINITY, f64::max), min, cfg.bin_width);
    let levels = roi
        .labels()
        .iter()
        .zip(volume.data())
        .map(|(&l, &v)| if l == 0 { 0 } else { bin_index(v, min, cfg.bin_width).min(max_level) })
        .collect();
    DiscretizedRoi::from_levels(volume.dims(), volume.geometry().spacing, levels)
}

#[inline]
pub(crate) fn bin_index(value: f64, min: f64, bin_width: f64) -> u16 {
    let level = math::floor((value - min) / bin_width) + 1.0;
    level.clamp(1.0, u16::MAX as f64) as u16
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Geometry;
    use alloc::vec;

    fn roi_of(values: &[f64]) -> DiscretizedRoi {
        let g = Geometry::new([values.len(), 1, 1], [1.0; 3]).unwrap();
        let v = Volume3D::new(g.clone(), values.to_vec()).unwrap();
        let m = LabelMask::binary(g, vec![1; values.len()]).unwrap();
        discretize(&v, &m, &RadiomicsConfig::default()).unwrap()
    }

    #[test]
    fn fixed_width_levels() {
        assert_eq!(roi_of(&[0.0, 25.0, 50.0]).levels, [1, 2, 3]);
        assert_eq!(roi_of(&[0.0, 24.999]).levels, [1, 1]);
        let constant = roi_of(&[7.0; 5]);
        assert_eq!((constant.ng, constant.levels.as_slice()), (1, &[1u16; 5][..]));
    }

    #[test]
    fn outside_voxels_are_zero_and_empty_roi_fails() {
        let g = Geometry::new([3, 1, 1], [1.0; 3]).unwrap();
        let v = Volume3D::new(g.clone(), vec![100.0, 0.0, 60.0]).unwrap();
        let m = LabelMask::binary(g.clone(), vec![1, 0, 1]).unwrap();
        let roi = discretize(&v, &m, &RadiomicsConfig::default()).unwrap();
        assert_eq!(roi.levels, [2, 0, 1]);
        let empty = LabelMask::binary(g, vec![0; 3]).unwrap();
        assert_eq!(discretize(&v, &empty, &RadiomicsConfig::default()), Err(Error::EmptyRoi));
    }
}
