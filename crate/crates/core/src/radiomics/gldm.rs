//! Gray-level dependence features.
//!
//! For every ROI voxel, `d` counts neighbours inside the ROI whose level
//! differs by at most `alpha`. Entry `(i, j)` counts voxels of level `i + 1`
//! with `d = j`.

use super::emphasis::emphasis;
use super::{Connectivity, DiscretizedRoi, Matrix};

pub const NAMES: [&str; 14] = [
    "SmallDependenceEmphasis",
    "LargeDependenceEmphasis",
    "GrayLevelNonUniformity",
    "DependenceNonUniformity",
    "DependenceNonUniformityNormalized",
    "GrayLevelVariance",
    "DependenceVariance",
    "DependenceEntropy",
    "LowGrayLevelEmphasis",
    "HighGrayLevelEmphasis",
    "SmallDependenceLowGrayLevelEmphasis",
    "SmallDependenceHighGrayLevelEmphasis",
    "LargeDependenceLowGrayLevelEmphasis",
    "LargeDependenceHighGrayLevelEmphasis",
];

pub fn gldm_matrix(roi: &DiscretizedRoi, alpha: u16, connectivity: Connectivity) -> Matrix {
    let offsets = connectivity.offsets();
    let mut m = Matrix::zeros(roi.ng as usize, offsets.len() + 1);
    for (x, y, z, level) in roi.voxels() {
        let d = offsets
            .iter()
            .filter(|o| {
                let n = roi.level_at(x as isize + o[0], y as isize + o[1], z as isize + o[2]);
                n != 0 && n.abs_diff(level) <= alpha
            })
            .count();
        m.add(level as usize - 1, d, 1.0);
    }
    m
}

pub fn gldm_features(roi: &DiscretizedRoi, alpha: u16, connectivity: Connectivity) -> [f64; 14] {
    let e = emphasis(&gldm_matrix(roi, alpha, connectivity));
    [
        e.small,
        e.large,
        e.gray_nonuniformity,
        e.size_nonuniformity,
        e.size_nonuniformity_normalized,
        e.gray_variance,
        e.size_variance,
        e.entropy,
        e.low_gray,
        e.high_gray,
        e.small_low_gray,
        e.small_high_gray,
        e.large_low_gray,
        e.large_high_gray,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isolated_voxels_have_dependence_zero() {
        let roi = DiscretizedRoi::from_levels([3, 1, 1], [1.0; 3], alloc::vec![1, 0, 1]).unwrap();
        let m = gldm_matrix(&roi, 0, Connectivity::TwentySix);
        assert_eq!(m.get(0, 0), 2.0);
        // Column index 0 is dependence 1 in the emphasis convention.
        assert_eq!(gldm_features(&roi, 0, Connectivity::TwentySix)[0], 1.0);
    }

    #[test]
    fn alpha_widens_dependence() {
        let roi = DiscretizedRoi::from_levels([2, 1, 1], [1.0; 3], alloc::vec![1, 2]).unwrap();
        assert_eq!(gldm_matrix(&roi, 0, Connectivity::Six).get(0, 0), 1.0);
        assert_eq!(gldm_matrix(&roi, 1, Connectivity::Six).get(0, 1), 1.0);
    }
}
