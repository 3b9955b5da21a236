//! Gray-level run-length features.
//!
//! A run is a maximal line of ROI voxels with equal level along one of the
//! 13 directions; voxels outside the ROI end a run. Features are computed
//! per direction and averaged.

use alloc::vec::Vec;

use super::emphasis::{average, emphasis};
use super::{DiscretizedRoi, Matrix, DIRECTIONS};

pub const NAMES: [&str; 16] = [
    "ShortRunEmphasis",
    "LongRunEmphasis",
    "GrayLevelNonUniformity",
    "GrayLevelNonUniformityNormalized",
    "RunLengthNonUniformity",
    "RunLengthNonUniformityNormalized",
    "RunPercentage",
    "GrayLevelVariance",
    "RunVariance",
    "RunEntropy",
    "LowGrayLevelRunEmphasis",
    "HighGrayLevelRunEmphasis",
    "ShortRunLowGrayLevelEmphasis",
    "ShortRunHighGrayLevelEmphasis",
    "LongRunLowGrayLevelEmphasis",
    "LongRunHighGrayLevelEmphasis",
];

/// Run counts per direction; entry `(i, j)` counts runs of level `i + 1` and
/// length `j + 1`. Columns span the longest grid axis.
pub fn glrlm_matrices(roi: &DiscretizedRoi) -> Vec<Matrix> {
    let ng = roi.ng as usize;
    let max_len = roi.dims.iter().copied().max().unwrap_or(1);
    DIRECTIONS
        .iter()
        .map(|d| {
            let mut m = Matrix::zeros(ng, max_len);
            for (x, y, z, level) in roi.voxels() {
                let (x, y, z) = (x as isize, y as isize, z as isize);
                if roi.level_at(x - d[0], y - d[1], z - d[2]) == level {
                    continue;
                }
                let mut len = 1;
                while roi.level_at(x + len * d[0], y + len * d[1], z + len * d[2]) == level {
                    len += 1;
                }
                m.add(level as usize - 1, len as usize - 1, 1.0);
            }
            m
        })
        .collect()
}

pub fn glrlm_features(roi: &DiscretizedRoi) -> [f64; 16] {
    let np = roi.voxel_count() as f64;
    let per_direction: Vec<[f64; 16]> = glrlm_matrices(roi)
        .iter()
        .map(|m| {
            let e = emphasis(m);
            [
                e.small,
                e.large,
                e.gray_nonuniformity,
                e.gray_nonuniformity_normalized,
                e.size_nonuniformity,
                e.size_nonuniformity_normalized,
                e.total / np,
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
        })
        .collect();
    average(&per_direction)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_row_runs() {
        // Levels 1 1 2 _ 2 along x: runs (1,2), (2,1), (2,1).
        let roi = DiscretizedRoi::from_levels([5, 1, 1], [1.0; 3], alloc::vec![1, 1, 2, 0, 2]).unwrap();
        let m = &glrlm_matrices(&roi)[0];
        assert_eq!(m.get(0, 1), 1.0);
        assert_eq!(m.get(1, 0), 2.0);
        assert_eq!(m.sum(), 3.0);
        // Perpendicular directions see every voxel as its own run.
        assert_eq!(glrlm_matrices(&roi)[1].sum(), 4.0);
    }

    #[test]
    fn uniform_line_run_percentage() {
        let roi = DiscretizedRoi::from_levels([4, 1, 1], [1.0; 3], alloc::vec![1; 4]).unwrap();
        let f = glrlm_features(&roi);
        // One run of 4 along x, four runs of 1 in the other 12 directions.
        let expected = (0.25 + 12.0) / 13.0;
        assert!((f[6] - expected).abs() < 1e-12);
    }
}
