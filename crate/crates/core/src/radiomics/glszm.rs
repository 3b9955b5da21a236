//! Gray-level size-zone features.
//!
//! A zone is a maximal connected set of ROI voxels sharing a level, under the
//! configured connectivity. Entry `(i, j)` counts zones of level `i + 1` and
//! size `j + 1`.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use super::emphasis::emphasis_sparse;
use super::{Connectivity, DiscretizedRoi, Matrix};

pub const NAMES: [&str; 16] = [
    "SmallAreaEmphasis",
    "LargeAreaEmphasis",
    "GrayLevelNonUniformity",
    "GrayLevelNonUniformityNormalized",
    "SizeZoneNonUniformity",
    "SizeZoneNonUniformityNormalized",
    "ZonePercentage",
    "GrayLevelVariance",
    "ZoneVariance",
    "ZoneEntropy",
    "LowGrayLevelZoneEmphasis",
    "HighGrayLevelZoneEmphasis",
    "SmallAreaLowGrayLevelEmphasis",
    "SmallAreaHighGrayLevelEmphasis",
    "LargeAreaLowGrayLevelEmphasis",
    "LargeAreaHighGrayLevelEmphasis",
];

/// Every zone as `(level, size)`, in order of its first voxel.
pub fn glszm_zones(roi: &DiscretizedRoi, connectivity: Connectivity) -> Vec<(u16, usize)> {
    let offsets = connectivity.offsets();
    let mut seen = alloc::vec![false; roi.levels.len()];
    let mut zones = Vec::new();
    let mut queue = VecDeque::new();
    for (x, y, z, level) in roi.voxels() {
        let start = roi.index(x, y, z);
        if seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back((x as isize, y as isize, z as isize));
        let mut size = 0;
        while let Some((cx, cy, cz)) = queue.pop_front() {
            size += 1;
            for o in &offsets {
                let (nx, ny, nz) = (cx + o[0], cy + o[1], cz + o[2]);
                if roi.level_at(nx, ny, nz) != level {
                    continue;
                }
                let idx = roi.index(nx as usize, ny as usize, nz as usize);
                if !seen[idx] {
                    seen[idx] = true;
                    queue.push_back((nx, ny, nz));
                }
            }
        }
        zones.push((level, size));
    }
    zones
}

/// Dense zone matrix with columns up to the largest zone.
pub fn glszm_matrix(roi: &DiscretizedRoi, connectivity: Connectivity) -> Matrix {
    let zones = glszm_zones(roi, connectivity);
    let max_size = zones.iter().map(|z| z.1).max().unwrap_or(1);
    let mut m = Matrix::zeros(roi.ng as usize, max_size);
    for (level, size) in zones {
        m.add(level as usize - 1, size - 1, 1.0);
    }
    m
}

pub fn glszm_features(roi: &DiscretizedRoi, connectivity: Connectivity) -> [f64; 16] {
    let zones = glszm_zones(roi, connectivity);
    let e = emphasis_sparse(zones.iter().map(|&(l, s)| (l as usize - 1, s - 1, 1.0)));
    [
        e.small,
        e.large,
        e.gray_nonuniformity,
        e.gray_nonuniformity_normalized,
        e.size_nonuniformity,
        e.size_nonuniformity_normalized,
        e.total / roi.voxel_count() as f64,
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
