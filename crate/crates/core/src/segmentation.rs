//! Merging the two upstream segmentations into the four-label mask.
//!
//! One model emits ET, CC and ED; the other emits whole tumour. Whole-tumour
//! voxels claimed by none of the three become NET. Subregion voxels outside
//! the whole-tumour prediction keep their subregion label.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{LabelMask, LabelVocabulary};

pub const BACKGROUND: u8 = 0;
pub const ET: u8 = 1;
pub const NET: u8 = 2;
pub const CC: u8 = 3;
pub const ED: u8 = 4;

/// Subregion labels in channel order.
pub const SUBREGION_LABELS: [u8; 4] = [ET, NET, CC, ED];

/// Binary outputs of the two upstream models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubregionMasks {
    pub et: LabelMask,
    pub cc: LabelMask,
    pub ed: LabelMask,
    pub wt: LabelMask,
}

impl SubregionMasks {
    pub fn iter(&self) -> impl Iterator<Item = &LabelMask> {
        [&self.et, &self.cc, &self.ed, &self.wt].into_iter()
    }

    /// Splits a merged mask back into subregion masks, with `wt` taken as the
    /// recombined whole tumour.
    pub fn from_merged(merged: &MergedSegmentation) -> Result<Self> {
        let g = merged.labels.geometry().clone();
        let pick = |label: u8| -> Result<LabelMask> {
            let v = merged.labels.labels().iter().map(|&l| (l == label) as u8).collect();
            LabelMask::binary(g.clone(), v)
        };
        Ok(SubregionMasks { et: pick(ET)?, cc: pick(CC)?, ed: pick(ED)?, wt: recombine_wt(merged)? })
    }
}

/// Four-label segmentation {0, ET, NET, CC, ED}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedSegmentation {
    pub labels: LabelMask,
}

impl MergedSegmentation {
    pub fn new(labels: LabelMask) -> Result<Self> {
        if labels.vocabulary() != LabelVocabulary::Subregions {
            return Err(Error::InvalidGrid("merged segmentation needs subregion labels".into()));
        }
        Ok(MergedSegmentation { labels })
    }
}

pub fn merge_masks(m: &SubregionMasks) -> Result<MergedSegmentation> {
    let geometry = m.wt.geometry();
    for mask in [&m.et, &m.cc, &m.ed] {
        geometry.check_congruent(mask.geometry())?;
    }
    let (et, cc, ed, wt) = (m.et.labels(), m.cc.labels(), m.ed.labels(), m.wt.labels());
    let mut out = Vec::with_capacity(wt.len());
    for i in 0..wt.len() {
        let (e, c, d) = (et[i] != 0, cc[i] != 0, ed[i] != 0);
        if (e as u8 + c as u8 + d as u8) > 1 {
            return Err(Error::Disjointness { index: i });
        }
        out.push(merge_voxel(e, c, d, wt[i] != 0));
    }
    let labels = LabelMask::new(geometry.clone(), out, LabelVocabulary::Subregions)?;
    Ok(MergedSegmentation { labels })
}

#[inline]
fn merge_voxel(et: bool, cc: bool, ed: bool, wt: bool) -> u8 {
    if et {
        ET
    } else if cc {
        CC
    } else if ed {
        ED
    } else if wt {
        NET
    } else {
        BACKGROUND
    }
}

/// Binary whole-tumour mask: any of ET, NET, CC or ED.
pub fn recombine_wt(s: &MergedSegmentation) -> Result<LabelMask> {
    let v = s.labels.labels().iter().map(|&l| (l != BACKGROUND) as u8).collect();
    LabelMask::binary(s.labels.geometry().clone(), v)
}

/// Indicator channels for ET, NET, CC, ED (in that order).
pub fn one_hot(s: &MergedSegmentation) -> Result<[LabelMask; 4]> {
    let g = s.labels.geometry();
    let channel = |label: u8| -> Result<LabelMask> {
        LabelMask::binary(g.clone(), s.labels.labels().iter().map(|&l| (l == label) as u8).collect())
    };
    Ok([channel(ET)?, channel(NET)?, channel(CC)?, channel(ED)?])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Geometry;
    use alloc::vec;

    fn binary(v: Vec<u8>) -> LabelMask {
        let n = v.len();
        LabelMask::binary(Geometry::new([n, 1, 1], [1.0; 3]).unwrap(), v).unwrap()
    }

    fn masks(et: Vec<u8>, cc: Vec<u8>, ed: Vec<u8>, wt: Vec<u8>) -> SubregionMasks {
        SubregionMasks { et: binary(et), cc: binary(cc), ed: binary(ed), wt: binary(wt) }
    }

    /// Independent statement of the merge: subregion label if any, else
    /// NET when whole tumour, else background.
    fn truth_table(et: u8, cc: u8, ed: u8, wt: u8) -> Option<u8> {
        match (et, cc, ed) {
            (1, 0, 0) => Some(ET),
            (0, 1, 0) => Some(CC),
            (0, 0, 1) => Some(ED),
            (0, 0, 0) => Some(if wt == 1 { NET } else { BACKGROUND }),
            _ => None,
        }
    }

    #[test]
    fn exhaustive_voxel_combinations() {
        for bits in 0u8..16 {
            let (et, cc, ed, wt) = (bits & 1, (bits >> 1) & 1, (bits >> 2) & 1, (bits >> 3) & 1);
            let m = masks(vec![et], vec![cc], vec![ed], vec![wt]);
            match (truth_table(et, cc, ed, wt), merge_masks(&m)) {
                (Some(expected), Ok(merged)) => {
                    assert_eq!(merged.labels.labels()[0], expected, "bits {bits:04b}");
                    // Recombined whole tumour covers the input whole tumour.
                    let wt_out = recombine_wt(&merged).unwrap().labels()[0];
                    assert!(wt_out >= wt);
                }
                (None, Err(Error::Disjointness { index: 0 })) => {}
                (e, r) => panic!("bits {bits:04b}: expected {e:?}, got {r:?}"),
            }
        }
    }

    #[test]
    fn empty_inputs_give_empty_output() {
        let m = masks(vec![0; 5], vec![0; 5], vec![0; 5], vec![0; 5]);
        let merged = merge_masks(&m).unwrap();
        assert_eq!(merged.labels.count_nonzero(), 0);
        assert!(one_hot(&merged).unwrap().iter().all(|c| c.count_nonzero() == 0));
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let mut m = masks(vec![0; 4], vec![0; 4], vec![0; 4], vec![0; 4]);
        m.cc = binary(vec![0; 5]);
        assert!(matches!(merge_masks(&m), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn one_hot_channels_partition_foreground() {
        let m = masks(vec![1, 0, 0, 0, 0], vec![0, 1, 0, 0, 0], vec![0, 0, 1, 0, 0], vec![1, 1, 1, 1, 0]);
        let merged = merge_masks(&m).unwrap();
        assert_eq!(merged.labels.labels(), &[ET, CC, ED, NET, BACKGROUND]);
        let channels = one_hot(&merged).unwrap();
        let wt = recombine_wt(&merged).unwrap();
        assert_eq!(wt.count_nonzero(), 4);
        for i in 0..5 {
            let sum: u8 = channels.iter().map(|c| c.labels()[i]).sum();
            assert_eq!(sum, wt.labels()[i]);
        }
        assert_eq!(channels[0].labels(), &[1, 0, 0, 0, 0]);
    }

    #[test]
    fn merge_is_idempotent_through_decomposition() {
        let m = masks(vec![1, 0, 0, 0, 1, 0], vec![0, 1, 0, 0, 0, 0], vec![0, 0, 0, 1, 0, 0], vec![0, 1, 1, 1, 1, 0]);
        let once = merge_masks(&m).unwrap();
        let twice = merge_masks(&SubregionMasks::from_merged(&once).unwrap()).unwrap();
        assert_eq!(once, twice);
    }
}
