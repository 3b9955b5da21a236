//! Statistics shared by the run-length, size-zone and dependence matrices,
//! all of which are (gray level × size) count matrices.

use alloc::collections::BTreeMap;

use super::Matrix;
use crate::math;

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Emphasis {
    /// Total count (runs, zones or voxels).
    pub total: f64,
    pub small: f64,
    pub large: f64,
    pub gray_nonuniformity: f64,
    pub gray_nonuniformity_normalized: f64,
    pub size_nonuniformity: f64,
    pub size_nonuniformity_normalized: f64,
    pub gray_variance: f64,
    pub size_variance: f64,
    pub entropy: f64,
    pub low_gray: f64,
    pub high_gray: f64,
    pub small_low_gray: f64,
    pub small_high_gray: f64,
    pub large_low_gray: f64,
    pub large_high_gray: f64,
}

pub(crate) fn emphasis(counts: &Matrix) -> Emphasis {
    emphasis_sparse(
        (0..counts.rows).flat_map(|r| (0..counts.cols).map(move |c| (r, c))).map(|(r, c)| (r, c, counts.get(r, c))),
    )
}

/// Same statistics from `(row, col, count)` entries; zero counts are ignored
/// and repeated cells accumulate.
pub(crate) fn emphasis_sparse<I>(entries: I) -> Emphasis
where
    I: IntoIterator<Item = (usize, usize, f64)>,
{
    let mut cells: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (r, c, v) in entries {
        if v != 0.0 {
            *cells.entry((r, c)).or_insert(0.0) += v;
        }
    }
    let total: f64 = cells.values().sum();
    if total <= 0.0 {
        return Emphasis::default();
    }
    let mut e = Emphasis { total, ..Emphasis::default() };
    let mut row_sums: BTreeMap<usize, f64> = BTreeMap::new();
    let mut col_sums: BTreeMap<usize, f64> = BTreeMap::new();
    let (mut mu_i, mut mu_j) = (0.0, 0.0);
    for (&(r, c), &count) in &cells {
        let p = count / total;
        let (i, j) = ((r + 1) as f64, (c + 1) as f64);
        let (i2, j2) = (i * i, j * j);
        *row_sums.entry(r).or_insert(0.0) += p;
        *col_sums.entry(c).or_insert(0.0) += p;
        mu_i += p * i;
        mu_j += p * j;
        e.small += p / j2;
        e.large += p * j2;
        e.low_gray += p / i2;
        e.high_gray += p * i2;
        e.small_low_gray += p / (i2 * j2);
        e.small_high_gray += p * i2 / j2;
        e.large_low_gray += p * j2 / i2;
        e.large_high_gray += p * i2 * j2;
        e.entropy += math::entropy_term(p);
    }
    let row_sq: f64 = row_sums.values().map(|r| r * r).sum();
    let col_sq: f64 = col_sums.values().map(|c| c * c).sum();
    e.gray_nonuniformity = total * row_sq;
    e.gray_nonuniformity_normalized = row_sq;
    e.size_nonuniformity = total * col_sq;
    e.size_nonuniformity_normalized = col_sq;
    e.gray_variance = row_sums.iter().map(|(&r, p)| p * ((r + 1) as f64 - mu_i) * ((r + 1) as f64 - mu_i)).sum();
    e.size_variance = col_sums.iter().map(|(&c, p)| p * ((c + 1) as f64 - mu_j) * ((c + 1) as f64 - mu_j)).sum();
    e
}

/// Element-wise mean of feature arrays.
pub(crate) fn average<const N: usize>(items: &[[f64; N]]) -> [f64; N] {
    let mut out = [0.0; N];
    if items.is_empty() {
        return out;
    }
    for item in items {
        for (o, v) in out.iter_mut().zip(item) {
            *o += v;
        }
    }
    let n = items.len() as f64;
    out.iter_mut().for_each(|o| *o /= n);
    out
}
