//! Intensity statistics over ROI voxel values.
//!
//! Moments are population moments. Percentiles interpolate linearly between
//! closest ranks: for sorted values `x[0..n]` and fraction `q`,
//! `h = (n−1)·q` and `P = x[⌊h⌋] + (h − ⌊h⌋)·(x[⌊h⌋+1] − x[⌊h⌋])`.
//! Kurtosis is not excess-corrected. A zero-variance ROI reports skewness
//! and kurtosis of 0.

use alloc::vec::Vec;

use super::discretize::bin_index;
use crate::error::{Error, Result};
use crate::math;

pub const NAMES: [&str; 18] = [
    "Minimum",
    "Maximum",
    "Mean",
    "Median",
    "10Percentile",
    "90Percentile",
    "Skewness",
    "Kurtosis",
    "Variance",
    "StandardDeviation",
    "Energy",
    "TotalEnergy",
    "Entropy",
    "InterquartileRange",
    "Range",
    "MeanAbsoluteDeviation",
    "RobustMeanAbsoluteDeviation",
    "RootMeanSquared",
];

/// Percentile of already-sorted values, `q` in [0, 1].
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = math::floor(h) as usize;
    if lo + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    sorted[lo] + (h - lo as f64) * (sorted[lo + 1] - sorted[lo])
}

/// Order of `values` does not affect the result: every accumulation runs
/// over the sorted copy.
pub fn firstorder_features(values: &[f64], bin_width: f64, voxel_volume: f64) -> Result<[f64; 18]> {
    if values.is_empty() {
        return Err(Error::EmptyRoi);
    }
    let mut x: Vec<f64> = values.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let min = x[0];
    let max = x[x.len() - 1];
    let mean = x.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4, mut mad, mut energy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &v in &x {
        let d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
        mad += d.abs();
        energy += v * v;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    mad /= n;
    let (skewness, kurtosis) = if m2 > 0.0 { (m3 / (m2 * math::sqrt(m2)), m4 / (m2 * m2)) } else { (0.0, 0.0) };

    let p10 = percentile(&x, 0.10);
    let p90 = percentile(&x, 0.90);
    let robust: Vec<f64> = x.iter().copied().filter(|&v| v >= p10 && v <= p90).collect();
    let robust_mad = if robust.is_empty() {
        0.0
    } else {
        let rm = robust.iter().sum::<f64>() / robust.len() as f64;
        robust.iter().map(|v| (v - rm).abs()).sum::<f64>() / robust.len() as f64
    };

    // Entropy over the fixed-width histogram used for texture features.
    let mut counts: Vec<usize> = Vec::new();
    for &v in &x {
        let level = bin_index(v, min, bin_width) as usize;
        if counts.len() < level {
            counts.resize(level, 0);
        }
        counts[level - 1] += 1;
    }
    let entropy: f64 = counts.iter().map(|&c| math::entropy_term(c as f64 / n)).sum();

    Ok([
        min,
        max,
        mean,
        percentile(&x, 0.5),
        p10,
        p90,
        skewness,
        kurtosis,
        m2,
        math::sqrt(m2),
        energy,
        energy * voxel_volume,
        entropy,
        percentile(&x, 0.75) - percentile(&x, 0.25),
        max - min,
        mad,
        robust_mad,
        math::sqrt(energy / n),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feature(values: &[f64], name: &str) -> f64 {
        let f = firstorder_features(values, 25.0, 1.0).unwrap();
        f[NAMES.iter().position(|n| *n == name).unwrap()]
    }

    #[test]
    fn simple_statistics() {
        let v = [1.0, 2.0, 3.0];
        assert_eq!(feature(&v, "Minimum"), 1.0);
        assert_eq!(feature(&v, "Mean"), 2.0);
        assert_eq!(feature(&v, "Range"), 2.0);
        assert_eq!(feature(&v, "Median"), 2.0);
    }

    #[test]
    fn symmetric_values_have_zero_skew() {
        assert_eq!(feature(&[1.0, 2.0, 2.0, 3.0], "Skewness"), 0.0);
    }

    #[test]
    fn constant_roi_uses_zero_moment_convention() {
        let v = [5.0; 10];
        assert_eq!(feature(&v, "Skewness"), 0.0);
        assert_eq!(feature(&v, "Kurtosis"), 0.0);
        assert_eq!(feature(&v, "Entropy"), 0.0);
        assert_eq!(feature(&v, "Variance"), 0.0);
    }

    #[test]
    fn empty_input_fails() {
        assert_eq!(firstorder_features(&[], 25.0, 1.0), Err(Error::EmptyRoi));
    }

    #[test]
    fn entropy_of_two_equal_bins_is_one_bit() {
        assert_eq!(feature(&[0.0, 0.0, 30.0, 30.0], "Entropy"), 1.0);
    }
}
