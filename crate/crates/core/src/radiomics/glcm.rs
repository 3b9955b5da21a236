//! Gray-level co-occurrence features.
//!
//! One symmetric matrix per direction in [`DIRECTIONS`] at distance 1,
//! counting pairs of ROI voxels. Features are computed per normalized
//! matrix and averaged over the directions that have at least one pair. An
//! ROI without any neighbouring pair is treated as one self-pair at its
//! level.

use alloc::vec::Vec;

use super::emphasis::average;
use super::{DiscretizedRoi, Matrix, DIRECTIONS};
use crate::linalg::symmetric_eigenvalues;
use crate::math;

pub const NAMES: [&str; 24] = [
    "Autocorrelation",
    "JointAverage",
    "ClusterProminence",
    "ClusterShade",
    "ClusterTendency",
    "Contrast",
    "Correlation",
    "DifferenceAverage",
    "DifferenceEntropy",
    "DifferenceVariance",
    "JointEnergy",
    "JointEntropy",
    "Imc1",
    "Imc2",
    "Idm",
    "Idmn",
    "Id",
    "Idn",
    "InverseVariance",
    "MaximumProbability",
    "SumAverage",
    "SumEntropy",
    "SumSquares",
    "MCC",
];

/// Raw symmetric co-occurrence counts, one `ng × ng` matrix per direction.
pub fn glcm_matrices(roi: &DiscretizedRoi) -> Vec<Matrix> {
    let ng = roi.ng as usize;
    DIRECTIONS
        .iter()
        .map(|d| {
            let mut m = Matrix::zeros(ng, ng);
            for (x, y, z, a) in roi.voxels() {
                let b = roi.level_at(x as isize + d[0], y as isize + d[1], z as isize + d[2]);
                if b != 0 {
                    let (a, b) = (a as usize - 1, b as usize - 1);
                    m.add(a, b, 1.0);
                    m.add(b, a, 1.0);
                }
            }
            m
        })
        .collect()
}

pub fn glcm_features(roi: &DiscretizedRoi) -> [f64; 24] {
    let mut per_direction: Vec<[f64; 24]> = glcm_matrices(roi)
        .iter()
        .filter(|m| m.sum() > 0.0)
        .map(|m| features_from_matrix(&m.normalized(), roi.ng as usize))
        .collect();
    if per_direction.is_empty() {
        let ng = roi.ng as usize;
        let level = roi.voxels().next().map(|v| v.3 as usize).unwrap_or(1);
        let mut m = Matrix::zeros(ng, ng);
        m.add(level - 1, level - 1, 1.0);
        per_direction.push(features_from_matrix(&m, ng));
    }
    average(&per_direction)
}

/// Features of one normalized co-occurrence matrix.
pub fn features_from_matrix(p: &Matrix, ng: usize) -> [f64; 24] {
    let n = ng as f64;
    let mut px = alloc::vec![0.0; ng];
    let mut py = alloc::vec![0.0; ng];
    let mut p_sum = alloc::vec![0.0; 2 * ng + 1];
    let mut p_diff = alloc::vec![0.0; ng];
    let mut max_p = 0.0f64;
    let (mut autocorr, mut energy, mut hxy) = (0.0, 0.0, 0.0);
    for i in 0..ng {
        for j in 0..ng {
            let v = p.get(i, j);
            if v == 0.0 {
                continue;
            }
            let (gi, gj) = ((i + 1) as f64, (j + 1) as f64);
            px[i] += v;
            py[j] += v;
            p_sum[i + j + 2] += v;
            p_diff[i.abs_diff(j)] += v;
            max_p = max_p.max(v);
            autocorr += v * gi * gj;
            energy += v * v;
            hxy += math::entropy_term(v);
        }
    }
    let mu_x: f64 = px.iter().enumerate().map(|(i, v)| (i + 1) as f64 * v).sum();
    let mu_y: f64 = py.iter().enumerate().map(|(j, v)| (j + 1) as f64 * v).sum();
    let var_x: f64 = px.iter().enumerate().map(|(i, v)| v * ((i + 1) as f64 - mu_x) * ((i + 1) as f64 - mu_x)).sum();
    let var_y: f64 = py.iter().enumerate().map(|(j, v)| v * ((j + 1) as f64 - mu_y) * ((j + 1) as f64 - mu_y)).sum();

    let (mut prominence, mut shade, mut tendency, mut contrast) = (0.0, 0.0, 0.0, 0.0);
    let (mut hxy1, mut hxy2) = (0.0, 0.0);
    for i in 0..ng {
        for j in 0..ng {
            let pxy = px[i] * py[j];
            if pxy > 0.0 {
                hxy2 -= pxy * math::log2(pxy);
            }
            let v = p.get(i, j);
            if v == 0.0 {
                continue;
            }
            let (gi, gj) = ((i + 1) as f64, (j + 1) as f64);
            let s = gi + gj - mu_x - mu_y;
            prominence += v * s * s * s * s;
            shade += v * s * s * s;
            tendency += v * s * s;
            contrast += v * (gi - gj) * (gi - gj);
            hxy1 -= v * math::log2(pxy);
        }
    }
    let correlation =
        if var_x > 0.0 && var_y > 0.0 { (autocorr - mu_x * mu_y) / math::sqrt(var_x * var_y) } else { 1.0 };
    let hx: f64 = px.iter().map(|&v| math::entropy_term(v)).sum();
    let hy: f64 = py.iter().map(|&v| math::entropy_term(v)).sum();
    let imc1 = if hx.max(hy) > 0.0 { (hxy - hxy1) / hx.max(hy) } else { 0.0 };
    let imc2 = if hxy2 > hxy { math::sqrt(1.0 - math::exp(-2.0 * (hxy2 - hxy))) } else { 0.0 };

    let (mut diff_avg, mut diff_ent, mut idm, mut idmn, mut id, mut idn, mut inv_var) =
        (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for (k, &v) in p_diff.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let kf = k as f64;
        diff_avg += kf * v;
        diff_ent += math::entropy_term(v);
        idm += v / (1.0 + kf * kf);
        idmn += v / (1.0 + kf * kf / (n * n));
        id += v / (1.0 + kf);
        idn += v / (1.0 + kf / n);
        if k > 0 {
            inv_var += v / (kf * kf);
        }
    }
    let diff_var: f64 = p_diff.iter().enumerate().map(|(k, v)| v * (k as f64 - diff_avg) * (k as f64 - diff_avg)).sum();
    let sum_avg: f64 = p_sum.iter().enumerate().map(|(k, v)| k as f64 * v).sum();
    let sum_ent: f64 = p_sum.iter().map(|&v| math::entropy_term(v)).sum();

    [
        autocorr,
        mu_x,
        prominence,
        shade,
        tendency,
        contrast,
        correlation,
        diff_avg,
        diff_ent,
        diff_var,
        energy,
        hxy,
        imc1,
        imc2,
        idm,
        idmn,
        id,
        idn,
        inv_var,
        max_p,
        sum_avg,
        sum_ent,
        var_x,
        mcc(p, &px, &py),
    ]
}

/// Square root of the second-largest eigenvalue of
/// `Q(i,j) = Σ_k p(i,k) p(j,k) / (px(i) py(k))`.
///
/// For a symmetric matrix Q is similar to `M Mᵀ` with
/// `M = Dx^{-1/2} P Dy^{-1/2}`, whose eigenvalues are the squares of M's.
fn mcc(p: &Matrix, px: &[f64], py: &[f64]) -> f64 {
    let active: Vec<usize> = (0..px.len()).filter(|&i| px[i] > 0.0).collect();
    if active.len() < 2 {
        return 1.0;
    }
    let k = active.len();
    let mut m = alloc::vec![0.0; k * k];
    for (a, &i) in active.iter().enumerate() {
        for (b, &j) in active.iter().enumerate() {
            m[a * k + b] = p.get(i, j) / math::sqrt(px[i] * py[j]);
        }
    }
    let mut squares: Vec<f64> = symmetric_eigenvalues(&m, k).iter().map(|e| e * e).collect();
    squares.sort_by(|a, b| b.total_cmp(a));
    math::sqrt(squares[1].clamp(0.0, 1.0))
}
