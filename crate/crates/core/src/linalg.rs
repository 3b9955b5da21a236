//! Dense symmetric eigenvalues by cyclic Jacobi rotation.

use alloc::vec::Vec;

use crate::math;

/// Eigenvalues of the symmetric `n×n` row-major matrix, sorted descending.
pub fn symmetric_eigenvalues(matrix: &[f64], n: usize) -> Vec<f64> {
    debug_assert_eq!(matrix.len(), n * n);
    let mut a = matrix.to_vec();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off == 0.0 {
            break;
        }
        let scale: f64 = (0..n).map(|i| a[i * n + i].abs()).sum::<f64>().max(1e-300);
        if math::sqrt(off) <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + math::sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / math::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    eig.sort_by(|x, y| y.total_cmp(x));
    eig
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_matrix_is_untouched() {
        let m = [3.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0];
        assert_eq!(symmetric_eigenvalues(&m, 3), [3.0, 2.0, 1.0]);
    }

    #[test]
    fn two_by_two_known_spectrum() {
        // [[2,1],[1,2]] has eigenvalues 3 and 1.
        let e = symmetric_eigenvalues(&[2.0, 1.0, 1.0, 2.0], 2);
        assert!((e[0] - 3.0).abs() < 1e-12 && (e[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trace_and_determinant_preserved() {
        let m = [4.0, 1.0, 0.5, 1.0, 3.0, 0.25, 0.5, 0.25, 2.0];
        let e = symmetric_eigenvalues(&m, 3);
        let trace: f64 = e.iter().sum();
        assert!((trace - 9.0).abs() < 1e-12);
        let det = 4.0 * (3.0 * 2.0 - 0.0625) - 1.0 * (2.0 - 0.125) + 0.5 * (0.25 - 1.5);
        assert!((e[0] * e[1] * e[2] - det).abs() < 1e-10);
    }
}
