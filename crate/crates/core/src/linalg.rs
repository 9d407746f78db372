//! Small shared linear-algebra helpers.
//!
//! Eigen results are re-sorted and sign-normalized here so that every caller
//! sees one deterministic convention regardless of what the backend solver
//! returns.

use nalgebra::{DMatrix, DVector};

/// Flips each column so its largest-magnitude entry is positive.
/// Ties go to the lowest row index; an all-zero column is left alone.
pub(crate) fn normalize_signs(m: &mut DMatrix<f64>) {
    for j in 0..m.ncols() {
        let mut best = 0usize;
        let mut best_abs = 0.0f64;
        for i in 0..m.nrows() {
            let a = m[(i, j)].abs();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if best_abs > 0.0 && m[(best, j)] < 0.0 {
            for i in 0..m.nrows() {
                m[(i, j)] = -m[(i, j)];
            }
        }
    }
}

/// Symmetric eigendecomposition with eigenvalues sorted (ascending or
/// descending), matching eigenvectors sign-normalized. Ties keep the
/// backend's original order, which is itself deterministic.
pub(crate) fn sym_eigen_sorted(m: &DMatrix<f64>, ascending: bool) -> (DVector<f64>, DMatrix<f64>) {
    let eig = m.clone().symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    if ascending {
        order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    } else {
        order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    }
    let values = DVector::from_fn(n, |i, _| eig.eigenvalues[order[i]]);
    let mut vectors = DMatrix::zeros(eig.eigenvectors.nrows(), n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    normalize_signs(&mut vectors);
    (values, vectors)
}

/// Max-norm of `A^T A - I`, the orthonormality defect of a column frame.
pub(crate) fn orthonormality_defect(a: &DMatrix<f64>) -> f64 {
    let gram = a.transpose() * a;
    let mut worst = 0.0f64;
    for i in 0..gram.nrows() {
        for j in 0..gram.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - target).abs());
        }
    }
    worst
}

/// Type-7 quantile (linear interpolation on order statistics) of an already
/// sorted slice. `q` is clamped to [0, 1].
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let q = q.clamp(0.0, 1.0);
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Copies the rows named by `idx` into a fresh matrix, preserving order.
pub(crate) fn gather_rows(x: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(idx.len(), x.ncols());
    for (dst, &src) in idx.iter().enumerate() {
        out.set_row(dst, &x.row(src));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn signs_flip_to_positive_dominant() {
        let mut m = DMatrix::from_row_slice(3, 2, &[-0.9, 0.1, 0.2, -0.5, 0.1, 0.4]);
        normalize_signs(&mut m);
        assert!(m[(0, 0)] > 0.0);
        // second column: dominant entry was -0.5 at row 1
        assert!(m[(1, 1)] > 0.0);
    }

    #[test]
    fn eigen_sorted_reconstructs() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let (vals, vecs) = sym_eigen_sorted(&a, false);
        assert!(vals[0] >= vals[1] && vals[1] >= vals[2]);
        let rebuilt = &vecs * DMatrix::from_diagonal(&vals) * vecs.transpose();
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(rebuilt[(i, j)], a[(i, j)], epsilon = 1e-10);
            }
        }
        assert!(orthonormality_defect(&vecs) < 1e-10);
    }

    #[test]
    fn quantile_interpolates() {
        let v: Vec<f64> = (1..=5).map(|i| i as f64).collect();
        assert_abs_diff_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_abs_diff_eq!(quantile_sorted(&v, 1.0), 5.0);
        assert_abs_diff_eq!(quantile_sorted(&v, 0.5), 3.0);
        assert_abs_diff_eq!(quantile_sorted(&v, 0.625), 3.5);
    }

    #[test]
    fn gather_preserves_order() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let g = gather_rows(&x, &[2, 0]);
        assert_eq!(g[(0, 0)], 5.0);
        assert_eq!(g[(1, 1)], 2.0);
    }
}
