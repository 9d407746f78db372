//! Radial outlier scores and the trimming rule.
//!
//! Rows are scored by the squared Mahalanobis-type distance between their
//! factor scores and their assigned cluster's centroid, scaled by the sample
//! size: `t_i = n * diff_i C_F^{-1} diff_i^T`. The covariance `C_F` is taken
//! over the factor scores of the entire sample (configurable to active rows
//! only), while the centroids average active members only, so rows already
//! set aside cannot drag their own cluster's center toward themselves.
//!
//! [`flag_outliers`] sets aside exactly `floor(alpha * n)` rows with the
//! largest scores.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::fkm::{covariance, Membership, TrimCovScope};
use crate::linalg::gather_rows;

/// Number of rows the trimming level sets aside: `floor(alpha * n)`.
pub fn trim_count(n: usize, alpha: f64) -> usize {
    debug_assert!((0.0..=0.5).contains(&alpha));
    (alpha * n as f64).floor() as usize
}

/// Radial scores of one iterate.
#[derive(Debug, Clone)]
pub struct RadialScores {
    /// Per-row score, in row order.
    pub t: Vec<f64>,
    /// The score covariance that was inverted (after any ridge).
    pub c_f: DMatrix<f64>,
    /// Whether the covariance needed a ridge to be invertible.
    pub ridge_applied: bool,
}

/// Scores every row against its assigned cluster, with the covariance taken
/// over the entire sample.
pub fn radial_scores(f: &DMatrix<f64>, membership: &Membership) -> Result<RadialScores> {
    radial_scores_with(f, membership, TrimCovScope::EntireSample)
}

/// Scores every row against its assigned cluster.
///
/// The deviation of row `i` is measured from the centroid of its assigned
/// cluster, averaged over that cluster's active members; flagged rows are
/// scored too (against the cluster their label names) but do not influence
/// any centroid. An ill-conditioned or singular covariance (condition number
/// beyond 1e12) gets a ridge of `1e-8 * trace / r` on the diagonal; scores
/// that stay degenerate after that are an error.
pub fn radial_scores_with(
    f: &DMatrix<f64>,
    membership: &Membership,
    scope: TrimCovScope,
) -> Result<RadialScores> {
    let n = f.nrows();
    let r = f.ncols();
    if r == 0 {
        return Err(Error::Shape("scores must have at least one column".into()));
    }
    if membership.len() != n {
        return Err(Error::Shape(format!(
            "membership covers {} rows but scores have {n}",
            membership.len()
        )));
    }
    let sizes = membership.cluster_sizes();
    if let Some(empty) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::EmptyCluster(empty));
    }

    let c = membership.clusters();
    let mut means: DMatrix<f64> = DMatrix::zeros(c, r);
    for (i, &l) in membership.labels().iter().enumerate() {
        if membership.is_outlier(i) {
            continue;
        }
        for j in 0..r {
            means[(l, j)] += f[(i, j)];
        }
    }
    for l in 0..c {
        let inv = 1.0 / sizes[l] as f64;
        for j in 0..r {
            means[(l, j)] *= inv;
        }
    }

    let (c_f, scale) = match scope {
        TrimCovScope::EntireSample => {
            if n < 2 {
                return Err(Error::Data("need at least 2 rows to estimate a covariance".into()));
            }
            (covariance(f, true), n as f64)
        }
        TrimCovScope::ActiveOnly => {
            let active = membership.active_rows();
            if active.len() < 2 {
                return Err(Error::Data(
                    "need at least 2 active rows to estimate a covariance".into(),
                ));
            }
            let fa = gather_rows(f, &active);
            (covariance(&fa, true), active.len() as f64)
        }
    };

    let (chol, c_f, ridge_applied) = cholesky_with_ridge(c_f)
        .ok_or_else(|| Error::Degenerate("score covariance is numerically singular".into()))?;

    let mut t = Vec::with_capacity(n);
    for (i, &l) in membership.labels().iter().enumerate() {
        let diff = DVector::from_fn(r, |j, _| f[(i, j)] - means[(l, j)]);
        let solved = chol.solve(&diff);
        t.push(scale * diff.dot(&solved));
    }
    Ok(RadialScores { t, c_f, ridge_applied })
}

/// Flags exactly `floor(alpha * len)` rows with the largest scores; equal
/// scores are flagged from the higher row index down.
pub fn flag_outliers(scores: &RadialScores, alpha: f64) -> Vec<bool> {
    assert!((0.0..=0.5).contains(&alpha), "alpha must lie in [0, 0.5]");
    let n = scores.t.len();
    let m = trim_count(n, alpha);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        scores.t[b]
            .partial_cmp(&scores.t[a])
            .expect("radial scores must be comparable")
            .then(b.cmp(&a))
    });
    let mut mask = vec![false; n];
    for &i in order.iter().take(m) {
        mask[i] = true;
    }
    debug_assert_eq!(mask.iter().filter(|&&f| f).count(), m);
    mask
}

/// Radial scores against the global mean, used to seed the initial
/// assignment. `None` when the scores carry no usable spread.
pub(crate) fn global_radial_scores(f: &DMatrix<f64>) -> Option<Vec<f64>> {
    let n = f.nrows();
    let r = f.ncols();
    if n < 2 || r == 0 {
        return None;
    }
    let c_f = covariance(f, true);
    let (chol, _, _) = cholesky_with_ridge(c_f)?;
    let mean = f.row_mean();
    let mut t = Vec::with_capacity(n);
    for i in 0..n {
        let diff = DVector::from_fn(r, |j, _| f[(i, j)] - mean[j]);
        let solved = chol.solve(&diff);
        t.push(n as f64 * diff.dot(&solved));
    }
    Some(t)
}

/// Cholesky factorization with the ridge fallback: when the matrix is not
/// positive definite or its condition number exceeds 1e12, `1e-8 * trace / r`
/// is added to the diagonal first. Returns the factorization, the matrix it
/// factorized, and whether the ridge fired.
fn cholesky_with_ridge(m: DMatrix<f64>) -> Option<(Cholesky<f64, Dyn>, DMatrix<f64>, bool)> {
    let r = m.nrows();
    debug_assert_eq!(r, m.ncols());
    let eigen = m.clone().symmetric_eigen();
    let lambda_min = eigen.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let lambda_max = eigen.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ill = lambda_min <= 0.0 || lambda_max / lambda_min > 1e12;
    if !ill {
        if let Some(chol) = Cholesky::new(m.clone()) {
            return Some((chol, m, false));
        }
    }
    let ridge = 1e-8 * m.trace() / r as f64;
    if !(ridge > 0.0) {
        return None;
    }
    let mut ridged = m;
    for i in 0..r {
        ridged[(i, i)] += ridge;
    }
    let chol = Cholesky::new(ridged.clone())?;
    Some((chol, ridged, true))
}
