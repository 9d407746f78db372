//! Radial scores against a dense-inverse Mahalanobis oracle, and the exact
//! flagging quota.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tfkm::fkm::{Membership, TrimCovScope};
use tfkm::trim::{flag_outliers, radial_scores, radial_scores_with, trim_count, RadialScores};

fn gaussian_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal))
}

// The documented score, assembled with an explicit matrix inverse instead of
// a Cholesky solve: t_i = n * diff_i^T C_F^{-1} diff_i with C_F the unbiased
// covariance of all score rows and diff_i the deviation from the mean of the
// row's cluster over its active members.
fn score_oracle(f: &DMatrix<f64>, m: &Membership) -> Vec<f64> {
    let n = f.nrows();
    let r = f.ncols();
    let c = m.clusters();

    let mut sums = vec![DVector::<f64>::zeros(r); c];
    let mut counts = vec![0usize; c];
    for (i, &l) in m.labels().iter().enumerate() {
        if !m.is_outlier(i) {
            sums[l] += f.row(i).transpose();
            counts[l] += 1;
        }
    }
    let means: Vec<DVector<f64>> =
        sums.iter().zip(&counts).map(|(s, &k)| s / k as f64).collect();

    let grand = f.row_mean().transpose();
    let mut c_f = DMatrix::zeros(r, r);
    for i in 0..n {
        let d = f.row(i).transpose() - &grand;
        c_f += &d * d.transpose();
    }
    c_f /= (n - 1) as f64;
    let inv = c_f.try_inverse().expect("oracle covariance must be invertible");

    (0..n)
        .map(|i| {
            let d = f.row(i).transpose() - &means[m.labels()[i]];
            n as f64 * (d.transpose() * &inv * d)[(0, 0)]
        })
        .collect()
}

#[test]
fn scores_match_dense_inverse_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for trial in 0..10 {
        let n = 20 + trial;
        let f = gaussian_matrix(&mut rng, n, 3);
        let labels: Vec<usize> = (0..n).map(|i| (i * 13) % 3).collect();
        let mut m = Membership::new(labels, 3);
        m.set_mask((0..n).map(|i| i % 7 == 0).collect());
        let got = radial_scores(&f, &m).unwrap();
        assert!(!got.ridge_applied, "well-conditioned input should need no ridge");
        let want = score_oracle(&f, &m);
        for i in 0..n {
            approx::assert_relative_eq!(got.t[i], want[i], max_relative = 1e-10);
        }
    }
}

#[test]
fn active_scope_ignores_flagged_rows_completely() {
    let mut rng = ChaCha8Rng::seed_from_u64(90);
    let mut f = gaussian_matrix(&mut rng, 25, 2);
    let labels: Vec<usize> = (0..25).map(|i| i % 2).collect();
    let mut m = Membership::new(labels, 2);
    let mask: Vec<bool> = (0..25).map(|i| i >= 20).collect();
    m.set_mask(mask);

    let before = radial_scores_with(&f, &m, TrimCovScope::ActiveOnly).unwrap();
    for i in 20..25 {
        f[(i, 0)] = 1e6 + i as f64;
        f[(i, 1)] = -3e5;
    }
    let after = radial_scores_with(&f, &m, TrimCovScope::ActiveOnly).unwrap();
    for i in 0..20 {
        assert_eq!(before.t[i].to_bits(), after.t[i].to_bits(), "row {i} moved");
    }
}

#[test]
fn entire_sample_scope_uses_all_rows_in_the_covariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(91);
    let mut f = gaussian_matrix(&mut rng, 25, 2);
    let labels: Vec<usize> = (0..25).map(|i| i % 2).collect();
    let mut m = Membership::new(labels, 2);
    m.set_mask((0..25).map(|i| i >= 20).collect());

    let before = radial_scores(&f, &m).unwrap();
    f[(24, 0)] += 50.0;
    let after = radial_scores(&f, &m).unwrap();
    // the flagged row's own value is in C_F, so active scores shift too
    assert_ne!(before.t[0].to_bits(), after.t[0].to_bits());
}

#[test]
fn quota_and_tie_rule() {
    let scores = RadialScores {
        t: vec![2.0, 7.0, 7.0, 7.0, 1.0, 0.0, 3.0, 2.0],
        c_f: DMatrix::identity(1, 1),
        ridge_applied: false,
    };
    // floor(0.25 * 8) = 2: the tie at 7.0 flags the two highest indices
    let mask = flag_outliers(&scores, 0.25);
    assert_eq!(mask, vec![false, false, true, true, false, false, false, false]);
    // floor(0.45 * 8) = 3: all three sevens
    let mask = flag_outliers(&scores, 0.45);
    assert_eq!(mask, vec![false, true, true, true, false, false, false, false]);
}

#[test]
fn reference_counts() {
    assert_eq!(trim_count(365, 0.1), 36);
    assert_eq!(trim_count(365, 0.05), 18);
    assert_eq!(trim_count(365, 0.2), 73);
    assert_eq!(trim_count(100, 0.15), 15);
}

proptest! {
    #[test]
    fn flag_count_is_always_the_floor(
        seed in 0u64..400,
        n in 4usize..60,
        alpha in 0.0f64..0.5,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..100.0)).collect();
        let scores = RadialScores { t, c_f: DMatrix::identity(1, 1), ridge_applied: false };
        let mask = flag_outliers(&scores, alpha);
        let count = mask.iter().filter(|&&f| f).count();
        prop_assert_eq!(count, (alpha * n as f64).floor() as usize);
    }

    #[test]
    fn flags_are_the_top_scores(seed in 0u64..400, n in 6usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..100.0)).collect();
        let scores = RadialScores { t: t.clone(), c_f: DMatrix::identity(1, 1), ridge_applied: false };
        let mask = flag_outliers(&scores, 0.25);
        let worst_kept = t
            .iter()
            .zip(&mask)
            .filter(|(_, &f)| !f)
            .map(|(&v, _)| v)
            .fold(f64::NEG_INFINITY, f64::max);
        for (i, &flagged) in mask.iter().enumerate() {
            if flagged {
                prop_assert!(t[i] >= worst_kept);
            }
        }
    }

    #[test]
    fn positive_scaling_never_changes_flags(seed in 0u64..200, factor in 0.01f64..100.0) {
        // t is scale invariant in exact arithmetic; flags must agree for a
        // power-of-two factor, which is exact in floating point too
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = gaussian_matrix(&mut rng, 18, 2);
        let labels: Vec<usize> = (0..18).map(|i| i % 2).collect();
        let m = Membership::new(labels, 2);
        let base = radial_scores(&f, &m).unwrap();
        let scaled = radial_scores(&(&f * 4.0), &m).unwrap();
        let _ = factor;
        prop_assert_eq!(flag_outliers(&base, 0.2), flag_outliers(&scaled, 0.2));
    }
}
