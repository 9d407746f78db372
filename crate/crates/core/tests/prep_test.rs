//! Data preparation against independently coded oracles.

use nalgebra::DMatrix;
use proptest::prelude::*;
use tfkm::prep::{
    correlation, importance, load_matrix, prune_correlated, standardize, standardize_with,
    winsorize, DropReason, MissingPolicy, RawMatrix, StandardizedMatrix,
};

fn raw(ids: &[&str], vars: &[&str], cells: &[f64]) -> RawMatrix {
    let n = ids.len();
    let p = vars.len();
    assert_eq!(cells.len(), n * p);
    let values = DMatrix::from_row_slice(n, p, cells);
    let mut missing = Vec::new();
    for i in 0..n {
        for j in 0..p {
            if values[(i, j)].is_nan() {
                missing.push((i, j));
            }
        }
    }
    RawMatrix {
        entity_ids: ids.iter().map(|s| s.to_string()).collect(),
        variable_names: vars.iter().map(|s| s.to_string()).collect(),
        values,
        missing,
    }
}

fn standardized(vars: &[&str], scale: &str, cells: &[f64]) -> StandardizedMatrix {
    let p = vars.len();
    let n = cells.len() / p;
    StandardizedMatrix {
        entity_ids: (0..n).map(|i| format!("e{i}")).collect(),
        variable_names: vars.iter().map(|s| s.to_string()).collect(),
        values: DMatrix::from_row_slice(n, p, cells),
        scale_column_name: scale.to_string(),
    }
}

#[test]
fn standardize_hand_oracle() {
    // assets is the scale; loans and bonds become ratios, assets / max(assets)
    let r = raw(
        &["a", "b", "c"],
        &["loans", "assets", "bonds"],
        &[10.0, 50.0, 5.0, 30.0, 200.0, 40.0, 7.0, 100.0, 0.0],
    );
    let (m, catalog) = standardize(&r, "assets", 0.0).unwrap();
    assert_eq!(m.variable_names, vec!["loans", "assets", "bonds"]);
    assert_eq!(m.values[(0, 0)], 10.0 / 50.0);
    assert_eq!(m.values[(1, 0)], 30.0 / 200.0);
    assert_eq!(m.values[(2, 0)], 7.0 / 100.0);
    assert_eq!(m.values[(0, 1)], 50.0 / 200.0);
    assert_eq!(m.values[(1, 1)], 1.0); // the max divides to exactly 1
    assert_eq!(m.values[(2, 2)], 0.0);
    assert!(catalog.dropped.is_empty());
}

#[test]
fn scale_maximum_is_bitwise_one() {
    // awkward scale values; the maximal entry must still divide to exactly 1.0
    let r = raw(
        &["a", "b", "c", "d"],
        &["v", "s"],
        &[1.0, 0.3, 2.0, 0.7, 3.0, 1.9, 4.0, 1.3],
    );
    let (m, _) = standardize(&r, "s", 0.0).unwrap();
    let s = m.column("s").unwrap();
    let max = (0..4).map(|i| m.values[(i, s)]).fold(f64::MIN, f64::max);
    assert_eq!(max.to_bits(), 1.0f64.to_bits());
}

#[test]
fn missing_scale_rows_are_dropped() {
    let r = raw(
        &["a", "b", "c"],
        &["v", "s"],
        &[1.0, 2.0, 5.0, f64::NAN, 3.0, 4.0],
    );
    let (m, _) = standardize(&r, "s", 0.0).unwrap();
    assert_eq!(m.entity_ids, vec!["a", "c"]);
    assert_eq!(m.nrows(), 2);
}

#[test]
fn nonpositive_scale_is_an_error() {
    let r = raw(&["a", "b"], &["v", "s"], &[1.0, 2.0, 3.0, 0.0]);
    let err = standardize(&r, "s", 0.0).unwrap_err();
    assert!(err.to_string().contains('b'), "error should name the id: {err}");
}

#[test]
fn sparsity_floor_counts_nonzero_cells() {
    // "thin" is populated in 1 of 4 rows: dropped at floor 0.5; zeros do not
    // count as populated even though they are not missing
    let r = raw(
        &["a", "b", "c", "d"],
        &["thin", "full", "s"],
        &[
            0.0, 1.0, 2.0, //
            0.0, 2.0, 2.0, //
            3.0, 3.0, 2.0, //
            0.0, 4.0, 2.0,
        ],
    );
    let (m, catalog) = standardize(&r, "s", 0.5).unwrap();
    assert_eq!(m.variable_names, vec!["full", "s"]);
    assert_eq!(catalog.dropped, vec![("thin".to_string(), DropReason::Sparse)]);
}

#[test]
fn impute_zero_vs_drop_rows() {
    let r = raw(
        &["a", "b", "c"],
        &["v", "s"],
        &[f64::NAN, 2.0, 6.0, 2.0, 9.0, 3.0],
    );
    let (imputed, _) = standardize(&r, "s", 0.0).unwrap();
    assert_eq!(imputed.nrows(), 3);
    assert_eq!(imputed.values[(0, 0)], 0.0);

    let (dropped, _) = standardize_with(&r, "s", 0.0, MissingPolicy::DropRows).unwrap();
    assert_eq!(dropped.entity_ids, vec!["b", "c"]);
}

#[test]
fn load_matrix_roundtrip_and_missing_cells() {
    let path = std::env::temp_dir().join("tfkm_prep_roundtrip.csv");
    std::fs::write(&path, "bank,loans,assets\nb1,10,100\nb2,,250\nb3,NA,80\n").unwrap();
    let r = load_matrix(&path, "bank").unwrap();
    std::fs::remove_file(&path).ok();

    assert_eq!(r.entity_ids, vec!["b1", "b2", "b3"]);
    assert_eq!(r.variable_names, vec!["loans", "assets"]);
    assert_eq!(r.values[(0, 0)], 10.0);
    assert!(r.values[(1, 0)].is_nan());
    assert!(r.values[(2, 0)].is_nan());
    assert_eq!(r.missing, vec![(1, 0), (2, 0)]);
}

#[test]
fn load_matrix_rejects_duplicate_ids() {
    let path = std::env::temp_dir().join("tfkm_prep_dup_ids.csv");
    std::fs::write(&path, "bank,v\nb1,1\nb1,2\n").unwrap();
    let err = load_matrix(&path, "bank").unwrap_err();
    std::fs::remove_file(&path).ok();
    assert!(err.to_string().contains("b1"), "{err}");
}

#[test]
fn load_matrix_rejects_text_cells() {
    let path = std::env::temp_dir().join("tfkm_prep_text.csv");
    std::fs::write(&path, "bank,v\nb1,1\nb2,oops\n").unwrap();
    let err = load_matrix(&path, "bank").unwrap_err();
    std::fs::remove_file(&path).ok();
    let msg = err.to_string();
    assert!(msg.contains("oops") || msg.contains('v'), "{msg}");
}

#[test]
fn correlation_matches_textbook_formula() {
    // Independent accumulation: r = (E[xy] - E[x]E[y]) / (sd_x sd_y) with
    // population moments; algebraically identical, numerically distinct.
    let n = 23;
    let cells = lcg_cells(9, n * 4);
    let m = DMatrix::from_row_slice(n, 4, &cells);
    let corr = correlation(&m);
    for a in 0..4 {
        for b in 0..4 {
            let (mut sx, mut sy, mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..n {
                let (x, y) = (m[(i, a)], m[(i, b)]);
                sx += x;
                sy += y;
                sxy += x * y;
                sxx += x * x;
                syy += y * y;
            }
            let nf = n as f64;
            let expected = (sxy / nf - sx / nf * sy / nf)
                / ((sxx / nf - (sx / nf).powi(2)).sqrt() * (syy / nf - (sy / nf).powi(2)).sqrt());
            approx::assert_relative_eq!(corr[(a, b)], expected, epsilon = 1e-12);
        }
    }
}

// Reference implementation of the greedy pruning rule, written directly from
// its description: order by (importance desc, index asc) with the scale
// column first, retain unless conflicting with something already retained.
fn prune_oracle(values: &DMatrix<f64>, scale_idx: usize, threshold: f64) -> Vec<usize> {
    let p = values.ncols();
    let corr = correlation(values);
    let scores: Vec<f64> = (0..p).map(|j| importance(&corr, j)).collect();
    let mut order: Vec<usize> = (0..p).filter(|&j| j != scale_idx).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    order.insert(0, scale_idx);
    let mut kept: Vec<usize> = Vec::new();
    for &cand in &order {
        if kept.iter().all(|&k| corr[(cand, k)].abs() <= threshold) {
            kept.push(cand);
        }
    }
    kept.sort_unstable();
    kept
}

fn lcg_cells(seed: u64, len: usize) -> Vec<f64> {
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    (0..len)
        .map(|_| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 4.0 - 2.0
        })
        .collect()
}

#[test]
fn pruning_matches_reference_on_random_matrices() {
    for trial in 0..20u64 {
        let n = 24 + (trial as usize % 5);
        let p = 6;
        let mut cells = lcg_cells(1000 + trial, n * p);
        // plant one highly correlated pair: column 3 = column 1 + small noise
        for i in 0..n {
            cells[i * p + 3] = cells[i * p + 1] + 0.01 * cells[i * p + 5];
        }
        let x = standardized(&["s", "v1", "v2", "v3", "v4", "v5"], "s", &cells);
        let (pruned, catalog) = prune_correlated(&x, 0.9).unwrap();

        let expected = prune_oracle(&x.values, 0, 0.9);
        let expected_names: Vec<String> =
            expected.iter().map(|&j| x.variable_names[j].clone()).collect();
        assert_eq!(pruned.variable_names, expected_names, "trial {trial}");

        // catalog partitions the input set
        assert_eq!(catalog.retained.len() + catalog.dropped.len(), p);
        assert!(catalog.retained.iter().any(|(name, _)| name == "s"));

        // the pairwise bound holds in the output, checked from scratch
        let corr = correlation(&pruned.values);
        for a in 0..pruned.ncols() {
            for b in (a + 1)..pruned.ncols() {
                assert!(corr[(a, b)].abs() <= 0.9);
            }
        }
    }
}

#[test]
fn exact_duplicates_drop_the_later_column() {
    let base = lcg_cells(77, 30);
    let mut cells = Vec::new();
    for i in 0..10 {
        let a = base[i * 3];
        let b = base[i * 3 + 1];
        let s = 1.0 + base[i * 3 + 2].abs();
        // v_dup (column 2) duplicates v_a (column 1) bitwise
        cells.extend_from_slice(&[s, a, a, b]);
    }
    let x = standardized(&["s", "v_a", "v_dup", "v_b"], "s", &cells);
    let (pruned, catalog) = prune_correlated(&x, 0.95).unwrap();
    assert_eq!(pruned.variable_names, vec!["s", "v_a", "v_b"]);
    assert_eq!(
        catalog.dropped,
        vec![("v_dup".to_string(), DropReason::DuplicateOf("v_a".to_string()))]
    );
    // the duplicate pair correlates exactly 1, so the importance tie was exact
    let corr = correlation(&x.values);
    assert_eq!(corr[(1, 2)].to_bits(), 1.0f64.to_bits());
    assert_eq!(importance(&corr, 1).to_bits(), importance(&corr, 2).to_bits());
}

#[test]
fn scale_column_survives_even_when_most_correlated() {
    // v1 = 2 * s exactly: conflicts with the scale column and must lose
    let mut cells = Vec::new();
    let noise = lcg_cells(5, 20);
    for i in 0..10 {
        let s = 1.0 + i as f64;
        cells.extend_from_slice(&[s, 2.0 * s, noise[i * 2], noise[i * 2 + 1]]);
    }
    let x = standardized(&["s", "v1", "v2", "v3"], "s", &cells);
    let (pruned, catalog) = prune_correlated(&x, 0.9).unwrap();
    assert!(pruned.column("s").is_some());
    assert!(pruned.column("v1").is_none());
    assert_eq!(
        catalog.dropped,
        vec![("v1".to_string(), DropReason::DuplicateOf("s".to_string()))]
    );
}

// Winsorization oracle: sort, read the type-7 quantiles directly, clamp.
fn winsorize_oracle(column: &[f64], level: f64) -> Vec<f64> {
    let mut sorted = column.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = |q: f64| {
        let h = (sorted.len() - 1) as f64 * q;
        let lo = h.floor() as usize;
        let hi = h.ceil() as usize;
        sorted[lo] + (h - h.floor()) * (sorted[hi] - sorted[lo])
    };
    let (lo, hi) = (q(level), q(1.0 - level));
    column.iter().map(|&v| v.clamp(lo, hi)).collect()
}

#[test]
fn winsorize_matches_reference() {
    let col = lcg_cells(42, 101);
    for level in [0.01, 0.05, 0.1, 0.25] {
        assert_eq!(winsorize(&col, level).unwrap(), winsorize_oracle(&col, level));
    }
}

proptest! {
    #[test]
    fn winsorize_clamps_monotonically(
        col in prop::collection::vec(-1e6f64..1e6, 2..60),
        level in 0.0f64..0.49,
    ) {
        let out = winsorize(&col, level).unwrap();
        let oracle = winsorize_oracle(&col, level);
        let (lo, hi) = (
            oracle.iter().cloned().fold(f64::INFINITY, f64::min),
            oracle.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        );
        for (i, v) in out.iter().enumerate() {
            // inside the band of the original sample's quantiles
            prop_assert!(*v >= lo && *v <= hi);
            // untouched when strictly inside the band
            if col[i] > lo && col[i] < hi {
                prop_assert_eq!(*v, col[i]);
            }
        }
        // order preserving
        for i in 0..col.len() {
            for j in (i + 1)..col.len() {
                if col[i] <= col[j] {
                    prop_assert!(out[i] <= out[j]);
                }
            }
        }
    }

    #[test]
    fn pruned_pairs_never_exceed_threshold(
        seed in 0u64..500,
        threshold in 0.3f64..0.99,
    ) {
        let n = 20;
        let p = 5;
        let cells = lcg_cells(seed, n * p);
        let x = standardized(&["s", "a", "b", "c", "d"], "s", &cells);
        let (pruned, catalog) = prune_correlated(&x, threshold).unwrap();
        prop_assert!(pruned.column("s").is_some());
        prop_assert_eq!(catalog.retained.len() + catalog.dropped.len(), p);
        let corr = correlation(&pruned.values);
        for a in 0..pruned.ncols() {
            for b in (a + 1)..pruned.ncols() {
                prop_assert!(corr[(a, b)].abs() <= threshold);
            }
        }
    }
}
