//! Agreement metrics used by the validation suites.

/// Adjusted Rand index between two labelings of the same items.
///
/// Returns 1.0 for identical partitions (including the degenerate case where
/// both sides put everything in one cluster), 0.0 expected under independent
/// random labelings. Labels are opaque; only co-membership matters.
///
/// # Panics
/// If the slices differ in length or are empty.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings must align");
    assert!(!a.is_empty(), "labelings must be non-empty");
    let ka = a.iter().max().unwrap() + 1;
    let kb = b.iter().max().unwrap() + 1;
    let mut table = vec![vec![0u64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let choose2 = |m: u64| -> f64 { (m * m.saturating_sub(1)) as f64 / 2.0 };
    let mut sum_cells = 0.0;
    let mut row_tot = vec![0u64; ka];
    let mut col_tot = vec![0u64; kb];
    for (i, row) in table.iter().enumerate() {
        for (j, &cell) in row.iter().enumerate() {
            sum_cells += choose2(cell);
            row_tot[i] += cell;
            col_tot[j] += cell;
        }
    }
    let sum_rows: f64 = row_tot.iter().map(|&m| choose2(m)).sum();
    let sum_cols: f64 = col_tot.iter().map(|&m| choose2(m)).sum();
    let total = choose2(a.len() as u64);
    let expected = sum_rows * sum_cols / total;
    let max_index = 0.5 * (sum_rows + sum_cols);
    if (max_index - expected).abs() < 1e-12 {
        // both partitions trivial; identical tables score 1
        return if sum_cells == sum_rows && sum_cells == sum_cols { 1.0 } else { 0.0 };
    }
    (sum_cells - expected) / (max_index - expected)
}

/// Fraction of true positives recovered: |pred AND truth| / |truth|.
///
/// Returns 1.0 when `truth` has no positives.
pub fn recall(truth: &[bool], pred: &[bool]) -> f64 {
    assert_eq!(truth.len(), pred.len(), "flag vectors must align");
    let positives = truth.iter().filter(|&&t| t).count();
    if positives == 0 {
        return 1.0;
    }
    let hit = truth.iter().zip(pred).filter(|&(&t, &p)| t && p).count();
    hit as f64 / positives as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ari_identical_is_one() {
        let l = [0usize, 0, 1, 1, 2, 2];
        assert_abs_diff_eq!(adjusted_rand_index(&l, &l), 1.0);
    }

    #[test]
    fn ari_is_label_invariant() {
        let a = [0usize, 0, 1, 1, 2, 2];
        let b = [2usize, 2, 0, 0, 1, 1];
        assert_abs_diff_eq!(adjusted_rand_index(&a, &b), 1.0);
    }

    #[test]
    fn ari_disagreement_is_low() {
        let a = [0usize, 0, 0, 1, 1, 1];
        let b = [0usize, 1, 0, 1, 0, 1];
        assert!(adjusted_rand_index(&a, &b) < 0.2);
    }

    #[test]
    fn ari_trivial_partitions() {
        let a = [0usize; 5];
        assert_abs_diff_eq!(adjusted_rand_index(&a, &a), 1.0);
    }

    #[test]
    fn recall_counts_hits() {
        let truth = [true, true, false, true, false];
        let pred = [true, false, true, true, false];
        assert_abs_diff_eq!(recall(&truth, &pred), 2.0 / 3.0);
    }

    #[test]
    fn recall_empty_truth_is_one() {
        assert_abs_diff_eq!(recall(&[false, false], &[true, false]), 1.0);
    }
}
