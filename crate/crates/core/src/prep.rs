//! Data preparation.
//!
//! The clustering input is a matrix of balance-sheet style quantities that
//! only become comparable across entities after dividing by a size proxy (the
//! scale column). This module handles that standardization plus the three
//! cleanup passes applied before any model fitting:
//!
//! 1. columns populated in too few rows are dropped (sparsity floor);
//! 2. remaining missing cells are imputed as zero, an absent line item being
//!    read as a position that is not held (a row-dropping policy is available
//!    instead);
//! 3. near-duplicate columns are pruned greedily by an importance score so
//!    that no retained pair correlates beyond a threshold.
//!
//! Winsorization lives here too since it shares the quantile convention.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::quantile_sorted;

/// A parsed delimited file before any cleaning. Missing cells are encoded as
/// NaN in `values` and listed in `missing`.
#[derive(Debug, Clone)]
pub struct RawMatrix {
    pub entity_ids: Vec<String>,
    pub variable_names: Vec<String>,
    pub values: DMatrix<f64>,
    /// (row, column) positions that were blank in the input.
    pub missing: Vec<(usize, usize)>,
}

/// Fully populated matrix after ratio standardization.
///
/// Every column except the scale column holds value / scale per row; the scale
/// column itself is normalized by its sample maximum, so its largest entry is
/// exactly 1. Ratios above 1 are legitimate (notional amounts can exceed the
/// scale variable).
#[derive(Debug, Clone)]
pub struct StandardizedMatrix {
    pub entity_ids: Vec<String>,
    pub variable_names: Vec<String>,
    pub values: DMatrix<f64>,
    pub scale_column_name: String,
}

impl StandardizedMatrix {
    /// Index of a variable by name.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.variable_names.iter().position(|v| v == name)
    }

    /// Number of rows.
    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    /// Number of variables.
    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }
}

/// Why a variable was removed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DropReason {
    /// Populated in fewer than the floor fraction of rows.
    Sparse,
    /// Correlated beyond the threshold with the named retained variable.
    DuplicateOf(String),
}

/// Bookkeeping of retained and dropped variables.
///
/// `retained` and `dropped` partition the variable set of the matrix the
/// producing operation received. Importance scores are filled in by
/// [`prune_correlated`]; stages that run before it leave them as `None`.
#[derive(Debug, Clone)]
pub struct VariableCatalog {
    pub retained: Vec<(String, Option<f64>)>,
    pub dropped: Vec<(String, DropReason)>,
    pub threshold: f64,
}

/// What to do with cells that are still missing after standardization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MissingPolicy {
    /// Treat an absent item as a zero position (default).
    #[default]
    ImputeZero,
    /// Drop any row that still has a missing cell.
    DropRows,
}

/// Reads a comma-separated file with a header row into a [`RawMatrix`].
///
/// `id_column` names the column of entity identifiers; every other column
/// must parse as a number. Blank cells and the literal `NA` are recorded as
/// missing. Duplicate ids, duplicate variable names, non-numeric cells and
/// files with fewer than two rows are rejected.
pub fn load_matrix(path: impl AsRef<Path>, id_column: &str) -> Result<RawMatrix> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;

    let headers = reader
        .headers()
        .map_err(|e| Error::Data(format!("malformed header in {}: {e}", path.display())))?
        .clone();
    let id_pos = headers
        .iter()
        .position(|h| h == id_column)
        .ok_or_else(|| Error::Data(format!("id column {id_column:?} not found")))?;

    let mut variable_names = Vec::new();
    let mut seen = HashSet::new();
    for (i, name) in headers.iter().enumerate() {
        if i == id_pos {
            continue;
        }
        if !seen.insert(name.to_string()) {
            return Err(Error::Data(format!("duplicate variable name {name:?}")));
        }
        variable_names.push(name.to_string());
    }
    if variable_names.is_empty() {
        return Err(Error::Data("no variable columns besides the id".into()));
    }

    let mut entity_ids = Vec::new();
    let mut ids_seen = HashSet::new();
    let mut cells: Vec<f64> = Vec::new();
    let mut missing = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record =
            record.map_err(|e| Error::Data(format!("malformed record {}: {e}", row_idx + 2)))?;
        if record.len() != headers.len() {
            return Err(Error::Data(format!(
                "row {} has {} fields, expected {}",
                row_idx + 2,
                record.len(),
                headers.len()
            )));
        }
        let id = record[id_pos].to_string();
        if !ids_seen.insert(id.clone()) {
            return Err(Error::Data(format!("duplicate id {id:?}")));
        }
        entity_ids.push(id);
        let mut col = 0usize;
        for (field_idx, field) in record.iter().enumerate() {
            if field_idx == id_pos {
                continue;
            }
            if field.is_empty() || field == "NA" {
                missing.push((row_idx, col));
                cells.push(f64::NAN);
            } else {
                let v: f64 = field.parse().map_err(|_| {
                    Error::Data(format!(
                        "non-numeric cell {:?} at row {}, column {:?}",
                        field,
                        row_idx + 2,
                        variable_names[col]
                    ))
                })?;
                cells.push(v);
            }
            col += 1;
        }
    }
    let n = entity_ids.len();
    if n < 2 {
        return Err(Error::Data(format!("need at least 2 rows, found {n}")));
    }
    let p = variable_names.len();
    let values = DMatrix::from_row_iterator(n, p, cells);
    Ok(RawMatrix { entity_ids, variable_names, values, missing })
}

/// Ratio standardization with the zero-imputation default; see
/// [`standardize_with`].
pub fn standardize(
    raw: &RawMatrix,
    scale_column: &str,
    sparsity_floor: f64,
) -> Result<(StandardizedMatrix, VariableCatalog)> {
    standardize_with(raw, scale_column, sparsity_floor, MissingPolicy::ImputeZero)
}

/// Divides every column by the scale column row-wise, normalizes the scale
/// column by its sample maximum, drops columns populated (non-missing and
/// non-zero) in fewer than `sparsity_floor` of rows, then resolves remaining
/// missing cells per `policy`.
///
/// Rows whose scale value is missing are dropped and logged; a non-positive
/// scale value is an error. The returned catalog lists the sparse-dropped
/// variables; importance scores are not populated at this stage.
pub fn standardize_with(
    raw: &RawMatrix,
    scale_column: &str,
    sparsity_floor: f64,
    policy: MissingPolicy,
) -> Result<(StandardizedMatrix, VariableCatalog)> {
    if !(0.0..=1.0).contains(&sparsity_floor) {
        return Err(Error::Config(format!(
            "sparsity floor must lie in [0, 1], got {sparsity_floor}"
        )));
    }
    let scale_idx = raw
        .variable_names
        .iter()
        .position(|v| v == scale_column)
        .ok_or_else(|| Error::Data(format!("scale column {scale_column:?} not found")))?;

    // Reject non-positive scales, set aside rows with no scale value.
    let mut keep_rows = Vec::new();
    let mut dropped_rows = Vec::new();
    for i in 0..raw.values.nrows() {
        let s = raw.values[(i, scale_idx)];
        if s.is_nan() {
            dropped_rows.push(raw.entity_ids[i].clone());
            continue;
        }
        if s <= 0.0 {
            return Err(Error::Data(format!(
                "scale value {s} for id {:?} is not strictly positive",
                raw.entity_ids[i]
            )));
        }
        keep_rows.push(i);
    }
    if !dropped_rows.is_empty() {
        log::warn!(
            "dropping {} rows with missing scale values: {:?}",
            dropped_rows.len(),
            dropped_rows
        );
    }
    if keep_rows.len() < 2 {
        return Err(Error::Data(format!(
            "need at least 2 rows with scale values, found {}",
            keep_rows.len()
        )));
    }

    let n = keep_rows.len();
    let p = raw.variable_names.len();
    let mut m = DMatrix::zeros(n, p);
    for (dst, &src) in keep_rows.iter().enumerate() {
        let s = raw.values[(src, scale_idx)];
        for j in 0..p {
            let v = raw.values[(src, j)];
            m[(dst, j)] = if j == scale_idx { v } else { v / s };
        }
    }

    // Normalize the scale column by its maximum; the maximal entry divides to
    // exactly 1.0.
    let scale_max = (0..n).map(|i| m[(i, scale_idx)]).fold(f64::MIN, f64::max);
    for i in 0..n {
        m[(i, scale_idx)] /= scale_max;
    }

    // Sparsity: a column must be non-missing and non-zero in at least the
    // floor fraction of rows. The ratio preserves the zero pattern, so this
    // matches the raw notion of "populated".
    let mut keep_cols = Vec::new();
    let mut dropped = Vec::new();
    for j in 0..p {
        let populated = (0..n).filter(|&i| m[(i, j)] != 0.0 && !m[(i, j)].is_nan()).count();
        if (populated as f64) < sparsity_floor * n as f64 {
            dropped.push((raw.variable_names[j].clone(), DropReason::Sparse));
        } else {
            keep_cols.push(j);
        }
    }

    let mut rows_after: Vec<usize> = (0..n).collect();
    if policy == MissingPolicy::DropRows {
        rows_after.retain(|&i| keep_cols.iter().all(|&j| !m[(i, j)].is_nan()));
        if rows_after.len() < 2 {
            return Err(Error::Data(format!(
                "need at least 2 fully populated rows, found {}",
                rows_after.len()
            )));
        }
    }

    let mut values = DMatrix::zeros(rows_after.len(), keep_cols.len());
    for (di, &si) in rows_after.iter().enumerate() {
        for (dj, &sj) in keep_cols.iter().enumerate() {
            let v = m[(si, sj)];
            values[(di, dj)] = if v.is_nan() { 0.0 } else { v };
        }
    }

    let entity_ids: Vec<String> = rows_after
        .iter()
        .map(|&i| raw.entity_ids[keep_rows[i]].clone())
        .collect();
    let variable_names: Vec<String> =
        keep_cols.iter().map(|&j| raw.variable_names[j].clone()).collect();
    let retained = variable_names.iter().map(|v| (v.clone(), None)).collect();

    Ok((
        StandardizedMatrix {
            entity_ids,
            variable_names,
            values,
            scale_column_name: scale_column.to_string(),
        },
        // Threshold 1.0 marks "no correlation pruning applied"; no pair can
        // exceed it, so the catalog invariant holds vacuously.
        VariableCatalog { retained, dropped, threshold: 1.0 },
    ))
}

/// Full-column Pearson correlation matrix of `values`.
///
/// Zero-variance columns correlate 0 with everything (diagonal stays 1), and
/// bitwise-identical columns correlate exactly 1.0 so that duplicate ties
/// resolve deterministically downstream. Off-diagonal magnitudes are clamped
/// to 1.
pub fn correlation(values: &DMatrix<f64>) -> DMatrix<f64> {
    let n = values.nrows();
    let p = values.ncols();
    assert!(n >= 2, "correlation needs at least 2 rows");
    let means: Vec<f64> = (0..p).map(|j| values.column(j).sum() / n as f64).collect();
    let sds: Vec<f64> = (0..p)
        .map(|j| {
            let mut acc = 0.0;
            for i in 0..n {
                let d = values[(i, j)] - means[j];
                acc += d * d;
            }
            (acc / (n - 1) as f64).sqrt()
        })
        .collect();

    let mut corr = DMatrix::identity(p, p);
    for j in 0..p {
        for k in (j + 1)..p {
            let c = if sds[j] == 0.0 || sds[k] == 0.0 {
                0.0
            } else if values.column(j) == values.column(k) {
                1.0
            } else {
                let mut acc = 0.0;
                for i in 0..n {
                    acc += (values[(i, j)] - means[j]) * (values[(i, k)] - means[k]);
                }
                let r = acc / (n - 1) as f64 / (sds[j] * sds[k]);
                r.clamp(-1.0, 1.0)
            };
            corr[(j, k)] = c;
            corr[(k, j)] = c;
        }
    }
    corr
}

/// Importance of variable `j`: the sum of absolute correlations with every
/// other variable, `I(j) = sum_{k != j} |corr(j, k)|`.
///
/// # Panics
/// If `corr` is not square with a unit diagonal or `j` is out of range.
pub fn importance(corr: &DMatrix<f64>, j: usize) -> f64 {
    assert_eq!(corr.nrows(), corr.ncols(), "correlation matrix must be square");
    assert!(j < corr.ncols(), "column index out of range");
    assert!((corr[(j, j)] - 1.0).abs() < 1e-12, "diagonal must be 1");
    let mut acc = 0.0;
    for k in 0..corr.ncols() {
        if k != j {
            acc += corr[(j, k)].abs();
        }
    }
    acc
}

/// Greedy importance-ordered pruning of near-duplicate variables.
///
/// Variables are visited in non-increasing importance order (ties by original
/// column index; the scale column goes first so it is always retained and
/// still participates in conflict checks). A candidate correlating beyond
/// `threshold` in absolute value with any already-retained variable is
/// dropped as a duplicate of the first such variable. For a pair of exact
/// duplicates the two importance scores tie exactly, so the earlier column
/// wins.
///
/// The returned matrix keeps the surviving columns in their original order.
pub fn prune_correlated(
    x: &StandardizedMatrix,
    threshold: f64,
) -> Result<(StandardizedMatrix, VariableCatalog)> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::Config(format!("threshold must lie in (0, 1], got {threshold}")));
    }
    let p = x.variable_names.len();
    if p < 2 {
        return Err(Error::Data(format!("pruning needs at least 2 variables, found {p}")));
    }
    let scale_idx = x
        .column(&x.scale_column_name)
        .ok_or_else(|| Error::Data(format!("scale column {:?} missing", x.scale_column_name)))?;

    let corr = correlation(&x.values);
    let scores: Vec<f64> = (0..p).map(|j| importance(&corr, j)).collect();

    let mut order: Vec<usize> = (0..p).filter(|&j| j != scale_idx).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    order.insert(0, scale_idx);

    let mut kept: Vec<usize> = Vec::new();
    let mut dropped: Vec<(String, DropReason)> = Vec::new();
    for &cand in &order {
        match kept.iter().find(|&&k| corr[(cand, k)].abs() > threshold) {
            Some(&k) => dropped.push((
                x.variable_names[cand].clone(),
                DropReason::DuplicateOf(x.variable_names[k].clone()),
            )),
            None => kept.push(cand),
        }
    }
    kept.sort_unstable();

    // Contract check: no retained pair may correlate beyond the threshold.
    for (a, &ja) in kept.iter().enumerate() {
        for &jb in kept.iter().skip(a + 1) {
            assert!(
                corr[(ja, jb)].abs() <= threshold,
                "retained pair ({}, {}) correlates {} > {}",
                x.variable_names[ja],
                x.variable_names[jb],
                corr[(ja, jb)],
                threshold
            );
        }
    }

    let mut values = DMatrix::zeros(x.values.nrows(), kept.len());
    for (dj, &sj) in kept.iter().enumerate() {
        values.set_column(dj, &x.values.column(sj));
    }
    let variable_names: Vec<String> = kept.iter().map(|&j| x.variable_names[j].clone()).collect();
    let retained: Vec<(String, Option<f64>)> =
        kept.iter().map(|&j| (x.variable_names[j].clone(), Some(scores[j]))).collect();
    dropped.sort_by(|a, b| a.0.cmp(&b.0));

    Ok((
        StandardizedMatrix {
            entity_ids: x.entity_ids.clone(),
            variable_names,
            values,
            scale_column_name: x.scale_column_name.clone(),
        },
        VariableCatalog { retained, dropped, threshold },
    ))
}

/// Clamps a column to its `[level, 1 - level]` empirical quantiles, with the
/// type-7 (linear interpolation) quantile convention.
pub fn winsorize(column: &[f64], level: f64) -> Result<Vec<f64>> {
    if column.is_empty() {
        return Err(Error::Data("cannot winsorize an empty column".into()));
    }
    if !(0.0..0.5).contains(&level) {
        return Err(Error::Config(format!("winsorize level must lie in [0, 0.5), got {level}")));
    }
    if column.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("cannot winsorize non-finite values".into()));
    }
    if level == 0.0 {
        return Ok(column.to_vec());
    }
    let mut sorted = column.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lo = quantile_sorted(&sorted, level);
    let hi = quantile_sorted(&sorted, 1.0 - level);
    Ok(column.iter().map(|&v| v.clamp(lo, hi)).collect())
}

/// Convenience used by reporting: map of variable name to final status.
pub fn catalog_status(catalog: &VariableCatalog) -> HashMap<String, String> {
    let mut out = HashMap::new();
    for (name, _) in &catalog.retained {
        out.insert(name.clone(), "retained".to_string());
    }
    for (name, reason) in &catalog.dropped {
        let status = match reason {
            DropReason::Sparse => "sparse".to_string(),
            DropReason::DuplicateOf(of) => format!("duplicate-of:{of}"),
        };
        out.insert(name.clone(), status);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn winsorize_constant_column_unchanged() {
        let col = vec![2.5; 8];
        assert_eq!(winsorize(&col, 0.1).unwrap(), col);
    }

    #[test]
    fn winsorize_level_zero_is_identity() {
        let col = vec![5.0, -1.0, 3.0];
        assert_eq!(winsorize(&col, 0.0).unwrap(), col);
    }

    #[test]
    fn importance_sums_absolute_values() {
        let corr = DMatrix::from_row_slice(
            3,
            3,
            &[1.0, 0.5, -0.5, 0.5, 1.0, 0.0, -0.5, 0.0, 1.0],
        );
        assert_eq!(importance(&corr, 0), 1.0);
        assert_eq!(importance(&corr, 1), 0.5);
    }

    #[test]
    fn correlation_flags_exact_duplicates_as_one() {
        let mut values = DMatrix::zeros(5, 2);
        for i in 0..5 {
            let v = (i as f64).sin() * 3.0 + 1.0;
            values[(i, 0)] = v;
            values[(i, 1)] = v;
        }
        let corr = correlation(&values);
        assert_eq!(corr[(0, 1)], 1.0);
    }

    #[test]
    fn correlation_zero_variance_convention() {
        let mut values = DMatrix::zeros(4, 2);
        for i in 0..4 {
            values[(i, 0)] = i as f64;
            values[(i, 1)] = 7.0;
        }
        let corr = correlation(&values);
        assert_eq!(corr[(0, 1)], 0.0);
        assert_eq!(corr[(1, 1)], 1.0);
    }
}
