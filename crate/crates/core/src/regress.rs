//! Cluster-robust regression toolkit: pooled OLS, country fixed effects,
//! just-identified 2SLS with a cluster-share instrument, backward stepwise
//! screening, and variance inflation factors.
//!
//! All inference is clustered: the sandwich covariance sums score outer
//! products per group, by default with the small-sample factor
//! `G/(G-1) * (n-1)/(n-K)`, and t statistics use `G - 1` degrees of freedom.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Small-sample treatment of the sandwich covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SmallSample {
    /// No correction.
    CR0,
    /// `G/(G-1) * (n-1)/(n-K)`.
    #[default]
    CR1,
}

/// Inference controls shared by all fitters.
#[derive(Debug, Clone)]
pub struct InferenceOptions {
    pub small_sample: SmallSample,
    /// First-stage F below this logs a weak-instrument warning.
    pub weak_f_threshold: f64,
}

impl Default for InferenceOptions {
    fn default() -> Self {
        InferenceOptions { small_sample: SmallSample::CR1, weak_f_threshold: 10.0 }
    }
}

/// One estimated coefficient.
#[derive(Debug, Clone)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub t_value: f64,
    pub p_value: f64,
    pub stars: &'static str,
}

/// A fitted linear model with clustered standard errors.
#[derive(Debug, Clone)]
pub struct LinearFit {
    pub coefficients: Vec<Coefficient>,
    pub covariance: DMatrix<f64>,
    pub residuals: DVector<f64>,
    pub r_squared: f64,
    pub n: usize,
    /// Parameters charged against the degrees of freedom.
    pub k: usize,
    pub groups: usize,
}

impl LinearFit {
    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }

    pub fn estimates(&self) -> Vec<f64> {
        self.coefficients.iter().map(|c| c.estimate).collect()
    }
}

/// A fixed-effects fit: inference from the within transformation, with the
/// dummy-expansion cross-check.
#[derive(Debug, Clone)]
pub struct FixedEffectsFit {
    /// The within (demeaned) fit carrying the slope inference.
    pub within: LinearFit,
    /// Slopes from the explicit dummy regression, in the same order.
    pub lsdv_estimates: Vec<f64>,
    /// Largest absolute slope gap between the two routes.
    pub slope_gap: f64,
    /// R-squared of the dummy regression (levels, not demeaned).
    pub lsdv_r_squared: f64,
    /// Columns dropped because they never vary within a country.
    pub dropped: Vec<String>,
}

/// A just-identified 2SLS fit.
#[derive(Debug, Clone)]
pub struct IvFit {
    pub coefficients: Vec<Coefficient>,
    pub covariance: DMatrix<f64>,
    /// Residuals against the original (not instrumented) regressors.
    pub residuals: DVector<f64>,
    pub n: usize,
    pub k: usize,
    pub groups: usize,
    /// Clustered first-stage F per instrumented column.
    pub first_stage_f: Vec<(String, f64)>,
    /// Whether any first stage fell under the weak-instrument threshold.
    pub weak_instrument: bool,
}

/// Conventional significance stars: `***` under 1%, `**` under 5%, `*`
/// under 10%.
pub fn significance_stars(p_value: f64) -> &'static str {
    if p_value < 0.01 {
        "***"
    } else if p_value < 0.05 {
        "**"
    } else if p_value < 0.10 {
        "*"
    } else {
        ""
    }
}

fn dense_groups(groups: &[usize]) -> (Vec<usize>, usize) {
    let mut map = HashMap::new();
    let mut dense = Vec::with_capacity(groups.len());
    for &g in groups {
        let next = map.len();
        dense.push(*map.entry(g).or_insert(next));
    }
    (dense, map.len())
}

/// Flags columns that are (numerically exact) linear combinations of earlier
/// columns. Earlier columns win; the names of the dependent ones come back
/// in the error.
fn check_full_rank(x: &DMatrix<f64>, names: &[String]) -> Result<()> {
    let n = x.nrows();
    let mut kept: Vec<usize> = Vec::new();
    let mut dependent: Vec<String> = Vec::new();
    for j in 0..x.ncols() {
        let mut cols = kept.clone();
        cols.push(j);
        let sub = DMatrix::from_fn(n, cols.len(), |i, idx| x[(i, cols[idx])]);
        let qr = sub.qr();
        let r = qr.r();
        let mut max_diag = 0.0f64;
        let mut min_diag = f64::INFINITY;
        for d in 0..r.nrows().min(r.ncols()) {
            let v = r[(d, d)].abs();
            max_diag = max_diag.max(v);
            min_diag = min_diag.min(v);
        }
        if cols.len() > n || min_diag <= max_diag * 1e-10 {
            dependent.push(names[j].clone());
        } else {
            kept.push(j);
        }
    }
    if dependent.is_empty() {
        Ok(())
    } else {
        Err(Error::RankDeficient(dependent))
    }
}

/// Least squares via thin QR. Requires full column rank (checked upstream).
fn qr_solve(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let qr = x.clone().qr();
    let qty = qr.q().transpose() * y;
    qr.r()
        .solve_upper_triangular(&qty)
        .expect("full-rank design must yield a solvable triangular system")
}

struct CoreFit {
    beta: DVector<f64>,
    covariance: DMatrix<f64>,
    residuals: DVector<f64>,
    groups: usize,
}

/// OLS point estimates with the clustered sandwich covariance.
///
/// `k_dof` is the parameter count charged in the CR1 factor, which the
/// within transformation inflates past the visible column count.
fn cluster_core(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    groups: &[usize],
    k_dof: usize,
    opts: &InferenceOptions,
) -> Result<CoreFit> {
    let n = x.nrows();
    let k = x.ncols();
    let (dense, g) = dense_groups(groups);
    if g < 2 {
        return Err(Error::Data("clustered inference needs at least 2 groups".into()));
    }
    if n <= k_dof {
        return Err(Error::Data(format!(
            "{n} observations cannot support {k_dof} parameters"
        )));
    }

    let beta = qr_solve(x, y);
    let residuals = y - x * &beta;

    let xtx = x.transpose() * x;
    let bread = xtx
        .cholesky()
        .ok_or_else(|| Error::Degenerate("normal equations are numerically singular".into()))?
        .inverse();

    // Meat: sum over groups of (X_g' u_g)(X_g' u_g)'.
    let mut scores = DMatrix::zeros(g, k);
    for i in 0..n {
        for j in 0..k {
            scores[(dense[i], j)] += x[(i, j)] * residuals[i];
        }
    }
    let meat = scores.transpose() * &scores;

    let scale = match opts.small_sample {
        SmallSample::CR0 => 1.0,
        SmallSample::CR1 => {
            (g as f64 / (g as f64 - 1.0)) * ((n as f64 - 1.0) / (n as f64 - k_dof as f64))
        }
    };
    let covariance = (&bread * meat * &bread) * scale;
    Ok(CoreFit { beta, covariance, residuals, groups: g })
}

fn coefficients_from(
    names: &[String],
    beta: &DVector<f64>,
    covariance: &DMatrix<f64>,
    groups: usize,
) -> Vec<Coefficient> {
    let df = (groups - 1) as f64;
    let t_dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let estimate = beta[j];
            let std_error = covariance[(j, j)].max(0.0).sqrt();
            let t_value = if std_error > 0.0 { estimate / std_error } else { f64::NAN };
            let p_value = if t_value.is_finite() {
                2.0 * (1.0 - t_dist.cdf(t_value.abs()))
            } else {
                f64::NAN
            };
            Coefficient { name: name.clone(), estimate, std_error, t_value, p_value, stars: significance_stars(p_value) }
        })
        .collect()
}

fn centered_r_squared(y: &DVector<f64>, residuals: &DVector<f64>) -> f64 {
    let mean = y.mean();
    let sst: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    if sst == 0.0 {
        return f64::NAN;
    }
    let ssr: f64 = residuals.iter().map(|r| r * r).sum();
    1.0 - ssr / sst
}

fn validate_design(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    names: &[String],
    groups: &[usize],
) -> Result<()> {
    let n = y.len();
    if x.nrows() != n || groups.len() != n {
        return Err(Error::Shape(format!(
            "outcome has {n} rows, regressors {}, groups {}",
            x.nrows(),
            groups.len()
        )));
    }
    if names.len() != x.ncols() {
        return Err(Error::Shape(format!(
            "{} regressor names for {} columns",
            names.len(),
            x.ncols()
        )));
    }
    if x.ncols() == 0 {
        return Err(Error::Data("no regressors".into()));
    }
    if y.iter().any(|v| !v.is_finite()) || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("design contains non-finite values".into()));
    }
    Ok(())
}

/// Pooled OLS with clustered standard errors. The caller supplies the
/// intercept column explicitly if one is wanted.
pub fn fit_ols(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    names: &[String],
    groups: &[usize],
    opts: &InferenceOptions,
) -> Result<LinearFit> {
    validate_design(y, x, names, groups)?;
    check_full_rank(x, names)?;
    let core = cluster_core(y, x, groups, x.ncols(), opts)?;
    let coefficients = coefficients_from(names, &core.beta, &core.covariance, core.groups);
    Ok(LinearFit {
        coefficients,
        covariance: core.covariance,
        r_squared: centered_r_squared(y, &core.residuals),
        residuals: core.residuals,
        n: y.len(),
        k: x.ncols(),
        groups: core.groups,
    })
}

/// Country fixed effects via the within transformation, cross-checked
/// against the explicit dummy regression.
///
/// Columns with no within-group variation (country-level regressors) are
/// collinear with the fixed effects; they are dropped with a warning and
/// reported in `dropped`. Groups with a single row contribute nothing after
/// demeaning and draw a warning too. The CR1 correction charges
/// `slopes + G` parameters.
pub fn fit_fe(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    names: &[String],
    groups: &[usize],
    opts: &InferenceOptions,
) -> Result<FixedEffectsFit> {
    validate_design(y, x, names, groups)?;
    let n = y.len();
    let (dense, g) = dense_groups(groups);
    if g < 2 {
        return Err(Error::Data("fixed effects need at least 2 groups".into()));
    }

    let mut counts = vec![0usize; g];
    for &d in &dense {
        counts[d] += 1;
    }
    let singletons = counts.iter().filter(|&&c| c == 1).count();
    if singletons > 0 {
        log::warn!("{singletons} group(s) have a single row; they drop out of the within fit");
    }

    // Group means per column, then the within split of each regressor.
    let mut keep = Vec::new();
    let mut dropped = Vec::new();
    for j in 0..x.ncols() {
        let mut sums = vec![0.0f64; g];
        for i in 0..n {
            sums[dense[i]] += x[(i, j)];
        }
        let varies_within = (0..n).any(|i| {
            let mean = sums[dense[i]] / counts[dense[i]] as f64;
            (x[(i, j)] - mean).abs() > 1e-12 * (1.0 + x[(i, j)].abs())
        });
        if varies_within {
            keep.push(j);
        } else {
            dropped.push(names[j].clone());
        }
    }
    if !dropped.is_empty() {
        log::warn!(
            "dropping {} column(s) with no within-group variation: {}",
            dropped.len(),
            dropped.join(", ")
        );
    }
    if keep.is_empty() {
        return Err(Error::Data("no regressor varies within groups".into()));
    }
    let kept_names: Vec<String> = keep.iter().map(|&j| names[j].clone()).collect();
    let k_slopes = keep.len();

    let demean = |v: &DVector<f64>| {
        let mut sums = vec![0.0f64; g];
        for i in 0..n {
            sums[dense[i]] += v[i];
        }
        DVector::from_fn(n, |i, _| v[i] - sums[dense[i]] / counts[dense[i]] as f64)
    };
    let y_within = demean(y);
    let mut x_within = DMatrix::zeros(n, k_slopes);
    for (col, &j) in keep.iter().enumerate() {
        let demeaned = demean(&DVector::from_fn(n, |i, _| x[(i, j)]));
        x_within.set_column(col, &demeaned);
    }
    check_full_rank(&x_within, &kept_names)?;

    let k_dof = k_slopes + g;
    let core = cluster_core(&y_within, &x_within, groups, k_dof, opts)?;
    let coefficients = coefficients_from(&kept_names, &core.beta, &core.covariance, core.groups);
    let within_r2 = {
        let sst: f64 = y_within.iter().map(|v| v * v).sum();
        if sst == 0.0 { f64::NAN } else { 1.0 - core.residuals.iter().map(|r| r * r).sum::<f64>() / sst }
    };
    let within = LinearFit {
        coefficients,
        covariance: core.covariance,
        r_squared: within_r2,
        residuals: core.residuals,
        n,
        k: k_dof,
        groups: core.groups,
    };

    // Dummy expansion: the same slopes must come out, up to rounding.
    let mut x_full = DMatrix::zeros(n, k_slopes + g);
    for (col, &j) in keep.iter().enumerate() {
        for i in 0..n {
            x_full[(i, col)] = x[(i, j)];
        }
    }
    for i in 0..n {
        x_full[(i, k_slopes + dense[i])] = 1.0;
    }
    let beta_full = qr_solve(&x_full, y);
    let lsdv_estimates: Vec<f64> = (0..k_slopes).map(|j| beta_full[j]).collect();
    let lsdv_residuals = y - &x_full * &beta_full;
    let lsdv_r_squared = centered_r_squared(y, &lsdv_residuals);

    let slope_gap = within
        .coefficients
        .iter()
        .zip(&lsdv_estimates)
        .map(|(c, &b)| (c.estimate - b).abs())
        .fold(0.0f64, f64::max);

    Ok(FixedEffectsFit { within, lsdv_estimates, slope_gap, lsdv_r_squared, dropped })
}

/// The cluster-share instrument: for each row, the fraction of the active
/// (non-flagged) rows of its country that sit in `target_cluster`. Countries
/// with no active rows get zero, with a warning.
pub fn share_instrument(
    labels: &[usize],
    outlier_mask: &[bool],
    countries: &[usize],
    target_cluster: usize,
) -> Vec<f64> {
    assert_eq!(labels.len(), outlier_mask.len());
    assert_eq!(labels.len(), countries.len());
    let (dense, g) = dense_groups(countries);
    let mut active = vec![0usize; g];
    let mut hits = vec![0usize; g];
    for i in 0..labels.len() {
        if !outlier_mask[i] {
            active[dense[i]] += 1;
            if labels[i] == target_cluster {
                hits[dense[i]] += 1;
            }
        }
    }
    if active.iter().any(|&a| a == 0) {
        log::warn!("some countries have no active rows; their share is set to 0");
    }
    (0..labels.len())
        .map(|i| {
            let d = dense[i];
            if active[d] == 0 { 0.0 } else { hits[d] as f64 / active[d] as f64 }
        })
        .collect()
}

/// Just-identified 2SLS.
///
/// `w` holds the structural regressors, `z` the instrument matrix of the
/// same shape: exogenous columns instrument themselves, each endogenous
/// column (listed in `endogenous`) is replaced by its excluded instrument.
/// The estimate is `(Z'W)^{-1} Z'y`; residuals use the original regressors.
/// Each endogenous column gets a clustered first-stage F (the squared t of
/// its instrument in the regression of the column on all of `z`); any F
/// under the threshold logs a warning and sets `weak_instrument`.
pub fn fit_iv(
    y: &DVector<f64>,
    w: &DMatrix<f64>,
    names: &[String],
    z: &DMatrix<f64>,
    endogenous: &[usize],
    groups: &[usize],
    opts: &InferenceOptions,
) -> Result<IvFit> {
    validate_design(y, w, names, groups)?;
    if z.shape() != w.shape() {
        return Err(Error::Shape(format!(
            "instrument matrix is {:?} but regressors are {:?}",
            z.shape(),
            w.shape()
        )));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("instrument matrix contains non-finite values".into()));
    }
    for &e in endogenous {
        if e >= w.ncols() {
            return Err(Error::Config(format!("endogenous column {e} out of range")));
        }
    }
    let n = y.len();
    let k = w.ncols();
    let (dense, g) = dense_groups(groups);
    if g < 2 {
        return Err(Error::Data("clustered inference needs at least 2 groups".into()));
    }
    if n <= k {
        return Err(Error::Data(format!("{n} observations cannot support {k} parameters")));
    }

    let ztw = z.transpose() * w;
    let bread = ztw
        .clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("Z'W is singular; instruments do not identify".into()))?;
    let theta = &bread * (z.transpose() * y);
    let residuals = y - w * &theta;

    let mut scores = DMatrix::zeros(g, k);
    for i in 0..n {
        for j in 0..k {
            scores[(dense[i], j)] += z[(i, j)] * residuals[i];
        }
    }
    let meat = scores.transpose() * &scores;
    let scale = match opts.small_sample {
        SmallSample::CR0 => 1.0,
        SmallSample::CR1 => (g as f64 / (g as f64 - 1.0)) * ((n as f64 - 1.0) / (n as f64 - k as f64)),
    };
    let covariance = (&bread * meat * bread.transpose()) * scale;
    let coefficients = coefficients_from(names, &theta, &covariance, g);

    let z_names: Vec<String> = (0..k).map(|j| format!("z{j}")).collect();
    let mut first_stage_f = Vec::new();
    let mut weak_instrument = false;
    for &e in endogenous {
        let w_e = DVector::from_fn(n, |i, _| w[(i, e)]);
        let fs = fit_ols(&w_e, z, &z_names, groups, opts)?;
        let t = fs.coefficients[e].t_value;
        let f = t * t;
        if f < opts.weak_f_threshold {
            log::warn!(
                "first-stage F = {f:.2} for column '{}' is under {}; instrument looks weak",
                names[e],
                opts.weak_f_threshold
            );
            weak_instrument = true;
        }
        first_stage_f.push((names[e].clone(), f));
    }

    Ok(IvFit { coefficients, covariance, residuals, n, k, groups: g, first_stage_f, weak_instrument })
}

/// What happened to one term during stepwise screening.
#[derive(Debug, Clone, PartialEq)]
pub enum StepAction {
    Removed,
    Restored,
    Frozen,
}

/// One stepwise event.
#[derive(Debug, Clone)]
pub struct StepEvent {
    pub term: String,
    pub action: StepAction,
    pub p_value: f64,
}

/// Backward stepwise screening result.
#[derive(Debug)]
pub struct StepwiseFit {
    /// Column indices of the final model, in original order.
    pub kept: Vec<usize>,
    pub fit: LinearFit,
    pub history: Vec<StepEvent>,
    /// Terms locked out after oscillating.
    pub frozen: Vec<String>,
}

/// Backward stepwise screening with re-entry.
///
/// Each outer pass drops the single worst term with p above `p_remove`
/// (ties on the earlier column), then lets previously dropped terms with p
/// under `p_add` re-enter one at a time, best first. A term restored or
/// removed three times is oscillating: it is frozen out of the model for
/// good, with a warning. `protected` columns (the intercept) are never
/// dropped.
pub fn stepwise_backward(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    names: &[String],
    groups: &[usize],
    protected: &[usize],
    p_remove: f64,
    p_add: f64,
    opts: &InferenceOptions,
) -> Result<StepwiseFit> {
    validate_design(y, x, names, groups)?;
    if !(0.0..=1.0).contains(&p_remove) || !(0.0..=1.0).contains(&p_add) {
        return Err(Error::Config("stepwise p thresholds must lie in [0, 1]".into()));
    }

    let k = x.ncols();
    let mut included: Vec<usize> = (0..k).collect();
    let mut excluded: Vec<usize> = Vec::new();
    let mut frozen: Vec<usize> = Vec::new();
    let mut removals = vec![0usize; k];
    let mut restores = vec![0usize; k];
    let mut history = Vec::new();

    let subfit = |cols: &[usize]| -> Result<LinearFit> {
        let sub = DMatrix::from_fn(x.nrows(), cols.len(), |i, idx| x[(i, cols[idx])]);
        let sub_names: Vec<String> = cols.iter().map(|&j| names[j].clone()).collect();
        fit_ols(y, &sub, &sub_names, groups, opts)
    };

    let freeze = |j: usize,
                  frozen: &mut Vec<usize>,
                  history: &mut Vec<StepEvent>| {
        frozen.push(j);
        history.push(StepEvent { term: names[j].clone(), action: StepAction::Frozen, p_value: f64::NAN });
        log::warn!("term '{}' kept oscillating and was frozen out of the model", names[j]);
    };

    loop {
        let fit = subfit(&included)?;

        // Worst removable term this pass.
        let mut worst: Option<(f64, usize)> = None;
        for (pos, &j) in included.iter().enumerate() {
            if protected.contains(&j) {
                continue;
            }
            let p = fit.coefficients[pos].p_value;
            if p.is_nan() || p <= p_remove {
                continue;
            }
            let take = match worst {
                None => true,
                Some((wp, _)) => p > wp,
            };
            if take {
                worst = Some((p, j));
            }
        }
        let Some((p, j)) = worst else { break };

        included.retain(|&c| c != j);
        removals[j] += 1;
        history.push(StepEvent { term: names[j].clone(), action: StepAction::Removed, p_value: p });
        if removals[j] >= 3 {
            freeze(j, &mut frozen, &mut history);
        } else {
            excluded.push(j);
        }

        // Re-entry: repeatedly admit the best excluded term under p_add.
        loop {
            let mut best: Option<(f64, usize)> = None;
            for &cand in &excluded {
                if frozen.contains(&cand) {
                    continue;
                }
                let mut cols = included.clone();
                cols.push(cand);
                cols.sort_unstable();
                let trial = subfit(&cols)?;
                let pos = cols.iter().position(|&c| c == cand).unwrap();
                let p = trial.coefficients[pos].p_value;
                if p.is_nan() || p >= p_add {
                    continue;
                }
                let take = match best {
                    None => true,
                    Some((bp, _)) => p < bp,
                };
                if take {
                    best = Some((p, cand));
                }
            }
            let Some((p, cand)) = best else { break };
            excluded.retain(|&c| c != cand);
            included.push(cand);
            included.sort_unstable();
            restores[cand] += 1;
            history.push(StepEvent { term: names[cand].clone(), action: StepAction::Restored, p_value: p });
            if restores[cand] >= 3 {
                included.retain(|&c| c != cand);
                freeze(cand, &mut frozen, &mut history);
            }
        }
    }

    let fit = subfit(&included)?;
    let frozen_names = frozen.iter().map(|&j| names[j].clone()).collect();
    Ok(StepwiseFit { kept: included, fit, history, frozen: frozen_names })
}

/// Variance inflation factors: column `j` regressed on all other columns,
/// `VIF_j = 1 / (1 - R^2_j)`. Perfect collinearity yields infinity. The
/// caller includes the intercept column as a regressor and disregards the
/// entry computed for the intercept itself.
pub fn vif(x: &DMatrix<f64>) -> Vec<f64> {
    let n = x.nrows();
    let k = x.ncols();
    assert!(k >= 2, "variance inflation needs at least 2 columns");
    (0..k)
        .map(|j| {
            let target = DVector::from_fn(n, |i, _| x[(i, j)]);
            let others = DMatrix::from_fn(n, k - 1, |i, idx| {
                let col = if idx < j { idx } else { idx + 1 };
                x[(i, col)]
            });
            let mean = target.mean();
            let sst: f64 = target.iter().map(|v| (v - mean) * (v - mean)).sum();
            if sst == 0.0 {
                return f64::INFINITY;
            }
            // Least squares through the SVD: tolerant of collinear "others",
            // which happens under perfect collinearity among regressors.
            let svd = others.clone().svd(true, true);
            let coef = svd.solve(&target, 1e-12).expect("svd solve is infallible with both factors");
            let resid = &target - others * coef;
            let ssr: f64 = resid.iter().map(|r| r * r).sum();
            let r2 = 1.0 - ssr / sst;
            if r2 >= 1.0 {
                f64::INFINITY
            } else {
                1.0 / (1.0 - r2)
            }
        })
        .collect()
}
