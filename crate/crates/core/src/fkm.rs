//! The alternating least squares engine.
//!
//! One iteration, given the previous projection `A`, centroids `Ybar`, and
//! the previous assignment of every row:
//!
//! 1. score all rows radially in the factor space and set aside the
//!    `floor(alpha * n)` most extreme ones (see [`crate::trim`]);
//! 2. assign every row to the nearest centroid of the previous iterate;
//! 3. re-estimate `A` from the within-cluster scatter of the active rows and
//!    recompute centroids from the new scores;
//! 4. evaluate the objective over active rows. If it did not decrease, stop
//!    and keep the previous iterate; otherwise accept and continue until the
//!    relative decrease falls under `rel_tol` or `max_iters` is reached.
//!
//! The search is restarted from `K` initial projections (permuted principal
//! axes by default) and the best final objective wins. Everything is
//! deterministic given the configured seed; restarts run in parallel and tie
//! on the lowest restart index.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{gather_rows, normalize_signs, orthonormality_defect, sym_eigen_sorted};
use crate::seed::{self, domain};
use crate::trim;

/// How the multi-start initial projections are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitScheme {
    /// Row-permuted top principal axes of the covariance estimate. The
    /// permutation matrix is already orthogonal, so the orthonormalization
    /// step the construction formally calls for is a no-op.
    #[default]
    PermutedPrincipal,
    /// Orthonormalized Gaussian draws, a broader but less structured search.
    GaussianOrthogonal,
}

/// Which rows enter the covariance of the radial scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TrimCovScope {
    /// Entire sample, including currently flagged rows (default).
    #[default]
    EntireSample,
    /// Only rows that survived the previous trim.
    ActiveOnly,
}

/// Solver configuration.
///
/// Invariants checked by [`FkmConfig::validate`]: `clusters >= 2`,
/// `1 <= rank <= clusters - 1`, `alpha` in `[0, 0.5]`, positive restart and
/// iteration counts, positive tolerance.
#[derive(Debug, Clone)]
pub struct FkmConfig {
    pub clusters: usize,
    pub rank: usize,
    pub alpha: f64,
    pub restarts: usize,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub seed: u64,
    pub init: InitScheme,
    /// Center columns before the covariance used for initialization.
    pub center_init_cov: bool,
    pub trim_cov: TrimCovScope,
}

impl FkmConfig {
    /// A configuration with the default controls: no trimming, 100 restarts,
    /// 200 iterations, relative tolerance 1e-9, seed 0.
    pub fn new(clusters: usize, rank: usize) -> Self {
        FkmConfig {
            clusters,
            rank,
            alpha: 0.0,
            restarts: 100,
            max_iters: 200,
            rel_tol: 1e-9,
            seed: 0,
            init: InitScheme::default(),
            center_init_cov: true,
            trim_cov: TrimCovScope::default(),
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_init(mut self, init: InitScheme) -> Self {
        self.init = init;
        self
    }

    /// Checks the configuration against itself and the data dimensions.
    pub fn validate(&self, n: usize, p: usize) -> Result<()> {
        if self.clusters < 2 {
            return Err(Error::Config(format!("need at least 2 clusters, got {}", self.clusters)));
        }
        if self.rank == 0 {
            return Err(Error::Config("rank must be at least 1".into()));
        }
        if self.rank > self.clusters - 1 {
            return Err(Error::Config(format!(
                "rank {} exceeds clusters - 1 = {}",
                self.rank,
                self.clusters - 1
            )));
        }
        if self.rank > p {
            return Err(Error::Config(format!("rank {} exceeds dimension {p}", self.rank)));
        }
        if !(0.0..=0.5).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha must lie in [0, 0.5], got {}", self.alpha)));
        }
        if self.restarts == 0 {
            return Err(Error::Config("need at least 1 restart".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("need at least 1 iteration".into()));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::Config(format!("rel_tol must be positive, got {}", self.rel_tol)));
        }
        if n <= self.clusters {
            return Err(Error::Config(format!(
                "need more rows than clusters, got n = {n}, clusters = {}",
                self.clusters
            )));
        }
        let active = n - trim::trim_count(n, self.alpha);
        if active < self.clusters {
            return Err(Error::Config(format!(
                "only {active} rows survive trimming, fewer than {} clusters",
                self.clusters
            )));
        }
        Ok(())
    }
}

/// Column-orthonormal projection `A` (p x r).
///
/// `degenerate` marks a projection chosen when the within-cluster scatter had
/// no usable spread in the discarded directions (for instance every row in
/// its own cluster, or more dimensions than active rows), making the
/// minimizer non-unique.
#[derive(Debug, Clone)]
pub struct Loadings {
    pub a: DMatrix<f64>,
    pub degenerate: bool,
}

/// Row assignment plus outlier flags.
///
/// Every row always carries a cluster label, including currently flagged
/// rows; the label is the cluster the row would belong to, which the next
/// trimming pass needs. The binary membership matrix `U` has a one-hot row
/// for active rows and an all-zero row for flagged ones.
#[derive(Debug, Clone, PartialEq)]
pub struct Membership {
    labels: Vec<usize>,
    mask: Vec<bool>,
    clusters: usize,
}

impl Membership {
    /// Membership with no flagged rows.
    ///
    /// # Panics
    /// If a label is out of range.
    pub fn new(labels: Vec<usize>, clusters: usize) -> Self {
        assert!(labels.iter().all(|&l| l < clusters), "label out of range");
        let mask = vec![false; labels.len()];
        Membership { labels, mask, clusters }
    }

    /// Membership with an explicit outlier mask (`true` = flagged).
    ///
    /// # Panics
    /// If lengths differ or a label is out of range.
    pub fn with_mask(labels: Vec<usize>, mask: Vec<bool>, clusters: usize) -> Self {
        assert_eq!(labels.len(), mask.len(), "labels and mask must align");
        assert!(labels.iter().all(|&l| l < clusters), "label out of range");
        Membership { labels, mask, clusters }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn clusters(&self) -> usize {
        self.clusters
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn outlier_mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn is_outlier(&self, row: usize) -> bool {
        self.mask[row]
    }

    /// Replaces the outlier mask.
    pub fn set_mask(&mut self, mask: Vec<bool>) {
        assert_eq!(mask.len(), self.labels.len(), "mask must align with labels");
        self.mask = mask;
    }

    /// Indices of rows that are not flagged, in row order.
    pub fn active_rows(&self) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| !self.mask[i]).collect()
    }

    /// Number of unflagged rows.
    pub fn active_count(&self) -> usize {
        self.mask.iter().filter(|&&m| !m).count()
    }

    /// Active member count per cluster.
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.clusters];
        for (i, &l) in self.labels.iter().enumerate() {
            if !self.mask[i] {
                sizes[l] += 1;
            }
        }
        sizes
    }

    /// The binary membership matrix `U` (n x c): one-hot rows for active
    /// rows, all-zero rows for flagged ones.
    pub fn one_hot(&self) -> DMatrix<f64> {
        let mut u = DMatrix::zeros(self.labels.len(), self.clusters);
        for (i, &l) in self.labels.iter().enumerate() {
            if !self.mask[i] {
                u[(i, l)] = 1.0;
            }
        }
        u
    }
}

/// A fitted model.
#[derive(Debug, Clone)]
pub struct FkmSolution {
    pub loadings: Loadings,
    pub membership: Membership,
    /// Cluster centroids in the factor space (c x r).
    pub centroids: DMatrix<f64>,
    /// Factor scores `X A` for every row, flagged rows included (n x r).
    pub scores: DMatrix<f64>,
    /// `|| X A - U Ybar ||^2` over active rows.
    pub objective_value: f64,
    /// Residual `X A A^T - U Ybar A^T` (n x p).
    pub residual: DMatrix<f64>,
    /// Accepted iterations of the winning restart.
    pub iterations: usize,
    pub restart_index: usize,
}

/// Per-restart diagnostics from [`run_detailed`].
#[derive(Debug, Clone)]
pub struct RestartSummary {
    pub restart: usize,
    /// Final objective, absent when the restart aborted.
    pub objective: Option<f64>,
    pub iterations: usize,
    /// Objective after initialization and after each accepted iteration;
    /// strictly decreasing by construction.
    pub trace: Vec<f64>,
    pub aborted: Option<String>,
    pub degenerate: bool,
}

/// The objective `|| X A - U Ybar ||^2`, summed over rows with a one-hot
/// membership row; flagged rows contribute nothing.
pub fn objective(
    x: &DMatrix<f64>,
    loadings: &Loadings,
    membership: &Membership,
    centroids: &DMatrix<f64>,
) -> Result<f64> {
    check_shapes(x, &loadings.a, membership, Some(centroids))?;
    let f = x * &loadings.a;
    Ok(objective_from_scores(&f, membership, centroids))
}

pub(crate) fn objective_from_scores(
    f: &DMatrix<f64>,
    membership: &Membership,
    centroids: &DMatrix<f64>,
) -> f64 {
    let mut acc = 0.0;
    for (i, &l) in membership.labels().iter().enumerate() {
        if membership.is_outlier(i) {
            continue;
        }
        for j in 0..f.ncols() {
            let d = f[(i, j)] - centroids[(l, j)];
            acc += d * d;
        }
    }
    acc
}

/// Assigns every row of `scores` to the nearest centroid in squared Euclidean
/// distance. Ties go to the lowest cluster index. No trimming happens here;
/// the result has an all-clear outlier mask.
pub fn assign_step(scores: &DMatrix<f64>, centroids: &DMatrix<f64>) -> Membership {
    assert_eq!(scores.ncols(), centroids.ncols(), "scores and centroids must share the rank");
    let labels = assign_labels(scores, centroids);
    Membership::new(labels, centroids.nrows())
}

pub(crate) fn assign_labels(scores: &DMatrix<f64>, centroids: &DMatrix<f64>) -> Vec<usize> {
    let c = centroids.nrows();
    let r = centroids.ncols();
    let mut labels = Vec::with_capacity(scores.nrows());
    for i in 0..scores.nrows() {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for j in 0..c {
            let mut d = 0.0;
            for k in 0..r {
                let diff = scores[(i, k)] - centroids[(j, k)];
                d += diff * diff;
            }
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        labels.push(best);
    }
    labels
}

/// Re-estimates the projection from the within-cluster scatter of the active
/// rows: the `rank` eigenvectors of `S_w` with the smallest eigenvalues,
/// equivalently the largest-eigenvalue eigenvectors of `X^T (P - I) X`.
///
/// Columns come back orthonormal with the dominant-entry-positive sign
/// convention. `degenerate` is set when the retained directions carry
/// (numerically) no within-cluster spread, which makes the minimizer
/// non-unique; that happens when every row is its own cluster and generally
/// whenever the active row count is small against the dimension.
///
/// Flagged rows do not enter the computation at all, so their values are
/// irrelevant to the result.
pub fn update_loadings(x: &DMatrix<f64>, membership: &Membership, rank: usize) -> Result<Loadings> {
    check_shapes(x, &DMatrix::zeros(x.ncols(), rank), membership, None)?;
    if rank == 0 || rank > x.ncols() {
        return Err(Error::Config(format!("rank {rank} out of range for dimension {}", x.ncols())));
    }
    let sizes = membership.cluster_sizes();
    if let Some(empty) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::EmptyCluster(empty));
    }

    let active = membership.active_rows();
    let xa = gather_rows(x, &active);
    let p = x.ncols();
    let c = membership.clusters();

    // Cluster means of the active rows.
    let mut means: DMatrix<f64> = DMatrix::zeros(c, p);
    for (row, &i) in active.iter().enumerate() {
        let l = membership.labels()[i];
        for j in 0..p {
            means[(l, j)] += xa[(row, j)];
        }
    }
    for l in 0..c {
        let inv = 1.0 / sizes[l] as f64;
        for j in 0..p {
            means[(l, j)] *= inv;
        }
    }

    // S_w = Xc^T Xc with Xc the within-cluster centered active rows.
    let mut centered = xa;
    for (row, &i) in active.iter().enumerate() {
        let l = membership.labels()[i];
        for j in 0..p {
            centered[(row, j)] -= means[(l, j)];
        }
    }
    let s_w = centered.transpose() * &centered;

    let (vals, vecs) = sym_eigen_sorted(&s_w, true);
    let a = vecs.columns(0, rank).into_owned();
    let scale = vals[p - 1].max(0.0);
    let degenerate = scale <= 0.0 || vals[rank - 1].max(0.0) <= 1e-12 * scale;

    debug_assert!(orthonormality_defect(&a) <= 1e-8, "projection lost orthonormality");
    Ok(Loadings { a, degenerate })
}

/// Centroids `Ybar = (U^T U)^{-1} U^T X A`: per-cluster means of the factor
/// scores over active members.
pub fn centroids(
    x: &DMatrix<f64>,
    loadings: &Loadings,
    membership: &Membership,
) -> Result<DMatrix<f64>> {
    check_shapes(x, &loadings.a, membership, None)?;
    let f = x * &loadings.a;
    centroids_from_scores(&f, membership)
}

pub(crate) fn centroids_from_scores(
    f: &DMatrix<f64>,
    membership: &Membership,
) -> Result<DMatrix<f64>> {
    let sizes = membership.cluster_sizes();
    if let Some(empty) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::EmptyCluster(empty));
    }
    let c = membership.clusters();
    let r = f.ncols();
    let mut ybar = DMatrix::zeros(c, r);
    for (i, &l) in membership.labels().iter().enumerate() {
        if membership.is_outlier(i) {
            continue;
        }
        for j in 0..r {
            ybar[(l, j)] += f[(i, j)];
        }
    }
    for l in 0..c {
        let inv = 1.0 / sizes[l] as f64;
        for j in 0..r {
            ybar[(l, j)] *= inv;
        }
    }
    Ok(ybar)
}

/// Unbiased sample covariance of the columns of `x`, optionally after column
/// centering.
pub fn covariance(x: &DMatrix<f64>, center: bool) -> DMatrix<f64> {
    let n = x.nrows();
    assert!(n >= 2, "covariance needs at least 2 rows");
    let m = if center {
        let means = x.row_mean();
        let mut c = x.clone();
        for i in 0..n {
            for j in 0..x.ncols() {
                c[(i, j)] -= means[j];
            }
        }
        c
    } else {
        x.clone()
    };
    (m.transpose() * &m) / (n - 1) as f64
}

/// Draws the `k` initial projections: the top `rank` eigenvectors of the
/// covariance estimate `c`, row-permuted. The first start keeps the identity
/// permutation so the principal frame itself is always among the candidates;
/// later starts use independent uniform random permutations. See
/// [`init_loadings_with`] for the Gaussian alternative.
pub fn init_loadings(c: &DMatrix<f64>, k: usize, rank: usize, seed: u64) -> Result<Vec<Loadings>> {
    init_loadings_with(c, k, rank, seed, InitScheme::PermutedPrincipal)
}

/// Initial projections under an explicit scheme.
///
/// For [`InitScheme::PermutedPrincipal`], each start is `P_k V_r` with `P_k`
/// a permutation matrix and `V_r` the sign-normalized top eigenvectors of
/// `c`. `P_0` is the identity, so the unscrambled principal frame is always
/// examined; every later `P_k` is an independent uniform random permutation.
/// A permutation of an orthonormal frame is orthonormal already, so no
/// re-orthogonalization is needed. If `rank` exceeds the number of strictly
/// positive eigenvalues a warning is logged and the remaining directions are
/// taken from the zero eigenspace.
pub fn init_loadings_with(
    c: &DMatrix<f64>,
    k: usize,
    rank: usize,
    seed: u64,
    scheme: InitScheme,
) -> Result<Vec<Loadings>> {
    if c.nrows() != c.ncols() {
        return Err(Error::Shape(format!("covariance must be square, got {}x{}", c.nrows(), c.ncols())));
    }
    let p = c.nrows();
    if rank == 0 || rank > p {
        return Err(Error::Config(format!("rank {rank} out of range for dimension {p}")));
    }
    if k == 0 {
        return Err(Error::Config("need at least 1 restart".into()));
    }
    let mut rng = seed::rng(seed, &[domain::INIT]);
    let mut out = Vec::with_capacity(k);
    match scheme {
        InitScheme::PermutedPrincipal => {
            let (vals, vecs) = sym_eigen_sorted(c, false);
            let positive = vals.iter().filter(|&&v| v > 0.0).count();
            if rank > positive {
                log::warn!(
                    "rank {rank} exceeds the {positive} strictly positive eigenvalues; \
                     filling from the null space"
                );
            }
            let v_r = vecs.columns(0, rank).into_owned();
            let mut perm: Vec<usize> = (0..p).collect();
            for restart in 0..k {
                if restart > 0 {
                    perm.shuffle(&mut rng);
                }
                let mut a = DMatrix::zeros(p, rank);
                for (i, &src) in perm.iter().enumerate() {
                    for j in 0..rank {
                        a[(i, j)] = v_r[(src, j)];
                    }
                }
                out.push(Loadings { a, degenerate: false });
            }
        }
        InitScheme::GaussianOrthogonal => {
            for _ in 0..k {
                let g = DMatrix::from_fn(p, rank, |_, _| {
                    rng.sample::<f64, _>(rand_distr::StandardNormal)
                });
                let qr = g.qr();
                let mut a = qr.q().columns(0, rank).into_owned();
                normalize_signs(&mut a);
                out.push(Loadings { a, degenerate: false });
            }
        }
    }
    Ok(out)
}

/// Initial c-group assignment from the radial distribution of the starting
/// scores.
///
/// Each row's deviation from the global mean is scored with the inverse
/// covariance of the scores (`t_i = n * diff_i C_F^{-1} diff_i^T`), the `2c`
/// empirical quantiles of the scores are taken at levels `j / 2c`, and every
/// row joins the group of its nearest odd quantile (levels `1/2c, 3/2c, ...`)
/// by absolute distance, ties to the lower group. Groups can come out empty
/// on adversarial inputs; the driver repairs that.
///
/// Zero-variance scores degrade to a uniform random assignment from `rng`,
/// with a warning.
pub fn init_membership(f0: &DMatrix<f64>, c: usize, rng: &mut ChaCha8Rng) -> Membership {
    assert!(c >= 2, "need at least 2 clusters");
    let n = f0.nrows();
    assert!(n >= 2, "need at least 2 rows");

    let t = match trim::global_radial_scores(f0) {
        Some(t) => t,
        None => {
            log::warn!("degenerate starting scores; falling back to uniform random assignment");
            let labels = (0..n).map(|_| rng.gen_range(0..c)).collect();
            return Membership::new(labels, c);
        }
    };

    let mut sorted: Vec<f64> = t.iter().copied().collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let odd_quantiles: Vec<f64> = (0..c)
        .map(|m| crate::linalg::quantile_sorted(&sorted, (2 * m + 1) as f64 / (2 * c) as f64))
        .collect();

    let labels = t
        .iter()
        .map(|&ti| {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (m, &q) in odd_quantiles.iter().enumerate() {
                let d = (ti - q).abs();
                if d < best_d {
                    best_d = d;
                    best = m;
                }
            }
            best
        })
        .collect();
    Membership::new(labels, c)
}

/// Fits the model; see [`run_detailed`] for per-restart diagnostics.
pub fn run(x: &DMatrix<f64>, cfg: &FkmConfig) -> Result<FkmSolution> {
    run_detailed(x, cfg).map(|(solution, _)| solution)
}

/// Fits the model and reports every restart.
///
/// Restarts are independent and run in parallel; the returned solution is the
/// non-aborted restart with the smallest final objective, ties resolved by
/// the lowest restart index. A restart aborts when a cluster empties and a
/// single repair move does not fix it; if every restart aborts, an error is
/// returned.
pub fn run_detailed(
    x: &DMatrix<f64>,
    cfg: &FkmConfig,
) -> Result<(FkmSolution, Vec<RestartSummary>)> {
    let n = x.nrows();
    cfg.validate(n, x.ncols())?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("input matrix contains non-finite cells".into()));
    }

    let cov = covariance(x, cfg.center_init_cov);
    let starts = init_loadings_with(&cov, cfg.restarts, cfg.rank, cfg.seed, cfg.init)?;

    let outcomes: Vec<(Option<State>, RestartSummary)> = starts
        .into_par_iter()
        .enumerate()
        .map(|(k, start)| run_restart(x, cfg, start, k))
        .collect();

    let mut best: Option<&State> = None;
    let mut summaries = Vec::with_capacity(outcomes.len());
    for (state, summary) in &outcomes {
        if let Some(s) = state {
            let better = match best {
                None => true,
                Some(b) => s.objective < b.objective,
            };
            if better {
                best = Some(s);
            }
        }
        summaries.push(summary.clone());
    }
    let best = best.ok_or(Error::AllRestartsAborted(cfg.restarts))?;

    let scores = x * &best.loadings.a;
    let membership =
        Membership::with_mask(best.labels.clone(), best.mask.clone(), cfg.clusters);
    // E = (F - U Ybar) A^T; flagged rows keep their full projected value.
    let mut deviation = scores.clone();
    for (i, &l) in best.labels.iter().enumerate() {
        if best.mask[i] {
            continue;
        }
        for j in 0..scores.ncols() {
            deviation[(i, j)] -= best.ybar[(l, j)];
        }
    }
    let residual = &deviation * best.loadings.a.transpose();

    let solution = FkmSolution {
        loadings: best.loadings.clone(),
        membership,
        centroids: best.ybar.clone(),
        scores,
        objective_value: best.objective,
        residual,
        iterations: best.iterations,
        restart_index: best.restart,
    };
    Ok((solution, summaries))
}

struct State {
    loadings: Loadings,
    labels: Vec<usize>,
    mask: Vec<bool>,
    ybar: DMatrix<f64>,
    scores: DMatrix<f64>,
    objective: f64,
    iterations: usize,
    restart: usize,
}

fn run_restart(
    x: &DMatrix<f64>,
    cfg: &FkmConfig,
    start: Loadings,
    restart: usize,
) -> (Option<State>, RestartSummary) {
    let n = x.nrows();
    let c = cfg.clusters;
    let trim_target = trim::trim_count(n, cfg.alpha);
    let mut rng = seed::rng(cfg.seed, &[domain::RESTART, restart as u64]);

    let abort = |iterations: usize, trace: Vec<f64>, reason: String| {
        let summary = RestartSummary {
            restart,
            objective: None,
            iterations,
            trace,
            aborted: Some(reason),
            degenerate: false,
        };
        (None, summary)
    };

    let scores = x * &start.a;
    let mut membership = init_membership(&scores, c, &mut rng);
    // The quantile assignment can leave groups empty; refill them one move at
    // a time before the loop proper starts.
    let mut guard = 0;
    while membership.cluster_sizes().iter().any(|&s| s == 0) {
        if guard >= c || repair_one_empty(&scores, &mut membership).is_err() {
            return abort(0, Vec::new(), "empty cluster at initialization".into());
        }
        guard += 1;
    }

    let ybar = match centroids_from_scores(&scores, &membership) {
        Ok(y) => y,
        Err(_) => return abort(0, Vec::new(), "empty cluster at initialization".into()),
    };
    let objective = objective_from_scores(&scores, &membership, &ybar);
    let mut trace = vec![objective];
    let mut state = State {
        loadings: start,
        labels: membership.labels().to_vec(),
        mask: vec![false; n],
        ybar,
        scores,
        objective,
        iterations: 0,
        restart,
    };

    for iter in 1..=cfg.max_iters {
        // Trim against the previous iterate's scores and assignment.
        let mask = if trim_target > 0 {
            let previous = Membership::with_mask(state.labels.clone(), state.mask.clone(), c);
            match trim::radial_scores_with(&state.scores, &previous, cfg.trim_cov) {
                Ok(radial) => trim::flag_outliers(&radial, cfg.alpha),
                Err(_) => return abort(state.iterations, trace, "degenerate radial scores".into()),
            }
        } else {
            vec![false; n]
        };

        // Assignment for every row, flagged ones included: they keep a label
        // so the next trimming pass can score them against a cluster.
        let labels = assign_labels(&state.scores, &state.ybar);
        let mut membership = Membership::with_mask(labels, mask, c);
        if membership.cluster_sizes().iter().any(|&s| s == 0) {
            // One repair move per iteration; a second simultaneous empty
            // cluster aborts the restart.
            if repair_one_empty(&state.scores, &mut membership).is_err()
                || membership.cluster_sizes().iter().any(|&s| s == 0)
            {
                return abort(state.iterations, trace, "persistent empty cluster".into());
            }
        }

        let loadings = match update_loadings(x, &membership, cfg.rank) {
            Ok(l) => l,
            Err(_) => return abort(state.iterations, trace, "empty cluster in update".into()),
        };
        let scores = x * &loadings.a;
        let ybar = match centroids_from_scores(&scores, &membership) {
            Ok(y) => y,
            Err(_) => return abort(state.iterations, trace, "empty cluster in update".into()),
        };
        let objective = objective_from_scores(&scores, &membership, &ybar);

        if objective >= state.objective {
            // No decrease: stop and keep the previous iterate.
            break;
        }
        let relative_drop = (state.objective - objective) / state.objective;
        trace.push(objective);
        state = State {
            loadings,
            labels: membership.labels().to_vec(),
            mask: membership.outlier_mask().to_vec(),
            ybar,
            scores,
            objective,
            iterations: iter,
            restart,
        };
        if relative_drop < cfg.rel_tol {
            break;
        }
    }

    let summary = RestartSummary {
        restart,
        objective: Some(state.objective),
        iterations: state.iterations,
        trace,
        aborted: None,
        degenerate: state.loadings.degenerate,
    };
    (Some(state), summary)
}

/// Moves the active row farthest from its own centroid into the first empty
/// cluster. Only rows from clusters with at least two active members are
/// candidates, so the move cannot create a new empty cluster. Ties go to the
/// lowest row index.
pub fn repair_one_empty(scores: &DMatrix<f64>, membership: &mut Membership) -> Result<()> {
    let sizes = membership.cluster_sizes();
    let empty = match sizes.iter().position(|&s| s == 0) {
        Some(j) => j,
        None => return Ok(()),
    };
    let c = membership.clusters();
    let r = scores.ncols();

    // Partial centroids over the non-empty clusters.
    let mut means: DMatrix<f64> = DMatrix::zeros(c, r);
    for (i, &l) in membership.labels().iter().enumerate() {
        if !membership.is_outlier(i) {
            for j in 0..r {
                means[(l, j)] += scores[(i, j)];
            }
        }
    }
    for l in 0..c {
        if sizes[l] > 0 {
            for j in 0..r {
                means[(l, j)] /= sizes[l] as f64;
            }
        }
    }

    let mut best: Option<(f64, usize)> = None;
    for (i, &l) in membership.labels().iter().enumerate() {
        if membership.is_outlier(i) || sizes[l] < 2 {
            continue;
        }
        let mut d = 0.0;
        for j in 0..r {
            let diff = scores[(i, j)] - means[(l, j)];
            d += diff * diff;
        }
        let take = match best {
            None => true,
            Some((bd, _)) => d > bd,
        };
        if take {
            best = Some((d, i));
        }
    }
    match best {
        Some((_, row)) => {
            let mut labels = membership.labels().to_vec();
            labels[row] = empty;
            *membership =
                Membership::with_mask(labels, membership.outlier_mask().to_vec(), c);
            Ok(())
        }
        None => Err(Error::EmptyCluster(empty)),
    }
}

fn check_shapes(
    x: &DMatrix<f64>,
    a: &DMatrix<f64>,
    membership: &Membership,
    centroids: Option<&DMatrix<f64>>,
) -> Result<()> {
    if x.ncols() != a.nrows() {
        return Err(Error::Shape(format!(
            "X has {} columns but A has {} rows",
            x.ncols(),
            a.nrows()
        )));
    }
    if membership.len() != x.nrows() {
        return Err(Error::Shape(format!(
            "membership covers {} rows but X has {}",
            membership.len(),
            x.nrows()
        )));
    }
    if let Some(y) = centroids {
        if y.nrows() != membership.clusters() {
            return Err(Error::Shape(format!(
                "centroids have {} rows but membership has {} clusters",
                y.nrows(),
                membership.clusters()
            )));
        }
        if y.ncols() != a.ncols() {
            return Err(Error::Shape(format!(
                "centroids have {} columns but A has {}",
                y.ncols(),
                a.ncols()
            )));
        }
    }
    Ok(())
}
