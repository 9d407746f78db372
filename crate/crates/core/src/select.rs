//! Choosing the number of clusters, the subspace rank, and the trimming
//! level.
//!
//! The cluster count comes from a Hartigan-style statistic over a grid of
//! fits: `H_c = (W_c / W_{c+1} - 1) * (dim - c - 1)`, with `W_c` the within
//! dispersion of the fit with `c` clusters and `dim` the data dimension `p`
//! by default (the sample size `n` is the classic alternative). The smallest
//! `c` with `H_c` at or under the threshold (default 10) wins; when none
//! qualifies the top of the grid is returned with a warning.
//!
//! The rank is read off the singular values of the winning centroid matrix,
//! and the trimming level picks the alpha whose grid shows the sharpest
//! Hartigan contrast.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fkm::{self, FkmConfig, FkmSolution, InitScheme, Membership, TrimCovScope};
use crate::seed::{self, domain};

/// How the per-cell subspace rank follows the cluster count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankStrategy {
    /// The same rank everywhere; grid cells with `c <= rank` are skipped.
    Fixed(usize),
    /// Full factorial rank `c - 1`.
    CMinusOne,
}

/// Which dispersion enters the Hartigan ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DispersionVariant {
    /// Sum of squared distances to the assigned centroid (the objective).
    #[default]
    Squared,
    /// Sum of plain Euclidean distances.
    Plain,
}

/// The `dim` in the Hartigan multiplier `dim - c - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DispersionScale {
    /// The data dimension `p`.
    #[default]
    Dimension,
    /// The sample size `n`.
    SampleSize,
}

/// Grid search configuration.
#[derive(Debug, Clone)]
pub struct SelectionConfig {
    pub c_min: usize,
    pub c_max: usize,
    pub strategy: RankStrategy,
    pub alpha: f64,
    pub restarts: usize,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub seed: u64,
    pub init: InitScheme,
    pub center_init_cov: bool,
    pub trim_cov: TrimCovScope,
    /// Acceptance threshold for `H_c` (default 10).
    pub hartigan_threshold: f64,
    /// Relative singular value cutoff for the rank (default 0.05).
    pub rank_threshold: f64,
    pub variant: DispersionVariant,
    pub scale: DispersionScale,
}

impl SelectionConfig {
    pub fn new(c_min: usize, c_max: usize, strategy: RankStrategy) -> Self {
        SelectionConfig {
            c_min,
            c_max,
            strategy,
            alpha: 0.0,
            restarts: 100,
            max_iters: 200,
            rel_tol: 1e-9,
            seed: 0,
            init: InitScheme::default(),
            center_init_cov: true,
            trim_cov: TrimCovScope::default(),
            hartigan_threshold: 10.0,
            rank_threshold: 0.05,
            variant: DispersionVariant::default(),
            scale: DispersionScale::default(),
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.c_min < 2 {
            return Err(Error::Config("grid must start at 2 or more clusters".into()));
        }
        if self.c_max < self.c_min {
            return Err(Error::Config(format!(
                "empty grid: c_max {} below c_min {}",
                self.c_max, self.c_min
            )));
        }
        if self.c_max == self.c_min {
            return Err(Error::Config(
                "grid needs at least two cluster counts to compare".into(),
            ));
        }
        if let RankStrategy::Fixed(0) = self.strategy {
            return Err(Error::Config("fixed rank must be at least 1".into()));
        }
        if !(self.rank_threshold > 0.0 && self.rank_threshold <= 1.0) {
            return Err(Error::Config(format!(
                "rank threshold must lie in (0, 1], got {}",
                self.rank_threshold
            )));
        }
        Ok(())
    }

    /// The rank a grid cell with `c` clusters uses, `None` when the cell is
    /// infeasible under the strategy.
    pub fn cell_rank(&self, c: usize) -> Option<usize> {
        match self.strategy {
            RankStrategy::Fixed(r) => (r <= c - 1).then_some(r),
            RankStrategy::CMinusOne => Some(c - 1),
        }
    }

    /// The derived solver seed for one grid cell. Cells are separated by
    /// cluster count, rank, and trimming level, so no two cells of any grid
    /// or alpha sweep under one master seed share a random stream.
    pub fn cell_seed(&self, c: usize, rank: usize, alpha: f64) -> u64 {
        seed::derive(self.seed, &[domain::CELL, c as u64, rank as u64, alpha.to_bits()])
    }
}

/// One fitted grid cell.
#[derive(Debug)]
pub struct GridCell {
    pub clusters: usize,
    pub rank: usize,
    pub seed: u64,
    pub solution: FkmSolution,
    pub w_squared: f64,
    pub w_plain: f64,
    /// Descending singular values of the centroid matrix.
    pub singular_values: Vec<f64>,
}

/// The Hartigan statistic of one cluster count, in all four bookkeeping
/// flavors; `selected_variant` is the one the rule reads.
#[derive(Debug, Clone)]
pub struct HartiganRow {
    pub clusters: usize,
    pub h_squared_dim: f64,
    pub h_squared_n: f64,
    pub h_plain_dim: f64,
    pub h_plain_n: f64,
}

impl HartiganRow {
    pub fn value(&self, variant: DispersionVariant, scale: DispersionScale) -> f64 {
        match (variant, scale) {
            (DispersionVariant::Squared, DispersionScale::Dimension) => self.h_squared_dim,
            (DispersionVariant::Squared, DispersionScale::SampleSize) => self.h_squared_n,
            (DispersionVariant::Plain, DispersionScale::Dimension) => self.h_plain_dim,
            (DispersionVariant::Plain, DispersionScale::SampleSize) => self.h_plain_n,
        }
    }
}

/// A full grid search result.
#[derive(Debug)]
pub struct GridOutcome {
    pub cells: Vec<GridCell>,
    pub hartigan: Vec<HartiganRow>,
    pub chosen_clusters: usize,
    /// True when no cell met the threshold and the grid top was returned.
    pub fell_back: bool,
    pub chosen_rank: usize,
}

/// Within dispersion of a fit: distances from active rows to their assigned
/// centroid, squared or plain.
pub fn within_dispersion(
    f: &DMatrix<f64>,
    membership: &Membership,
    centroids: &DMatrix<f64>,
    variant: DispersionVariant,
) -> f64 {
    let mut acc = 0.0;
    for (i, &l) in membership.labels().iter().enumerate() {
        if membership.is_outlier(i) {
            continue;
        }
        let mut d = 0.0;
        for j in 0..f.ncols() {
            let diff = f[(i, j)] - centroids[(l, j)];
            d += diff * diff;
        }
        acc += match variant {
            DispersionVariant::Squared => d,
            DispersionVariant::Plain => d.sqrt(),
        };
    }
    acc
}

/// `H_c = (W_c / W_{c+1} - 1) * (dim - c - 1)`.
///
/// A vanishing `W_{c+1}` means the finer fit is exact: the statistic is
/// infinite unless `W_c` is already zero, in which case nothing was gained
/// and the statistic is zero.
pub fn hartigan(w_c: f64, w_next: f64, c: usize, dim: usize) -> f64 {
    let multiplier = dim as f64 - c as f64 - 1.0;
    if w_next == 0.0 {
        if w_c == 0.0 {
            return 0.0;
        }
        return f64::INFINITY * multiplier.signum();
    }
    (w_c / w_next - 1.0) * multiplier
}

/// The smallest cluster count whose statistic is at or under the threshold.
///
/// `h` pairs each candidate `c` with its statistic, in increasing `c` order.
/// When nothing qualifies the fallback count (the top of the grid) is
/// returned with the flag set, and a warning is logged.
pub fn select_clusters(h: &[(usize, f64)], threshold: f64, fallback: usize) -> (usize, bool) {
    for &(c, value) in h {
        if value <= threshold {
            return (c, false);
        }
    }
    log::warn!(
        "no cluster count in the grid reached H <= {threshold}; falling back to {fallback}"
    );
    (fallback, true)
}

/// Number of singular values within the relative threshold of the largest.
/// All-zero input has rank zero.
pub fn select_rank(singular_values: &[f64], threshold: f64) -> usize {
    let top = singular_values.iter().cloned().fold(0.0f64, f64::max);
    if top <= 0.0 {
        return 0;
    }
    singular_values.iter().filter(|&&s| s / top >= threshold).count()
}

/// Runs the full grid: one fit per feasible cluster count, Hartigan rows for
/// every adjacent pair, then the cluster count and rank choices.
pub fn run_grid(x: &DMatrix<f64>, cfg: &SelectionConfig) -> Result<GridOutcome> {
    cfg.validate()?;
    let n = x.nrows();
    let p = x.ncols();

    let mut cells = Vec::new();
    for c in cfg.c_min..=cfg.c_max {
        let rank = match cfg.cell_rank(c) {
            Some(r) => r,
            None => continue,
        };
        let seed = cfg.cell_seed(c, rank, cfg.alpha);
        let fit_cfg = FkmConfig {
            clusters: c,
            rank,
            alpha: cfg.alpha,
            restarts: cfg.restarts,
            max_iters: cfg.max_iters,
            rel_tol: cfg.rel_tol,
            seed,
            init: cfg.init,
            center_init_cov: cfg.center_init_cov,
            trim_cov: cfg.trim_cov,
        };
        let solution = fkm::run(x, &fit_cfg)?;
        let w_squared = within_dispersion(
            &solution.scores,
            &solution.membership,
            &solution.centroids,
            DispersionVariant::Squared,
        );
        let w_plain = within_dispersion(
            &solution.scores,
            &solution.membership,
            &solution.centroids,
            DispersionVariant::Plain,
        );
        let mut singular_values: Vec<f64> = solution
            .centroids
            .clone()
            .svd(false, false)
            .singular_values
            .iter()
            .copied()
            .collect();
        singular_values.sort_by(|a, b| b.partial_cmp(a).unwrap());
        cells.push(GridCell { clusters: c, rank, seed, solution, w_squared, w_plain, singular_values });
    }
    if cells.len() < 2 {
        return Err(Error::Config(
            "fewer than two feasible grid cells; nothing to compare".into(),
        ));
    }

    let mut hartigan_rows = Vec::new();
    for pair in cells.windows(2) {
        let (lo, hi) = (&pair[0], &pair[1]);
        if hi.clusters != lo.clusters + 1 {
            continue;
        }
        let c = lo.clusters;
        hartigan_rows.push(HartiganRow {
            clusters: c,
            h_squared_dim: hartigan(lo.w_squared, hi.w_squared, c, p),
            h_squared_n: hartigan(lo.w_squared, hi.w_squared, c, n),
            h_plain_dim: hartigan(lo.w_plain, hi.w_plain, c, p),
            h_plain_n: hartigan(lo.w_plain, hi.w_plain, c, n),
        });
    }
    if hartigan_rows.is_empty() {
        return Err(Error::Config("no adjacent grid cells; cannot form the statistic".into()));
    }

    let h: Vec<(usize, f64)> = hartigan_rows
        .iter()
        .map(|row| (row.clusters, row.value(cfg.variant, cfg.scale)))
        .collect();
    let fallback = cells.last().unwrap().clusters;
    let (chosen_clusters, fell_back) = select_clusters(&h, cfg.hartigan_threshold, fallback);

    let chosen_cell = cells
        .iter()
        .find(|cell| cell.clusters == chosen_clusters)
        .expect("chosen count always names a fitted cell");
    let chosen_rank = select_rank(&chosen_cell.singular_values, cfg.rank_threshold);

    Ok(GridOutcome { cells, hartigan: hartigan_rows, chosen_clusters, fell_back, chosen_rank })
}

/// One candidate trimming level in an alpha sweep.
#[derive(Debug)]
pub struct AlphaCell {
    pub alpha: f64,
    /// The sweep's figure of merit: the largest Hartigan value in the grid.
    pub peak_h: f64,
    pub chosen_clusters: usize,
    pub outcome: GridOutcome,
}

/// Sweeps the trimming level over `alphas` and keeps the one whose grid shows
/// the sharpest Hartigan contrast (the largest finite peak; ties go to the
/// earlier candidate). The default sweep is `0, 0.05, ..., 0.20`.
pub fn select_alpha(
    x: &DMatrix<f64>,
    cfg: &SelectionConfig,
    alphas: &[f64],
) -> Result<(f64, Vec<AlphaCell>)> {
    if alphas.is_empty() {
        return Err(Error::Config("alpha sweep needs at least one candidate".into()));
    }
    let mut cells = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let outcome = run_grid(x, &SelectionConfig { alpha, ..cfg.clone() })?;
        let peak_h = outcome
            .hartigan
            .iter()
            .map(|row| row.value(cfg.variant, cfg.scale))
            .filter(|v| v.is_finite())
            .fold(f64::NEG_INFINITY, f64::max);
        cells.push(AlphaCell { alpha, peak_h, chosen_clusters: outcome.chosen_clusters, outcome });
    }
    let mut best = 0usize;
    for (i, cell) in cells.iter().enumerate() {
        if cell.peak_h > cells[best].peak_h {
            best = i;
        }
    }
    Ok((cells[best].alpha, cells))
}

/// The default alpha sweep.
pub const DEFAULT_ALPHA_SWEEP: [f64; 5] = [0.0, 0.05, 0.10, 0.15, 0.20];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hartigan_matches_hand_computation() {
        // (120/80 - 1) * (50 - 3 - 1) = 0.5 * 46 = 23
        assert_eq!(hartigan(120.0, 80.0, 3, 50), 23.0);
    }

    #[test]
    fn hartigan_exact_fits() {
        assert_eq!(hartigan(0.0, 0.0, 2, 10), 0.0);
        assert_eq!(hartigan(5.0, 0.0, 2, 10), f64::INFINITY);
    }

    #[test]
    fn selection_takes_smallest_qualifying() {
        let h = vec![(2, 40.0), (3, 9.0), (4, 2.0)];
        assert_eq!(select_clusters(&h, 10.0, 5), (3, false));
    }

    #[test]
    fn selection_falls_back_to_grid_top() {
        let h = vec![(2, 40.0), (3, 30.0)];
        assert_eq!(select_clusters(&h, 10.0, 4), (4, true));
    }

    #[test]
    fn rank_counts_relative_spectrum() {
        assert_eq!(select_rank(&[17.3, 3.7, 0.4], 0.05), 2);
        assert_eq!(select_rank(&[10.0], 0.05), 1);
        assert_eq!(select_rank(&[0.0, 0.0], 0.05), 0);
        assert_eq!(select_rank(&[8.0, 0.4], 0.05), 2); // exactly at the cutoff
    }

    #[test]
    fn cell_seeds_separate() {
        let cfg = SelectionConfig::new(2, 5, RankStrategy::CMinusOne).with_seed(7);
        let mut seen = std::collections::HashSet::new();
        for c in 2..=5 {
            for alpha in [0.0, 0.1] {
                assert!(seen.insert(cfg.cell_seed(c, c - 1, alpha)));
            }
        }
    }

    #[test]
    fn fixed_rank_skips_infeasible_cells() {
        let cfg = SelectionConfig::new(2, 4, RankStrategy::Fixed(2));
        assert_eq!(cfg.cell_rank(2), None);
        assert_eq!(cfg.cell_rank(3), Some(2));
        assert_eq!(cfg.cell_rank(4), Some(2));
    }
}
