//! Synthetic benchmark data with planted structure.
//!
//! Rows carry `c` tight cluster blobs inside a random `r`-dimensional
//! subspace of `R^p`; every direction orthogonal to that subspace holds
//! unit-variance masking noise with no structure at all. Two properties
//! make the planted truth recoverable by the solver rather than merely
//! present:
//!
//! * the within-blob spread `noise_sd` stays well below the dispersion the
//!   solver could reach by slicing masking noise instead (for the sample
//!   sizes this crate targets, keep it at 0.2 or less when `p/n` is large,
//!   up to ~0.5 for wide-sample shapes);
//! * the blobs sit on a staggered radial ladder, so each owns a distinct
//!   band of the whitened radial profile that the quantile initializer
//!   reads; a draw is accepted only after that initializer, run on the
//!   embedded sample through the solver's own opening frame, reads the
//!   plant back.
//!
//! A chosen fraction of rows is displaced radially inside the subspace,
//! which is exactly the kind of contamination the trimming step is built
//! to absorb. The generator records the ground truth so recovery can be
//! scored.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::normalize_signs;
use crate::seed::{self, domain};

/// Generator settings.
#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub n: usize,
    pub p: usize,
    pub clusters: usize,
    pub rank: usize,
    /// Radial ladder step: blob k sits at distance ~separation*(k+1) from
    /// the origin, and pairwise center distances never drop below this.
    pub separation: f64,
    /// Within-blob spread inside the planted subspace. The masking
    /// directions always have unit spread, so this is a ratio.
    pub noise_sd: f64,
    /// Fraction of rows displaced; `floor(frac * n)` rows exactly.
    pub outlier_frac: f64,
    /// Length of the in-subspace displacement.
    pub outlier_scale: f64,
    /// Cluster weights; uniform when absent.
    pub weights: Option<Vec<f64>>,
    pub seed: u64,
}

impl SynthConfig {
    pub fn new(n: usize, p: usize, clusters: usize, rank: usize) -> Self {
        SynthConfig {
            n,
            p,
            clusters,
            rank,
            separation: 6.0,
            noise_sd: 0.4,
            outlier_frac: 0.0,
            outlier_scale: 30.0,
            weights: None,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_outliers(mut self, frac: f64, scale: f64) -> Self {
        self.outlier_frac = frac;
        self.outlier_scale = scale;
        self
    }

    pub fn with_noise(mut self, sd: f64) -> Self {
        self.noise_sd = sd;
        self
    }

    pub fn with_separation(mut self, separation: f64) -> Self {
        self.separation = separation;
        self
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Self {
        self.weights = Some(weights);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config("need at least 2 rows".into()));
        }
        if self.clusters == 0 {
            return Err(Error::Config("need at least 1 cluster".into()));
        }
        if self.rank == 0 || self.rank > self.p {
            return Err(Error::Config(format!(
                "rank {} out of range for dimension {}",
                self.rank, self.p
            )));
        }
        if !(0.0..=0.5).contains(&self.outlier_frac) {
            return Err(Error::Config("outlier fraction must lie in [0, 0.5]".into()));
        }
        if !(self.noise_sd > 0.0) {
            return Err(Error::Config("noise must be positive".into()));
        }
        if !(self.separation >= 0.0) {
            return Err(Error::Config("separation must be nonnegative".into()));
        }
        if let Some(w) = &self.weights {
            if w.len() != self.clusters {
                return Err(Error::Config(format!(
                    "{} weights for {} clusters",
                    w.len(),
                    self.clusters
                )));
            }
            if w.iter().any(|&v| !(v >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
                return Err(Error::Config("weights must be nonnegative with a positive sum".into()));
            }
        }
        Ok(())
    }
}

/// Whether the radial-quantile initializer recovers the planted grouping
/// from the given scores. The caller passes the scores the solver's own
/// first start will produce, so this is not a model of recoverability but
/// the entry gate itself, run ahead of time. Rows marked in `skip` are the
/// displaced ones: they sit in the banding covariance and shift every
/// quantile boundary, but their own band is not scored. A draw passes when
/// every band's majority label is distinct and the majorities cover nearly
/// all scored rows; the stragglers left over are what the assignment step
/// can absorb, while a lost blob boundary is what it cannot. On success the
/// banded grouping is returned for further checks.
fn bands_recover_labels(
    scores: &DMatrix<f64>,
    labels: &[usize],
    skip: &[bool],
    c: usize,
) -> Option<crate::fkm::Membership> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let banded = crate::fkm::init_membership(scores, c, &mut rng);
    let mut conf = vec![vec![0usize; c]; c];
    let mut scored = 0usize;
    for (i, &label) in labels.iter().enumerate() {
        if skip[i] {
            continue;
        }
        conf[banded.labels()[i]][label] += 1;
        scored += 1;
    }
    let mut seen = vec![false; c];
    let mut agree = 0usize;
    for row in &conf {
        let (best_label, best_count) =
            row.iter().enumerate().max_by_key(|(_, &v)| v).map(|(j, &v)| (j, v)).unwrap();
        if best_count == 0 {
            continue;
        }
        if seen[best_label] {
            return None;
        }
        seen[best_label] = true;
        agree += best_count;
    }
    (agree as f64 >= 0.97 * scored as f64).then_some(banded)
}

/// A generated sample with its ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub x: DMatrix<f64>,
    /// True cluster of every row; displaced rows keep their origin cluster.
    pub labels: Vec<usize>,
    pub outlier_flags: Vec<bool>,
    /// True centers in the subspace coordinates (c x r).
    pub centers: DMatrix<f64>,
    /// The planted orthonormal subspace basis (p x r).
    pub loadings: DMatrix<f64>,
}

/// Generates one sample. Fully determined by the configuration, seed
/// included; generation stages draw from separated streams so a change in
/// one stage's consumption cannot leak into another. The outlier stage sits
/// inside the acceptance loop (displaced rows shift the radial bands, so
/// recoverability is a property of the contaminated sample), which means
/// toggling the outlier settings redraws the sample rather than merely
/// adding displacements on top of a fixed one.
pub fn generate(cfg: &SynthConfig) -> Result<SyntheticData> {
    cfg.validate()?;
    let (n, p, c, r) = (cfg.n, cfg.p, cfg.clusters, cfg.rank);

    // Stage 1: a full orthonormal frame. The first r columns carry the
    // cluster structure; the rest hold the masking directions.
    let mut rng = seed::rng(cfg.seed, &[domain::SYNTH, 1]);
    let g = DMatrix::from_fn(p, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut basis = g.qr().q();
    normalize_signs(&mut basis);
    let loadings = basis.columns(0, r).into_owned();

    // Stages 2-5: centers, labels, frame coordinates, and displacements,
    // drawn jointly and redrawn until the sample is recoverable, not merely
    // structured. Blob k sits at distance ~separation*(k+1) from the origin
    // in a random direction, so every blob owns its own radial band. Plain
    // center distance says nothing about whether those bands survive
    // whitening, count noise, near-collinear layouts, and the quantile shift
    // the displaced rows cause, so acceptance embeds the draw, recomputes the
    // solver's opening frame, and keeps the draw only when the radial-quantile
    // initializer reads the plant back. Each stage keeps its own stream and
    // redraws continue those streams, so the outcome stays a pure function
    // of the configuration.
    let weights = cfg.weights.clone().unwrap_or_else(|| vec![1.0; c]);
    let total: f64 = weights.iter().sum();
    let mut rng2 = seed::rng(cfg.seed, &[domain::SYNTH, 2]);
    let mut rng3 = seed::rng(cfg.seed, &[domain::SYNTH, 3]);
    let mut rng4 = seed::rng(cfg.seed, &[domain::SYNTH, 4]);
    let mut rng5 = seed::rng(cfg.seed, &[domain::SYNTH, 5]);
    let mut centers = DMatrix::zeros(c, r);
    let mut labels: Vec<usize> = Vec::new();
    let mut coords = DMatrix::<f64>::zeros(n, p);
    let mut outlier_flags = vec![false; n];
    let mut ok = false;
    'attempts: for _ in 0..120 {
        // Stage 2: the radial ladder. Pairwise separation retries burn only
        // this stage's stream.
        let mut pairwise_ok = false;
        for _ in 0..200 {
            for i in 0..c {
                let mut dir =
                    DVector::<f64>::from_fn(r, |_, _| rng2.sample::<f64, _>(StandardNormal));
                let norm = dir.norm();
                if norm > 0.0 {
                    dir /= norm;
                } else {
                    dir[0] = 1.0;
                }
                let rho = cfg.separation * (i as f64 + 1.0) * (0.95 + 0.1 * rng2.gen::<f64>());
                for j in 0..r {
                    centers[(i, j)] = rho * dir[j];
                }
            }
            pairwise_ok = (0..c).all(|a| {
                ((a + 1)..c).all(|b| {
                    let mut d = 0.0;
                    for j in 0..r {
                        let diff = centers[(a, j)] - centers[(b, j)];
                        d += diff * diff;
                    }
                    d.sqrt() >= cfg.separation
                })
            });
            if pairwise_ok {
                break;
            }
        }
        if !pairwise_ok {
            continue;
        }

        // Stage 3: cluster labels.
        labels = (0..n)
            .map(|_| {
                let draw = rng3.gen::<f64>() * total;
                let mut acc = 0.0;
                for (j, &w) in weights.iter().enumerate() {
                    acc += w;
                    if draw < acc {
                        return j;
                    }
                }
                c - 1
            })
            .collect();

        // Stage 4: frame coordinates, row by row. Subspace coordinates sit
        // at the row's center plus jitter; complement coordinates are pure
        // unit noise.
        for i in 0..n {
            let l = labels[i];
            for k in 0..r {
                coords[(i, k)] =
                    centers[(l, k)] + cfg.noise_sd * rng4.sample::<f64, _>(StandardNormal);
            }
            for k in r..p {
                coords[(i, k)] = rng4.sample::<f64, _>(StandardNormal);
            }
        }

        // Stage 5: displace floor(frac * n) rows radially inside the
        // subspace. This happens before acceptance because the displaced
        // rows sit in the banding covariance and shift every quantile
        // boundary; whether the plant survives that shift depends on the
        // actual draw, not on any summary of it.
        let m = (cfg.outlier_frac * n as f64).floor() as usize;
        let mut pool: Vec<usize> = (0..n).collect();
        outlier_flags = vec![false; n];
        for _ in 0..m {
            let pick = rng5.gen_range(0..pool.len());
            let row = pool.swap_remove(pick);
            outlier_flags[row] = true;
            let mut direction =
                DVector::from_fn(r, |_, _| rng5.sample::<f64, _>(StandardNormal));
            let norm = direction.norm();
            if norm > 0.0 {
                direction /= norm;
            } else {
                direction[0] = 1.0;
            }
            for k in 0..r {
                coords[(row, k)] += cfg.outlier_scale * direction[k];
            }
        }

        // A lone blob or a pair always has usable radii; larger plants must
        // survive the initializer's own reading of the contaminated sample
        // through the solver's actual opening frame (the top eigenvectors of
        // the embedded data's covariance), with the displaced rows banded
        // but not scored.
        if c <= 2 || n < 2 * c {
            ok = true;
            break 'attempts;
        }
        let x_try = &coords * basis.transpose();
        let cov = crate::fkm::covariance(&x_try, true);
        let first = match crate::fkm::init_loadings(&cov, 1, r, 0) {
            Ok(mut v) => v.remove(0),
            Err(_) => continue,
        };
        let f0 = &x_try * &first.a;
        let banded = match bands_recover_labels(&f0, &labels, &outlier_flags, c) {
            Some(b) => b,
            None => continue,
        };
        // The displaced rows must also own the top radial scores outright
        // against the banded grouping: one displacement surviving the first
        // trim carries enough leverage to expel the fitted subspace before
        // the plant is ever seen.
        if m > 0 {
            let radial = match crate::trim::radial_scores(&f0, &banded) {
                Ok(s) => s,
                Err(_) => continue,
            };
            let worst_displaced = (0..n)
                .filter(|&i| outlier_flags[i])
                .map(|i| radial.t[i])
                .fold(f64::INFINITY, f64::min);
            let best_clean = (0..n)
                .filter(|&i| !outlier_flags[i])
                .map(|i| radial.t[i])
                .fold(f64::NEG_INFINITY, f64::max);
            if worst_displaced <= best_clean {
                continue;
            }
        }
        ok = true;
        break 'attempts;
    }
    if !ok {
        return Err(Error::Degenerate(
            "no draw produced radially separable clusters; lower the cluster count, \
             tighten the noise, or raise the separation"
                .into(),
        ));
    }

    let x = &coords * basis.transpose();
    Ok(SyntheticData { x, labels, outlier_flags, centers, loadings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::orthonormality_defect;

    #[test]
    fn generation_is_deterministic() {
        let cfg = SynthConfig::new(40, 6, 3, 2).with_seed(123).with_outliers(0.1, 20.0);
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.outlier_flags, b.outlier_flags);
    }

    #[test]
    fn seeds_differ() {
        let cfg = SynthConfig::new(20, 4, 2, 1);
        let a = generate(&cfg.clone().with_seed(1)).unwrap();
        let b = generate(&cfg.with_seed(2)).unwrap();
        assert_ne!(a.x, b.x);
    }

    #[test]
    fn planted_basis_is_orthonormal() {
        let cfg = SynthConfig::new(30, 12, 3, 2).with_seed(5);
        let data = generate(&cfg).unwrap();
        assert!(orthonormality_defect(&data.loadings) <= 1e-10);
    }

    #[test]
    fn outlier_count_floors() {
        let cfg = SynthConfig::new(47, 5, 2, 1).with_seed(9).with_outliers(0.1, 15.0);
        let data = generate(&cfg).unwrap();
        assert_eq!(data.outlier_flags.iter().filter(|&&f| f).count(), 4);
    }

    #[test]
    fn centers_respect_separation() {
        let cfg = SynthConfig::new(10, 8, 4, 2).with_seed(77);
        let data = generate(&cfg).unwrap();
        for a in 0..4 {
            for b in (a + 1)..4 {
                let d = (data.centers.row(a) - data.centers.row(b)).norm();
                assert!(d >= cfg.separation, "centers {a},{b} at distance {d}");
            }
        }
    }

    #[test]
    fn subspace_holds_the_tight_directions() {
        // within-cluster spread projected on the planted basis must sit far
        // below the masking noise, otherwise nothing is recoverable
        let cfg = SynthConfig::new(200, 10, 3, 2).with_seed(21).with_noise(0.3);
        let data = generate(&cfg).unwrap();
        let f = &data.x * &data.loadings;
        let mut sub = 0.0;
        let mut total = 0.0;
        for k in 0..3 {
            let rows: Vec<usize> = (0..200).filter(|&i| data.labels[i] == k).collect();
            let m = rows.len() as f64;
            for j in 0..2 {
                let mean: f64 = rows.iter().map(|&i| f[(i, j)]).sum::<f64>() / m;
                sub += rows.iter().map(|&i| (f[(i, j)] - mean).powi(2)).sum::<f64>();
            }
            for j in 0..10 {
                let mean: f64 = rows.iter().map(|&i| data.x[(i, j)]).sum::<f64>() / m;
                total += rows.iter().map(|&i| (data.x[(i, j)] - mean).powi(2)).sum::<f64>();
            }
        }
        let per_sub = sub / 2.0;
        let per_mask = (total - sub) / 8.0;
        assert!(
            per_sub < 0.25 * per_mask,
            "subspace dispersion {per_sub} vs masking {per_mask}"
        );
    }

    #[test]
    fn displaced_rows_sit_far_out() {
        let cfg = SynthConfig::new(60, 10, 2, 2).with_seed(3).with_outliers(0.1, 40.0);
        let data = generate(&cfg).unwrap();
        let f = &data.x * &data.loadings;
        for i in 0..60 {
            let l = data.labels[i];
            let mut d = 0.0;
            for k in 0..2 {
                let diff = f[(i, k)] - data.centers[(l, k)];
                d += diff * diff;
            }
            if data.outlier_flags[i] {
                assert!(d.sqrt() > 20.0, "row {i} only {} away", d.sqrt());
            }
        }
    }
}
