//! Trimmed factorial k-means.
//!
//! Factorial k-means clusters observations and reduces dimensionality at the
//! same time: it looks for a column-orthonormal projection `A` (p x r) and a
//! partition of the rows such that the projected observations `XA` sit close
//! to their cluster centroids. The objective is
//!
//! ```text
//! F(A, U, Ybar) = || XA - U Ybar ||^2
//! ```
//!
//! where `U` is the binary membership matrix and `Ybar` holds the centroids of
//! the factor scores. Because the projection is estimated jointly with the
//! partition, the retained directions are the discriminative ones, not merely
//! the high-variance ones a PCA-then-cluster pipeline would pick.
//!
//! The trimmed variant hardens the alternating least squares loop against
//! radial outliers: at every iteration each row gets a Mahalanobis-type score
//! in the factor space and the `floor(alpha * n)` most extreme rows are set
//! aside, excluded from the projection and centroid updates, and re-scored on
//! the next pass.
//!
//! The crate is organised around that loop:
//!
//! * [`prep`]: ratio standardization, sparsity filtering, importance-based
//!   pruning of near-duplicate variables, winsorization.
//! * [`fkm`]: the alternating least squares engine with multi-start
//!   initialization.
//! * [`trim`]: radial scores and outlier flagging.
//! * [`select`]: Hartigan's statistic over a grid of cluster counts, rank
//!   selection from centroid singular values, trimming-level selection.
//! * [`regress`]: OLS, country fixed effects, a within-group share instrument
//!   with two-stage least squares, backward stepwise selection, and VIF
//!   diagnostics, all with cluster-robust covariance.
//! * [`synth`]: a seeded generator of planted-cluster datasets used by the
//!   validation suite.
//!
//! Everything is deterministic given a single 64-bit seed; see [`seed`].
//!
//! ```
//! use nalgebra::DMatrix;
//! use tfkm::fkm::{run, FkmConfig};
//!
//! // Two blobs, tight along the first coordinate; the other coordinates
//! // carry loose noise that no two-group split can squeeze.
//! let mut rows = Vec::new();
//! for i in 0..12 {
//!     let t = i as f64;
//!     let base = if i < 4 { -2.0 } else { 6.0 };
//!     rows.push([base + 0.01 * (7.3 * t).sin(), (2.3 * t).sin(), (1.7 * t).cos()]);
//! }
//! let x = DMatrix::from_fn(12, 3, |i, j| rows[i][j]);
//!
//! let cfg = FkmConfig::new(2, 1).with_seed(11).with_restarts(4);
//! let sol = run(&x, &cfg).unwrap();
//! let labels = sol.membership.labels();
//! assert_eq!(labels[0], labels[3]);
//! assert_eq!(labels[4], labels[11]);
//! assert_ne!(labels[0], labels[4]);
//! ```

pub mod error;
pub mod fkm;
mod linalg;
pub mod metrics;
pub mod prep;
pub mod regress;
pub mod seed;
pub mod select;
pub mod synth;
pub mod trim;

pub use error::{Error, Result};
pub use fkm::{FkmConfig, FkmSolution, Loadings, Membership};
pub use prep::{RawMatrix, StandardizedMatrix, VariableCatalog};
