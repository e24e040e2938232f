//! Numerical toolkit for the Brezis-Nirenberg problem on 3-D domains:
//!
//! ```text
//!   -Delta u - lambda u = |u|^{2*-2} u   in Omega,    u = 0 on the boundary,
//! ```
//!
//! with the critical Sobolev exponent `2* = 2n/(n-2)` (= 6 for n = 3).
//! Least-energy solutions are found by minimizing the principal generalized
//! eigenvalue
//!
//! ```text
//!   mu_k(u) = inf_{dim V = k} max_{v in V}
//!             (int |grad v|^2 - lambda v^2) / (int u^{2*-2} v^2)
//! ```
//!
//! over positive weights `u` with unit `2*`-norm, where `k` is the principal
//! index attached to the spectral interval containing `lambda`.
//!
//! Modules:
//! - [`mesh`]: second-order lumped-mass finite differences on the radial unit
//!   ball and on 3-D boxes (cell-centered grids, Dirichlet elimination).
//! - [`spectral`]: Dirichlet spectra with multiplicity clustering and the
//!   weighted eigenvalue pencil `(A - lambda M) phi = mu B_u phi`.
//! - [`relaxopt`]: the epsilon-relaxed functional, its Euler-Lagrange fixed
//!   point map, damped minimization and schedule continuation.
//! - [`greenmass`]: Green columns, the regular part of the Green function
//!   (mass), mass thresholds, and deflated masses at eigenvalues.
//! - [`analysis`]: Sobolev-constant oracle, coercive cross-checks, energy
//!   sweeps, second-order expansion checks, bubble test families and the
//!   bifurcation diagnostic.

pub mod analysis;
pub mod error;
pub mod greenmass;
pub mod linalg;
pub mod mesh;
pub mod relaxopt;
pub mod spectral;
pub mod tol;

mod sobolev;

pub use error::{CoreError, Result};
