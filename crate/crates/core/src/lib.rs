//! Sparse hyperspectral unmixing with total-variation regularization.
//!
//! Observed pixel spectra are modeled as nonnegative mixtures of library
//! signatures; unmixing recovers the per-pixel abundances by minimizing a
//! least-squares fit plus an entrywise or row-group sparsity norm and a
//! nonisotropic total-variation penalty over the pixel grid. Two convergent
//! solvers are provided:
//!
//! * [`solver::primal::primal_admm`] — a two-block ADMM on the
//!   variable-splitting reformulation, with a periodic-boundary TV stencil
//!   solved in the frequency domain (a reflexive dense fallback exists for
//!   small grids);
//! * [`solver::dual::dual_sgs_admm`] — a symmetric Gauss-Seidel ADMM on the
//!   dual problem, built from cached Cholesky solves and closed-form
//!   conjugate proxes under the reflexive boundary convention.
//!
//! Supporting modules supply the proximal calculus ([`prox`], including a
//! direct 1D total-variation scan), structured linear solvers
//! ([`linsolve`]), synthetic data generation ([`datagen`]), evaluation
//! metrics ([`metrics`]), and file formats plus a command-line interface
//! ([`io`], [`cli`]).
//!
//! # Examples
//!
//! Each major capability has a runnable example:
//!
//! ```text
//! cargo run --example generate_cube        # synthetic library + cube
//! cargo run --example tv_denoise           # direct 1D TV and band proxes
//! cargo run --example unmix_dual           # dual sGS-ADMM end to end
//! cargo run --example unmix_primal         # primal ADMM end to end
//! cargo run --example cross_check_solvers  # both solvers, same objective
//! cargo run --example sweep_lambda         # small regularization sweep
//! ```
//!
//! The thin `hsunmix` binary wraps the same functionality as the
//! `gen-data`, `unmix`, `eval` and `sweep` subcommands.

pub mod cli;
pub mod datagen;
pub mod datamodel;
pub mod error;
pub mod io;
pub mod linsolve;
pub mod metrics;
pub mod prox;
pub mod solver;
pub mod spatial;
mod threads;
mod util;

pub use datamodel::{AbundanceMap, HyperCube, SpatialGrid, SpectralLibrary};
pub use error::{Error, Result};
