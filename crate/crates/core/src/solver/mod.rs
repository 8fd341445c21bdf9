//! Solver configuration, run reports, and the unmixing objective.

pub mod dual;
pub mod primal;

use ndarray::{Array2, ArrayView2};

use crate::datamodel::{AbundanceMap, HyperCube, SpatialGrid, SpectralLibrary};
use crate::error::{Error, Result};
use crate::prox::Rho;
use crate::spatial::{apply_diff, apply_diff_adjoint, Boundary, DiffOpKind};
use crate::util::frob;

/// Strict upper bound for the dual step length `tau` (the golden ratio).
pub const TAU_UPPER: f64 = 1.618033988749895;

/// Parameters shared by both solvers.
#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    /// Sparsity weight.
    pub lambda: f64,
    /// Total-variation weight.
    pub lambda_tv: f64,
    /// Sparsity norm (entrywise or row groups).
    pub rho: Rho,
    /// Augmented-Lagrangian penalty.
    pub sigma: f64,
    /// Multiplier step length, strictly inside `(0, TAU_UPPER)`.
    pub tau: f64,
    /// KKT-residual stopping tolerance.
    pub tol1: f64,
    /// Successive-change stopping tolerance.
    pub tol2: f64,
    pub max_iter: usize,
    /// Boundary convention of the TV stencil (primal solver only; the dual
    /// solver is reflexive by construction).
    pub boundary: Boundary,
    /// Budget for the dual solver's linear-solve residuals, relative to
    /// `1 + ||rhs||_F`. Subproblems are solved exactly, so this is a
    /// roundoff guard rather than a real inexactness schedule.
    pub inexact_tol: f64,
}

impl SolverConfig {
    /// Defaults for the primal solver: `sigma = 0.05`, `tau = 1`,
    /// `tol1 = 1e-3`, `tol2 = 1e-4`, at most 200 iterations, periodic
    /// boundary.
    pub fn primal_defaults(lambda: f64, lambda_tv: f64) -> Self {
        Self {
            lambda,
            lambda_tv,
            rho: Rho::L1,
            sigma: 0.05,
            tau: 1.0,
            tol1: 1e-3,
            tol2: 1e-4,
            max_iter: 200,
            boundary: Boundary::Periodic,
            inexact_tol: 1e-8,
        }
    }

    /// Defaults for the dual solver: as the primal but capped at 50
    /// iterations and reflexive by construction.
    pub fn dual_defaults(lambda: f64, lambda_tv: f64) -> Self {
        Self {
            max_iter: 50,
            boundary: Boundary::Reflexive,
            ..Self::primal_defaults(lambda, lambda_tv)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::ConfigError(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.lambda_tv >= 0.0 && self.lambda_tv.is_finite()) {
            return Err(Error::ConfigError(format!(
                "lambda_tv must be >= 0, got {}",
                self.lambda_tv
            )));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::ConfigError(format!(
                "sigma must be > 0, got {}",
                self.sigma
            )));
        }
        if !(self.tau > 0.0 && self.tau < TAU_UPPER) {
            return Err(Error::ConfigError(format!(
                "tau must lie strictly inside (0, {TAU_UPPER}), got {}",
                self.tau
            )));
        }
        if !(self.tol1 > 0.0 && self.tol1.is_finite()) {
            return Err(Error::ConfigError(format!(
                "tol1 must be > 0, got {}",
                self.tol1
            )));
        }
        if !(self.tol2 > 0.0 && self.tol2.is_finite()) {
            return Err(Error::ConfigError(format!(
                "tol2 must be > 0, got {}",
                self.tol2
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::ConfigError("max_iter must be at least 1".into()));
        }
        if !(self.inexact_tol >= 0.0 && self.inexact_tol.is_finite()) {
            return Err(Error::ConfigError(format!(
                "inexact_tol must be >= 0, got {}",
                self.inexact_tol
            )));
        }
        Ok(())
    }
}

/// Why a solver run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Both KKT residuals fell below `tol1`.
    KktTol,
    /// The relative change of the abundance iterate fell below `tol2`.
    ChangeTol,
    /// The iteration cap was reached.
    MaxIter,
    /// A non-finite iterate was detected (reported through the error path).
    Diverged,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Termination::KktTol => "kkt-tol",
            Termination::ChangeTol => "change-tol",
            Termination::MaxIter => "max-iter",
            Termination::Diverged => "diverged",
        };
        f.write_str(s)
    }
}

/// One row of the per-iteration trace. The objective is evaluated at the
/// nonnegative projection of the current abundance iterate (raw iterates
/// may carry small negative entries before convergence).
#[derive(Debug, Clone, Copy)]
pub struct IterationRecord {
    pub iter: usize,
    pub r_p: f64,
    pub r_d: f64,
    pub error: f64,
    pub objective: f64,
    pub elapsed_s: f64,
}

/// Result of a solver run.
#[derive(Debug, Clone)]
pub struct UnmixReport {
    /// Final abundance iterate, as produced by the algorithm.
    pub x_hat: AbundanceMap,
    /// Nonnegative projection of `x_hat`; iterates are only asymptotically
    /// feasible, so comparisons against ground truth should use this map.
    pub x_hat_projected: AbundanceMap,
    pub trace: Vec<IterationRecord>,
    pub termination: Termination,
    pub iterations: usize,
}

/// Relative successive change with the zero conventions: 0 when both
/// iterates vanish, infinite when only the new one does.
pub(crate) fn relative_change(new: &ArrayView2<f64>, old: &ArrayView2<f64>) -> f64 {
    let num = frob(&(new - old).view());
    let den = frob(new);
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}

/// The two half-images of the stacked TV difference operator.
///
/// Under the periodic convention both halves are `m x n` (the vertical
/// concatenation is the `2m x n` stacked operator); under the reflexive
/// convention the halves shrink to `m x (n - n_c)` and `m x (n - n_r)`.
#[derive(Debug, Clone)]
pub struct TvStack {
    /// Horizontal differences (`PeriodicHorizontal` or
    /// `ReflexiveWithinColumns`).
    pub h: Array2<f64>,
    /// Vertical differences (`PeriodicVertical` or
    /// `ReflexiveAcrossColumns`).
    pub v: Array2<f64>,
}

fn stack_ops(boundary: Boundary) -> (DiffOpKind, DiffOpKind) {
    match boundary {
        Boundary::Periodic => (DiffOpKind::PeriodicHorizontal, DiffOpKind::PeriodicVertical),
        Boundary::Reflexive => (
            DiffOpKind::ReflexiveWithinColumns,
            DiffOpKind::ReflexiveAcrossColumns,
        ),
    }
}

impl TvStack {
    pub fn zeros(m: usize, grid: SpatialGrid, boundary: Boundary) -> Self {
        let (oph, opv) = stack_ops(boundary);
        Self {
            h: Array2::zeros(oph.output_shape(m, grid)),
            v: Array2::zeros(opv.output_shape(m, grid)),
        }
    }

    /// Applies the stacked difference operator to `x`.
    pub fn apply(x: &ArrayView2<f64>, grid: SpatialGrid, boundary: Boundary) -> Result<Self> {
        let (oph, opv) = stack_ops(boundary);
        Ok(Self {
            h: apply_diff(oph, x, grid)?,
            v: apply_diff(opv, x, grid)?,
        })
    }

    /// Adjoint of the stacked operator.
    pub fn apply_adjoint(&self, grid: SpatialGrid, boundary: Boundary) -> Result<Array2<f64>> {
        let (oph, opv) = stack_ops(boundary);
        let mut out = apply_diff_adjoint(oph, &self.h.view(), grid)?;
        out += &apply_diff_adjoint(opv, &self.v.view(), grid)?;
        Ok(out)
    }

    pub fn frob(&self) -> f64 {
        (self.h.iter().map(|v| v * v).sum::<f64>() + self.v.iter().map(|v| v * v).sum::<f64>())
            .sqrt()
    }

    pub fn abs_sum(&self) -> f64 {
        self.h.iter().map(|v| v.abs()).sum::<f64>()
            + self.v.iter().map(|v| v.abs()).sum::<f64>()
    }

    pub(crate) fn map2(&self, other: &Self, f: impl Fn(f64, f64) -> f64 + Copy) -> Self {
        let mut h = self.h.clone();
        h.zip_mut_with(&other.h, |a, &b| *a = f(*a, b));
        let mut v = self.v.clone();
        v.zip_mut_with(&other.v, |a, &b| *a = f(*a, b));
        Self { h, v }
    }

    pub(crate) fn is_finite(&self) -> bool {
        self.h.iter().all(|v| v.is_finite()) && self.v.iter().all(|v| v.is_finite())
    }
}

/// Value of the regularized unmixing objective at `x`:
/// `0.5 ||A X - Y||_F^2 + lambda ||X||_{rho,1} + lambda_tv * TV(X)` plus the
/// nonnegativity indicator. The TV term follows the chosen boundary
/// convention. Entries below `-1e-12` make the value infinite; tinier
/// negatives are clamped before evaluation.
pub fn objective(
    x: &AbundanceMap,
    y: &HyperCube,
    a: &SpectralLibrary,
    lambda: f64,
    lambda_tv: f64,
    rho: Rho,
    boundary: Boundary,
) -> f64 {
    let xm = x.data();
    if xm.iter().any(|&v| v < -1e-12) {
        return f64::INFINITY;
    }
    let clamped = xm.mapv(|v| v.max(0.0));
    let resid = &a.matrix().dot(&clamped) - y.data();
    let fit = 0.5 * resid.iter().map(|v| v * v).sum::<f64>();
    let sparsity = match rho {
        Rho::L1 => clamped.iter().map(|v| v.abs()).sum::<f64>(),
        Rho::L21 => clamped
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
            .sum::<f64>(),
    };
    let tv = TvStack::apply(&clamped.view(), x.grid(), boundary)
        .expect("shape checked by AbundanceMap")
        .abs_sum();
    fit + lambda * sparsity + lambda_tv * tv
}
