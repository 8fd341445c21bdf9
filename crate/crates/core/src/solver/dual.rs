//! Dual symmetric Gauss-Seidel ADMM.
//!
//! Works on the dual of the slack-variable reformulation, with blocks
//! `(V1, V3)` handled by a symmetric sweep (solve for `V3`, update `V1`,
//! re-solve for `V3`) and `V2` by a closed-form conjugate prox. The
//! multiplier of the dual constraint is the primal abundance matrix, so the
//! solver's multiplier iterate *is* the unmixing estimate.
//!
//! Both linear solves per iteration share one cached factorization of
//! `I + sigma * A * A^T`. Conjugate proxes come from the Moreau identity;
//! the composed prox splits into 1D TV denoising, a nonnegative projection,
//! and a sparsity shrinkage.

use std::time::Instant;

use ndarray::Array2;

use crate::datamodel::{AbundanceMap, HyperCube, SpectralLibrary};
use crate::error::{Error, Result};
use crate::linsolve::{factor_dual_gram, solve_factored, SpdFactorization};
use crate::prox::{prox_horizontal_tv, prox_p, ProxSpec};
use crate::util::{all_finite, frob, max_abs};

use super::{
    objective, relative_change, IterationRecord, SolverConfig, Termination, UnmixReport,
};

/// Full iterate of the dual solver.
#[derive(Debug, Clone)]
pub struct DualState {
    /// Dual block paired with the sparsity-plus-TV prox, `m x n`.
    pub v1: Array2<f64>,
    /// Dual block paired with the within-column TV prox, `m x n`.
    pub v2: Array2<f64>,
    /// Dual block of the data fit, `L x n`.
    pub v3: Array2<f64>,
    /// Multiplier of the dual constraint: the primal abundances, `m x n`.
    pub x: Array2<f64>,
    /// Previous multiplier, kept for the successive-change criterion.
    pub x_prev: Array2<f64>,
    pub iter: usize,
    /// `||grad L||_F` after the first half-sweep solve (roundoff-sized).
    pub delta_hat_norm: f64,
    /// `||grad L||_F` after the second solve.
    pub delta_norm: f64,
    /// `||rhs||_F` of the first solve, the scale for `delta_hat_norm`.
    pub rhs_hat_norm: f64,
    /// `||rhs||_F` of the second solve.
    pub rhs_norm: f64,
}

impl DualState {
    pub fn zeros(l: usize, m: usize, n: usize) -> Self {
        Self {
            v1: Array2::zeros((m, n)),
            v2: Array2::zeros((m, n)),
            v3: Array2::zeros((l, n)),
            x: Array2::zeros((m, n)),
            x_prev: Array2::zeros((m, n)),
            iter: 0,
            delta_hat_norm: 0.0,
            delta_norm: 0.0,
            rhs_hat_norm: 0.0,
            rhs_norm: 0.0,
        }
    }

    fn is_finite(&self) -> bool {
        all_finite(&self.v1.view())
            && all_finite(&self.v2.view())
            && all_finite(&self.v3.view())
            && all_finite(&self.x.view())
    }
}

/// Precomputed problem context shared across iterations.
pub struct DualProblem<'a> {
    y: &'a HyperCube,
    a: &'a SpectralLibrary,
    at: Array2<f64>,
    factor: SpdFactorization,
    norm_a: f64,
    norm_y: f64,
}

impl<'a> DualProblem<'a> {
    pub fn new(y: &'a HyperCube, a: &'a SpectralLibrary, sigma: f64) -> Result<Self> {
        if y.n_bands() != a.n_bands() {
            return Err(Error::DimensionMismatch(format!(
                "cube has {} bands, library has {}",
                y.n_bands(),
                a.n_bands()
            )));
        }
        let mut at = Array2::zeros((a.n_signatures(), a.n_bands()));
        at.assign(&a.matrix().t());
        Ok(Self {
            y,
            a,
            at,
            factor: factor_dual_gram(a, sigma)?,
            norm_a: frob(&a.matrix().view()),
            norm_y: frob(&y.data().view()),
        })
    }
}

/// One sGS-ADMM iteration: half-sweep solve, `V1` prox, second solve, `V2`
/// prox, multiplier step.
pub fn dual_step(state: &mut DualState, prob: &DualProblem, cfg: &SolverConfig) -> Result<()> {
    let sigma = cfg.sigma;
    let a = prob.a.matrix();
    let y = prob.y.data();
    let grid = prob.y.grid();
    let spec = ProxSpec::new(cfg.lambda, cfg.lambda_tv, cfg.rho, sigma)?;

    let ax = a.dot(&state.x);
    let av2 = a.dot(&state.v2);

    // First half-sweep: solve (I + sigma A A^T) V3 = Y - sigma A V1 - sigma A V2 - A X.
    let av1 = a.dot(&state.v1);
    let rhs_hat = y - &(sigma * &av1) - (sigma * &av2) - &ax;
    let v3_hat = solve_factored(&prob.factor, &rhs_hat.view())?;
    let atv3_hat = prob.at.dot(&v3_hat);
    let grad_hat = &v3_hat + &(sigma * &a.dot(&atv3_hat)) - &rhs_hat;
    state.delta_hat_norm = frob(&grad_hat.view());
    state.rhs_hat_norm = frob(&rhs_hat.view());

    // V1 through the Moreau identity against the composed prox.
    let c1 = &state.v2 + &atv3_hat + &(&state.x / sigma);
    let p1 = prox_p(&c1.mapv(|v| v * sigma).view(), &spec, grid)?;
    let v1 = &p1 / sigma - &c1;
    debug_assert!({
        let resid = (&v1 + &c1 - &(&p1 / sigma)).mapv(f64::abs);
        max_abs(&resid.view()) <= 1e-12 * (1.0 + max_abs(&p1.view()))
    });

    // Second half-sweep with the fresh V1.
    let av1 = a.dot(&v1);
    let rhs = y - &(sigma * &av1) - (sigma * &av2) - &ax;
    let v3 = solve_factored(&prob.factor, &rhs.view())?;
    let atv3 = prob.at.dot(&v3);
    let grad = &v3 + &(sigma * &a.dot(&atv3)) - &rhs;
    state.delta_norm = frob(&grad.view());
    state.rhs_norm = frob(&rhs.view());

    // V2 through the Moreau identity against the within-column TV prox.
    let c2 = &v1 + &atv3 + &(&state.x / sigma);
    let q2 = prox_horizontal_tv(
        &c2.mapv(|v| v * sigma).view(),
        sigma * cfg.lambda_tv,
        grid,
    )?;
    let v2 = &q2 / sigma - &c2;

    // Multiplier ascent; the step direction is the dual constraint residual.
    let dir = &v1 + &v2 + &atv3;
    let x_new = &state.x + &(cfg.tau * sigma * &dir);
    state.x_prev = std::mem::replace(&mut state.x, x_new);
    state.v1 = v1;
    state.v2 = v2;
    state.v3 = v3;
    state.iter += 1;
    Ok(())
}

/// KKT residuals of the dual formulation: primal feasibility of the
/// reconstructed slack (`R_P`), dual-constraint feasibility (`R_D`), and the
/// relative successive change of the multiplier.
///
/// At any optimal point the data-fit slack coincides with `-V3`, so primal
/// feasibility is measured as `||A X - Y + V3||_F / (1 + ||Y||_F)`.
pub fn dual_kkt_residuals(
    state: &DualState,
    a: &SpectralLibrary,
    y: &HyperCube,
) -> (f64, f64, f64) {
    let am = a.matrix();
    let r_p = frob(&(&am.dot(&state.x) - y.data() + &state.v3).view())
        / (1.0 + frob(&y.data().view()));
    let r_d = frob(&(&state.v1 + &state.v2 + &am.t().dot(&state.v3)).view())
        / (1.0 + frob(&am.view()));
    let err = relative_change(&state.x.view(), &state.x_prev.view());
    (r_p, r_d, err)
}

/// Runs the dual sGS-ADMM from a cold start until a stopping rule fires.
///
/// The configured boundary is ignored: this solver is tied to the reflexive
/// convention by the structure of its proxes.
pub fn dual_sgs_admm(
    y: &HyperCube,
    a: &SpectralLibrary,
    cfg: &SolverConfig,
) -> Result<UnmixReport> {
    cfg.validate()?;
    let prob = DualProblem::new(y, a, cfg.sigma)?;
    let grid = y.grid();
    let mut state = DualState::zeros(a.n_bands(), a.n_signatures(), grid.n_pixels());

    let start = Instant::now();
    let mut trace = Vec::new();
    let mut termination = Termination::MaxIter;
    for k in 1..=cfg.max_iter {
        dual_step(&mut state, &prob, cfg)?;
        if !state.is_finite() {
            return Err(Error::Diverged {
                iter: k,
                what: "non-finite iterate".into(),
            });
        }
        if state.delta_hat_norm > cfg.inexact_tol * (1.0 + state.rhs_hat_norm)
            || state.delta_norm > cfg.inexact_tol * (1.0 + state.rhs_norm)
        {
            return Err(Error::Diverged {
                iter: k,
                what: format!(
                    "linear-solve residual {:.3e} exceeds the inexactness budget",
                    state.delta_hat_norm.max(state.delta_norm)
                ),
            });
        }
        let r_d = frob(&(&state.x - &state.x_prev).view()) / (cfg.tau * cfg.sigma)
            / (1.0 + prob.norm_a);
        let r_p = frob(&(&a.matrix().dot(&state.x) - y.data() + &state.v3).view())
            / (1.0 + prob.norm_y);
        let err = relative_change(&state.x.view(), &state.x_prev.view());
        let x_proj = AbundanceMap::new(state.x.mapv(|v| v.max(0.0)), grid)?;
        let obj = objective(
            &x_proj,
            y,
            a,
            cfg.lambda,
            cfg.lambda_tv,
            cfg.rho,
            crate::spatial::Boundary::Reflexive,
        );
        trace.push(IterationRecord {
            iter: k,
            r_p,
            r_d,
            error: err,
            objective: obj,
            elapsed_s: start.elapsed().as_secs_f64(),
        });
        if r_p < cfg.tol1 && r_d < cfg.tol1 {
            termination = Termination::KktTol;
            break;
        }
        if err < cfg.tol2 {
            termination = Termination::ChangeTol;
            break;
        }
    }

    let iterations = trace.len();
    let x_hat = AbundanceMap::new(state.x.clone(), grid)?;
    let x_hat_projected = x_hat.projected();
    Ok(UnmixReport {
        x_hat,
        x_hat_projected,
        trace,
        termination,
        iterations,
    })
}
