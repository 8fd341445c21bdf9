//! Primal ADMM on the variable-splitting reformulation of the TV-regularized
//! unmixing problem.
//!
//! The splitting introduces one block per objective term: `D1` carries the
//! data fit, `D2` the sparsity prox, `D3` the TV coupling, `D4` the stacked
//! differences, and `D5` the nonnegativity projection, all tied back to the
//! abundance block through equality constraints. Each iteration minimizes
//! (D1, D2, D3, D5) jointly given the coupling block, then the coupling
//! block (abundances, D4), then takes a multiplier step of length
//! `tau * sigma`.

use std::time::Instant;

use ndarray::Array2;

use crate::datamodel::{AbundanceMap, HyperCube, SpatialGrid, SpectralLibrary};
use crate::error::{Error, Result};
use crate::linsolve::{factor_primal_gram, solve_factored, ShiftedLaplacianSolver};
use crate::prox::{group_shrink_rows, project_nonnegative, soft_threshold, Rho};
use crate::spatial::Boundary;
use crate::util::{all_finite, frob};

use super::{
    objective, relative_change, IterationRecord, SolverConfig, Termination, TvStack, UnmixReport,
};

/// Full iterate of the primal solver.
#[derive(Debug, Clone)]
pub struct PrimalState {
    /// Coupling block (the abundance estimate), `m x n`.
    pub d_tilde: Array2<f64>,
    /// Previous coupling block, kept for the successive-change criterion.
    pub d_tilde_prev: Array2<f64>,
    /// Data-fit block, `L x n`.
    pub d1: Array2<f64>,
    /// Sparsity block, `m x n`.
    pub d2: Array2<f64>,
    /// TV-coupled block, `m x n`.
    pub d3: Array2<f64>,
    /// Stacked differences of `d3`.
    pub d4: TvStack,
    /// Nonnegativity block, `m x n`.
    pub d5: Array2<f64>,
    pub lambda1: Array2<f64>,
    pub lambda2: Array2<f64>,
    pub lambda3: Array2<f64>,
    pub lambda4: TvStack,
    pub lambda5: Array2<f64>,
    pub iter: usize,
}

impl PrimalState {
    /// All-zero cold start.
    pub fn zeros(l: usize, m: usize, grid: SpatialGrid, boundary: Boundary) -> Self {
        let n = grid.n_pixels();
        Self {
            d_tilde: Array2::zeros((m, n)),
            d_tilde_prev: Array2::zeros((m, n)),
            d1: Array2::zeros((l, n)),
            d2: Array2::zeros((m, n)),
            d3: Array2::zeros((m, n)),
            d4: TvStack::zeros(m, grid, boundary),
            d5: Array2::zeros((m, n)),
            lambda1: Array2::zeros((l, n)),
            lambda2: Array2::zeros((m, n)),
            lambda3: Array2::zeros((m, n)),
            lambda4: TvStack::zeros(m, grid, boundary),
            lambda5: Array2::zeros((m, n)),
            iter: 0,
        }
    }

    fn is_finite(&self) -> bool {
        all_finite(&self.d_tilde.view())
            && all_finite(&self.d1.view())
            && all_finite(&self.d2.view())
            && all_finite(&self.d3.view())
            && self.d4.is_finite()
            && all_finite(&self.d5.view())
            && all_finite(&self.lambda1.view())
            && all_finite(&self.lambda2.view())
            && all_finite(&self.lambda3.view())
            && self.lambda4.is_finite()
            && all_finite(&self.lambda5.view())
    }
}

/// Precomputed problem context shared across iterations.
pub struct PrimalProblem<'a> {
    y: &'a HyperCube,
    a: &'a SpectralLibrary,
    at: Array2<f64>,
    grid: SpatialGrid,
    boundary: Boundary,
    gram: crate::linsolve::SpdFactorization,
    laplacian: ShiftedLaplacianSolver,
}

impl<'a> PrimalProblem<'a> {
    pub fn new(y: &'a HyperCube, a: &'a SpectralLibrary, boundary: Boundary) -> Result<Self> {
        if y.n_bands() != a.n_bands() {
            return Err(Error::DimensionMismatch(format!(
                "cube has {} bands, library has {}",
                y.n_bands(),
                a.n_bands()
            )));
        }
        let grid = y.grid();
        let mut at = Array2::zeros((a.n_signatures(), a.n_bands()));
        at.assign(&a.matrix().t());
        Ok(Self {
            y,
            a,
            at,
            grid,
            boundary,
            gram: factor_primal_gram(a)?,
            laplacian: ShiftedLaplacianSolver::new(grid, boundary)?,
        })
    }
}

/// One full ADMM sweep: block minimizations followed by the multiplier step.
pub fn primal_step(state: &mut PrimalState, prob: &PrimalProblem, cfg: &SolverConfig) -> Result<()> {
    let sigma = cfg.sigma;
    let a = prob.a.matrix();
    let y = prob.y.data();

    // First block, given the coupling variables and multipliers.
    let ad_tilde = a.dot(&state.d_tilde);
    let d1 = (y + &(sigma * &ad_tilde) - &state.lambda1) / (1.0 + sigma);
    let t2 = &state.d_tilde - &(&state.lambda2 / sigma);
    let d2 = match cfg.rho {
        Rho::L1 => soft_threshold(&t2.view(), cfg.lambda / sigma)?,
        Rho::L21 => group_shrink_rows(&t2.view(), cfg.lambda / sigma)?,
    };
    let shifted_d4 = state.d4.map2(&state.lambda4, |d, l| d - l / sigma);
    let rhs3 = &state.d_tilde - &(&state.lambda3 / sigma)
        + shifted_d4.apply_adjoint(prob.grid, prob.boundary)?;
    let d3 = prob.laplacian.solve(&rhs3.view())?;
    let t5 = &state.d_tilde - &(&state.lambda5 / sigma);
    let d5 = project_nonnegative(&t5.view());

    // Second block, given the fresh first block.
    let rhs_tilde = prob.at.dot(&(&d1 + &(&state.lambda1 / sigma)))
        + (&d2 + &(&state.lambda2 / sigma))
        + (&d3 + &(&state.lambda3 / sigma))
        + (&d5 + &(&state.lambda5 / sigma));
    let d_tilde = solve_factored(&prob.gram, &rhs_tilde.view())?;
    let hd3 = TvStack::apply(&d3.view(), prob.grid, prob.boundary)?;
    let shifted_hd3 = hd3.map2(&state.lambda4, |h, l| h + l / sigma);
    let kappa_tv = cfg.lambda_tv / sigma;
    let d4 = TvStack {
        h: soft_threshold(&shifted_hd3.h.view(), kappa_tv)?,
        v: soft_threshold(&shifted_hd3.v.view(), kappa_tv)?,
    };

    // Multiplier ascent on the constraint residuals.
    let step = cfg.tau * sigma;
    let ad_new = a.dot(&d_tilde);
    state.lambda1 -= &((&ad_new - &d1) * step);
    state.lambda2 -= &((&d_tilde - &d2) * step);
    state.lambda3 -= &((&d_tilde - &d3) * step);
    state.lambda4 = state
        .lambda4
        .map2(&d4.map2(&hd3, |d, h| d - h), |l, r| l - step * r);
    state.lambda5 -= &((&d_tilde - &d5) * step);

    state.d_tilde_prev = std::mem::replace(&mut state.d_tilde, d_tilde);
    state.d1 = d1;
    state.d2 = d2;
    state.d3 = d3;
    state.d4 = d4;
    state.d5 = d5;
    state.iter += 1;
    Ok(())
}

/// KKT residuals of the primal splitting at the current state:
/// primal feasibility `R_P`, dual feasibility `R_D`, and the relative
/// successive change of the coupling block.
pub fn primal_kkt_residuals(
    state: &PrimalState,
    a: &SpectralLibrary,
    grid: SpatialGrid,
    boundary: Boundary,
) -> (f64, f64, f64) {
    let am = a.matrix();
    let norm_a = frob(&am.view());
    let hd3 = TvStack::apply(&state.d3.view(), grid, boundary).expect("state shapes valid");

    let r_p = (frob(&(&state.d1 - &am.dot(&state.d_tilde)).view())
        + frob(&(&state.d2 - &state.d_tilde).view())
        + frob(&(&state.d3 - &state.d_tilde).view())
        + state.d4.map2(&hd3, |d, h| d - h).frob()
        + frob(&(&state.d5 - &state.d_tilde).view()))
        / (1.0 + norm_a);

    let ht_l4 = state
        .lambda4
        .apply_adjoint(grid, boundary)
        .expect("state shapes valid");
    let stationarity = am.t().dot(&state.lambda1) + &state.lambda2 + &state.lambda3 + &state.lambda5;
    let r_d = (frob(&stationarity.view()) + frob(&(&state.lambda3 - &ht_l4).view())) / (1.0 + norm_a);

    let err = relative_change(&state.d_tilde.view(), &state.d_tilde_prev.view());
    (r_p, r_d, err)
}

/// Runs the primal ADMM from a cold start until a stopping rule fires.
pub fn primal_admm(
    y: &HyperCube,
    a: &SpectralLibrary,
    cfg: &SolverConfig,
) -> Result<UnmixReport> {
    cfg.validate()?;
    let prob = PrimalProblem::new(y, a, cfg.boundary)?;
    let grid = y.grid();
    let mut state = PrimalState::zeros(a.n_bands(), a.n_signatures(), grid, cfg.boundary);

    let start = Instant::now();
    let mut trace = Vec::new();
    let mut termination = Termination::MaxIter;
    for k in 1..=cfg.max_iter {
        primal_step(&mut state, &prob, cfg)?;
        if !state.is_finite() {
            return Err(Error::Diverged {
                iter: k,
                what: "non-finite iterate".into(),
            });
        }
        let (r_p, r_d, err) = primal_kkt_residuals(&state, a, grid, cfg.boundary);
        let x_proj = AbundanceMap::new(state.d_tilde.mapv(|v| v.max(0.0)), grid)?;
        let obj = objective(&x_proj, y, a, cfg.lambda, cfg.lambda_tv, cfg.rho, cfg.boundary);
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
    let x_hat = AbundanceMap::new(state.d_tilde.clone(), grid)?;
    let x_hat_projected = x_hat.projected();
    Ok(UnmixReport {
        x_hat,
        x_hat_projected,
        trace,
        termination,
        iterations,
    })
}
