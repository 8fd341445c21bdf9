//! Strong-duality cross-check: the primal ADMM (reflexive stencil) and the
//! dual sGS-ADMM minimize the same objective, so tightly converged runs
//! must agree on its optimal value.
//!
//!     cargo run --release --example cross_check_solvers

use hsunmix::datagen::{gen_abundances_dc1, gen_library};
use hsunmix::datamodel::{HyperCube, SpatialGrid};
use hsunmix::prox::Rho;
use hsunmix::solver::dual::dual_sgs_admm;
use hsunmix::solver::primal::primal_admm;
use hsunmix::solver::{objective, SolverConfig};
use hsunmix::spatial::Boundary;

fn main() {
    let (n_r, n_c, bands, signatures, endmembers) = (6, 6, 20, 25, 3);
    let seed = 42;
    let grid = SpatialGrid::new(n_r, n_c).unwrap();
    let library = gen_library(bands, signatures, 0.95, seed).unwrap();
    let (truth, _) = gen_abundances_dc1(grid, &library, endmembers, seed).unwrap();
    let cube = HyperCube::from_matrix(library.matrix().dot(truth.data()), n_r, n_c).unwrap();

    let (lambda, lambda_tv) = (0.01, 0.01);
    let mut pcfg = SolverConfig::primal_defaults(lambda, lambda_tv);
    pcfg.boundary = Boundary::Reflexive;
    pcfg.sigma = 0.5;
    pcfg.tol1 = 1e-6;
    pcfg.tol2 = 1e-13;
    pcfg.max_iter = 5000;
    let primal = primal_admm(&cube, &library, &pcfg).unwrap();

    let mut dcfg = SolverConfig::dual_defaults(lambda, lambda_tv);
    dcfg.sigma = 0.5;
    dcfg.tol1 = 1e-6;
    dcfg.tol2 = 1e-13;
    dcfg.max_iter = 5000;
    let dual = dual_sgs_admm(&cube, &library, &dcfg).unwrap();

    let score = |x: &hsunmix::datamodel::AbundanceMap| {
        objective(x, &cube, &library, lambda, lambda_tv, Rho::L1, Boundary::Reflexive)
    };
    let op = score(&primal.x_hat_projected);
    let od = score(&dual.x_hat_projected);
    println!(
        "primal: {} after {} iterations, objective {op:.10}",
        primal.termination, primal.iterations
    );
    println!(
        "dual:   {} after {} iterations, objective {od:.10}",
        dual.termination, dual.iterations
    );
    println!("relative gap: {:.3e}", (op - od).abs() / (1.0 + op.abs()));
}
