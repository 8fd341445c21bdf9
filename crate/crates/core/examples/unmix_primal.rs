//! End-to-end primal ADMM run with the periodic-boundary TV stencil.
//!
//!     cargo run --release --example unmix_primal

use hsunmix::datagen::{add_noise, gen_abundances_dc1, gen_library, NoiseSpec};
use hsunmix::datamodel::{HyperCube, SpatialGrid};
use hsunmix::metrics::{evaluate, DEFAULT_SUCCESS_THRESHOLD};
use hsunmix::solver::primal::primal_admm;
use hsunmix::solver::SolverConfig;

fn main() {
    let (n_r, n_c, bands, signatures, endmembers) = (20, 20, 50, 60, 5);
    let seed = 7;
    let grid = SpatialGrid::new(n_r, n_c).unwrap();
    let library = gen_library(bands, signatures, 0.95, seed).unwrap();
    let (truth, _) = gen_abundances_dc1(grid, &library, endmembers, seed).unwrap();
    let clean = HyperCube::from_matrix(library.matrix().dot(truth.data()), n_r, n_c).unwrap();
    let cube = add_noise(&clean, &NoiseSpec::white(30.0, seed)).unwrap();

    let mut cfg = SolverConfig::primal_defaults(0.005, 0.01);
    cfg.sigma = 0.5;
    let report = primal_admm(&cube, &library, &cfg).unwrap();

    println!(
        "terminated: {} after {} iterations (cap {})",
        report.termination, report.iterations, cfg.max_iter
    );
    for rec in report.trace.iter().step_by(20) {
        println!(
            "  iter {:4}  r_p {:9.3e}  r_d {:9.3e}  obj {:12.6}",
            rec.iter, rec.r_p, rec.r_d, rec.objective
        );
    }
    let result = evaluate(&truth, &report.x_hat_projected, DEFAULT_SUCCESS_THRESHOLD).unwrap();
    println!("SRE: {:.4} dB   p_s: {:.4}", result.sre_db, result.p_s);
}
