//! Small regularization sweep on a toy instance.
//!
//! The `hsunmix sweep` subcommand walks the full 10x10 grid; this demo uses
//! a 3x4 subset to stay fast under the dev profile.
//!
//!     cargo run --release --example sweep_lambda

use hsunmix::datagen::{add_noise, gen_abundances_dc1, gen_library, NoiseSpec};
use hsunmix::datamodel::{HyperCube, SpatialGrid};
use hsunmix::metrics::sre_db;
use hsunmix::solver::dual::dual_sgs_admm;
use hsunmix::solver::SolverConfig;

fn main() {
    let (n_r, n_c, bands, signatures, endmembers) = (10, 10, 30, 20, 3);
    let seed = 3;
    let grid = SpatialGrid::new(n_r, n_c).unwrap();
    let library = gen_library(bands, signatures, 0.95, seed).unwrap();
    let (truth, _) = gen_abundances_dc1(grid, &library, endmembers, seed).unwrap();
    let clean = HyperCube::from_matrix(library.matrix().dot(truth.data()), n_r, n_c).unwrap();
    let cube = add_noise(&clean, &NoiseSpec::white(25.0, seed)).unwrap();

    let lambdas = [0.05, 0.01, 0.001];
    let lambda_tvs = [0.0, 0.005, 0.01, 0.05];

    println!("SRE (dB) over the (lambda, lambda_tv) grid:");
    print!("{:>10}", "");
    for t in lambda_tvs {
        print!("{t:>10}");
    }
    println!();
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for l in lambdas {
        print!("{l:>10}");
        for t in lambda_tvs {
            let mut cfg = SolverConfig::dual_defaults(l, t);
            cfg.sigma = 0.5;
            let report = dual_sgs_admm(&cube, &library, &cfg).unwrap();
            let sre = sre_db(&truth, &report.x_hat_projected).unwrap();
            if sre > best.0 {
                best = (sre, l, t);
            }
            print!("{sre:>10.3}");
        }
        println!();
    }
    println!(
        "best: {:.3} dB at lambda = {}, lambda_tv = {}",
        best.0, best.1, best.2
    );
}
