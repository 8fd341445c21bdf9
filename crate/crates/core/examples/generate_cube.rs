//! Synthetic data generation walkthrough.
//!
//! Builds a high-coherence library, a piecewise-constant abundance field on
//! the unit simplex, and a noisy cube at an exact SNR. Pass a directory
//! argument to also write the four matrices in the binary container format.
//!
//!     cargo run --example generate_cube [out_dir]

use hsunmix::datagen::{add_noise, gen_abundances_dc1, gen_library, NoiseSpec};
use hsunmix::datamodel::{HyperCube, SpatialGrid};
use hsunmix::io::write_matrix;
use hsunmix::metrics::mutual_coherence;

fn main() {
    let (n_r, n_c, bands, signatures, endmembers, seed) = (16, 16, 40, 30, 4, 11);
    let grid = SpatialGrid::new(n_r, n_c).unwrap();

    let library = gen_library(bands, signatures, 0.95, seed).unwrap();
    println!(
        "library: {} bands x {} signatures, mutual coherence {:.4}",
        library.n_bands(),
        library.n_signatures(),
        mutual_coherence(&library).unwrap()
    );

    let (truth, active) = gen_abundances_dc1(grid, &library, endmembers, seed).unwrap();
    let sums: Vec<f64> = (0..grid.n_pixels())
        .map(|p| truth.data().column(p).sum())
        .collect();
    let worst_sum = sums.iter().fold(0.0f64, |m, &s| m.max((s - 1.0).abs()));
    println!(
        "abundances: {} active endmembers {:?}, worst |column sum - 1| = {worst_sum:.2e}",
        active.len(),
        active
    );

    let clean = HyperCube::from_matrix(library.matrix().dot(truth.data()), n_r, n_c).unwrap();
    let noisy = add_noise(&clean, &NoiseSpec::correlated(25.0, seed)).unwrap();
    let clean_e: f64 = clean.data().iter().map(|v| v * v).sum();
    let noise_e: f64 = (noisy.data() - clean.data()).iter().map(|v| v * v).sum();
    println!(
        "cube: {n_r}x{n_c} pixels, measured SNR {:.6} dB (requested 25)",
        10.0 * (clean_e / noise_e).log10()
    );

    if let Some(dir) = std::env::args().nth(1) {
        let dir = std::path::PathBuf::from(dir);
        std::fs::create_dir_all(&dir).unwrap();
        write_matrix(&dir.join("library.mat"), &library.matrix().view()).unwrap();
        write_matrix(&dir.join("clean.mat"), &clean.data().view()).unwrap();
        write_matrix(&dir.join("noisy.mat"), &noisy.data().view()).unwrap();
        write_matrix(&dir.join("truth.mat"), &truth.data().view()).unwrap();
        println!("wrote library/clean/noisy/truth to {}", dir.display());
    }
}
