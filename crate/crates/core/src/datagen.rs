//! Synthetic problem generation: controllable-coherence spectral libraries,
//! piecewise-constant and smooth abundance fields satisfying the
//! nonnegativity and sum-to-one constraints, and white or spectrally
//! correlated noise injected at an exact target SNR.
//!
//! Every generator is a deterministic function of its seed; independent
//! sub-streams are derived by counter so fields and columns can be produced
//! in any order.

use ndarray::Array2;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::datamodel::{AbundanceMap, HyperCube, SpatialGrid, SpectralLibrary};
use crate::error::{Error, Result};

/// Noise model attached to a clean cube.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    /// I.i.d. Gaussian across all entries.
    White,
    /// I.i.d. Gaussian low-pass filtered along the spectral axis.
    Correlated,
}

/// Noise description: kind, target SNR in dB (infinite means no noise), the
/// normalized low-pass cutoff for the correlated kind (defaults to
/// `5 pi / L`), and the seed.
#[derive(Debug, Clone, Copy)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub snr_db: f64,
    pub cutoff: Option<f64>,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn white(snr_db: f64, seed: u64) -> Self {
        Self { kind: NoiseKind::White, snr_db, cutoff: None, seed }
    }

    pub fn correlated(snr_db: f64, seed: u64) -> Self {
        Self { kind: NoiseKind::Correlated, snr_db, cutoff: None, seed }
    }

    pub fn with_cutoff(mut self, cutoff: f64) -> Self {
        self.cutoff = Some(cutoff);
        self
    }
}

/// Counter-derived sub-seed (splitmix-style finalizer).
fn subseed(seed: u64, k: u64) -> u64 {
    let mut z = seed ^ k.wrapping_mul(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Smooth positive curve over `l` bands: a base level plus a few Gaussian
/// bumps with random centers, widths and heights.
fn smooth_curve(rng: &mut ChaCha8Rng, l: usize) -> Vec<f64> {
    let bumps = 4;
    let params: Vec<(f64, f64, f64)> = (0..bumps)
        .map(|_| {
            let center = rng.random_range(0.0..l as f64);
            let width = rng.random_range(l as f64 / 12.0..l as f64 / 4.0).max(0.5);
            let height = rng.random_range(0.1..0.6);
            (center, width, height)
        })
        .collect();
    (0..l)
        .map(|t| {
            let t = t as f64;
            0.3 + params
                .iter()
                .map(|&(c, w, h)| h * (-(t - c) * (t - c) / (2.0 * w * w)).exp())
                .sum::<f64>()
        })
        .collect()
}

/// Generates a nonnegative library of smooth signatures whose mutual
/// coherence is at least `coherence_target`. Columns are convex mixtures of
/// a shared base curve and per-column perturbations; the mixing weight is
/// halved until the target is met.
pub fn gen_library(
    l: usize,
    m: usize,
    coherence_target: f64,
    seed: u64,
) -> Result<SpectralLibrary> {
    if !(0.0..1.0).contains(&coherence_target) {
        return Err(Error::UnreachableCoherence(coherence_target));
    }
    if l == 0 || m == 0 {
        return Err(Error::DimensionMismatch(
            "library dimensions must be positive".into(),
        ));
    }
    let mut base_rng = ChaCha8Rng::seed_from_u64(subseed(seed, 0));
    let base = smooth_curve(&mut base_rng, l);
    // Each perturbation mixes a smooth curve with a band-level fingerprint,
    // mirroring the fine absorption features that keep real signatures
    // identifiable even at coherence close to 1.
    let perturbations: Vec<Vec<f64>> = (0..m)
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(subseed(seed, 1 + j as u64));
            let smooth = smooth_curve(&mut rng, l);
            smooth
                .into_iter()
                .map(|v| {
                    let rough: f64 = rng.sample::<f64, _>(StandardNormal);
                    0.7 * v + 0.3 * 0.4 * rough.abs()
                })
                .collect()
        })
        .collect();

    if m == 1 {
        let a = Array2::from_shape_fn((l, 1), |(i, _)| base[i]);
        return SpectralLibrary::new(a);
    }

    let build = |gamma: f64| {
        Array2::from_shape_fn((l, m), |(i, j)| {
            (1.0 - gamma) * base[i] + gamma * perturbations[j][i]
        })
    };
    let mut gamma = 0.6;
    for _ in 0..200 {
        let a = SpectralLibrary::new(build(gamma))?;
        if crate::metrics::mutual_coherence(&a)? >= coherence_target {
            return Ok(a);
        }
        gamma *= 0.5;
    }
    Err(Error::UnreachableCoherence(coherence_target))
}

/// Samples `q` distinct indices from `0..m`.
fn choose_active(rng: &mut ChaCha8Rng, m: usize, q: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..m).collect();
    for i in 0..q {
        let j = rng.random_range(i..m);
        pool.swap(i, j);
    }
    pool.truncate(q);
    pool
}

/// Piecewise-constant abundance field: square pure and two-member patches
/// over a uniformly mixed background, every pixel on the unit simplex of the
/// `q` randomly chosen active signatures. Returns the map and the active
/// library indices.
pub fn gen_abundances_dc1(
    grid: SpatialGrid,
    a: &SpectralLibrary,
    q: usize,
    seed: u64,
) -> Result<(AbundanceMap, Vec<usize>)> {
    let m = a.n_signatures();
    if q == 0 || q > m {
        return Err(Error::TooManyEndmembers { q, m });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(subseed(seed, 0xDC1));
    let active = choose_active(&mut rng, m, q);
    let (n_r, n_c) = (grid.n_rows(), grid.n_cols());
    let n = grid.n_pixels();

    // Mixed background on the simplex.
    let raw: Vec<f64> = (0..q).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut x = Array2::<f64>::zeros((m, n));
    for (k, &row) in active.iter().enumerate() {
        let w = raw[k] / total;
        for p in 0..n {
            x[[row, p]] = w;
        }
    }

    // Square patches: one pure patch per active signature, then as many
    // two-member 50/50 patches.
    let side = (n_r.min(n_c) / 5).max(1);
    for k in 0..2 * q {
        let r0 = rng.random_range(0..=n_r - side);
        let c0 = rng.random_range(0..=n_c - side);
        for r in r0..r0 + side {
            for c in c0..c0 + side {
                let p = grid.flat(r, c);
                for &row in &active {
                    x[[row, p]] = 0.0;
                }
                if k < q {
                    x[[active[k], p]] = 1.0;
                } else {
                    let first = active[k - q];
                    let second = active[(k - q + 1) % q];
                    if first == second {
                        x[[first, p]] = 1.0;
                    } else {
                        x[[first, p]] = 0.5;
                        x[[second, p]] = 0.5;
                    }
                }
            }
        }
    }
    Ok((AbundanceMap::new(x, grid)?, active))
}

/// Separable Gaussian blur with edge clamping; `len = 0` is the identity.
fn gaussian_blur(field: &Array2<f64>, len: f64) -> Array2<f64> {
    if len <= 0.0 {
        return field.clone();
    }
    let radius = (3.0 * len).ceil() as i64;
    let kernel: Vec<f64> = (-radius..=radius)
        .map(|d| (-(d * d) as f64 / (2.0 * len * len)).exp())
        .collect();
    let ksum: f64 = kernel.iter().sum();
    let (rows, cols) = field.dim();
    let clamp = |v: i64, hi: usize| v.clamp(0, hi as i64 - 1) as usize;
    let mut pass1 = Array2::<f64>::zeros((rows, cols));
    for r in 0..rows {
        for c in 0..cols {
            let mut acc = 0.0;
            for (ki, k) in kernel.iter().enumerate() {
                let rr = clamp(r as i64 + ki as i64 - radius, rows);
                acc += k * field[[rr, c]];
            }
            pass1[[r, c]] = acc / ksum;
        }
    }
    let mut pass2 = Array2::<f64>::zeros((rows, cols));
    for r in 0..rows {
        for c in 0..cols {
            let mut acc = 0.0;
            for (ki, k) in kernel.iter().enumerate() {
                let cc = clamp(c as i64 + ki as i64 - radius, cols);
                acc += k * pass1[[r, cc]];
            }
            pass2[[r, c]] = acc / ksum;
        }
    }
    pass2
}

/// Smooth simplex-valued abundance fields: per-signature Gaussian random
/// fields (white noise blurred at `correlation_length`), normalized per
/// pixel through a softmax. Approximates smoothly varying mixed scenes.
pub fn gen_abundances_smooth(
    grid: SpatialGrid,
    a: &SpectralLibrary,
    q: usize,
    correlation_length: f64,
    seed: u64,
) -> Result<AbundanceMap> {
    let m = a.n_signatures();
    if q == 0 || q > m {
        return Err(Error::TooManyEndmembers { q, m });
    }
    if !(correlation_length >= 0.0 && correlation_length.is_finite()) {
        return Err(Error::ConfigError(format!(
            "correlation_length must be >= 0, got {correlation_length}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(subseed(seed, 0x500));
    let active = choose_active(&mut rng, m, q);
    let (n_r, n_c) = (grid.n_rows(), grid.n_cols());

    let contrast = 2.0;
    let mut fields = Vec::with_capacity(q);
    for (k, _) in active.iter().enumerate() {
        let mut frng = ChaCha8Rng::seed_from_u64(subseed(seed, 0x1000 + k as u64));
        let noise =
            Array2::from_shape_fn((n_r, n_c), |_| frng.sample::<f64, _>(StandardNormal));
        let mut g = gaussian_blur(&noise, correlation_length);
        let mean = g.sum() / g.len() as f64;
        let var = g.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / g.len() as f64;
        let std = var.sqrt().max(1e-12);
        g.mapv_inplace(|v| contrast * (v - mean) / std);
        fields.push(g);
    }

    let mut x = Array2::<f64>::zeros((m, grid.n_pixels()));
    for r in 0..n_r {
        for c in 0..n_c {
            let p = grid.flat(r, c);
            let exps: Vec<f64> = fields.iter().map(|g| g[[r, c]].exp()).collect();
            let total: f64 = exps.iter().sum();
            for (k, &row) in active.iter().enumerate() {
                x[[row, p]] = exps[k] / total;
            }
        }
    }
    AbundanceMap::new(x, grid)
}

/// Adds noise at an exact empirical SNR. White noise is i.i.d. Gaussian;
/// correlated noise is the same, ideal-low-pass filtered along the spectral
/// axis before rescaling, so its spectrum is empty above the cutoff.
pub fn add_noise(clean: &HyperCube, spec: &NoiseSpec) -> Result<HyperCube> {
    if spec.snr_db.is_nan() || spec.snr_db == f64::NEG_INFINITY {
        return Err(Error::ConfigError(format!(
            "snr_db must be finite or +inf, got {}",
            spec.snr_db
        )));
    }
    if spec.snr_db == f64::INFINITY {
        return Ok(clean.clone());
    }
    let l = clean.n_bands();
    let n = clean.n_pixels();
    let clean_energy: f64 = clean.data().iter().map(|v| v * v).sum();
    if clean_energy == 0.0 {
        return Err(Error::ZeroSignal);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(subseed(spec.seed, 0x0153));
    let mut noise =
        Array2::from_shape_fn((l, n), |_| rng.sample::<f64, _>(StandardNormal));

    if spec.kind == NoiseKind::Correlated {
        let cutoff = spec.cutoff.unwrap_or(5.0 * std::f64::consts::PI / l as f64);
        if !(cutoff > 0.0 && cutoff <= std::f64::consts::PI) {
            return Err(Error::ConfigError(format!(
                "cutoff must lie in (0, pi], got {cutoff}"
            )));
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(l);
        let inv = planner.plan_fft_inverse(l);
        let keep: Vec<bool> = (0..l)
            .map(|k| {
                let freq = 2.0 * std::f64::consts::PI * k.min(l - k) as f64 / l as f64;
                freq <= cutoff
            })
            .collect();
        let mut buf = vec![Complex::new(0.0, 0.0); l];
        for p in 0..n {
            for (i, b) in buf.iter_mut().enumerate() {
                *b = Complex::new(noise[[i, p]], 0.0);
            }
            fwd.process(&mut buf);
            for (b, &k) in buf.iter_mut().zip(&keep) {
                if !k {
                    *b = Complex::new(0.0, 0.0);
                }
            }
            inv.process(&mut buf);
            for (i, b) in buf.iter().enumerate() {
                noise[[i, p]] = b.re / l as f64;
            }
        }
    }

    let noise_energy: f64 = noise.iter().map(|v| v * v).sum();
    if noise_energy == 0.0 {
        return Err(Error::ZeroSignal);
    }
    let target = clean_energy * 10f64.powf(-spec.snr_db / 10.0);
    let scale = (target / noise_energy).sqrt();
    let noisy = clean.data() + &(&noise * scale);
    HyperCube::from_matrix(noisy, clean.grid().n_rows(), clean.grid().n_cols())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::mutual_coherence;

    #[test]
    fn library_single_column_has_zero_coherence() {
        let a = gen_library(4, 1, 0.99, 3).unwrap();
        assert_eq!(a.n_signatures(), 1);
        assert_eq!(mutual_coherence(&a).unwrap(), 0.0);
    }

    #[test]
    fn library_meets_coherence_target() {
        let a = gen_library(50, 60, 0.9, 7).unwrap();
        assert!(mutual_coherence(&a).unwrap() >= 0.9);
        assert!(a.matrix().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn library_is_deterministic() {
        let a = gen_library(30, 20, 0.8, 11).unwrap();
        let b = gen_library(30, 20, 0.8, 11).unwrap();
        assert!(a
            .matrix()
            .iter()
            .zip(b.matrix().iter())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn library_rejects_unreachable_target() {
        assert!(matches!(
            gen_library(10, 5, 1.0, 0),
            Err(Error::UnreachableCoherence(_))
        ));
    }

    #[test]
    fn dc1_single_endmember_is_all_ones() {
        let grid = SpatialGrid::new(4, 4).unwrap();
        let a = gen_library(10, 6, 0.5, 1).unwrap();
        let (x, active) = gen_abundances_dc1(grid, &a, 1, 5).unwrap();
        assert_eq!(active.len(), 1);
        for p in 0..16 {
            assert_eq!(x.data()[[active[0], p]], 1.0);
        }
        assert_eq!(x.data().sum(), 16.0);
    }

    #[test]
    fn dc1_satisfies_anc_and_asc() {
        let grid = SpatialGrid::new(12, 10).unwrap();
        let a = gen_library(20, 15, 0.5, 2).unwrap();
        let (x, active) = gen_abundances_dc1(grid, &a, 5, 9).unwrap();
        assert_eq!(active.len(), 5);
        assert!(x.data().iter().all(|&v| v >= 0.0));
        for p in 0..grid.n_pixels() {
            let s: f64 = x.data().column(p).sum();
            assert!((s - 1.0).abs() <= 1e-12, "column {p} sums to {s}");
        }
        // rows outside the active set stay zero
        for row in 0..15 {
            if !active.contains(&row) {
                assert!(x.data().row(row).iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn dc1_is_deterministic() {
        let grid = SpatialGrid::new(6, 6).unwrap();
        let a = gen_library(12, 9, 0.5, 2).unwrap();
        let (x1, act1) = gen_abundances_dc1(grid, &a, 3, 42).unwrap();
        let (x2, act2) = gen_abundances_dc1(grid, &a, 3, 42).unwrap();
        assert_eq!(act1, act2);
        assert!(x1
            .data()
            .iter()
            .zip(x2.data().iter())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn dc1_rejects_too_many_endmembers() {
        let grid = SpatialGrid::new(4, 4).unwrap();
        let a = gen_library(8, 3, 0.5, 2).unwrap();
        assert!(matches!(
            gen_abundances_dc1(grid, &a, 4, 0),
            Err(Error::TooManyEndmembers { q: 4, m: 3 })
        ));
    }

    #[test]
    fn smooth_fields_live_on_the_simplex() {
        let grid = SpatialGrid::new(16, 16).unwrap();
        let a = gen_library(12, 9, 0.5, 3).unwrap();
        // correlation length 0 is the no-smoothing limit: i.i.d. per-pixel
        // simplex samples
        for corr_len in [2.0, 0.0] {
            let x = gen_abundances_smooth(grid, &a, 4, corr_len, 17).unwrap();
            assert!(x.data().iter().all(|&v| v >= 0.0));
            for p in 0..grid.n_pixels() {
                let s: f64 = x.data().column(p).sum();
                assert!((s - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn smooth_fields_are_spatially_correlated() {
        let grid = SpatialGrid::new(32, 32).unwrap();
        let a = gen_library(10, 6, 0.5, 4).unwrap();
        let mut mean_corr = 0.0;
        let seeds = [1u64, 2, 3, 4, 5];
        for &s in &seeds {
            let x = gen_abundances_smooth(grid, &a, 3, 4.0, s).unwrap();
            // correlation between a pixel and its right neighbor, first active row
            let row = x
                .data()
                .rows()
                .into_iter()
                .find(|r| r.iter().any(|&v| v > 0.0))
                .unwrap();
            let mut pairs = Vec::new();
            for c in 0..31 {
                for r in 0..32 {
                    pairs.push((row[c * 32 + r], row[(c + 1) * 32 + r]));
                }
            }
            let n = pairs.len() as f64;
            let mx: f64 = pairs.iter().map(|p| p.0).sum::<f64>() / n;
            let my: f64 = pairs.iter().map(|p| p.1).sum::<f64>() / n;
            let cov: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / n;
            let vx: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum::<f64>() / n;
            let vy: f64 = pairs.iter().map(|p| (p.1 - my) * (p.1 - my)).sum::<f64>() / n;
            mean_corr += cov / (vx * vy).sqrt();
        }
        mean_corr /= seeds.len() as f64;
        assert!(mean_corr > 0.5, "mean adjacent correlation {mean_corr}");
    }

    #[test]
    fn noise_hits_exact_snr() {
        let grid = SpatialGrid::new(4, 4).unwrap();
        let a = gen_library(24, 8, 0.5, 5).unwrap();
        let (x, _) = gen_abundances_dc1(grid, &a, 3, 6).unwrap();
        let clean = HyperCube::from_matrix(a.matrix().dot(x.data()), 4, 4).unwrap();
        for snr in [5.0, 20.0, 40.0] {
            for spec in [NoiseSpec::white(snr, 9), NoiseSpec::correlated(snr, 9)] {
                let noisy = add_noise(&clean, &spec).unwrap();
                let clean_e: f64 = clean.data().iter().map(|v| v * v).sum();
                let noise_e: f64 = (noisy.data() - clean.data()).iter().map(|v| v * v).sum();
                let measured = 10.0 * (clean_e / noise_e).log10();
                assert!(
                    (measured - snr).abs() <= 1e-9,
                    "snr {measured} vs requested {snr} ({:?})",
                    spec.kind
                );
            }
        }
    }

    #[test]
    fn infinite_snr_returns_clean() {
        let clean = HyperCube::from_matrix(Array2::from_elem((3, 4), 1.0), 2, 2).unwrap();
        let noisy = add_noise(&clean, &NoiseSpec::white(f64::INFINITY, 1)).unwrap();
        assert_eq!(noisy.data(), clean.data());
    }

    #[test]
    fn zero_signal_is_rejected() {
        let clean = HyperCube::from_matrix(Array2::zeros((3, 4)), 2, 2).unwrap();
        assert!(matches!(
            add_noise(&clean, &NoiseSpec::white(20.0, 1)),
            Err(Error::ZeroSignal)
        ));
    }

    #[test]
    fn correlated_noise_has_no_energy_above_cutoff() {
        let l = 64;
        let _grid = SpatialGrid::new(3, 3).unwrap();
        let clean = HyperCube::from_matrix(Array2::from_elem((l, 9), 1.0), 3, 3).unwrap();
        let cutoff = 5.0 * std::f64::consts::PI / l as f64;
        let spec = NoiseSpec::correlated(20.0, 4).with_cutoff(cutoff);
        let noisy = add_noise(&clean, &spec).unwrap();
        let noise = noisy.data() - clean.data();

        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(l);
        let mut above = 0.0;
        let mut total = 0.0;
        for p in 0..9 {
            let mut buf: Vec<Complex<f64>> = noise
                .column(p)
                .iter()
                .map(|&v| Complex::new(v, 0.0))
                .collect();
            fft.process(&mut buf);
            for (k, b) in buf.iter().enumerate() {
                let freq = 2.0 * std::f64::consts::PI * k.min(l - k) as f64 / l as f64;
                let e = b.norm_sqr();
                total += e;
                if freq > cutoff {
                    above += e;
                }
            }
        }
        assert!(above <= 0.05 * total, "above-cutoff energy {above} of {total}");
    }

    #[test]
    fn noise_is_deterministic() {
        let clean = HyperCube::from_matrix(Array2::from_elem((6, 4), 2.0), 2, 2).unwrap();
        let a = add_noise(&clean, &NoiseSpec::white(15.0, 33)).unwrap();
        let b = add_noise(&clean, &NoiseSpec::white(15.0, 33)).unwrap();
        assert!(a
            .data()
            .iter()
            .zip(b.data().iter())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
