//! Structured linear solvers reused across solver iterations: cached
//! Cholesky factorizations of the two Gram systems, the FFT-diagonalized
//! solve of the periodic shifted Laplacian, a dense fallback for the
//! reflexive boundary, and a positive-definiteness diagnostic.

use std::sync::Arc;

use ndarray::parallel::prelude::*;
use ndarray::{Array2, ArrayView2, Axis};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::datamodel::{SpatialGrid, SpectralLibrary};
use crate::error::{Error, Result};
use crate::spatial::Boundary;
use crate::threads;
use crate::util::{all_finite, frob, hash_f64s, max_abs};

/// Default pixel-count cap for the dense reflexive solve.
pub const DEFAULT_DENSE_CAP: usize = 4096;

/// Dimension cap for the dense eigensolve in [`check_s_posdef`].
pub const EIGENSOLVE_CAP: usize = 2048;

/// Cached Cholesky factorization of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct SpdFactorization {
    matrix_id: u64,
    dim: usize,
    lower: Array2<f64>,
    upper: Array2<f64>, // lower transposed, kept for contiguous backsolves
}

impl SpdFactorization {
    /// Factors `k`, which must be symmetric positive definite.
    pub fn from_matrix(k: &ArrayView2<f64>, label: u64) -> Result<Self> {
        let n = k.nrows();
        if k.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "cannot factor a {}x{} matrix",
                n,
                k.ncols()
            )));
        }
        let mut lower = Array2::<f64>::zeros((n, n));
        for j in 0..n {
            let mut d = k[[j, j]];
            for t in 0..j {
                d -= lower[[j, t]] * lower[[j, t]];
            }
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::NotPositiveDefinite { row: j, pivot: d });
            }
            let dj = d.sqrt();
            lower[[j, j]] = dj;
            for i in j + 1..n {
                let mut s = k[[i, j]];
                for t in 0..j {
                    s -= lower[[i, t]] * lower[[j, t]];
                }
                lower[[i, j]] = s / dj;
            }
        }
        let mut upper = Array2::<f64>::zeros((n, n));
        upper.assign(&lower.t());
        let matrix_id = hash_f64s(label ^ n as u64, k.iter());
        Ok(Self { matrix_id, dim: n, lower, upper })
    }

    /// Opaque tag identifying the factored matrix.
    pub fn matrix_id(&self) -> u64 {
        self.matrix_id
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }
}

/// Factorization of `I + sigma * A * A^T` (`L x L`), the system solved twice
/// per dual-solver iteration.
pub fn factor_dual_gram(a: &SpectralLibrary, sigma: f64) -> Result<SpdFactorization> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::ConfigError(format!("sigma must be > 0, got {sigma}")));
    }
    let am = a.matrix();
    let mut k = am.dot(&am.t());
    k.mapv_inplace(|v| v * sigma);
    for i in 0..k.nrows() {
        k[[i, i]] += 1.0;
    }
    SpdFactorization::from_matrix(&k.view(), 0xD0A1 ^ sigma.to_bits())
}

/// Factorization of `A^T * A + 3I` (`m x m`), the normal matrix of the
/// primal solver's coupling step.
pub fn factor_primal_gram(a: &SpectralLibrary) -> Result<SpdFactorization> {
    let am = a.matrix();
    let mut k = am.t().dot(am);
    for i in 0..k.nrows() {
        k[[i, i]] += 3.0;
    }
    SpdFactorization::from_matrix(&k.view(), 0x9A1)
}

/// Solves `K X = B` for the factored `K`.
pub fn solve_factored(f: &SpdFactorization, b: &ArrayView2<f64>) -> Result<Array2<f64>> {
    if b.nrows() != f.dim {
        return Err(Error::DimensionMismatch(format!(
            "right-hand side has {} rows, factorization is {}x{}",
            b.nrows(),
            f.dim,
            f.dim
        )));
    }
    let n = f.dim;
    // Work on B^T so each right-hand side is a contiguous row.
    let mut xt = Array2::<f64>::zeros((b.ncols(), b.nrows()));
    xt.assign(&b.t());
    let ls = f.lower.as_slice().expect("standard layout");
    let us = f.upper.as_slice().expect("standard layout");
    threads::ensure_pool();
    xt.axis_iter_mut(Axis(0)).into_par_iter().for_each(|mut row| {
        let r = row.as_slice_mut().expect("standard layout");
        for i in 0..n {
            let li = &ls[i * n..i * n + i];
            let mut s = r[i];
            for t in 0..i {
                s -= li[t] * r[t];
            }
            r[i] = s / ls[i * n + i];
        }
        for i in (0..n).rev() {
            let ui = &us[i * n..(i + 1) * n];
            let mut s = r[i];
            for t in i + 1..n {
                s -= ui[t] * r[t];
            }
            r[i] = s / ui[i];
        }
    });
    let mut x = Array2::<f64>::zeros((b.nrows(), b.ncols()));
    x.assign(&xt.t());
    Ok(x)
}

/// Eigenvalues of `I + H^T H` under periodic boundaries, one per 2D spatial
/// frequency, laid out in the same flat ordering as pixels.
#[derive(Debug, Clone)]
pub struct FreqKernel {
    grid: SpatialGrid,
    eigenvalues: Vec<f64>,
}

impl FreqKernel {
    pub fn grid(&self) -> SpatialGrid {
        self.grid
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }
}

/// Builds the frequency kernel `1 + |1 - e^{-2 pi i k1 / n_r}|^2 +
/// |1 - e^{-2 pi i k2 / n_c}|^2`; every eigenvalue is at least 1.
pub fn build_freq_kernel(grid: SpatialGrid) -> FreqKernel {
    let (n_r, n_c) = (grid.n_rows(), grid.n_cols());
    let mut eigenvalues = vec![0.0; grid.n_pixels()];
    for k2 in 0..n_c {
        let wc = 2.0 * std::f64::consts::PI * k2 as f64 / n_c as f64;
        let horiz = 2.0 - 2.0 * wc.cos();
        for k1 in 0..n_r {
            let wr = 2.0 * std::f64::consts::PI * k1 as f64 / n_r as f64;
            let vert = 2.0 - 2.0 * wr.cos();
            eigenvalues[k2 * n_r + k1] = 1.0 + vert + horiz;
        }
    }
    FreqKernel { grid, eigenvalues }
}

/// Reusable solver for `(I + D^T D) X = B`, where `D` is the stacked
/// difference operator of the chosen boundary convention.
///
/// The periodic path diagonalizes per band in the 2D frequency domain; the
/// reflexive path keeps a dense Cholesky factorization of the `n x n`
/// pixel-coupling matrix and is intended for small grids only.
pub struct ShiftedLaplacianSolver {
    grid: SpatialGrid,
    periodic: Option<PeriodicPlan>,
    dense: Option<SpdFactorization>,
}

struct PeriodicPlan {
    kernel: FreqKernel,
    fwd_r: Arc<dyn Fft<f64>>,
    fwd_c: Arc<dyn Fft<f64>>,
    inv_r: Arc<dyn Fft<f64>>,
    inv_c: Arc<dyn Fft<f64>>,
}

impl ShiftedLaplacianSolver {
    pub fn new(grid: SpatialGrid, boundary: Boundary) -> Result<Self> {
        Self::with_dense_cap(grid, boundary, DEFAULT_DENSE_CAP)
    }

    /// As [`ShiftedLaplacianSolver::new`] with an explicit cap on the pixel
    /// count admitted to the dense reflexive path.
    pub fn with_dense_cap(grid: SpatialGrid, boundary: Boundary, cap: usize) -> Result<Self> {
        match boundary {
            Boundary::Periodic => {
                let mut planner = FftPlanner::new();
                let plan = PeriodicPlan {
                    kernel: build_freq_kernel(grid),
                    fwd_r: planner.plan_fft_forward(grid.n_rows()),
                    fwd_c: planner.plan_fft_forward(grid.n_cols()),
                    inv_r: planner.plan_fft_inverse(grid.n_rows()),
                    inv_c: planner.plan_fft_inverse(grid.n_cols()),
                };
                Ok(Self { grid, periodic: Some(plan), dense: None })
            }
            Boundary::Reflexive => {
                let n = grid.n_pixels();
                if n > cap {
                    return Err(Error::GridTooLargeForDense { n, cap });
                }
                let k = reflexive_kernel_matrix(grid);
                let f = SpdFactorization::from_matrix(&k.view(), 0x4EF1)?;
                Ok(Self { grid, periodic: None, dense: Some(f) })
            }
        }
    }

    pub fn solve(&self, b: &ArrayView2<f64>) -> Result<Array2<f64>> {
        if b.ncols() != self.grid.n_pixels() {
            return Err(Error::DimensionMismatch(format!(
                "right-hand side has {} columns, grid needs {}",
                b.ncols(),
                self.grid.n_pixels()
            )));
        }
        if let Some(plan) = &self.periodic {
            return solve_periodic(plan, self.grid, b);
        }
        let f = self.dense.as_ref().expect("one path is always set");
        // The pixel-coupling matrix acts on the column index: X K = B.
        let xt = solve_factored(f, &b.t())?;
        let mut x = Array2::<f64>::zeros((b.nrows(), b.ncols()));
        x.assign(&xt.t());
        Ok(x)
    }
}

/// One-shot convenience wrapper around [`ShiftedLaplacianSolver`].
pub fn solve_shifted_laplacian(
    b: &ArrayView2<f64>,
    grid: SpatialGrid,
    boundary: Boundary,
) -> Result<Array2<f64>> {
    ShiftedLaplacianSolver::new(grid, boundary)?.solve(b)
}

/// `I + Hv^T Hv + Hh^T Hh` under reflexive boundaries as an explicit
/// `n x n` pixel-coupling matrix (the grid graph Laplacian plus identity).
fn reflexive_kernel_matrix(grid: SpatialGrid) -> Array2<f64> {
    let n = grid.n_pixels();
    let n_r = grid.n_rows();
    let mut k = Array2::<f64>::eye(n);
    let mut couple = |a: usize, b: usize| {
        k[[a, a]] += 1.0;
        k[[b, b]] += 1.0;
        k[[a, b]] -= 1.0;
        k[[b, a]] -= 1.0;
    };
    for i in 0..n.saturating_sub(n_r) {
        couple(i, i + n_r); // adjacent image columns
    }
    for i in 0..n - 1 {
        if (i + 1) % n_r != 0 {
            couple(i, i + 1); // within an image column
        }
    }
    k
}

fn solve_periodic(
    plan: &PeriodicPlan,
    grid: SpatialGrid,
    b: &ArrayView2<f64>,
) -> Result<Array2<f64>> {
    let (n_r, n_c) = (grid.n_rows(), grid.n_cols());
    let n = grid.n_pixels();
    let mut out = b.to_owned();
    let scale = 1.0 + frob(b);
    threads::ensure_pool();
    let worst_imag = out
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .map(|mut band| {
            let mut buf: Vec<Complex<f64>> =
                band.iter().map(|&v| Complex::new(v, 0.0)).collect();
            let mut tmp = vec![Complex::new(0.0, 0.0); n_c];
            fft2(plan, &mut buf, &mut tmp, n_r, n_c, true);
            for (v, &lam) in buf.iter_mut().zip(plan.kernel.eigenvalues()) {
                *v /= lam;
            }
            fft2(plan, &mut buf, &mut tmp, n_r, n_c, false);
            let norm = 1.0 / n as f64;
            let mut imag = 0.0f64;
            for (o, v) in band.iter_mut().zip(&buf) {
                *o = v.re * norm;
                imag = imag.max((v.im * norm).abs());
            }
            imag
        })
        .reduce(|| 0.0, f64::max);
    // The round trip of a real input through the frequency domain must come
    // back essentially real; anything else indicates corrupted input.
    if worst_imag > 1e-10 * scale {
        return Err(Error::NonFiniteInput(format!(
            "imaginary residue {worst_imag:.3e} after frequency round trip"
        )));
    }
    Ok(out)
}

/// In-place 2D FFT of a column-major `n_r x n_c` image.
fn fft2(
    plan: &PeriodicPlan,
    buf: &mut [Complex<f64>],
    tmp: &mut [Complex<f64>],
    n_r: usize,
    n_c: usize,
    forward: bool,
) {
    let (fft_r, fft_c) = if forward {
        (&plan.fwd_r, &plan.fwd_c)
    } else {
        (&plan.inv_r, &plan.inv_c)
    };
    for c in 0..n_c {
        fft_r.process(&mut buf[c * n_r..(c + 1) * n_r]);
    }
    for r in 0..n_r {
        for c in 0..n_c {
            tmp[c] = buf[c * n_r + r];
        }
        fft_c.process(tmp);
        for c in 0..n_c {
            buf[c * n_r + r] = tmp[c];
        }
    }
}

/// Smallest eigenvalue of
/// `S = (sigma^{-1} I + A A^T) - A [I + A^T (sigma^{-1} I + A A^T)^{-1} A]^{-1} A^T`,
/// the matrix whose positive definiteness underwrites the dual solver's
/// convergence guarantee. Diagnostic only; `L` is capped for the dense
/// eigensolve.
pub fn check_s_posdef(a: &SpectralLibrary, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::ConfigError(format!("sigma must be > 0, got {sigma}")));
    }
    let l = a.n_bands();
    if l > EIGENSOLVE_CAP {
        return Err(Error::TooLarge { dim: l, cap: EIGENSOLVE_CAP });
    }
    let am = a.matrix();
    let mut g = am.dot(&am.t());
    for i in 0..l {
        g[[i, i]] += 1.0 / sigma;
    }
    let gf = SpdFactorization::from_matrix(&g.view(), 0x51)?;
    let w = solve_factored(&gf, &am.view())?; // G^{-1} A
    let mut inner = am.t().dot(&w); // A^T G^{-1} A
    for i in 0..inner.nrows() {
        inner[[i, i]] += 1.0;
    }
    let innerf = SpdFactorization::from_matrix(&inner.view(), 0x52)?;
    let z = solve_factored(&innerf, &am.t())?;
    let mut s = &g - &am.dot(&z);
    // Symmetrize before the eigensolve; roundoff breaks exact symmetry.
    let st = s.t().to_owned();
    s += &st;
    s.mapv_inplace(|v| 0.5 * v);
    if !all_finite(&s.view()) {
        return Err(Error::NonFiniteInput("S matrix".into()));
    }
    Ok(symmetric_eigenvalues(s).into_iter().fold(f64::INFINITY, f64::min))
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
fn symmetric_eigenvalues(mut a: Array2<f64>) -> Vec<f64> {
    let n = a.nrows();
    if n == 1 {
        return vec![a[[0, 0]]];
    }
    let scale = 1.0 + max_abs(&a.view());
    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                off = off.max(a[[i, j]].abs());
            }
        }
        if off <= 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[[p, q]];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[[i, i]]).collect()
}
