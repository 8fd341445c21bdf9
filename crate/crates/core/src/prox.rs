//! Proximal operators: entrywise soft thresholding, row-group shrinkage,
//! nonnegative projection, direct 1D total-variation denoising, the composed
//! prox used by the dual solver, and conjugate proxes via the Moreau
//! identity.

use ndarray::{Array2, ArrayView2, Axis};
use ndarray::parallel::prelude::*;

use crate::datamodel::SpatialGrid;
use crate::error::{Error, Result};
use crate::threads;

/// Sparsity norm selector: `L1` penalizes entries, `L21` penalizes row
/// 2-norms (collaborative sparsity).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rho {
    L1,
    L21,
}

/// Weights and scaling of the composed prox `prox_{sigma * p}` where
/// `p = lambda*|.|_{rho,1} + indicator(>=0) + lambda_tv*|Hv .|_1`.
#[derive(Debug, Clone, Copy)]
pub struct ProxSpec {
    pub lambda: f64,
    pub lambda_tv: f64,
    pub rho: Rho,
    pub sigma: f64,
}

impl ProxSpec {
    pub fn new(lambda: f64, lambda_tv: f64, rho: Rho, sigma: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::ConfigError(format!("lambda must be >= 0, got {lambda}")));
        }
        if !(lambda_tv >= 0.0 && lambda_tv.is_finite()) {
            return Err(Error::ConfigError(format!(
                "lambda_tv must be >= 0, got {lambda_tv}"
            )));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::ConfigError(format!("sigma must be > 0, got {sigma}")));
        }
        Ok(Self { lambda, lambda_tv, rho, sigma })
    }
}

fn check_kappa(kappa: f64) -> Result<()> {
    if kappa < 0.0 || kappa.is_nan() {
        Err(Error::NegativeThreshold(kappa))
    } else {
        Ok(())
    }
}

/// Entrywise `sign(v) * max(|v| - kappa, 0)`.
pub fn soft_threshold(m: &ArrayView2<f64>, kappa: f64) -> Result<Array2<f64>> {
    check_kappa(kappa)?;
    if kappa == 0.0 {
        return Ok(m.to_owned());
    }
    Ok(m.mapv(|v| v.signum() * (v.abs() - kappa).max(0.0)))
}

/// Scales each row by `max(|row| - kappa, 0) / (max(|row| - kappa, 0) + kappa)`
/// where `|row|` is the row 2-norm; rows with norm at most `kappa` vanish.
pub fn group_shrink_rows(m: &ArrayView2<f64>, kappa: f64) -> Result<Array2<f64>> {
    check_kappa(kappa)?;
    if kappa == 0.0 {
        return Ok(m.to_owned());
    }
    let mut out = m.to_owned();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        let shrunk = (norm - kappa).max(0.0);
        let alpha = shrunk / (shrunk + kappa);
        row.mapv_inplace(|v| v * alpha);
    }
    Ok(out)
}

/// Entrywise `max(v, 0)`; `-0.0` normalizes to `0.0`.
pub fn project_nonnegative(m: &ArrayView2<f64>) -> Array2<f64> {
    m.mapv(|v| if v > 0.0 { v } else { 0.0 })
}

/// Exact minimizer of `kappa * sum |z[k+1] - z[k]| + 0.5 * ||z - y||^2`
/// by a direct forward scan (no iteration, no tolerance).
pub fn tv1d(y: &[f64], kappa: f64) -> Result<Vec<f64>> {
    check_kappa(kappa)?;
    if y.is_empty() {
        return Err(Error::EmptySignal);
    }
    let n = y.len();
    if kappa == 0.0 || n == 1 {
        return Ok(y.to_vec());
    }
    let lam = kappa;
    let mut x = vec![0.0; n];

    // Segment bookkeeping: k0 is the start of the undetermined segment,
    // km/kp the last positions where the lower/upper running bound was
    // clamped, vmin/vmax the candidate segment values and umin/umax the
    // running sums of (y - v) against each bound.
    let mut k = 0usize;
    let mut k0 = 0usize;
    let mut km = 0usize;
    let mut kp = 0usize;
    let mut vmin = y[0] - lam;
    let mut vmax = y[0] + lam;
    let mut umin = lam;
    let mut umax = -lam;

    'outer: loop {
        if k == n - 1 {
            // Only the final sample is left; it sits kappa away from the
            // segment it detached from.
            x[n - 1] = vmin + umin;
            break 'outer;
        }
        loop {
            if y[k + 1] + umin < vmin - lam {
                // The lower bound broke: the segment ends with a downward jump.
                x[k0..=km].fill(vmin);
                k = km + 1;
                k0 = k;
                km = k;
                kp = k;
                vmin = y[k];
                vmax = y[k] + 2.0 * lam;
                umin = lam;
                umax = -lam;
            } else if y[k + 1] + umax > vmax + lam {
                // The upper bound broke: upward jump.
                x[k0..=kp].fill(vmax);
                k = kp + 1;
                k0 = k;
                km = k;
                kp = k;
                vmin = y[k] - 2.0 * lam;
                vmax = y[k];
                umin = lam;
                umax = -lam;
            } else {
                // No jump; absorb the next sample into the segment.
                k += 1;
                umin += y[k] - vmin;
                umax += y[k] - vmax;
                if umin >= lam {
                    vmin += (umin - lam) / ((k - k0 + 1) as f64);
                    umin = lam;
                    km = k;
                }
                if umax <= -lam {
                    vmax += (umax + lam) / ((k - k0 + 1) as f64);
                    umax = -lam;
                    kp = k;
                }
            }
            if k == n - 1 {
                break;
            }
        }
        if umin < 0.0 {
            x[k0..=km].fill(vmin);
            k = km + 1;
            k0 = k;
            km = k;
            vmin = y[k];
            umin = lam;
            umax = y[k] + lam - vmax;
            continue 'outer;
        } else if umax > 0.0 {
            x[k0..=kp].fill(vmax);
            k = kp + 1;
            k0 = k;
            kp = k;
            vmax = y[k];
            umax = -lam;
            umin = y[k] - lam - vmin;
            continue 'outer;
        } else {
            let v = vmin + umin / ((k - k0 + 1) as f64);
            x[k0..n].fill(v);
            break 'outer;
        }
    }

    debug_assert!({
        let scale = 1.0 + y.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        tv1d_certificate_gap(y, &x, kappa) <= 1e-8 * scale
    });
    Ok(x)
}

/// Maximum violation of the exact optimality conditions of the 1D TV
/// problem at a candidate solution `z`.
///
/// With running sums `u_k = sum_{j<=k} (y_j - z_j)`, optimality requires
/// `|u_k| <= kappa` for every interior `k`, `u_k = -kappa * sign(z[k+1] -
/// z[k])` wherever consecutive outputs differ, and a vanishing total sum.
pub fn tv1d_certificate_gap(y: &[f64], z: &[f64], kappa: f64) -> f64 {
    assert_eq!(y.len(), z.len());
    let n = y.len();
    let mut u = 0.0;
    let mut gap = 0.0f64;
    for k in 0..n {
        u += y[k] - z[k];
        if k + 1 < n {
            gap = gap.max(u.abs() - kappa);
            if z[k + 1] != z[k] {
                let want = -kappa * (z[k + 1] - z[k]).signum();
                gap = gap.max((u - want).abs());
            }
        } else {
            gap = gap.max(u.abs());
        }
    }
    gap.max(0.0)
}

/// Applies `tv1d` to every (band, pixel-row) sequence taken across the
/// image columns: `m * n_r` independent problems of length `n_c`.
pub fn prox_vertical_tv(
    m: &ArrayView2<f64>,
    kappa: f64,
    grid: SpatialGrid,
) -> Result<Array2<f64>> {
    check_kappa(kappa)?;
    check_grid(m, grid)?;
    if kappa == 0.0 {
        return Ok(m.to_owned());
    }
    let (n_r, n_c) = (grid.n_rows(), grid.n_cols());
    let mut out = m.to_owned();
    threads::ensure_pool();
    out.axis_iter_mut(Axis(0))
        .into_par_iter()
        .for_each(|mut band| {
            let mut buf = vec![0.0; n_c];
            for r in 0..n_r {
                for c in 0..n_c {
                    buf[c] = band[c * n_r + r];
                }
                let denoised = tv1d(&buf, kappa).expect("kappa validated");
                for c in 0..n_c {
                    band[c * n_r + r] = denoised[c];
                }
            }
        });
    Ok(out)
}

/// Applies `tv1d` to every (band, image-column) sequence taken within an
/// image column: `m * n_c` independent problems of length `n_r`.
pub fn prox_horizontal_tv(
    m: &ArrayView2<f64>,
    kappa: f64,
    grid: SpatialGrid,
) -> Result<Array2<f64>> {
    check_kappa(kappa)?;
    check_grid(m, grid)?;
    if kappa == 0.0 {
        return Ok(m.to_owned());
    }
    let (n_r, n_c) = (grid.n_rows(), grid.n_cols());
    let mut out = m.to_owned();
    threads::ensure_pool();
    out.axis_iter_mut(Axis(0))
        .into_par_iter()
        .for_each(|mut band| {
            let mut buf = vec![0.0; n_r];
            for c in 0..n_c {
                for r in 0..n_r {
                    buf[r] = band[c * n_r + r];
                }
                let denoised = tv1d(&buf, kappa).expect("kappa validated");
                for r in 0..n_r {
                    band[c * n_r + r] = denoised[r];
                }
            }
        });
    Ok(out)
}

fn check_grid(m: &ArrayView2<f64>, grid: SpatialGrid) -> Result<()> {
    if m.ncols() != grid.n_pixels() {
        return Err(Error::DimensionMismatch(format!(
            "matrix has {} columns, grid {}x{} needs {}",
            m.ncols(),
            grid.n_rows(),
            grid.n_cols(),
            grid.n_pixels()
        )));
    }
    Ok(())
}

/// `prox_{sigma * p}` evaluated at `v`, where
/// `p = lambda*|.|_{rho,1} + indicator(>=0) + lambda_tv*|Hv .|_1`.
///
/// Computed as the composition: TV denoising across image columns with
/// threshold `sigma*lambda_tv`, then nonnegative projection, then entrywise
/// soft thresholding (rho = L1) or row-group shrinkage (rho = L21) with
/// threshold `sigma*lambda`.
pub fn prox_p(v: &ArrayView2<f64>, spec: &ProxSpec, grid: SpatialGrid) -> Result<Array2<f64>> {
    let z = prox_vertical_tv(v, spec.sigma * spec.lambda_tv, grid)?;
    let z = project_nonnegative(&z.view());
    match spec.rho {
        Rho::L1 => soft_threshold(&z.view(), spec.sigma * spec.lambda),
        Rho::L21 => group_shrink_rows(&z.view(), spec.sigma * spec.lambda),
    }
}

/// Conjugate prox via the Moreau identity:
/// `prox_{f*/sigma}(v) = v - prox_{sigma f}(sigma v) / sigma`,
/// given a closure evaluating `prox_{sigma f}`.
pub fn prox_conjugate<F>(prox_of_sigma_f: F, v: &ArrayView2<f64>, sigma: f64) -> Result<Array2<f64>>
where
    F: FnOnce(Array2<f64>) -> Result<Array2<f64>>,
{
    let scaled = v.mapv(|x| x * sigma);
    let p = prox_of_sigma_f(scaled)?;
    Ok(v.to_owned() - p / sigma)
}
