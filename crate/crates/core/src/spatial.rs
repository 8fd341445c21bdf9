//! Finite-difference operators on abundance matrices and their adjoints.
//!
//! Two boundary conventions coexist. Under the reflexive convention, edge
//! pixels simply have no neighbor past the border, so the operators shrink
//! the pixel dimension. Under the periodic convention the image wraps
//! around, the operators are square, and the associated normal matrix is
//! diagonalized by the 2D DFT.
//!
//! All operators act on the pixel (column) index of an `m x n` matrix; rows
//! are independent bands.

use ndarray::{s, Array2, ArrayView2};

use crate::datamodel::SpatialGrid;
use crate::error::{Error, Result};

/// Boundary handling for the total-variation difference stencil.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Periodic,
    Reflexive,
}

/// The five difference-operator kinds.
///
/// For a grid with `n = n_r * n_c` pixels in column-major order:
///
/// * `ReflexiveAcrossColumns` — differences between pixels `n_r` apart
///   (adjacent image columns), `n - n_r` output columns.
/// * `ReflexiveWithinColumns` — differences between consecutive pixels
///   within an image column (block boundaries skipped), `n - n_c` outputs.
/// * `PeriodicHorizontal` — `x_i - x_right(i)` with wraparound, `n` outputs.
/// * `PeriodicVertical` — `x_i - x_below(i)` with wraparound, `n` outputs.
/// * `PeriodicStacked` — `PeriodicHorizontal` stacked over
///   `PeriodicVertical`, doubling the row dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffOpKind {
    ReflexiveAcrossColumns,
    ReflexiveWithinColumns,
    PeriodicHorizontal,
    PeriodicVertical,
    PeriodicStacked,
}

impl DiffOpKind {
    /// Output shape of `apply_diff` for an `m`-row input on `grid`.
    pub fn output_shape(&self, m: usize, grid: SpatialGrid) -> (usize, usize) {
        let n = grid.n_pixels();
        match self {
            DiffOpKind::ReflexiveAcrossColumns => (m, n - grid.n_rows()),
            DiffOpKind::ReflexiveWithinColumns => (m, n - grid.n_cols()),
            DiffOpKind::PeriodicHorizontal | DiffOpKind::PeriodicVertical => (m, n),
            DiffOpKind::PeriodicStacked => (2 * m, n),
        }
    }
}

/// Flat 0-based index of the wrapped right neighbor of flat pixel `p`.
#[inline]
fn right_neighbor(p: usize, grid: SpatialGrid) -> usize {
    let (n_r, n_c) = (grid.n_rows(), grid.n_cols());
    let r = p % n_r;
    let c = p / n_r;
    grid.flat(r, (c + 1) % n_c)
}

/// Flat 0-based index of the wrapped below neighbor of flat pixel `p`.
#[inline]
fn below_neighbor(p: usize, grid: SpatialGrid) -> usize {
    let n_r = grid.n_rows();
    let r = p % n_r;
    let c = p / n_r;
    grid.flat((r + 1) % n_r, c)
}

fn check_input(x: &ArrayView2<f64>, grid: SpatialGrid) -> Result<()> {
    if x.ncols() != grid.n_pixels() {
        return Err(Error::DimensionMismatch(format!(
            "operator input has {} columns, grid {}x{} needs {}",
            x.ncols(),
            grid.n_rows(),
            grid.n_cols(),
            grid.n_pixels()
        )));
    }
    Ok(())
}

/// Applies the difference operator `op` to `x`.
pub fn apply_diff(op: DiffOpKind, x: &ArrayView2<f64>, grid: SpatialGrid) -> Result<Array2<f64>> {
    check_input(x, grid)?;
    let m = x.nrows();
    let n = grid.n_pixels();
    let n_r = grid.n_rows();
    match op {
        DiffOpKind::ReflexiveAcrossColumns => {
            let mut out = Array2::zeros((m, n - n_r));
            for j in 0..n - n_r {
                let d = &x.column(j + n_r) - &x.column(j);
                out.column_mut(j).assign(&d);
            }
            Ok(out)
        }
        DiffOpKind::ReflexiveWithinColumns => {
            let mut out = Array2::zeros((m, n - grid.n_cols()));
            let mut k = 0;
            for i in 0..n - 1 {
                if (i + 1) % n_r == 0 {
                    continue; // last pixel of an image column
                }
                let d = &x.column(i + 1) - &x.column(i);
                out.column_mut(k).assign(&d);
                k += 1;
            }
            debug_assert_eq!(k, n - grid.n_cols());
            Ok(out)
        }
        DiffOpKind::PeriodicHorizontal => {
            let mut out = Array2::zeros((m, n));
            for p in 0..n {
                let d = &x.column(p) - &x.column(right_neighbor(p, grid));
                out.column_mut(p).assign(&d);
            }
            Ok(out)
        }
        DiffOpKind::PeriodicVertical => {
            let mut out = Array2::zeros((m, n));
            for p in 0..n {
                let d = &x.column(p) - &x.column(below_neighbor(p, grid));
                out.column_mut(p).assign(&d);
            }
            Ok(out)
        }
        DiffOpKind::PeriodicStacked => {
            let top = apply_diff(DiffOpKind::PeriodicHorizontal, x, grid)?;
            let bottom = apply_diff(DiffOpKind::PeriodicVertical, x, grid)?;
            let mut out = Array2::zeros((2 * m, n));
            out.slice_mut(s![..m, ..]).assign(&top);
            out.slice_mut(s![m.., ..]).assign(&bottom);
            Ok(out)
        }
    }
}

/// Applies the exact adjoint of `apply_diff(op, ..)` to `v`.
pub fn apply_diff_adjoint(
    op: DiffOpKind,
    v: &ArrayView2<f64>,
    grid: SpatialGrid,
) -> Result<Array2<f64>> {
    let n = grid.n_pixels();
    let n_r = grid.n_rows();
    let m = match op {
        DiffOpKind::PeriodicStacked => {
            if !v.nrows().is_multiple_of(2) {
                return Err(Error::DimensionMismatch(
                    "stacked adjoint input must have an even row count".into(),
                ));
            }
            v.nrows() / 2
        }
        _ => v.nrows(),
    };
    let expected = op.output_shape(m, grid);
    if (v.nrows(), v.ncols()) != expected {
        return Err(Error::DimensionMismatch(format!(
            "adjoint input is {}x{}, expected {}x{}",
            v.nrows(),
            v.ncols(),
            expected.0,
            expected.1
        )));
    }
    match op {
        DiffOpKind::ReflexiveAcrossColumns => {
            let mut out = Array2::zeros((m, n));
            for j in 0..n - n_r {
                let col = v.column(j);
                out.column_mut(j).zip_mut_with(&col, |o, &s| *o -= s);
                out.column_mut(j + n_r).zip_mut_with(&col, |o, &s| *o += s);
            }
            Ok(out)
        }
        DiffOpKind::ReflexiveWithinColumns => {
            let mut out = Array2::zeros((m, n));
            let mut k = 0;
            for i in 0..n - 1 {
                if (i + 1) % n_r == 0 {
                    continue;
                }
                let col = v.column(k);
                out.column_mut(i).zip_mut_with(&col, |o, &s| *o -= s);
                out.column_mut(i + 1).zip_mut_with(&col, |o, &s| *o += s);
                k += 1;
            }
            Ok(out)
        }
        DiffOpKind::PeriodicHorizontal => {
            let mut out = Array2::zeros((m, n));
            for p in 0..n {
                let col = v.column(p);
                out.column_mut(p).zip_mut_with(&col, |o, &s| *o += s);
                out.column_mut(right_neighbor(p, grid))
                    .zip_mut_with(&col, |o, &s| *o -= s);
            }
            Ok(out)
        }
        DiffOpKind::PeriodicVertical => {
            let mut out = Array2::zeros((m, n));
            for p in 0..n {
                let col = v.column(p);
                out.column_mut(p).zip_mut_with(&col, |o, &s| *o += s);
                out.column_mut(below_neighbor(p, grid))
                    .zip_mut_with(&col, |o, &s| *o -= s);
            }
            Ok(out)
        }
        DiffOpKind::PeriodicStacked => {
            let top = v.slice(s![..m, ..]);
            let bottom = v.slice(s![m.., ..]);
            let mut out = apply_diff_adjoint(DiffOpKind::PeriodicHorizontal, &top, grid)?;
            out += &apply_diff_adjoint(DiffOpKind::PeriodicVertical, &bottom, grid)?;
            Ok(out)
        }
    }
}
