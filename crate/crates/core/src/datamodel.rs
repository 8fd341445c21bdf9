//! Core data types: spatial grids, spectral libraries, data cubes and
//! abundance maps.
//!
//! Pixels are ordered column-major: pixel `(r, c)` of an `n_r x n_c` grid
//! (both indices 1-based) maps to flat index `(c - 1) * n_r + r`. Every
//! matrix that carries one column per pixel uses this ordering.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Rectangular pixel grid of an image, `n_r` rows by `n_c` columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpatialGrid {
    n_r: usize,
    n_c: usize,
}

impl SpatialGrid {
    pub fn new(n_r: usize, n_c: usize) -> Result<Self> {
        if n_r == 0 || n_c == 0 {
            return Err(Error::ConfigError(format!(
                "grid dimensions must be positive, got {n_r}x{n_c}"
            )));
        }
        Ok(Self { n_r, n_c })
    }

    pub fn n_rows(&self) -> usize {
        self.n_r
    }

    pub fn n_cols(&self) -> usize {
        self.n_c
    }

    /// Total number of pixels.
    pub fn n_pixels(&self) -> usize {
        self.n_r * self.n_c
    }

    /// Flat 0-based index of the pixel at 0-based `(r, c)`.
    #[inline]
    pub(crate) fn flat(&self, r: usize, c: usize) -> usize {
        c * self.n_r + r
    }
}

/// 1-based flat index of pixel `(r, c)`, both 1-based.
pub fn pixel_index(r: usize, c: usize, grid: SpatialGrid) -> Result<usize> {
    if r == 0 || r > grid.n_r || c == 0 || c > grid.n_c {
        return Err(Error::OutOfRange(format!(
            "pixel ({r}, {c}) outside {}x{} grid",
            grid.n_r, grid.n_c
        )));
    }
    Ok((c - 1) * grid.n_r + r)
}

fn ensure_finite(m: &Array2<f64>, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteInput(what.to_string()))
    }
}

/// Spectral library: `L` bands by `m` candidate signatures.
#[derive(Debug, Clone)]
pub struct SpectralLibrary {
    a: Array2<f64>,
}

impl SpectralLibrary {
    pub fn new(a: Array2<f64>) -> Result<Self> {
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(Error::DimensionMismatch(
                "library must have at least one band and one signature".into(),
            ));
        }
        ensure_finite(&a, "spectral library")?;
        Ok(Self { a })
    }

    /// The `L x m` mixing matrix.
    pub fn matrix(&self) -> &Array2<f64> {
        &self.a
    }

    /// Number of spectral bands `L`.
    pub fn n_bands(&self) -> usize {
        self.a.nrows()
    }

    /// Number of signatures `m`.
    pub fn n_signatures(&self) -> usize {
        self.a.ncols()
    }
}

/// Observed hyperspectral data: an `L x n` matrix bound to a spatial grid.
#[derive(Debug, Clone)]
pub struct HyperCube {
    y: Array2<f64>,
    grid: SpatialGrid,
}

impl HyperCube {
    /// Binds an `L x n` matrix to an `n_r x n_c` grid.
    pub fn from_matrix(y: Array2<f64>, n_r: usize, n_c: usize) -> Result<Self> {
        let grid = SpatialGrid::new(n_r, n_c)?;
        if y.ncols() != grid.n_pixels() {
            return Err(Error::DimensionMismatch(format!(
                "cube has {} pixel columns but grid {}x{} needs {}",
                y.ncols(),
                n_r,
                n_c,
                grid.n_pixels()
            )));
        }
        ensure_finite(&y, "hypercube data")?;
        Ok(Self { y, grid })
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.y
    }

    pub fn grid(&self) -> SpatialGrid {
        self.grid
    }

    pub fn n_bands(&self) -> usize {
        self.y.nrows()
    }

    pub fn n_pixels(&self) -> usize {
        self.y.ncols()
    }
}

/// Abundance matrix (`m x n`) over a spatial grid.
///
/// Nonnegativity is deliberately not an invariant: dual-solver multiplier
/// iterates may dip below zero. Operations that need a nonnegative map state
/// so in their contracts.
#[derive(Debug, Clone)]
pub struct AbundanceMap {
    x: Array2<f64>,
    grid: SpatialGrid,
}

impl AbundanceMap {
    pub fn new(x: Array2<f64>, grid: SpatialGrid) -> Result<Self> {
        if x.ncols() != grid.n_pixels() {
            return Err(Error::DimensionMismatch(format!(
                "abundance map has {} columns but grid {}x{} needs {}",
                x.ncols(),
                grid.n_rows(),
                grid.n_cols(),
                grid.n_pixels()
            )));
        }
        ensure_finite(&x, "abundance map")?;
        Ok(Self { x, grid })
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn grid(&self) -> SpatialGrid {
        self.grid
    }

    pub fn n_signatures(&self) -> usize {
        self.x.nrows()
    }

    /// Copy with every entry clamped to `max(x, 0)`.
    pub fn projected(&self) -> AbundanceMap {
        AbundanceMap {
            x: self.x.mapv(|v| v.max(0.0)),
            grid: self.grid,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn cube_from_matrix_accepts_matching_grid() {
        let y = array![[1.0, 2.0, 3.0, 4.0], [5.0, 6.0, 7.0, 8.0]];
        let cube = HyperCube::from_matrix(y.clone(), 2, 2).unwrap();
        assert_eq!(cube.n_pixels(), 4);
        assert_eq!(cube.data(), &y);
    }

    #[test]
    fn cube_from_matrix_rejects_bad_grid() {
        let y = Array2::<f64>::zeros((2, 4));
        assert!(matches!(
            HyperCube::from_matrix(y, 3, 2),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn cube_from_matrix_rejects_nan() {
        let mut y = Array2::<f64>::zeros((2, 4));
        y[[0, 1]] = f64::NAN;
        assert!(matches!(
            HyperCube::from_matrix(y, 2, 2),
            Err(Error::NonFiniteInput(_))
        ));
    }

    #[test]
    fn pixel_index_column_major() {
        let g = SpatialGrid::new(3, 3).unwrap();
        assert_eq!(pixel_index(1, 1, g).unwrap(), 1);
        assert_eq!(pixel_index(2, 2, g).unwrap(), 5);
        assert!(matches!(pixel_index(4, 1, g), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn pixel_index_is_a_bijection() {
        let g = SpatialGrid::new(4, 7).unwrap();
        let mut seen = vec![false; g.n_pixels()];
        for r in 1..=4 {
            for c in 1..=7 {
                let p = pixel_index(r, c, g).unwrap();
                assert!((1..=g.n_pixels()).contains(&p));
                assert!(!seen[p - 1], "index {p} hit twice");
                seen[p - 1] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }
}
