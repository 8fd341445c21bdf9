//! File formats: the `HSUMTX01` binary matrix container and the key-value
//! run configuration.
//!
//! A matrix file is exactly `24 + 8 * rows * cols` bytes: an 8-byte ASCII
//! magic, two little-endian u64 dimensions, and the payload as f64
//! little-endian values in column-major order. CSV import (headerless,
//! comma-separated, one row per line) is accepted on read when the file
//! extension is `.csv`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::prox::Rho;
use crate::solver::SolverConfig;
use crate::spatial::Boundary;

const MAGIC: &[u8; 8] = b"HSUMTX01";

/// Writes `m` in the binary container format.
pub fn write_matrix(path: &Path, m: &ArrayView2<f64>) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput(format!(
            "refusing to write non-finite values to {}",
            path.display()
        )));
    }
    let file = fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(MAGIC)?;
    w.write_all(&(m.nrows() as u64).to_le_bytes())?;
    w.write_all(&(m.ncols() as u64).to_le_bytes())?;
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            w.write_all(&m[[r, c]].to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a matrix, sniffing CSV by extension and the binary container
/// otherwise.
pub fn read_matrix(path: &Path) -> Result<Array2<f64>> {
    if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
    {
        return read_csv(path);
    }
    let bytes = fs::read(path)?;
    if bytes.len() < 24 {
        return Err(Error::TruncatedFile(format!(
            "{} is {} bytes, shorter than the 24-byte header",
            path.display(),
            bytes.len()
        )));
    }
    if &bytes[..8] != MAGIC {
        return Err(Error::BadMagic);
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    let expected = 24 + 8usize
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or_else(|| Error::TruncatedFile("dimension overflow".into()))?;
    if bytes.len() != expected {
        return Err(Error::TruncatedFile(format!(
            "{} is {} bytes, expected {} for a {}x{} matrix",
            path.display(),
            bytes.len(),
            expected,
            rows,
            cols
        )));
    }
    let mut m = Array2::<f64>::zeros((rows, cols));
    let mut off = 24;
    for c in 0..cols {
        for r in 0..rows {
            let v = f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
            if !v.is_finite() {
                return Err(Error::NonFiniteInput(format!(
                    "entry ({r}, {c}) of {}",
                    path.display()
                )));
            }
            m[[r, c]] = v;
            off += 8;
        }
    }
    Ok(m)
}

fn read_csv(path: &Path) -> Result<Array2<f64>> {
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|cell| {
                cell.trim().parse::<f64>().map_err(|_| {
                    Error::Parse(format!(
                        "{}:{}: cannot parse `{}` as a number",
                        path.display(),
                        lineno + 1,
                        cell.trim()
                    ))
                })
            })
            .collect::<Result<_>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Parse(format!(
                    "{}:{}: row has {} cells, expected {}",
                    path.display(),
                    lineno + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse(format!("{} contains no data", path.display())));
    }
    let (r, c) = (rows.len(), rows[0].len());
    let m = Array2::from_shape_fn((r, c), |(i, j)| rows[i][j]);
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput(format!("{}", path.display())));
    }
    Ok(m)
}

/// Which solver a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Primal,
    DualSgs,
}

impl std::str::FromStr for SolverKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "primal" => Ok(SolverKind::Primal),
            "dual-sgs" => Ok(SolverKind::DualSgs),
            other => Err(Error::ConfigError(format!(
                "invalid value for solver: `{other}` (expected `primal` or `dual-sgs`)"
            ))),
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolverKind::Primal => "primal",
            SolverKind::DualSgs => "dual-sgs",
        };
        f.write_str(s)
    }
}

/// Parsed run configuration.
///
/// The file is plain `key = value` text; `#` starts a comment. Recognized
/// keys: `solver`, `rho`, `lambda`, `lambda_tv`, `sigma`, `tau`, `tol1`,
/// `tol2`, `max_iter`, `boundary`, `seed`, `grid.n_r`, `grid.n_c`. Unknown
/// keys are a hard error. `solver`, `lambda`, `lambda_tv`, `grid.n_r` and
/// `grid.n_c` are required; the rest default to the solver's defaults.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub solver: SolverKind,
    pub rho: Rho,
    pub lambda: f64,
    pub lambda_tv: f64,
    pub sigma: f64,
    pub tau: f64,
    pub tol1: f64,
    pub tol2: f64,
    pub max_iter: Option<usize>,
    pub boundary: Boundary,
    pub seed: u64,
    pub n_r: usize,
    pub n_c: usize,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut seen: Vec<(String, String)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::ConfigError(format!(
                    "line {}: expected `key = value`, got `{line}`",
                    lineno + 1
                )));
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if seen.iter().any(|(k, _)| *k == key) {
                return Err(Error::ConfigError(format!("duplicate key `{key}`")));
            }
            seen.push((key, value));
        }

        let mut cfg = RunConfigBuilder::default();
        for (key, value) in &seen {
            cfg.set(key, value)?;
        }
        cfg.build()
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        RunConfig::parse(&fs::read_to_string(path)?)
    }

    /// Solver parameters implied by this configuration.
    pub fn solver_config(&self) -> SolverConfig {
        let base = match self.solver {
            SolverKind::Primal => SolverConfig::primal_defaults(self.lambda, self.lambda_tv),
            SolverKind::DualSgs => SolverConfig::dual_defaults(self.lambda, self.lambda_tv),
        };
        SolverConfig {
            rho: self.rho,
            sigma: self.sigma,
            tau: self.tau,
            tol1: self.tol1,
            tol2: self.tol2,
            max_iter: self.max_iter.unwrap_or(base.max_iter),
            boundary: self.boundary,
            ..base
        }
    }
}

#[derive(Default)]
struct RunConfigBuilder {
    solver: Option<SolverKind>,
    rho: Option<Rho>,
    lambda: Option<f64>,
    lambda_tv: Option<f64>,
    sigma: Option<f64>,
    tau: Option<f64>,
    tol1: Option<f64>,
    tol2: Option<f64>,
    max_iter: Option<usize>,
    boundary: Option<Boundary>,
    seed: Option<u64>,
    n_r: Option<usize>,
    n_c: Option<usize>,
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse::<T>()
        .map_err(|_| Error::ConfigError(format!("invalid value for {key}: `{value}`")))
}

impl RunConfigBuilder {
    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "solver" => self.solver = Some(value.parse()?),
            "rho" => {
                self.rho = Some(match value {
                    "l1" => Rho::L1,
                    "l21" => Rho::L21,
                    other => {
                        return Err(Error::ConfigError(format!(
                            "invalid value for rho: `{other}` (expected `l1` or `l21`)"
                        )))
                    }
                })
            }
            "lambda" => self.lambda = Some(parse_num(key, value)?),
            "lambda_tv" => self.lambda_tv = Some(parse_num(key, value)?),
            "sigma" => self.sigma = Some(parse_num(key, value)?),
            "tau" => self.tau = Some(parse_num(key, value)?),
            "tol1" => self.tol1 = Some(parse_num(key, value)?),
            "tol2" => self.tol2 = Some(parse_num(key, value)?),
            "max_iter" => self.max_iter = Some(parse_num(key, value)?),
            "boundary" => {
                self.boundary = Some(match value {
                    "periodic" => Boundary::Periodic,
                    "reflexive" => Boundary::Reflexive,
                    other => {
                        return Err(Error::ConfigError(format!(
                            "invalid value for boundary: `{other}` (expected `periodic` or `reflexive`)"
                        )))
                    }
                })
            }
            "seed" => self.seed = Some(parse_num(key, value)?),
            "grid.n_r" => self.n_r = Some(parse_num(key, value)?),
            "grid.n_c" => self.n_c = Some(parse_num(key, value)?),
            other => return Err(Error::ConfigError(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    fn build(self) -> Result<RunConfig> {
        let require = |name: &str| Error::ConfigError(format!("missing required key `{name}`"));
        Ok(RunConfig {
            solver: self.solver.ok_or_else(|| require("solver"))?,
            rho: self.rho.unwrap_or(Rho::L1),
            lambda: self.lambda.ok_or_else(|| require("lambda"))?,
            lambda_tv: self.lambda_tv.ok_or_else(|| require("lambda_tv"))?,
            sigma: self.sigma.unwrap_or(0.05),
            tau: self.tau.unwrap_or(1.0),
            tol1: self.tol1.unwrap_or(1e-3),
            tol2: self.tol2.unwrap_or(1e-4),
            max_iter: self.max_iter,
            boundary: self.boundary.unwrap_or(Boundary::Periodic),
            seed: self.seed.unwrap_or(0),
            n_r: self.n_r.ok_or_else(|| require("grid.n_r"))?,
            n_c: self.n_c.ok_or_else(|| require("grid.n_c"))?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use tempfile::tempdir;

    #[test]
    fn one_by_one_round_trip_is_32_bytes() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("scalar.mat");
        let m = array![[2.5]];
        write_matrix(&path, &m.view()).unwrap();
        assert_eq!(fs::metadata(&path).unwrap().len(), 32);
        let back = read_matrix(&path).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn random_round_trip_is_bitwise() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.mat");
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = Array2::from_shape_fn((2, 3), |_| rng.random_range(-1e6..1e6));
        write_matrix(&path, &m.view()).unwrap();
        let back = read_matrix(&path).unwrap();
        assert!(m.iter().zip(back.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn bad_magic_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.mat");
        let mut bytes = b"XXXXXXXX".to_vec();
        bytes.extend_from_slice(&1u64.to_le_bytes());
        bytes.extend_from_slice(&1u64.to_le_bytes());
        bytes.extend_from_slice(&1.0f64.to_le_bytes());
        fs::write(&path, bytes).unwrap();
        assert!(matches!(read_matrix(&path), Err(Error::BadMagic)));
    }

    #[test]
    fn truncated_file_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("short.mat");
        let mut bytes = MAGIC.to_vec();
        bytes.extend_from_slice(&2u64.to_le_bytes());
        bytes.extend_from_slice(&2u64.to_le_bytes());
        bytes.extend_from_slice(&1.0f64.to_le_bytes()); // only 1 of 4 payload values
        fs::write(&path, bytes).unwrap();
        assert!(matches!(read_matrix(&path), Err(Error::TruncatedFile(_))));
    }

    #[test]
    fn csv_import_by_extension() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.csv");
        fs::write(&path, "1.0, 2.0, 3.0\n4.0, 5.0, 6.0\n").unwrap();
        let m = read_matrix(&path).unwrap();
        assert_eq!(m, array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]);

        fs::write(&path, "1.0, oops\n").unwrap();
        assert!(matches!(read_matrix(&path), Err(Error::Parse(_))));
    }

    #[test]
    fn config_parses_and_fills_defaults() {
        let cfg = RunConfig::parse(
            "# a comment\nsolver = dual-sgs\nlambda = 0.005\nlambda_tv = 0.01\ngrid.n_r = 20\ngrid.n_c = 20\n",
        )
        .unwrap();
        assert_eq!(cfg.solver, SolverKind::DualSgs);
        assert_eq!(cfg.n_r, 20);
        let sc = cfg.solver_config();
        assert_eq!(sc.max_iter, 50);
        assert_eq!(sc.sigma, 0.05);
    }

    #[test]
    fn config_rejects_unknown_and_duplicate_keys() {
        let err = RunConfig::parse("solver = primal\nlambdaa = 0.1\n").unwrap_err();
        assert!(err.to_string().contains("lambdaa"));
        let err =
            RunConfig::parse("solver = primal\nsolver = primal\n").unwrap_err();
        assert!(err.to_string().contains("duplicate"));
    }

    #[test]
    fn config_names_offending_key() {
        let err = RunConfig::parse(
            "solver = primal\nlambda = 0.1\nlambda_tv = x\ngrid.n_r = 2\ngrid.n_c = 2\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("lambda_tv"));
    }
}
