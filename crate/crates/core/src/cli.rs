//! Command-line surface: `gen-data`, `unmix`, `eval`, and `sweep`.
//!
//! Exit codes: 0 on success, 2 for usage or configuration errors, 3 for
//! data errors, 4 when a solver diverges.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::datagen::{add_noise, gen_abundances_dc1, gen_abundances_smooth, gen_library, NoiseSpec};
use crate::datamodel::{AbundanceMap, HyperCube, SpatialGrid, SpectralLibrary};
use crate::error::{Error, Result};
use crate::io::{read_matrix, write_matrix, RunConfig, SolverKind};
use crate::metrics::{evaluate, DEFAULT_SUCCESS_THRESHOLD};
use crate::solver::dual::dual_sgs_admm;
use crate::solver::primal::primal_admm;
use crate::solver::{SolverConfig, UnmixReport};
use crate::threads;

/// The regularization grid searched by `sweep`.
pub const PARAM_GRID: [f64; 10] = [
    0.5, 0.1, 0.05, 0.01, 0.005, 0.001, 0.0005, 0.0001, 0.00005, 0.00001,
];

#[derive(Parser)]
#[command(
    name = "hsunmix",
    about = "Sparse hyperspectral unmixing with total-variation regularization",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic library, abundance field and noisy cube.
    GenData(GenDataArgs),
    /// Run a solver on a cube and write the estimated abundances.
    Unmix(UnmixArgs),
    /// Score an estimate against ground truth.
    Eval(EvalArgs),
    /// Grid-search the regularization weights and report SRE per pair.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FieldKind {
    Dc1,
    Smooth,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum NoiseArg {
    White,
    Correlated,
    None,
}

#[derive(Args)]
struct GenDataArgs {
    /// Output directory (created if absent).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Spectral bands L.
    #[arg(long, default_value_t = 50)]
    bands: usize,
    /// Library signatures m.
    #[arg(long, default_value_t = 60)]
    signatures: usize,
    /// Pixel rows of the image grid.
    #[arg(long, default_value_t = 20)]
    rows: usize,
    /// Pixel columns of the image grid.
    #[arg(long, default_value_t = 20)]
    cols: usize,
    /// Active endmembers q.
    #[arg(long, default_value_t = 5)]
    endmembers: usize,
    /// Mutual-coherence target of the generated library.
    #[arg(long, default_value_t = 0.95)]
    coherence: f64,
    /// Abundance field family.
    #[arg(long, value_enum, default_value_t = FieldKind::Dc1)]
    field: FieldKind,
    /// Correlation length of the smooth field family.
    #[arg(long, default_value_t = 4.0)]
    corr_len: f64,
    #[arg(long, value_enum, default_value_t = NoiseArg::White)]
    noise: NoiseArg,
    /// Target SNR in dB.
    #[arg(long, default_value_t = 30.0)]
    snr: f64,
    /// Normalized spectral cutoff for correlated noise (default 5*pi/L).
    #[arg(long)]
    cutoff: Option<f64>,
}

#[derive(Args)]
struct UnmixArgs {
    /// Run configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Observed cube (HSUMTX01 or CSV).
    #[arg(long)]
    cube: PathBuf,
    /// Spectral library matrix.
    #[arg(long)]
    library: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Override the configured solver.
    #[arg(long)]
    solver: Option<SolverKindArg>,
    /// Override the configured seed (recorded, not consumed: solvers are
    /// deterministic).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EvalArgs {
    /// Ground-truth abundance matrix.
    #[arg(long)]
    truth: PathBuf,
    /// Estimated abundance matrix.
    #[arg(long)]
    estimate: PathBuf,
    /// Optional trace CSV; its last elapsed column becomes the runtime
    /// summary.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Success threshold on per-pixel relative error power.
    #[arg(long, default_value_t = DEFAULT_SUCCESS_THRESHOLD)]
    threshold: f64,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    cube: PathBuf,
    #[arg(long)]
    library: PathBuf,
    /// Ground truth for scoring.
    #[arg(long)]
    truth: PathBuf,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    solver: Option<SolverKindArg>,
    /// Fan the grid points out across threads.
    #[arg(long)]
    parallel: bool,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SolverKindArg {
    Primal,
    DualSgs,
}

impl From<SolverKindArg> for SolverKind {
    fn from(v: SolverKindArg) -> Self {
        match v {
            SolverKindArg::Primal => SolverKind::Primal,
            SolverKindArg::DualSgs => SolverKind::DualSgs,
        }
    }
}

/// Entry point shared by the binary and tests. Parses `argv`, runs the
/// selected subcommand, and maps errors to exit codes.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprint!("{e}");
            return 2;
        }
    };
    threads::ensure_pool();
    let result = match cli.cmd {
        Command::GenData(args) => gen_data(args),
        Command::Unmix(args) => unmix(args),
        Command::Eval(args) => eval(args),
        Command::Sweep(args) => sweep(args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::ConfigError(_) | Error::UnreachableCoherence(_) | Error::TooManyEndmembers { .. } => 2,
        Error::Diverged { .. } => 4,
        _ => 3,
    }
}

fn gen_data(args: GenDataArgs) -> Result<()> {
    fs::create_dir_all(&args.out)?;
    let grid = SpatialGrid::new(args.rows, args.cols)?;
    let library = gen_library(args.bands, args.signatures, args.coherence, args.seed)?;
    let truth = match args.field {
        FieldKind::Dc1 => gen_abundances_dc1(grid, &library, args.endmembers, args.seed)?.0,
        FieldKind::Smooth => {
            gen_abundances_smooth(grid, &library, args.endmembers, args.corr_len, args.seed)?
        }
    };
    let clean = HyperCube::from_matrix(
        library.matrix().dot(truth.data()),
        args.rows,
        args.cols,
    )?;
    let noisy = match args.noise {
        NoiseArg::None => clean.clone(),
        NoiseArg::White => {
            let spec = NoiseSpec::white(args.snr, args.seed);
            add_noise(&clean, &spec)?
        }
        NoiseArg::Correlated => {
            let mut spec = NoiseSpec::correlated(args.snr, args.seed);
            if let Some(c) = args.cutoff {
                spec = spec.with_cutoff(c);
            }
            add_noise(&clean, &spec)?
        }
    };

    write_matrix(&args.out.join("library.mat"), &library.matrix().view())?;
    write_matrix(&args.out.join("clean.mat"), &clean.data().view())?;
    write_matrix(&args.out.join("noisy.mat"), &noisy.data().view())?;
    write_matrix(&args.out.join("truth.mat"), &truth.data().view())?;

    let noise_name = match args.noise {
        NoiseArg::White => "white",
        NoiseArg::Correlated => "correlated",
        NoiseArg::None => "none",
    };
    let field_name = match args.field {
        FieldKind::Dc1 => "dc1",
        FieldKind::Smooth => "smooth",
    };
    let metadata = format!(
        "seed = {}\nbands = {}\nsignatures = {}\ngrid.n_r = {}\ngrid.n_c = {}\n\
         endmembers = {}\ncoherence = {}\nfield = {}\ncorr_len = {}\nnoise = {}\nsnr = {}\n",
        args.seed,
        args.bands,
        args.signatures,
        args.rows,
        args.cols,
        args.endmembers,
        args.coherence,
        field_name,
        args.corr_len,
        noise_name,
        args.snr,
    );
    fs::write(args.out.join("metadata.txt"), metadata)?;
    println!("wrote library, clean, noisy, truth to {}", args.out.display());
    Ok(())
}

fn load_problem(
    config: &Path,
    cube: &Path,
    library: &Path,
    solver_override: Option<SolverKindArg>,
    seed_override: Option<u64>,
) -> Result<(RunConfig, HyperCube, SpectralLibrary)> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(s) = solver_override {
        cfg.solver = s.into();
    }
    if let Some(s) = seed_override {
        cfg.seed = s;
    }
    let y = read_matrix(cube)?;
    let cube = HyperCube::from_matrix(y, cfg.n_r, cfg.n_c)?;
    let library = SpectralLibrary::new(read_matrix(library)?)?;
    Ok((cfg, cube, library))
}

fn run_solver(
    kind: SolverKind,
    cube: &HyperCube,
    library: &SpectralLibrary,
    sc: &SolverConfig,
) -> Result<UnmixReport> {
    match kind {
        SolverKind::Primal => primal_admm(cube, library, sc),
        SolverKind::DualSgs => dual_sgs_admm(cube, library, sc),
    }
}

fn write_trace(path: &Path, report: &UnmixReport) -> Result<()> {
    let mut out = String::from("iter,r_p,r_d,error,objective,elapsed_s\n");
    for rec in &report.trace {
        out.push_str(&format!(
            "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.6}\n",
            rec.iter, rec.r_p, rec.r_d, rec.error, rec.objective, rec.elapsed_s
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

fn unmix(args: UnmixArgs) -> Result<()> {
    let (cfg, cube, library) =
        load_problem(&args.config, &args.cube, &args.library, args.solver, args.seed)?;
    let sc = cfg.solver_config();
    let report = run_solver(cfg.solver, &cube, &library, &sc)?;
    fs::create_dir_all(&args.out)?;
    write_matrix(&args.out.join("xhat_raw.mat"), &report.x_hat.data().view())?;
    write_matrix(
        &args.out.join("xhat_projected.mat"),
        &report.x_hat_projected.data().view(),
    )?;
    write_trace(&args.out.join("trace.csv"), &report)?;
    let last = report.trace.last();
    println!(
        "solver={} termination={} iterations={} r_p={:.3e} r_d={:.3e}",
        cfg.solver,
        report.termination,
        report.iterations,
        last.map_or(f64::NAN, |r| r.r_p),
        last.map_or(f64::NAN, |r| r.r_d),
    );
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let truth_m = read_matrix(&args.truth)?;
    let est_m = read_matrix(&args.estimate)?;
    if truth_m.dim() != est_m.dim() {
        return Err(Error::DimensionMismatch(format!(
            "truth is {:?}, estimate is {:?}",
            truth_m.dim(),
            est_m.dim()
        )));
    }
    // Metrics are grid-independent; bind to a single-row layout.
    let n = truth_m.ncols();
    let grid = SpatialGrid::new(1, n)?;
    let truth = AbundanceMap::new(truth_m, grid)?;
    let estimate = AbundanceMap::new(est_m, grid)?;
    let result = evaluate(&truth, &estimate, args.threshold)?;

    let runtime_s = match &args.trace {
        Some(path) => last_elapsed_from_trace(path)?,
        None => None,
    };

    println!("SRE: {:.4} dB", result.sre_db);
    println!("p_s: {:.4} (threshold {})", result.p_s, args.threshold);
    match runtime_s {
        Some(t) => println!("runtime: {t:.3} s"),
        None => println!("runtime: n/a"),
    }
    let json = serde_json::json!({
        "sre_db": result.sre_db,
        "p_s": result.p_s,
        "threshold": args.threshold,
        "pixels": n,
        "runtime_s": runtime_s,
    });
    println!("{json}");
    Ok(())
}

fn last_elapsed_from_trace(path: &Path) -> Result<Option<f64>> {
    let text = fs::read_to_string(path)?;
    let last = text.lines().rfind(|l| !l.trim().is_empty());
    let Some(line) = last else { return Ok(None) };
    if line.starts_with("iter") {
        return Ok(None);
    }
    let cell = line.rsplit(',').next().unwrap_or("");
    cell.trim()
        .parse::<f64>()
        .map(Some)
        .map_err(|_| Error::Parse(format!("{}: bad elapsed column `{cell}`", path.display())))
}

fn sweep(args: SweepArgs) -> Result<()> {
    let (cfg, cube, library) =
        load_problem(&args.config, &args.cube, &args.library, args.solver, args.seed)?;
    let truth_m = read_matrix(&args.truth)?;
    let grid = cube.grid();
    let truth = AbundanceMap::new(truth_m, grid)?;

    let pairs: Vec<(f64, f64)> = PARAM_GRID
        .iter()
        .flat_map(|&l| PARAM_GRID.iter().map(move |&t| (l, t)))
        .collect();

    let score = |&(lambda, lambda_tv): &(f64, f64)| -> Result<f64> {
        let mut sc = cfg.solver_config();
        sc.lambda = lambda;
        sc.lambda_tv = lambda_tv;
        let report = run_solver(cfg.solver, &cube, &library, &sc)?;
        let result = evaluate(&truth, &report.x_hat_projected, DEFAULT_SUCCESS_THRESHOLD)?;
        Ok(result.sre_db)
    };

    let sres: Vec<f64> = if args.parallel {
        pairs
            .par_iter()
            .map(score)
            .collect::<Result<Vec<f64>>>()?
    } else {
        pairs.iter().map(score).collect::<Result<Vec<f64>>>()?
    };

    let mut out = String::from("lambda,lambda_tv,sre_db\n");
    for ((lambda, lambda_tv), sre) in pairs.iter().zip(&sres) {
        out.push_str(&format!("{lambda},{lambda_tv},{sre:.10}\n"));
    }
    fs::write(&args.out, out)?;

    let best = pairs
        .iter()
        .zip(&sres)
        .max_by(|a, b| a.1.partial_cmp(b.1).expect("SRE values are comparable"))
        .expect("grid is nonempty");
    println!(
        "best lambda={} lambda_tv={} sre_db={:.10}",
        best.0 .0, best.0 .1, best.1
    );
    Ok(())
}
