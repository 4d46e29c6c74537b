use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use mcanm::anm::{AnmProblem, SolverOptions};
use mcanm::certificate::{build_certificate, solver_phases, symmetric_half_bandwidth, verify_certificate, SymmetricMask, DEFAULT_GRID_DENSITY};
use mcanm::experiments::{anm_pipeline, resolve_threads, run_grid, with_threads, write_outputs, ExperimentConfig, ExperimentError};
use mcanm::l21::{solve_l21, uniform_grid, GridProblem, L21Options};
use mcanm::retrieval::rmse;
use mcanm::signal::{draw_mask, Instance, MaskMode, SampleMask, SpectralModel};

/// Multichannel gridless spectral estimation from compressive samples.
#[derive(Parser)]
#[command(name = "mcanm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random instance and write it as JSON.
    Gen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "n", default_value_t = 64)]
        n: usize,
        #[arg(long = "k", default_value_t = 5)]
        k: usize,
        #[arg(long = "l", default_value_t = 3)]
        l: usize,
        /// Observed samples (uniform subset); all `N` when omitted.
        #[arg(long = "m")]
        m: Option<usize>,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate frequencies from an instance's observed rows.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_enum, default_value_t = SolvePipeline::Anm)]
        pipeline: SolvePipeline,
        /// Solver options as JSON.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build and verify the dual certificate for an instance's support.
    Certify {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = DEFAULT_GRID_DENSITY)]
        grid_density: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a phase-transition grid and write CSV/JSON tables.
    Phase {
        /// Experiment config JSON; the desk-scale grid when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Built-in grid used when no config is given.
        #[arg(long, value_enum, default_value_t = Preset::Desk)]
        preset: Preset,
        /// Overrides the config's base seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "phase_out")]
        out: PathBuf,
        /// Worker threads (`MCANM_THREADS` takes precedence).
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SolvePipeline {
    Anm,
    L21,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Desk,
    Paper,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Config(String),
    Solver(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Config(_) => 2,
            Failure::Solver(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Solver(m) | Failure::Io(m) => m,
        }
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Io { .. } => Failure::Io(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

#[derive(Serialize)]
struct SolveReport {
    pipeline: &'static str,
    freqs: Vec<f64>,
    /// Amplitude rows as `[re, im]` pairs.
    amps: Vec<Vec<[f64; 2]>>,
    weights: Vec<f64>,
    objective: f64,
    dual_objective: Option<f64>,
    relative_gap: Option<f64>,
    iterations: usize,
    rmse_vs_truth: Option<f64>,
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, json: String) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, json + "\n").map_err(|e| Failure::Io(format!("{}: {e}", p.display()))),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report types serialize")
}

fn load_instance(path: &Path) -> Result<(Instance, SpectralModel, SampleMask), Failure> {
    let inst: Instance = serde_json::from_str(&read(path)?)
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let (model, mask) = inst
        .to_parts()
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    Ok((inst, model, mask))
}

fn gen(seed: u64, n: usize, k: usize, l: usize, m: Option<usize>, out: Option<&Path>) -> Result<(), Failure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = SpectralModel::random(n, k, l, &mut rng).map_err(|e| Failure::Config(e.to_string()))?;
    let mask = match m {
        Some(m) => draw_mask(n, MaskMode::UniformSubset { m }, &mut rng).map_err(|e| Failure::Config(e.to_string()))?,
        None => SampleMask::full(n),
    };
    emit(out, to_json(&Instance::from_parts(&model, &mask, seed)))
}

fn amps_json(amps: &mcanm::linalg::ComplexMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..amps.rows())
        .map(|r| amps.row(r).iter().map(|z| [z.re, z.im]).collect())
        .collect()
}

fn solve(instance: &Path, pipeline: SolvePipeline, config: Option<&Path>, out: Option<&Path>) -> Result<(), Failure> {
    let (_, model, mask) = load_instance(instance)?;
    let observed = model.data.select_rows(&mask.indices);
    let report = match pipeline {
        SolvePipeline::Anm => {
            let opts: SolverOptions = match config {
                Some(p) => serde_json::from_str(&read(p)?).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?,
                None => SolverOptions::default(),
            };
            let problem = AnmProblem::from_full(&model.data, mask).map_err(|e| Failure::Config(e.to_string()))?;
            let result = anm_pipeline(&problem, &opts).map_err(|e| Failure::Solver(e.to_string()))?;
            let est = result
                .estimate
                .ok_or_else(|| Failure::Solver("frequency retrieval failed".into()))?;
            let sol = result.solution;
            SolveReport {
                pipeline: "anm",
                rmse_vs_truth: rmse(&model.freqs, &est.freqs),
                amps: amps_json(&est.amps),
                freqs: est.freqs,
                weights: est.weights,
                objective: sol.objective,
                dual_objective: Some(sol.dual_objective),
                relative_gap: Some(sol.relative_gap()),
                iterations: sol.iterations,
            }
        }
        SolvePipeline::L21 => {
            let grid = uniform_grid(model.n);
            let problem = GridProblem::new(grid.clone(), mask, observed).map_err(|e| Failure::Config(e.to_string()))?;
            let sol = solve_l21(&problem, &L21Options::default()).map_err(|e| Failure::Solver(e.to_string()))?;
            let freqs: Vec<f64> = sol.support.iter().map(|&g| grid[g]).collect();
            let amps = sol.coefficients.select_rows(&sol.support);
            SolveReport {
                pipeline: "l21",
                rmse_vs_truth: rmse(&model.freqs, &freqs),
                weights: amps.row_norms(),
                amps: amps_json(&amps),
                freqs,
                objective: sol.objective,
                dual_objective: None,
                relative_gap: None,
                iterations: sol.iterations,
            }
        }
    };
    emit(out, to_json(&report))
}

fn certify(instance: &Path, grid_density: usize, out: Option<&Path>) -> Result<(), Failure> {
    let (inst, model, mask) = load_instance(instance)?;
    let n = symmetric_half_bandwidth(model.n).map_err(|e| Failure::Config(e.to_string()))?;
    let phases = solver_phases(&model.freqs, &model.amps, n).map_err(|e| Failure::Config(e.to_string()))?;
    let mask = SymmetricMask::from_sample_mask(&mask).map_err(|e| Failure::Config(e.to_string()))?;
    let system = build_certificate(n, &model.freqs, &phases, &mask).map_err(|e| Failure::Solver(e.to_string()))?;
    let report = verify_certificate(&system, grid_density).with_seed(inst.seed);
    emit(out, to_json(&report))
}

fn phase(config: Option<&Path>, preset: Preset, seed: Option<u64>, out: &Path, threads: Option<usize>) -> Result<(), Failure> {
    let mut cfg = match (config, preset) {
        (Some(p), _) => ExperimentConfig::from_json(&read(p)?)?,
        (None, Preset::Desk) => ExperimentConfig::desk(),
        (None, Preset::Paper) => ExperimentConfig::paper(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let threads = resolve_threads(threads)?;
    let result = with_threads(threads, || run_grid(&cfg))?;
    write_outputs(&result, out)?;
    for b in &result.boundary {
        eprintln!("L={}: boundary M={:?} (reference {:.1})", b.l, b.boundary_m, b.reference_m);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen { seed, n, k, l, m, out } => gen(*seed, *n, *k, *l, *m, out.as_deref()),
        Command::Solve { instance, pipeline, config, out } => solve(instance, *pipeline, config.as_deref(), out.as_deref()),
        Command::Certify { instance, grid_density, out } => certify(instance, *grid_density, out.as_deref()),
        Command::Phase { config, preset, seed, out, threads } => phase(config.as_deref(), *preset, *seed, out, *threads),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
