//! Monte Carlo phase-transition harness: seeded trials over an `(L, M)` grid,
//! success scoring, and plot-ready CSV/JSON output.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};
use serde_json::Value;
use thiserror::Error;

use crate::anm::{factor_psd, reduce_channels, solve_anm, AnmError, AnmProblem, AnmSolution, ChannelMode, SolverOptions, Variant, DUAL_CHECK_GRID};
use crate::certificate::{build_certificate, verify_certificate, SymmetricMask, DEFAULT_GRID_DENSITY};
use crate::l21::{solve_l21, uniform_grid, GridProblem, L21Error, L21Options};
use crate::linalg::ComplexMatrix;
use crate::retrieval::{recover_amplitudes, rmse, vandermonde_decompose, RetrievalOptions, SpectralEstimate};
use crate::signal::{
    draw_frequencies, draw_frequencies_with_gap, draw_mask, draw_sphere_phases, gaussian_matrix, separation_bound, synthesize,
    vandermonde, MaskMode,
};

/// Environment variable overriding the worker-thread count.
pub const THREADS_ENV: &str = "MCANM_THREADS";
/// Success rate defining the empirical phase boundary.
pub const BOUNDARY_RATE: f64 = 0.95;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

fn config_err(field: &str, message: impl Into<String>) -> ExperimentError {
    ExperimentError::Config { field: field.into(), message: message.into() }
}

/// Number of snapshots; `Infinite` runs the covariance (`L → ∞`) pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ChannelCount {
    Finite(usize),
    Infinite,
}

impl ChannelCount {
    /// Accepts a positive integer, `-1`, or `"inf"`.
    pub fn from_value(v: &Value) -> Result<Self, String> {
        match v {
            Value::Number(n) if n.as_i64() == Some(-1) => Ok(Self::Infinite),
            Value::Number(n) => match n.as_u64() {
                Some(l) if l >= 1 => Ok(Self::Finite(l as usize)),
                _ => Err(format!("channel count {n} must be a positive integer, -1 or \"inf\"")),
            },
            Value::String(s) if matches!(s.as_str(), "inf" | "Inf" | "infinity" | "∞") => Ok(Self::Infinite),
            other => Err(format!("channel count {other} must be a positive integer, -1 or \"inf\"")),
        }
    }

    /// `M = 28 + 16/L`.
    pub fn reference_m(self) -> f64 {
        match self {
            Self::Finite(l) => 28.0 + 16.0 / l as f64,
            Self::Infinite => 28.0,
        }
    }

    fn seed_key(self) -> u64 {
        match self {
            Self::Finite(l) => l as u64,
            Self::Infinite => u64::MAX,
        }
    }
}

impl fmt::Display for ChannelCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Finite(l) => write!(f, "{l}"),
            Self::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for ChannelCount {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Self::Finite(l) => s.serialize_u64(*l as u64),
            Self::Infinite => s.serialize_str("inf"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    /// Atomic norm minimization followed by Vandermonde retrieval.
    Anm,
    /// ℓ2,1 minimization on the uniform grid of size `N`.
    L21,
    /// Bernoulli-mask certificate construction only; success = valid certificate.
    CertificateOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutputPaths {
    pub success_rates: String,
    pub curve: String,
    pub summary: String,
}

impl Default for OutputPaths {
    fn default() -> Self {
        Self {
            success_rates: "success_rates.csv".into(),
            curve: "curve.csv".into(),
            summary: "summary.json".into(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentConfig {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "L_values")]
    pub l_values: Vec<ChannelCount>,
    #[serde(rename = "M_values")]
    pub m_values: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub pipeline: Pipeline,
    pub success_threshold: f64,
    pub output: OutputPaths,
    pub solver: SolverOptions,
}

impl ExperimentConfig {
    /// `N=64, K=5, L ∈ {1,2,4}, M ∈ {12,…,40}`, 10 trials.
    pub fn desk() -> Self {
        Self {
            n: 64,
            k: 5,
            l_values: [1, 2, 4].map(ChannelCount::Finite).to_vec(),
            m_values: (12..=40).step_by(4).collect(),
            trials: 10,
            seed: 2016,
            pipeline: Pipeline::Anm,
            success_threshold: 1e-4,
            output: OutputPaths::default(),
            solver: SolverOptions::default(),
        }
    }

    /// Full-size study: `N=128, K=10, L ∈ {1,2,4,8,16,∞}, M ∈ {10,12,…,50}`, 20 trials.
    pub fn paper() -> Self {
        let mut l_values: Vec<_> = [1, 2, 4, 8, 16].map(ChannelCount::Finite).to_vec();
        l_values.push(ChannelCount::Infinite);
        Self {
            n: 128,
            k: 10,
            l_values,
            m_values: (10..=50).step_by(2).collect(),
            trials: 20,
            ..Self::desk()
        }
    }

    /// Parses a JSON config; missing fields take the desk defaults. Errors
    /// name the offending field.
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        let value: Value = serde_json::from_str(text).map_err(|e| config_err("<root>", e.to_string()))?;
        let Value::Object(map) = value else {
            return Err(config_err("<root>", "expected a JSON object"));
        };
        let mut cfg = Self::desk();
        for (key, v) in &map {
            match key.as_str() {
                "N" => cfg.n = field(key, v)?,
                "K" => cfg.k = field(key, v)?,
                "L_values" => {
                    let Value::Array(items) = v else {
                        return Err(config_err(key, "expected a list"));
                    };
                    cfg.l_values = items
                        .iter()
                        .map(ChannelCount::from_value)
                        .collect::<Result<_, _>>()
                        .map_err(|m| config_err(key, m))?;
                }
                "M_values" => cfg.m_values = field(key, v)?,
                "trials" => cfg.trials = field(key, v)?,
                "seed" => cfg.seed = field(key, v)?,
                "pipeline" => cfg.pipeline = field(key, v)?,
                "success_threshold" => cfg.success_threshold = field(key, v)?,
                "output" => {
                    let Value::Object(out) = v else {
                        return Err(config_err(key, "expected an object"));
                    };
                    for (name, path) in out {
                        let slot = match name.as_str() {
                            "success_rates" => &mut cfg.output.success_rates,
                            "curve" => &mut cfg.output.curve,
                            "summary" => &mut cfg.output.summary,
                            other => return Err(config_err(&format!("output.{other}"), "unknown field")),
                        };
                        *slot = field(&format!("output.{name}"), path)?;
                    }
                }
                "solver" => cfg.solver = field(key, v)?,
                other => return Err(config_err(other, "unknown field")),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.n < 2 {
            return Err(config_err("N", "must be at least 2"));
        }
        if self.k == 0 {
            return Err(config_err("K", "must be at least 1"));
        }
        if self.l_values.is_empty() {
            return Err(config_err("L_values", "must not be empty"));
        }
        if self.m_values.is_empty() {
            return Err(config_err("M_values", "must not be empty"));
        }
        if let Some(m) = self.m_values.iter().find(|&&m| m == 0 || m > self.n) {
            return Err(config_err("M_values", format!("{m} is outside 1..=N ({})", self.n)));
        }
        if self.trials == 0 {
            return Err(config_err("trials", "must be at least 1"));
        }
        if !(self.success_threshold > 0.0) {
            return Err(config_err("success_threshold", "must be positive"));
        }
        match self.pipeline {
            Pipeline::CertificateOnly => {
                if self.n < 5 {
                    return Err(config_err("N", "certificate pipeline needs N ≥ 5"));
                }
                if self.l_values.contains(&ChannelCount::Infinite) {
                    return Err(config_err("L_values", "certificate pipeline needs finite L"));
                }
            }
            Pipeline::L21 => {
                if self.l_values.contains(&ChannelCount::Infinite) {
                    return Err(config_err("L_values", "l21 pipeline needs finite L"));
                }
            }
            Pipeline::Anm => {}
        }
        Ok(())
    }
}

fn field<T: serde::de::DeserializeOwned>(name: &str, v: &Value) -> Result<T, ExperimentError> {
    serde_json::from_value(v.clone()).map_err(|e| config_err(name, e.to_string()))
}

/// Order-sensitive 64-bit mix of the trial coordinates (SplitMix64 finalizer);
/// stable across platforms and toolchains.
pub fn trial_seed(base: u64, l: ChannelCount, m: usize, trial: usize) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    [l.seed_key(), m as u64, trial as u64]
        .into_iter()
        .fold(mix(base), |acc, x| mix(acc ^ x))
}

/// Result of one seeded trial.
#[derive(Clone, Debug, Serialize)]
pub struct TrialOutcome {
    pub seed: u64,
    pub success: bool,
    pub rmse: Option<f64>,
    pub converged: bool,
    /// `max_j |c_j − ‖s_j‖| / c_j` when retrieval returned `K` atoms.
    pub weight_mismatch: Option<f64>,
    pub relative_gap: Option<f64>,
    pub dual_sup: Option<f64>,
    pub objective: Option<f64>,
}

impl TrialOutcome {
    fn failed(seed: u64, converged: bool) -> Self {
        Self {
            seed,
            success: false,
            rmse: None,
            converged,
            weight_mismatch: None,
            relative_gap: None,
            dual_sup: None,
            objective: None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CellResult {
    #[serde(rename = "L")]
    pub l: ChannelCount,
    #[serde(rename = "M")]
    pub m: usize,
    pub successes: usize,
    pub trials: usize,
    /// Mean RMSE over successful trials (NaN when there are none).
    pub mean_rmse_on_success: f64,
    pub nonconverged: usize,
    #[serde(skip)]
    pub outcomes: Vec<TrialOutcome>,
}

impl CellResult {
    pub fn success_rate(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }

    fn from_outcomes(l: ChannelCount, m: usize, outcomes: Vec<TrialOutcome>) -> Self {
        let ok: Vec<f64> = outcomes.iter().filter(|o| o.success).filter_map(|o| o.rmse).collect();
        let mean = if ok.is_empty() { f64::NAN } else { ok.iter().sum::<f64>() / ok.len() as f64 };
        Self {
            l,
            m,
            successes: outcomes.iter().filter(|o| o.success).count(),
            trials: outcomes.len(),
            mean_rmse_on_success: mean,
            nonconverged: outcomes.iter().filter(|o| !o.converged).count(),
            outcomes,
        }
    }
}

/// ANM solution plus the Toeplitz-path estimate, when retrieval succeeds.
#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub solution: AnmSolution,
    pub estimate: Option<SpectralEstimate>,
}

/// Solves `problem` and runs Vandermonde retrieval. Non-convergence is
/// reported as an error; retrieval failures leave `estimate` empty.
pub fn anm_pipeline(problem: &AnmProblem, solver: &SolverOptions) -> Result<PipelineOutput, AnmError> {
    let solution = solve_anm(problem, solver)?;
    let ropts = RetrievalOptions::default();
    let estimate = vandermonde_decompose(&solution.t, &ropts).ok().map(|vd| {
        // More atoms than observed rows cannot be fitted; report frequencies only.
        let (amps, fit_residual) = recover_amplitudes(&vd.freqs, &problem.observed, &problem.mask)
            .unwrap_or_else(|_| (ComplexMatrix::zeros(0, problem.channels()), f64::NAN));
        SpectralEstimate { freqs: vd.freqs, amps, weights: vd.weights, fit_residual }
    });
    Ok(PipelineOutput { solution, estimate })
}

/// Draws the instance for one trial and builds the ANM problem. Returns the
/// true frequencies with the problem.
fn anm_trial_problem(
    n: usize,
    k: usize,
    l: ChannelCount,
    m: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, AnmProblem), AnmError> {
    let freqs = draw_frequencies(k, n, rng)?;
    match l {
        ChannelCount::Finite(l) => {
            let amps = gaussian_matrix(k, l, rng);
            let mask = draw_mask(n, MaskMode::UniformSubset { m }, rng)?;
            let observed = synthesize(&freqs, &amps, n).select_rows(&mask.indices);
            // Beyond rank min(M, K) extra channels only cost time.
            let problem = if l > m.min(k) {
                AnmProblem::new(reduce_channels(&observed, &ChannelMode::Finite)?, mask, Variant::Reduced)?
            } else {
                AnmProblem::new(observed, mask, Variant::Standard)?
            };
            Ok((freqs, problem))
        }
        ChannelCount::Infinite => {
            let mask = draw_mask(n, MaskMode::UniformSubset { m }, rng)?;
            let a = vandermonde(&mask.indices, &freqs);
            let reduced = factor_psd(&a.matmul_adjoint(&a))?;
            Ok((freqs, AnmProblem::new(reduced, mask, Variant::Reduced)?))
        }
    }
}

fn run_anm_trial(cfg: &ExperimentConfig, l: ChannelCount, m: usize, seed: u64) -> TrialOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let Ok((truth, problem)) = anm_trial_problem(cfg.n, cfg.k, l, m, &mut rng) else {
        return TrialOutcome::failed(seed, true);
    };
    let out = match anm_pipeline(&problem, &cfg.solver) {
        Ok(out) => out,
        Err(AnmError::NotConverged { .. }) => return TrialOutcome::failed(seed, false),
        Err(_) => return TrialOutcome::failed(seed, true),
    };
    let sol = &out.solution;
    let dual_sup = sol.dual_polynomial().grid_norms(DUAL_CHECK_GRID).into_iter().fold(0.0, f64::max);
    let est = out.estimate.as_ref();
    let err = est.and_then(|e| rmse(&truth, &e.freqs));
    let weight_mismatch = est.filter(|e| e.amps.rows() == e.freqs.len() && e.freqs.len() == cfg.k).map(|e| e.weight_magnitude_mismatch());
    TrialOutcome {
        seed,
        success: err.is_some_and(|e| e < cfg.success_threshold),
        rmse: err,
        converged: true,
        weight_mismatch,
        relative_gap: Some(sol.relative_gap()),
        dual_sup: Some(dual_sup),
        objective: Some(sol.objective),
    }
}

fn run_l21_trial(cfg: &ExperimentConfig, l: usize, m: usize, seed: u64) -> TrialOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = cfg.n;
    let grid = uniform_grid(n);
    // Snap separated draws to the grid; the extra cell keeps them separated.
    let Ok(raw) = draw_frequencies_with_gap(cfg.k, separation_bound(n) + 1.0 / n as f64, &mut rng) else {
        return TrialOutcome::failed(seed, true);
    };
    let mut idx: Vec<usize> = raw.iter().map(|f| (f * n as f64).round() as usize % n).collect();
    idx.sort_unstable();
    let truth: Vec<f64> = idx.iter().map(|&i| grid[i]).collect();
    let amps = gaussian_matrix(cfg.k, l, &mut rng);
    let Ok(mask) = draw_mask(n, MaskMode::UniformSubset { m }, &mut rng) else {
        return TrialOutcome::failed(seed, true);
    };
    let observed = synthesize(&truth, &amps, n).select_rows(&mask.indices);
    let Ok(problem) = GridProblem::new(grid.clone(), mask, observed) else {
        return TrialOutcome::failed(seed, true);
    };
    match solve_l21(&problem, &L21Options::default()) {
        Ok(sol) => {
            let est: Vec<f64> = sol.support.iter().map(|&g| grid[g]).collect();
            let err = rmse(&truth, &est);
            TrialOutcome {
                success: err.is_some_and(|e| e < cfg.success_threshold),
                rmse: err,
                objective: Some(sol.objective),
                ..TrialOutcome::failed(seed, true)
            }
        }
        Err(L21Error::NotConverged { .. }) => TrialOutcome::failed(seed, false),
        Err(_) => TrialOutcome::failed(seed, true),
    }
}

fn run_certificate_trial(cfg: &ExperimentConfig, l: usize, m: usize, seed: u64) -> TrialOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (cfg.n - 1) / 4;
    let gap = 1.0 / n as f64 + 1e-9;
    let drawn = draw_frequencies_with_gap(cfg.k, gap, &mut rng)
        .ok()
        .zip(draw_sphere_phases(cfg.k, l, &mut rng).ok());
    let Some((freqs, phases)) = drawn else {
        return TrialOutcome::failed(seed, true);
    };
    let p = (m as f64 / (4 * n) as f64).min(1.0);
    let Ok(mask) = SymmetricMask::bernoulli(n, p, &mut rng) else {
        return TrialOutcome::failed(seed, true);
    };
    let valid = build_certificate(n, &freqs, &phases, &mask)
        .map(|sys| verify_certificate(&sys, DEFAULT_GRID_DENSITY).valid)
        .unwrap_or(false);
    TrialOutcome { success: valid, ..TrialOutcome::failed(seed, true) }
}

/// One trial of the configured pipeline.
pub fn run_trial(cfg: &ExperimentConfig, l: ChannelCount, m: usize, trial: usize) -> TrialOutcome {
    let seed = trial_seed(cfg.seed, l, m, trial);
    match (cfg.pipeline, l) {
        (Pipeline::Anm, _) => run_anm_trial(cfg, l, m, seed),
        (Pipeline::L21, ChannelCount::Finite(l)) => run_l21_trial(cfg, l, m, seed),
        (Pipeline::CertificateOnly, ChannelCount::Finite(l)) => run_certificate_trial(cfg, l, m, seed),
        _ => TrialOutcome::failed(seed, true),
    }
}

/// All trials of one cell.
pub fn run_cell(cfg: &ExperimentConfig, l: ChannelCount, m: usize) -> CellResult {
    let outcomes = (0..cfg.trials).into_par_iter().map(|t| run_trial(cfg, l, m, t)).collect();
    CellResult::from_outcomes(l, m, outcomes)
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundaryPoint {
    #[serde(rename = "L")]
    pub l: ChannelCount,
    /// Smallest `M` whose success rate reaches [`BOUNDARY_RATE`].
    pub boundary_m: Option<usize>,
    #[serde(rename = "M_ref")]
    pub reference_m: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GridResult {
    pub config: ExperimentConfig,
    pub cells: Vec<CellResult>,
    pub boundary: Vec<BoundaryPoint>,
}

impl GridResult {
    pub fn cell(&self, l: ChannelCount, m: usize) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.l == l && c.m == m)
    }

    pub fn boundary_for(&self, l: ChannelCount) -> Option<usize> {
        self.boundary.iter().find(|b| b.l == l).and_then(|b| b.boundary_m)
    }
}

/// Runs every `(L, M)` cell. Trials execute in parallel; results are
/// gathered in grid order, so output does not depend on the thread count.
pub fn run_grid(cfg: &ExperimentConfig) -> GridResult {
    let tasks: Vec<(ChannelCount, usize, usize)> = cfg
        .l_values
        .iter()
        .flat_map(|&l| cfg.m_values.iter().flat_map(move |&m| (0..cfg.trials).map(move |t| (l, m, t))))
        .collect();
    let outcomes: Vec<TrialOutcome> = tasks.par_iter().map(|&(l, m, t)| run_trial(cfg, l, m, t)).collect();
    let mut chunks = outcomes.chunks(cfg.trials);
    let mut cells = Vec::new();
    for &l in &cfg.l_values {
        for &m in &cfg.m_values {
            let chunk = chunks.next().expect("one chunk per cell").to_vec();
            cells.push(CellResult::from_outcomes(l, m, chunk));
        }
    }
    let boundary = cfg
        .l_values
        .iter()
        .map(|&l| {
            let mut ms: Vec<&CellResult> = cells.iter().filter(|c| c.l == l).collect();
            ms.sort_by_key(|c| c.m);
            BoundaryPoint {
                l,
                boundary_m: ms.iter().find(|c| c.success_rate() >= BOUNDARY_RATE).map(|c| c.m),
                reference_m: l.reference_m(),
            }
        })
        .collect();
    GridResult { config: cfg.clone(), cells, boundary }
}

/// Runs `f` on a pool of `threads` workers (`None` uses the global pool).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, ExperimentError> {
    match threads {
        None => Ok(f()),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| ExperimentError::ThreadPool(e.to_string())),
    }
}

/// `MCANM_THREADS` when set, otherwise the command-line value.
pub fn resolve_threads(cli: Option<usize>) -> Result<Option<usize>, ExperimentError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| config_err(THREADS_ENV, format!("`{v}` is not a thread count"))),
        Err(_) => Ok(cli),
    }
}

pub fn success_rates_csv(result: &GridResult) -> String {
    let mut out = String::from("L,M,success_rate,mean_rmse,nonconverged\n");
    for c in &result.cells {
        out.push_str(&format!(
            "{},{},{},{:e},{}\n",
            c.l,
            c.m,
            c.success_rate(),
            c.mean_rmse_on_success,
            c.nonconverged
        ));
    }
    out
}

pub fn curve_csv(l_values: &[ChannelCount]) -> String {
    let mut out = String::from("L,M_ref\n");
    for &l in l_values {
        out.push_str(&format!("{l},{}\n", l.reference_m()));
    }
    out
}

/// Writes the two CSVs and the JSON summary into `dir`.
pub fn write_outputs(result: &GridResult, dir: &Path) -> Result<(), ExperimentError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| ExperimentError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let out = &result.config.output;
    let summary = serde_json::json!({
        "config": result.config,
        "boundary": result.boundary,
        "cells": result.cells,
    });
    let files = [
        (dir.join(&out.success_rates), success_rates_csv(result)),
        (dir.join(&out.curve), curve_csv(&result.config.l_values)),
        (
            dir.join(&out.summary),
            serde_json::to_string_pretty(&summary).expect("summary is serializable") + "\n",
        ),
    ];
    for (path, body) in files {
        fs::write(&path, body).map_err(io(&path))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(pipeline: Pipeline) -> ExperimentConfig {
        ExperimentConfig {
            n: 24,
            k: 1,
            l_values: vec![ChannelCount::Finite(1), ChannelCount::Finite(2)],
            m_values: vec![24],
            trials: 2,
            pipeline,
            ..ExperimentConfig::desk()
        }
    }

    #[test]
    fn config_parsing_names_bad_fields() {
        let cfg = ExperimentConfig::from_json(r#"{"N": 32, "L_values": [1, "inf", -1], "M_values": [8]}"#).unwrap();
        assert_eq!(cfg.l_values, vec![ChannelCount::Finite(1), ChannelCount::Infinite, ChannelCount::Infinite]);
        for (text, name) in [
            (r#"{"N": "big"}"#, "`N`"),
            (r#"{"trials": 0}"#, "`trials`"),
            (r#"{"M_values": [70]}"#, "`M_values`"),
            (r#"{"L_values": [0]}"#, "`L_values`"),
            (r#"{"pipeline": "magic"}"#, "`pipeline`"),
            (r#"{"colour": 1}"#, "`colour`"),
            (r#"{"output": {"plots": "x"}}"#, "`output.plots`"),
        ] {
            let err = ExperimentConfig::from_json(text).unwrap_err().to_string();
            assert!(err.contains(name), "{err} should mention {name}");
        }
    }

    #[test]
    fn pipelines_parse_from_kebab_case() {
        for (s, p) in [("anm", Pipeline::Anm), ("l21", Pipeline::L21), ("certificate-only", Pipeline::CertificateOnly)] {
            let cfg = ExperimentConfig::from_json(&format!(r#"{{"pipeline": "{s}"}}"#)).unwrap();
            assert_eq!(cfg.pipeline, p);
        }
    }

    #[test]
    fn trial_seeds_differ_across_coordinates() {
        let a = trial_seed(1, ChannelCount::Finite(1), 10, 0);
        assert_eq!(a, trial_seed(1, ChannelCount::Finite(1), 10, 0));
        assert_ne!(a, trial_seed(1, ChannelCount::Finite(1), 10, 1));
        assert_ne!(a, trial_seed(1, ChannelCount::Finite(1), 12, 0));
        assert_ne!(a, trial_seed(1, ChannelCount::Infinite, 10, 0));
        assert_ne!(a, trial_seed(2, ChannelCount::Finite(1), 10, 0));
    }

    #[test]
    fn full_data_single_atom_cells_succeed() {
        let result = run_grid(&tiny(Pipeline::Anm));
        assert_eq!(result.cells.len(), 2);
        for c in &result.cells {
            assert_eq!(c.success_rate(), 1.0, "{c:?}");
        }
        assert_eq!(result.boundary_for(ChannelCount::Finite(2)), Some(24));
    }

    #[test]
    fn one_by_one_grid_and_curve() {
        let cfg = ExperimentConfig { l_values: vec![ChannelCount::Finite(4)], trials: 1, ..tiny(Pipeline::Anm) };
        let result = run_grid(&cfg);
        assert_eq!(result.cells.len(), 1);
        assert_eq!(curve_csv(&cfg.l_values), "L,M_ref\n4,32\n");
        assert!(success_rates_csv(&result).starts_with("L,M,success_rate,mean_rmse,nonconverged\n4,24,1,"));
    }

    #[test]
    fn infinite_channels_use_covariance() {
        let cfg = ExperimentConfig { l_values: vec![ChannelCount::Infinite], trials: 1, ..tiny(Pipeline::Anm) };
        let cell = run_cell(&cfg, ChannelCount::Infinite, 24);
        assert_eq!(cell.successes, 1);
    }

    #[test]
    fn l21_and_certificate_pipelines_run() {
        let l21 = run_cell(&tiny(Pipeline::L21), ChannelCount::Finite(2), 24);
        assert_eq!(l21.successes, 2);
        let cfg = ExperimentConfig { n: 33, k: 2, ..tiny(Pipeline::CertificateOnly) };
        let cert = run_cell(&cfg, ChannelCount::Finite(2), 33);
        assert_eq!(cert.successes, 2);
    }

    #[test]
    fn outputs_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig { trials: 1, ..tiny(Pipeline::L21) };
        write_outputs(&run_grid(&cfg), dir.path()).unwrap();
        for f in ["success_rates.csv", "curve.csv", "summary.json"] {
            assert!(dir.path().join(f).exists());
        }
    }
}
