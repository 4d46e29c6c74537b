//! Multichannel atomic norm minimization as a semidefinite program, solved
//! with ADMM.
//!
//! The program is
//!
//! ```text
//! min ½ tr(X) + ½ t₀   s.t.  [[X, Yᴴ], [Y, T(t)]] ⪰ 0,  Y_Ω = Y°_Ω
//! ```
//!
//! with `T(t)` Hermitian Toeplitz. ADMM splits the block matrix into a
//! structured copy `W` (closed-form affine step) and a PSD copy `Z`
//! (eigenvalue clipping). The unscaled multiplier `Λ` of the consensus
//! constraint `W = Z` carries the dual certificate: `V = 2 Λ_YX`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{hermitian_eig, psd_project_with_eigs, ComplexMatrix, HermitianToeplitz, LinalgError};
use crate::signal::{SampleMask, SignalError};

#[derive(Debug, Error)]
pub enum AnmError {
    #[error("problem shape: {0}")]
    Shape(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error("ADMM stopped after {} iterations without reaching tolerance", .best.iterations)]
    NotConverged { best: Box<AnmSolution> },
    #[error("dual polynomial peaks at {peak} > 1 + {slack}")]
    DualInfeasible { peak: f64, slack: f64 },
}

/// Solver controls.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Initial penalty parameter.
    pub rho: f64,
    /// Residual balancing: rescale `rho` by 2 when one residual exceeds the
    /// other by `balance_ratio`.
    pub adaptive_rho: bool,
    pub balance_ratio: f64,
    /// Iterations between balancing checks; the interval is multiplied by
    /// `balance_growth` after every change of `rho` so the penalty settles.
    pub balance_interval: usize,
    pub balance_growth: f64,
    pub max_iter: usize,
    /// Relative primal and dual residual tolerance.
    pub tol: f64,
    /// Relative duality-gap tolerance.
    pub tol_gap: f64,
    /// Allowed excess of `sup_f ‖Q(f)‖` over one.
    pub dual_slack: f64,
    /// Over-relaxation factor in `(0, 2)`.
    pub relaxation: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rho: 1.0,
            adaptive_rho: true,
            balance_ratio: 10.0,
            balance_interval: 10,
            balance_growth: 1.5,
            max_iter: 20_000,
            tol: 1e-8,
            tol_gap: 1e-4,
            dual_slack: 1e-3,
            relaxation: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Observed rows are the raw samples.
    Standard,
    /// Observed rows are a rank-reduced factor from [`reduce_channels`].
    Reduced,
}

/// Observed rows of an `N × L` data matrix.
#[derive(Clone, Debug)]
pub struct AnmProblem {
    pub n: usize,
    pub observed: ComplexMatrix,
    pub mask: SampleMask,
    pub variant: Variant,
}

impl AnmProblem {
    pub fn new(observed: ComplexMatrix, mask: SampleMask, variant: Variant) -> Result<Self, AnmError> {
        if observed.rows() != mask.len() {
            return Err(AnmError::Shape(format!(
                "observed has {} rows but mask selects {}",
                observed.rows(),
                mask.len()
            )));
        }
        if mask.is_empty() {
            return Err(AnmError::Shape("mask must select at least one row".into()));
        }
        if observed.cols() == 0 {
            return Err(AnmError::Shape("observed data has no channels".into()));
        }
        if !observed.is_finite() {
            return Err(AnmError::Linalg(LinalgError::NonFinite));
        }
        Ok(Self {
            n: mask.n,
            observed,
            mask,
            variant,
        })
    }

    /// Samples the rows of a full data matrix.
    pub fn from_full(full: &ComplexMatrix, mask: SampleMask) -> Result<Self, AnmError> {
        if full.rows() != mask.n {
            return Err(AnmError::Shape(format!("data has {} rows, mask expects {}", full.rows(), mask.n)));
        }
        Self::new(full.select_rows(&mask.indices), mask, Variant::Standard)
    }

    pub fn channels(&self) -> usize {
        self.observed.cols()
    }
}

/// Primal-dual output of [`solve_anm`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AnmSolution {
    /// Recovered `N × L` data.
    pub y: ComplexMatrix,
    pub t: HermitianToeplitz,
    /// `L × L` Hermitian block.
    pub x: ComplexMatrix,
    /// `N × L` dual coefficients; `Q(f) = a(f)ᴴ V`.
    pub v: ComplexMatrix,
    /// `½ tr(X) + ½ t₀`.
    pub objective: f64,
    /// `Re⟨V_Ω, Y°_Ω⟩`.
    pub dual_objective: f64,
    pub primal_residuals: Vec<f64>,
    pub dual_residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Norm of the rows of `V` outside the mask (zero at exact optimality).
    pub off_mask_dual: f64,
}

impl AnmSolution {
    /// `|objective - dual_objective| / max(1, |objective|)`.
    pub fn relative_gap(&self) -> f64 {
        (self.objective - self.dual_objective).abs() / self.objective.abs().max(f64::MIN_POSITIVE)
    }

    pub fn final_residual(&self) -> f64 {
        let p = self.primal_residuals.last().copied().unwrap_or(f64::INFINITY);
        let d = self.dual_residuals.last().copied().unwrap_or(f64::INFINITY);
        p.max(d)
    }

    pub fn dual_polynomial(&self) -> DualPolynomial {
        DualPolynomial::new(self.v.clone())
    }
}

/// Structured iterate `(X, Y, t)`.
struct Structured {
    x: ComplexMatrix,
    y: ComplexMatrix,
    t: HermitianToeplitz,
}

fn assemble(s: &Structured) -> ComplexMatrix {
    let l = s.x.rows();
    let n = s.y.rows();
    let mut w = ComplexMatrix::zeros(l + n, l + n);
    w.set_submatrix(0, 0, &s.x);
    for i in 0..n {
        for j in 0..l {
            let v = s.y[(i, j)];
            w[(l + i, j)] = v;
            w[(j, l + i)] = v.conj();
        }
    }
    for i in 0..n {
        for j in 0..n {
            w[(l + i, l + j)] = s.t.entry(i, j);
        }
    }
    w
}

/// Minimizes `½tr(X) + ½t₀ + (ρ/2)‖W(X,Y,t) - C‖²` over the structured set.
fn structured_step(c: &ComplexMatrix, l: usize, rho: f64, fixed: &[Option<usize>], observed: &ComplexMatrix) -> Structured {
    let total = c.rows();
    let n = total - l;
    let mut x = ComplexMatrix::from_fn(l, l, |i, j| (c[(i, j)] + c[(j, i)].conj()) * 0.5);
    for i in 0..l {
        x[(i, i)].re -= 0.5 / rho;
        x[(i, i)].im = 0.0;
    }
    let y = ComplexMatrix::from_fn(n, l, |i, j| match fixed[i] {
        Some(row) => observed[(row, j)],
        None => (c[(l + i, j)] + c[(j, l + i)].conj()) * 0.5,
    });
    let tt = c.submatrix(l, l, n, n);
    let mut gen = HermitianToeplitz::nearest(&tt).generator().to_vec();
    gen[0].re -= 0.5 / (rho * n as f64);
    let t = HermitianToeplitz::new(gen).expect("t0 is real by construction");
    Structured { x, y, t }
}

/// Solves the atomic norm minimization program by ADMM.
///
/// Converged means relative residuals below `tol`, relative duality gap below
/// `tol_gap`, and `sup_f ‖Q(f)‖ ≤ 1 + dual_slack`; when the residuals pass but
/// the duality checks do not, the residual tolerance is tightened tenfold and
/// iteration continues. Returns [`AnmError::NotConverged`] carrying the last
/// iterate when `max_iter` is exhausted first.
pub fn solve_anm(problem: &AnmProblem, opts: &SolverOptions) -> Result<AnmSolution, AnmError> {
    let n = problem.n;
    let l = problem.channels();
    let m = problem.mask.len();
    let dim = n + l;

    // Positive homogeneity: solve at unit data scale, rescale the primal afterwards.
    let scale = problem.observed.frobenius_norm() / (m as f64).sqrt();
    if scale == 0.0 {
        return Ok(zero_solution(n, l));
    }
    let observed = problem.observed.scale(1.0 / scale);
    let mut fixed = vec![None; n];
    for (row, &idx) in problem.mask.indices.iter().enumerate() {
        fixed[idx] = Some(row);
    }

    let mut rho = opts.rho;
    let mut z = ComplexMatrix::zeros(dim, dim);
    let mut lambda = ComplexMatrix::zeros(dim, dim);
    let mut primal_hist = Vec::new();
    let mut dual_hist = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut current = structured_step(&z, l, rho, &fixed, &observed);
    let mut balance_interval = opts.balance_interval.max(1);
    let mut next_balance = balance_interval;
    let mut tol = opts.tol;

    for it in 0..opts.max_iter {
        iterations = it + 1;
        // W-step.
        let c = z.sub(&lambda.scale(1.0 / rho));
        current = structured_step(&c, l, rho, &fixed, &observed);
        let w = assemble(&current);
        let w_relaxed = if opts.relaxation == 1.0 {
            w.clone()
        } else {
            w.scale(opts.relaxation).add(&z.scale(1.0 - opts.relaxation))
        };
        // Z-step.
        let (z_new, _) = psd_project_with_eigs(&w_relaxed.add(&lambda.scale(1.0 / rho)))?;
        // Multiplier step.
        let diff = w_relaxed.sub(&z_new);
        lambda = lambda.add(&diff.scale(rho));

        let primal = w.sub(&z_new).frobenius_norm();
        let dual = rho * z_new.sub(&z).frobenius_norm();
        z = z_new;
        let primal_rel = primal / w.frobenius_norm().max(z.frobenius_norm()).max(1e-300);
        let dual_rel = dual / lambda.frobenius_norm().max(1e-300);
        primal_hist.push(primal_rel);
        dual_hist.push(dual_rel);

        if primal_rel <= tol && dual_rel <= tol {
            let v = dual_coefficients(&lambda, l, n);
            if certifies(&current, &v, &problem.mask.indices, &observed, opts) {
                converged = true;
                break;
            }
            // Residuals are small but the dual certificate is not yet tight.
            tol *= 0.1;
            if tol < MIN_RESIDUAL_TOL {
                break;
            }
        }
        if opts.adaptive_rho && it + 1 == next_balance {
            let before = rho;
            if primal_rel > opts.balance_ratio * dual_rel {
                rho *= 2.0;
            } else if dual_rel > opts.balance_ratio * primal_rel {
                rho /= 2.0;
            }
            if rho != before {
                balance_interval = (balance_interval as f64 * opts.balance_growth.max(1.0)).ceil() as usize;
            }
            next_balance += balance_interval;
        }
    }

    let v = dual_coefficients(&lambda, l, n);
    let solution = finish(problem, current, v, scale, primal_hist, dual_hist, iterations, converged);
    if converged {
        Ok(solution)
    } else {
        Err(AnmError::NotConverged {
            best: Box::new(solution),
        })
    }
}

/// Floor for the residual tolerance when tightening for the duality checks.
const MIN_RESIDUAL_TOL: f64 = 1e-13;

fn dual_coefficients(lambda: &ComplexMatrix, l: usize, n: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, l, |i, j| lambda[(l + i, j)] * 2.0)
}

/// Relative duality gap within `tol_gap` and `sup_f ‖Q(f)‖ ≤ 1 + dual_slack`,
/// evaluated at unit data scale.
fn certifies(s: &Structured, v: &ComplexMatrix, rows: &[usize], observed: &ComplexMatrix, opts: &SolverOptions) -> bool {
    let objective = 0.5 * s.x.trace().re + 0.5 * s.t.t0();
    let dual_objective = v.select_rows(rows).real_inner(observed);
    if (objective - dual_objective).abs() > opts.tol_gap * objective.abs() {
        return false;
    }
    DualPolynomial::new(v.clone()).check_feasible(DUAL_CHECK_GRID, opts.dual_slack).is_ok()
}

#[allow(clippy::too_many_arguments)]
fn finish(
    problem: &AnmProblem,
    s: Structured,
    v: ComplexMatrix,
    scale: f64,
    primal_residuals: Vec<f64>,
    dual_residuals: Vec<f64>,
    iterations: usize,
    converged: bool,
) -> AnmSolution {
    let x = s.x.scale(scale);
    let y = s.y.scale(scale);
    let t = s.t.scale(scale);
    let objective = 0.5 * x.trace().re + 0.5 * t.t0();
    let v_obs = v.select_rows(&problem.mask.indices);
    let dual_objective = v_obs.real_inner(&problem.observed);
    let off_mask_dual = v
        .select_rows(&problem.mask.complement())
        .frobenius_norm();
    AnmSolution {
        y,
        t,
        x,
        v,
        objective,
        dual_objective,
        primal_residuals,
        dual_residuals,
        iterations,
        converged,
        off_mask_dual,
    }
}

fn zero_solution(n: usize, l: usize) -> AnmSolution {
    AnmSolution {
        y: ComplexMatrix::zeros(n, l),
        t: HermitianToeplitz::zeros(n),
        x: ComplexMatrix::zeros(l, l),
        v: ComplexMatrix::zeros(n, l),
        objective: 0.0,
        dual_objective: 0.0,
        primal_residuals: vec![0.0],
        dual_residuals: vec![0.0],
        iterations: 0,
        converged: true,
        off_mask_dual: 0.0,
    }
}

/// Channel-count handling for [`reduce_channels`].
#[derive(Clone, Debug)]
pub enum ChannelMode {
    /// Finite `L`: factor the sample covariance `(1/L) Y Yᴴ`.
    Finite,
    /// `L → ∞`: factor a given `M × M` covariance.
    Covariance(ComplexMatrix),
}

/// Relative eigenvalue threshold defining the numerical rank of a Gram matrix.
pub const REDUCTION_RANK_TOL: f64 = 1e-12;

/// Returns `Ỹ` (`M × L′`, `L′` the numerical rank) with `ỸỸᴴ` equal to the
/// sample covariance `(1/L)·Y Yᴴ` or to the given covariance.
pub fn reduce_channels(observed: &ComplexMatrix, mode: &ChannelMode) -> Result<ComplexMatrix, AnmError> {
    let gram = match mode {
        ChannelMode::Finite => {
            let l = observed.cols();
            if l == 0 {
                return Err(AnmError::Shape("observed data has no channels".into()));
            }
            // Thin factors need no eigendecomposition when L ≤ M and full column rank,
            // but the Gram route keeps L′ = rank uniformly.
            observed.matmul_adjoint(observed).scale(1.0 / l as f64)
        }
        ChannelMode::Covariance(r) => {
            if r.rows() != observed.rows() || !r.is_square() {
                return Err(AnmError::Shape(format!(
                    "covariance must be {0}x{0}, got {1:?}",
                    observed.rows(),
                    r.shape()
                )));
            }
            r.clone()
        }
    };
    factor_psd(&gram)
}

/// Factor `F` with `F Fᴴ = R` for a Hermitian PSD `R`, with `rank(R)` columns.
pub fn factor_psd(r: &ComplexMatrix) -> Result<ComplexMatrix, AnmError> {
    let eig = hermitian_eig(r)?;
    let top = eig.values.first().copied().unwrap_or(0.0).max(0.0);
    let floor = -1e-10 * top.max(f64::MIN_POSITIVE);
    if let Some(&min) = eig.values.last() {
        if min < floor {
            return Err(AnmError::Linalg(LinalgError::NotHermitian { deviation: min }));
        }
    }
    let rank = eig.values.iter().filter(|&&v| v > REDUCTION_RANK_TOL * top).count();
    let m = r.rows();
    Ok(ComplexMatrix::from_fn(m, rank, |i, j| {
        eig.vectors[(i, j)] * eig.values[j].sqrt()
    }))
}

/// Vector-valued trigonometric polynomial `Q(f) = a(f)ᴴ V`.
#[derive(Clone, Debug)]
pub struct DualPolynomial {
    v: ComplexMatrix,
    /// Sample index of row 0 of `V` (0 for the solver layout).
    offset: i64,
}

impl DualPolynomial {
    pub fn new(v: ComplexMatrix) -> Self {
        Self { v, offset: 0 }
    }

    /// Rows of `v` are indexed `offset, offset+1, …`.
    pub fn with_offset(v: ComplexMatrix, offset: i64) -> Self {
        Self { v, offset }
    }

    pub fn channels(&self) -> usize {
        self.v.cols()
    }

    pub fn degree_span(&self) -> usize {
        self.v.rows()
    }

    pub fn coefficients(&self) -> &ComplexMatrix {
        &self.v
    }

    /// `Q(f)`, `Q′(f)` and `Q″(f)` (derivatives with respect to `f`).
    pub fn eval_with_derivatives(&self, f: f64) -> [Vec<Complex64>; 3] {
        let l = self.v.cols();
        let mut q = vec![Complex64::new(0.0, 0.0); l];
        let mut d1 = q.clone();
        let mut d2 = q.clone();
        let two_pi = 2.0 * std::f64::consts::PI;
        for r in 0..self.v.rows() {
            let j = (r as i64 + self.offset) as f64;
            let e = Complex64::from_polar(1.0, -two_pi * j * f);
            let w1 = Complex64::new(0.0, -two_pi * j);
            let e1 = e * w1;
            let e2 = e1 * w1;
            for (c, vr) in self.v.row(r).iter().enumerate() {
                q[c] += e * vr;
                d1[c] += e1 * vr;
                d2[c] += e2 * vr;
            }
        }
        [q, d1, d2]
    }

    pub fn eval(&self, f: f64) -> Vec<Complex64> {
        let l = self.v.cols();
        let mut q = vec![Complex64::new(0.0, 0.0); l];
        let two_pi = 2.0 * std::f64::consts::PI;
        for r in 0..self.v.rows() {
            let j = (r as i64 + self.offset) as f64;
            let e = Complex64::from_polar(1.0, -two_pi * j * f);
            for (c, vr) in self.v.row(r).iter().enumerate() {
                q[c] += e * vr;
            }
        }
        q
    }

    pub fn norm_at(&self, f: f64) -> f64 {
        self.eval(f).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `‖Q(f)‖` on the uniform grid `{g / size}`.
    pub fn grid_norms(&self, size: usize) -> Vec<f64> {
        // Direct evaluation with a per-row phase recurrence.
        let l = self.v.cols();
        let two_pi = 2.0 * std::f64::consts::PI;
        (0..size)
            .map(|g| {
                let f = g as f64 / size as f64;
                let step = Complex64::from_polar(1.0, -two_pi * f);
                let mut e = Complex64::from_polar(1.0, -two_pi * self.offset as f64 * f);
                let mut q = vec![Complex64::new(0.0, 0.0); l];
                for r in 0..self.v.rows() {
                    for (c, vr) in self.v.row(r).iter().enumerate() {
                        q[c] += e * vr;
                    }
                    e *= step;
                }
                q.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
            })
            .collect()
    }

    /// Checks `sup_f ‖Q(f)‖ ≤ 1 + slack` on a `grid`-point uniform grid and
    /// returns the observed supremum.
    pub fn check_feasible(&self, grid: usize, slack: f64) -> Result<f64, AnmError> {
        let peak = self.grid_norms(grid).into_iter().fold(0.0, f64::max);
        if peak > 1.0 + slack {
            Err(AnmError::DualInfeasible { peak, slack })
        } else {
            Ok(peak)
        }
    }
}

/// Grid size used for dual feasibility checks.
pub const DUAL_CHECK_GRID: usize = 1 << 14;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{draw_mask, gaussian_matrix, MaskMode, SpectralModel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_atom_full_data_objective_is_coefficient_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 12;
        let f = rng.random::<f64>();
        let s = gaussian_matrix(1, 3, &mut rng);
        let model = SpectralModel::new(n, vec![f], s.clone());
        let problem = AnmProblem::from_full(&model.data, SampleMask::full(n)).unwrap();
        let sol = solve_anm(&problem, &SolverOptions::default()).unwrap();
        let norm = s.frobenius_norm();
        assert!((sol.objective - norm).abs() <= 1e-4 * norm, "{} vs {}", sol.objective, norm);
        assert!(sol.y.sub(&model.data).frobenius_norm() < 1e-9 * model.data.frobenius_norm());
        assert!(sol.relative_gap() < 1e-4);
        let q = sol.dual_polynomial();
        assert!((q.norm_at(f) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let problem = AnmProblem::new(ComplexMatrix::zeros(3, 2), SampleMask::from_indices(8, vec![0, 3, 5]).unwrap(), Variant::Standard).unwrap();
        let sol = solve_anm(&problem, &SolverOptions::default()).unwrap();
        assert_eq!(sol.objective, 0.0);
        assert!(sol.dual_polynomial().grid_norms(64).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shape_errors() {
        let mask = SampleMask::from_indices(8, vec![0, 3]).unwrap();
        assert!(matches!(
            AnmProblem::new(ComplexMatrix::zeros(3, 1), mask.clone(), Variant::Standard),
            Err(AnmError::Shape(_))
        ));
        assert!(matches!(
            AnmProblem::new(ComplexMatrix::zeros(2, 0), mask, Variant::Standard),
            Err(AnmError::Shape(_))
        ));
    }

    #[test]
    fn reduce_channels_single_channel_is_identity_up_to_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let y = gaussian_matrix(6, 1, &mut rng);
        let r = reduce_channels(&y, &ChannelMode::Finite).unwrap();
        assert_eq!(r.cols(), 1);
        let lhs = r.matmul_adjoint(&r);
        let rhs = y.matmul_adjoint(&y);
        assert!(lhs.sub(&rhs).frobenius_norm() <= 1e-10 * rhs.frobenius_norm());
    }

    #[test]
    fn reduce_channels_rank_one_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let col = gaussian_matrix(7, 1, &mut rng);
        let y = ComplexMatrix::from_fn(7, 2, |i, j| col[(i, 0)] * if j == 0 { 1.0 } else { -2.5 });
        let r = reduce_channels(&y, &ChannelMode::Finite).unwrap();
        assert_eq!(r.cols(), 1);
        let expected = y.matmul_adjoint(&y).scale(0.5);
        assert!(r.matmul_adjoint(&r).sub(&expected).frobenius_norm() <= 1e-10 * expected.frobenius_norm());
    }

    #[test]
    fn reduce_channels_rejects_indefinite_covariance() {
        let r = ComplexMatrix::from_diag(&[1.0, -0.5]);
        let y = ComplexMatrix::zeros(2, 1);
        assert!(reduce_channels(&y, &ChannelMode::Covariance(r)).is_err());
    }

    #[test]
    fn dual_polynomial_zero_and_derivatives() {
        let q = DualPolynomial::new(ComplexMatrix::zeros(5, 2));
        assert!(q.eval(0.3).iter().all(|z| z.norm() == 0.0));

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v = gaussian_matrix(9, 2, &mut rng);
        let q = DualPolynomial::new(v);
        let h = 1e-5;
        for _ in 0..100 {
            let f = rng.random::<f64>();
            let [_, d1, d2] = q.eval_with_derivatives(f);
            let [_, d1p, _] = q.eval_with_derivatives(f + h);
            let [_, d1m, _] = q.eval_with_derivatives(f - h);
            let qp = q.eval(f + h);
            let qm = q.eval(f - h);
            for c in 0..2 {
                let fd = (qp[c] - qm[c]) / (2.0 * h);
                assert!((fd - d1[c]).norm() <= 1e-6 * d1[c].norm().max(1.0));
                let fd2 = (d1p[c] - d1m[c]) / (2.0 * h);
                assert!((fd2 - d2[c]).norm() <= 1e-6 * d2[c].norm().max(1.0));
            }
        }
    }

    #[test]
    fn small_compressive_single_atom() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = rng.random::<f64>();
        let s = gaussian_matrix(1, 2, &mut rng);
        let model = SpectralModel::new(8, vec![f], s);
        let mask = draw_mask(8, MaskMode::UniformSubset { m: 4 }, &mut rng).unwrap();
        let problem = AnmProblem::from_full(&model.data, mask).unwrap();
        let sol = solve_anm(&problem, &SolverOptions { tol: 1e-9, max_iter: 50_000, ..Default::default() }).unwrap();
        assert!(sol.y.sub(&model.data).frobenius_norm() <= 1e-5 * model.data.frobenius_norm());
    }

    fn compressive_instance(seed: u64) -> (SpectralModel, AnmProblem) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = SpectralModel::random(24, 2, 3, &mut rng).unwrap();
        let mask = draw_mask(24, MaskMode::UniformSubset { m: 16 }, &mut rng).unwrap();
        let problem = AnmProblem::from_full(&model.data, mask).unwrap();
        (model, problem)
    }

    #[test]
    fn compressive_solution_satisfies_optimality_conditions() {
        let (model, problem) = compressive_instance(6);
        let sol = solve_anm(&problem, &SolverOptions::default()).unwrap();
        assert!(sol.relative_gap() <= 1e-4);
        assert!(sol.dual_polynomial().check_feasible(DUAL_CHECK_GRID, 1e-3).is_ok());
        assert!(sol.off_mask_dual <= 1e-6 * sol.v.frobenius_norm());
        let observed_rows = sol.y.select_rows(&problem.mask.indices);
        assert!(observed_rows.sub(&problem.observed).frobenius_norm() <= 1e-12 * problem.observed.frobenius_norm());
        // The block matrix is PSD up to solver accuracy.
        let l = sol.x.rows();
        let mut block = ComplexMatrix::zeros(24 + l, 24 + l);
        block.set_submatrix(0, 0, &sol.x);
        block.set_submatrix(l, 0, &sol.y);
        block.set_submatrix(0, l, &sol.y.adjoint());
        block.set_submatrix(l, l, &sol.t.to_matrix());
        let eig = hermitian_eig(&block.hermitian_part()).unwrap();
        assert!(*eig.values.last().unwrap() >= -1e-6 * eig.values[0]);
        assert!((sol.objective - model.coefficient_norm()).abs() <= 1e-4 * model.coefficient_norm());
    }

    #[test]
    fn channel_permutation_permutes_the_solution() {
        let (_, problem) = compressive_instance(7);
        let perm = [2, 0, 1];
        let permuted = AnmProblem::new(
            ComplexMatrix::from_fn(problem.observed.rows(), 3, |i, j| problem.observed[(i, perm[j])]),
            problem.mask.clone(),
            Variant::Standard,
        )
        .unwrap();
        let a = solve_anm(&problem, &SolverOptions::default()).unwrap();
        let b = solve_anm(&permuted, &SolverOptions::default()).unwrap();
        let a_perm = ComplexMatrix::from_fn(a.y.rows(), 3, |i, j| a.y[(i, perm[j])]);
        assert!(b.y.sub(&a_perm).frobenius_norm() <= 1e-6 * a.y.frobenius_norm());
        let (ta, tb) = (a.t.to_matrix(), b.t.to_matrix());
        assert!(ta.sub(&tb).frobenius_norm() <= 1e-6 * ta.frobenius_norm());
    }
}
