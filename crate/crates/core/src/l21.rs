//! Grid-restricted ℓ2,1 minimization
//!
//! ```text
//! min Σ_g ‖s_g‖₂   s.t.  Σ_g a_Ω(f_g) s_gᵀ = Y°_Ω
//! ```
//!
//! solved by ADMM: a group soft-threshold step alternates with the Euclidean
//! projection onto the affine data-consistency set. The projection reuses an
//! eigendecomposition of the Gram matrix `A_Ω A_Ωᴴ`, computed once per problem.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{hermitian_eig, least_squares, ComplexMatrix, LinalgError};
use crate::signal::{vandermonde, wrap_distance, SampleMask};

/// Grids with two points closer than this (modulo 1) are rejected.
pub const MIN_GRID_SPACING: f64 = 1e-8;
/// Gram eigenvalues below this fraction of the largest are treated as zero.
const GRAM_RANK_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum L21Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("problem shape: {0}")]
    Shape(String),
    #[error("data are not representable on the grid (relative residual {residual:.3e})")]
    Infeasible { residual: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("ADMM stopped after {} iterations without reaching tolerance", .best.iterations)]
    NotConverged { best: Box<L21Solution> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct L21Options {
    pub rho: f64,
    pub max_iter: usize,
    /// Relative primal/dual residual tolerance.
    pub tol: f64,
    /// Relative data residual accepted as feasible.
    pub feasibility_tol: f64,
    /// Rows with norm above this fraction of the largest row form the support.
    pub support_threshold: f64,
}

impl Default for L21Options {
    fn default() -> Self {
        Self {
            rho: 1.0,
            max_iter: 50_000,
            tol: 1e-9,
            feasibility_tol: 1e-8,
            support_threshold: 1e-6,
        }
    }
}

/// Observations `Y°_Ω` together with a fixed frequency grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridProblem {
    pub grid: Vec<f64>,
    pub mask: SampleMask,
    pub observed: ComplexMatrix,
}

impl GridProblem {
    pub fn new(grid: Vec<f64>, mask: SampleMask, observed: ComplexMatrix) -> Result<Self, L21Error> {
        if grid.is_empty() {
            return Err(L21Error::InvalidGrid("empty grid".into()));
        }
        if let Some(f) = grid.iter().find(|f| !(0.0..1.0).contains(*f)) {
            return Err(L21Error::InvalidGrid(format!("grid value {f} outside [0, 1)")));
        }
        let mut sorted = grid.clone();
        sorted.sort_by(f64::total_cmp);
        let closest = sorted
            .iter()
            .zip(sorted.iter().cycle().skip(1))
            .take(if sorted.len() > 1 { sorted.len() } else { 0 })
            .map(|(&a, &b)| wrap_distance(a, b))
            .fold(f64::INFINITY, f64::min);
        if closest < MIN_GRID_SPACING {
            return Err(L21Error::InvalidGrid(format!(
                "grid spacing {closest:.3e} below {MIN_GRID_SPACING:e}"
            )));
        }
        if observed.rows() != mask.len() || observed.cols() == 0 {
            return Err(L21Error::Shape(format!(
                "observed is {}×{}, mask has {} samples",
                observed.rows(),
                observed.cols(),
                mask.len()
            )));
        }
        Ok(Self { grid, mask, observed })
    }

    /// `A_Ω`, the `M × G` matrix of grid atoms restricted to the mask.
    pub fn dictionary(&self) -> ComplexMatrix {
        vandermonde(&self.mask.indices, &self.grid)
    }
}

/// `{g / size}`.
pub fn uniform_grid(size: usize) -> Vec<f64> {
    (0..size).map(|g| g as f64 / size as f64).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct L21Solution {
    /// `G × L` coefficient matrix.
    pub coefficients: ComplexMatrix,
    pub support: Vec<usize>,
    pub row_norms: Vec<f64>,
    pub objective: f64,
    /// `‖A_Ω S − Y°_Ω‖_F / ‖Y°_Ω‖_F`.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// JSON-facing summary: support and row norms only.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct L21Report {
    pub support: Vec<usize>,
    pub support_freqs: Vec<f64>,
    pub row_norms: Vec<f64>,
    pub objective: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl L21Solution {
    pub fn report(&self, grid: &[f64]) -> L21Report {
        L21Report {
            support: self.support.clone(),
            support_freqs: self.support.iter().map(|&g| grid[g]).collect(),
            row_norms: self.row_norms.clone(),
            objective: self.objective,
            residual: self.residual,
            iterations: self.iterations,
            converged: self.converged,
        }
    }
}

/// `Σ_g ‖s_g‖₂`.
pub fn l21_norm(s: &ComplexMatrix) -> f64 {
    s.row_norms().iter().sum()
}

/// Projection onto `{S : A S = B}` via an orthonormal basis of `A`'s row space.
struct AffineProjector {
    /// `G × r`, orthonormal columns spanning `range(Aᴴ)`.
    basis: ComplexMatrix,
    /// Minimum-norm solution of `A S = B`.
    anchor: ComplexMatrix,
}

impl AffineProjector {
    fn new(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<Self, LinalgError> {
        let eig = hermitian_eig(&a.matmul_adjoint(a))?;
        let top = eig.values.first().copied().unwrap_or(0.0).max(0.0);
        let keep: Vec<usize> = (0..eig.values.len())
            .filter(|&i| eig.values[i] > GRAM_RANK_TOL * top)
            .collect();
        let u = eig.vectors.select_cols(&keep);
        // Right singular vectors v_i = Aᴴ u_i / σ_i.
        let mut basis = a.adjoint_matmul(&u);
        let mut coeff = u.adjoint_matmul(b);
        for (c, &i) in keep.iter().enumerate() {
            let inv = 1.0 / eig.values[i].sqrt();
            for r in 0..basis.rows() {
                basis.as_mut_slice()[r * keep.len() + c] *= inv;
            }
            for z in coeff.row_mut(c) {
                *z *= inv;
            }
        }
        let anchor = basis.matmul(&coeff);
        Ok(Self { basis, anchor })
    }

    fn project(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let along = self.basis.matmul(&self.basis.adjoint_matmul(x));
        x.sub(&along).add(&self.anchor)
    }
}

fn group_soft_threshold(x: &ComplexMatrix, kappa: f64) -> ComplexMatrix {
    let mut out = x.clone();
    for (g, norm) in x.row_norms().into_iter().enumerate() {
        let shrink = if norm > kappa { 1.0 - kappa / norm } else { 0.0 };
        for z in out.row_mut(g) {
            *z *= shrink;
        }
    }
    out
}

fn relative_residual(a: &ComplexMatrix, s: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    a.matmul(s).sub(b).frobenius_norm() / b.frobenius_norm().max(f64::MIN_POSITIVE)
}

fn support_of(row_norms: &[f64], threshold: f64) -> Vec<usize> {
    let top = row_norms.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return Vec::new();
    }
    (0..row_norms.len()).filter(|&g| row_norms[g] > threshold * top).collect()
}

/// Solves the grid ℓ2,1 program. Infeasible data yield
/// [`L21Error::Infeasible`]; exhausting `max_iter` yields
/// [`L21Error::NotConverged`] with the last iterate.
pub fn solve_l21(problem: &GridProblem, opts: &L21Options) -> Result<L21Solution, L21Error> {
    let g = problem.grid.len();
    let l = problem.observed.cols();
    let m = problem.observed.rows();
    let data_norm = problem.observed.frobenius_norm();
    if data_norm == 0.0 {
        return Ok(L21Solution {
            coefficients: ComplexMatrix::zeros(g, l),
            support: Vec::new(),
            row_norms: vec![0.0; g],
            objective: 0.0,
            residual: 0.0,
            iterations: 0,
            converged: true,
        });
    }
    // Work with unit-RMS data; rescale at the end.
    let scale = data_norm / (m as f64).sqrt();
    let b = problem.observed.scale(1.0 / scale);
    let a = problem.dictionary();
    let proj = AffineProjector::new(&a, &b)?;
    let floor = relative_residual(&a, &proj.anchor, &b);
    if floor > opts.feasibility_tol {
        return Err(L21Error::Infeasible { residual: floor });
    }

    let mut rho = opts.rho;
    let mut z = proj.anchor.clone();
    let mut u = ComplexMatrix::zeros(g, l);
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=opts.max_iter {
        iterations = it;
        let s = proj.project(&z.sub(&u));
        let z_prev = z;
        z = group_soft_threshold(&s.add(&u), 1.0 / rho);
        let gap = s.sub(&z);
        u = u.add(&gap);
        let primal = gap.frobenius_norm();
        let dual = rho * z.sub(&z_prev).frobenius_norm();
        let eps_pri = opts.tol * (s.frobenius_norm().max(z.frobenius_norm()) + 1e-12);
        let eps_dual = opts.tol * (rho * u.frobenius_norm() + 1e-12);
        if primal <= eps_pri && dual <= eps_dual {
            converged = true;
            break;
        }
        if it % 10 == 0 {
            if primal > 10.0 * dual {
                rho *= 2.0;
                u = u.scale(0.5);
            } else if dual > 10.0 * primal {
                rho *= 0.5;
                u = u.scale(2.0);
            }
        }
    }

    // Polish: refit on the detected support; keep the refit when it is exactly
    // feasible and no worse than the ADMM iterate.
    let mut coeffs = z;
    let support = support_of(&coeffs.row_norms(), opts.support_threshold);
    if !support.is_empty() && support.len() <= m {
        let fit = least_squares(&a.select_cols(&support), &b)?;
        let mut refit = ComplexMatrix::zeros(g, l);
        for (row, &gi) in support.iter().enumerate() {
            refit.row_mut(gi).copy_from_slice(fit.solution.row(row));
        }
        let feasible = relative_residual(&a, &refit, &b) <= opts.feasibility_tol;
        if feasible && l21_norm(&refit) <= l21_norm(&coeffs) * (1.0 + 1e-6) {
            coeffs = refit;
        }
    }

    let residual = relative_residual(&a, &coeffs, &b);
    let coefficients = coeffs.scale(scale);
    let row_norms = coefficients.row_norms();
    let solution = L21Solution {
        support: support_of(&row_norms, opts.support_threshold),
        objective: row_norms.iter().sum(),
        row_norms,
        coefficients,
        residual,
        iterations,
        converged,
    };
    if converged {
        Ok(solution)
    } else {
        Err(L21Error::NotConverged { best: Box::new(solution) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{draw_mask, gaussian_matrix, synthesize, MaskMode};
    use approx::assert_relative_eq;
    use num_complex::Complex64;
    use rand::seq::index::sample;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Returns the problem, true grid indices and true amplitudes.
    fn on_grid(n: usize, k: usize, l: usize, m: usize, seed: u64) -> (GridProblem, Vec<usize>, ComplexMatrix) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = uniform_grid(n);
        // Keep the support separated by at least 4 grid cells.
        let idx = loop {
            let mut idx = sample(&mut rng, n, k).into_vec();
            idx.sort_unstable();
            let gaps_ok = (0..k).all(|i| {
                let next = if i + 1 < k { idx[i + 1] } else { idx[0] + n };
                k == 1 || next - idx[i] >= 4
            });
            if gaps_ok {
                break idx;
            }
        };
        let freqs: Vec<f64> = idx.iter().map(|&i| grid[i]).collect();
        let amps = gaussian_matrix(k, l, &mut rng);
        let full = synthesize(&freqs, &amps, n);
        let mask = draw_mask(n, MaskMode::UniformSubset { m }, &mut rng).unwrap();
        let observed = full.select_rows(&mask.indices);
        (GridProblem::new(grid, mask, observed).unwrap(), idx, amps)
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let p = GridProblem::new(uniform_grid(8), SampleMask::full(8), ComplexMatrix::zeros(8, 2)).unwrap();
        let sol = solve_l21(&p, &L21Options::default()).unwrap();
        assert!(sol.support.is_empty());
        assert_eq!(sol.objective, 0.0);
    }

    #[test]
    fn single_atom_full_mask() {
        let (p, idx, amps) = on_grid(16, 1, 3, 16, 4);
        let sol = solve_l21(&p, &L21Options::default()).unwrap();
        assert_eq!(sol.support, idx);
        for c in 0..3 {
            assert!((sol.coefficients[(idx[0], c)] - amps[(0, c)]).norm() < 1e-8);
        }
    }

    #[test]
    fn compressive_recovery_matches_truth() {
        let (p, idx, amps) = on_grid(32, 3, 4, 16, 7);
        let sol = solve_l21(&p, &L21Options::default()).unwrap();
        assert_eq!(sol.support, idx);
        assert_relative_eq!(sol.objective, l21_norm(&amps), max_relative = 1e-6);
        assert!(sol.residual < 1e-8);
    }

    #[test]
    fn no_feasible_perturbation_does_better() {
        let (p, _, _) = on_grid(32, 3, 2, 14, 12);
        let sol = solve_l21(&p, &L21Options::default()).unwrap();
        let a = p.dictionary();
        let scale = p.observed.frobenius_norm();
        let proj = AffineProjector::new(&a, &p.observed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let step: f64 = rng.random::<f64>() * 0.1 * scale;
            let dir = gaussian_matrix(32, 2, &mut rng).scale(step / 32.0);
            let cand = proj.project(&sol.coefficients.add(&dir));
            assert!(relative_residual(&a, &cand, &p.observed) < 1e-8);
            assert!(l21_norm(&cand) >= sol.objective - 1e-7 * sol.objective);
        }
    }

    #[test]
    fn refining_the_grid_never_increases_the_optimum() {
        let (p, _, _) = on_grid(16, 2, 2, 10, 3);
        let coarse = solve_l21(&p, &L21Options::default()).unwrap();
        let mut grid = p.grid.clone();
        grid.extend((0..16).map(|g| (g as f64 + 0.5) / 16.0));
        let fine = GridProblem::new(grid, p.mask.clone(), p.observed.clone()).unwrap();
        let fine = solve_l21(&fine, &L21Options::default()).unwrap();
        assert!(fine.objective <= coarse.objective * (1.0 + 1e-7));
    }

    #[test]
    fn off_grid_data_on_tiny_grid_is_infeasible() {
        let n = 16;
        let full = synthesize(&[0.123], &ComplexMatrix::new(1, 1, vec![Complex64::new(1.0, 0.0)]).unwrap(), n);
        let p = GridProblem::new(vec![0.0, 0.25, 0.5], SampleMask::full(n), full).unwrap();
        assert!(matches!(solve_l21(&p, &L21Options::default()), Err(L21Error::Infeasible { .. })));
    }

    #[test]
    fn grid_validation() {
        let obs = ComplexMatrix::zeros(4, 1);
        let mask = SampleMask::full(4);
        assert!(GridProblem::new(vec![0.1, 0.1 + 1e-9], mask.clone(), obs.clone()).is_err());
        assert!(GridProblem::new(vec![0.0, 1.0 - 1e-10], mask.clone(), obs.clone()).is_err());
        assert!(GridProblem::new(vec![0.5, 1.2], mask.clone(), obs.clone()).is_err());
        assert!(GridProblem::new(vec![0.3], mask, obs).is_ok());
    }

    #[test]
    fn report_serializes() {
        let (p, idx, _) = on_grid(16, 1, 1, 16, 1);
        let sol = solve_l21(&p, &L21Options::default()).unwrap();
        let json = serde_json::to_value(sol.report(&p.grid)).unwrap();
        assert_eq!(json["support"][0].as_u64().unwrap() as usize, idx[0]);
    }
}
