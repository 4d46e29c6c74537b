//! Frequency and amplitude retrieval from solver output.
//!
//! Two independent paths: the Vandermonde decomposition of the Toeplitz
//! block (signal subspace + ESPRIT + weight fit) and peak search on the dual
//! polynomial. Amplitudes are fit by least squares on the observed rows.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anm::{AnmProblem, AnmSolution, DualPolynomial};
use crate::linalg::{general_eigenvalues, hermitian_eig, least_squares, ComplexMatrix, HermitianToeplitz, LinalgError};
use crate::signal::{vandermonde, wrap_distance, SampleMask};

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("Toeplitz matrix has full rank {rank}; its Vandermonde decomposition is not unique")]
    FullRank { rank: usize },
    #[error("recovered weight {weight:e} is negative")]
    NegativeWeight { weight: f64 },
    #[error("ESPRIT shift system is ill-conditioned (condition {condition:e})")]
    IllConditioned { condition: f64 },
    #[error("frequency atoms on the observed rows are linearly dependent (rank {rank} < {count})")]
    DependentAtoms { rank: usize, count: usize },
    #[error("dual polynomial has {count} peaks, more than its length {n}")]
    DegenerateDual { count: usize, n: usize },
}

/// Knobs for retrieval.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalOptions {
    /// Eigenvalues of `T` at or above `rank_tol · λ_max` count toward its rank.
    pub rank_tol: f64,
    /// Largest acceptable ESPRIT shift-system condition number.
    pub max_esprit_condition: f64,
    /// Peak search grid size.
    pub peak_grid: usize,
    /// Peaks must satisfy `‖Q‖² ≥ 1 - peak_tol`.
    pub peak_tol: f64,
    pub newton_max_steps: usize,
}

impl Default for RetrievalOptions {
    fn default() -> Self {
        Self {
            rank_tol: 1e-6,
            max_esprit_condition: 1e12,
            peak_grid: 1 << 14,
            peak_tol: 1e-3,
            newton_max_steps: 50,
        }
    }
}

/// Recovered frequencies, amplitude rows and Vandermonde weights.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralEstimate {
    pub freqs: Vec<f64>,
    /// `r × L` amplitude rows.
    pub amps: ComplexMatrix,
    /// Positive weights `c_j` of the Vandermonde decomposition.
    pub weights: Vec<f64>,
    /// Least-squares residual of the amplitude fit on the observed rows.
    pub fit_residual: f64,
}

impl SpectralEstimate {
    /// `max_j |c_j - ‖s_j‖₂| / c_j`.
    pub fn weight_magnitude_mismatch(&self) -> f64 {
        self.weights
            .iter()
            .zip(self.amps.row_norms())
            .map(|(c, s)| (c - s).abs() / c)
            .fold(0.0, f64::max)
    }
}

/// Frequencies and weights of `T = Σ_j c_j a(f_j) a(f_j)ᴴ`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VandermondeDecomposition {
    pub freqs: Vec<f64>,
    pub weights: Vec<f64>,
    /// `‖T - Σ c_j a aᴴ‖_F / ‖T‖_F`.
    pub relative_error: f64,
}

/// Vandermonde decomposition of a PSD Hermitian Toeplitz matrix by ESPRIT
/// on its signal subspace, followed by a weighted least-squares weight fit.
pub fn vandermonde_decompose(t: &HermitianToeplitz, opts: &RetrievalOptions) -> Result<VandermondeDecomposition, RetrievalError> {
    let n = t.dim();
    let tm = t.to_matrix();
    let eig = hermitian_eig(&tm)?;
    let top = eig.values.first().copied().unwrap_or(0.0);
    if !(top > 0.0) {
        return Ok(VandermondeDecomposition {
            freqs: vec![],
            weights: vec![],
            relative_error: 0.0,
        });
    }
    let rank = eig.values.iter().filter(|&&v| v >= opts.rank_tol * top).count();
    if rank >= n {
        return Err(RetrievalError::FullRank { rank });
    }
    let subspace = ComplexMatrix::from_fn(n, rank, |i, j| eig.vectors[(i, j)]);
    let mut freqs = esprit(&subspace, opts.max_esprit_condition)?;
    freqs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let weights = fit_weights(t, &freqs)?;
    let scale = weights.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
    let mut kept_f = Vec::with_capacity(weights.len());
    let mut kept_w = Vec::with_capacity(weights.len());
    for (f, w) in freqs.into_iter().zip(weights) {
        if w < -1e-8 * scale {
            return Err(RetrievalError::NegativeWeight { weight: w });
        }
        if w > 0.0 {
            kept_f.push(f);
            kept_w.push(w);
        }
    }
    let recon = toeplitz_from_atoms(n, &kept_f, &kept_w);
    let relative_error = recon.sub(&tm).frobenius_norm() / tm.frobenius_norm();
    Ok(VandermondeDecomposition {
        freqs: kept_f,
        weights: kept_w,
        relative_error,
    })
}

/// `Σ_j c_j a(f_j) a(f_j)ᴴ` as an `n × n` matrix.
pub fn toeplitz_from_atoms(n: usize, freqs: &[f64], weights: &[f64]) -> ComplexMatrix {
    let mut gen = vec![Complex64::new(0.0, 0.0); n];
    for (&f, &c) in freqs.iter().zip(weights) {
        for (k, g) in gen.iter_mut().enumerate() {
            *g += Complex64::from_polar(c, -2.0 * PI * k as f64 * f);
        }
    }
    gen[0].im = 0.0;
    HermitianToeplitz::new(gen).expect("finite").to_matrix()
}

/// Real weights minimizing the Frobenius misfit of `Σ c_j a aᴴ` to `T`,
/// written on the generator: diagonal `k` has `2(N-k)` entries (`N` for `k=0`).
fn fit_weights(t: &HermitianToeplitz, freqs: &[f64]) -> Result<Vec<f64>, RetrievalError> {
    let n = t.dim();
    let r = freqs.len();
    if r == 0 {
        return Ok(vec![]);
    }
    let mut a = ComplexMatrix::zeros(2 * n, r);
    let mut b = ComplexMatrix::zeros(2 * n, 1);
    for k in 0..n {
        let w = if k == 0 { (n as f64).sqrt() } else { (2.0 * (n - k) as f64).sqrt() };
        for (j, &f) in freqs.iter().enumerate() {
            let e = Complex64::from_polar(w, -2.0 * PI * k as f64 * f);
            a[(2 * k, j)] = Complex64::new(e.re, 0.0);
            a[(2 * k + 1, j)] = Complex64::new(e.im, 0.0);
        }
        let tk = t.generator()[k] * w;
        b[(2 * k, 0)] = Complex64::new(tk.re, 0.0);
        b[(2 * k + 1, 0)] = Complex64::new(tk.im, 0.0);
    }
    let ls = least_squares(&a, &b)?;
    Ok((0..r).map(|j| ls.solution[(j, 0)].re).collect())
}

/// ESPRIT: frequencies from the rotational invariance between the first and
/// last `N-1` rows of an orthonormal signal-subspace basis.
pub fn esprit(subspace: &ComplexMatrix, max_condition: f64) -> Result<Vec<f64>, RetrievalError> {
    let (n, r) = subspace.shape();
    if r == 0 {
        return Ok(vec![]);
    }
    if n < r + 1 {
        return Err(RetrievalError::IllConditioned { condition: f64::INFINITY });
    }
    let upper = subspace.submatrix(0, 0, n - 1, r);
    let lower = subspace.submatrix(1, 0, n - 1, r);
    let ls = least_squares(&upper, &lower)?;
    if ls.rank_deficient || !(ls.condition <= max_condition) {
        return Err(RetrievalError::IllConditioned { condition: ls.condition });
    }
    let eigs = general_eigenvalues(&ls.solution)?;
    Ok(eigs
        .into_iter()
        .map(|z| (z.arg() / (2.0 * PI)).rem_euclid(1.0))
        .map(|f| if f >= 1.0 { 0.0 } else { f })
        .collect())
}

/// Rotation operator eigenvalues from ESPRIT, for diagnostics.
pub fn esprit_eigenvalues(subspace: &ComplexMatrix) -> Result<Vec<Complex64>, RetrievalError> {
    let (n, r) = subspace.shape();
    let upper = subspace.submatrix(0, 0, n - 1, r);
    let lower = subspace.submatrix(1, 0, n - 1, r);
    let ls = least_squares(&upper, &lower)?;
    Ok(general_eigenvalues(&ls.solution)?)
}

/// Least-squares amplitude rows fitting `observed ≈ Σ_j a_Ω(f_j) s_j`.
pub fn recover_amplitudes(
    freqs: &[f64],
    observed: &ComplexMatrix,
    mask: &SampleMask,
) -> Result<(ComplexMatrix, f64), RetrievalError> {
    if freqs.is_empty() {
        return Ok((ComplexMatrix::zeros(0, observed.cols()), observed.frobenius_norm()));
    }
    let a = vandermonde(&mask.indices, freqs);
    if a.rows() < a.cols() {
        return Err(RetrievalError::DependentAtoms {
            rank: a.rows(),
            count: freqs.len(),
        });
    }
    let ls = least_squares(&a, observed)?;
    if ls.rank_deficient {
        return Err(RetrievalError::DependentAtoms {
            rank: ls.rank,
            count: freqs.len(),
        });
    }
    Ok((ls.solution, ls.residual))
}

/// Full retrieval along the Toeplitz path: decomposition of `T`, then
/// amplitudes from the problem's observed rows.
pub fn estimate_from_solution(
    solution: &AnmSolution,
    problem: &AnmProblem,
    opts: &RetrievalOptions,
) -> Result<SpectralEstimate, RetrievalError> {
    let vd = vandermonde_decompose(&solution.t, opts)?;
    let (amps, fit_residual) = recover_amplitudes(&vd.freqs, &problem.observed, &problem.mask)?;
    Ok(SpectralEstimate {
        freqs: vd.freqs,
        amps,
        weights: vd.weights,
        fit_residual,
    })
}

/// Local maxima of `‖Q(f)‖²` above `1 - peak_tol`, refined by safeguarded
/// Newton iterations on `d‖Q‖²/df`. Sorted ascending.
pub fn peaks_from_dual(q: &DualPolynomial, opts: &RetrievalOptions) -> Result<Vec<f64>, RetrievalError> {
    let g = opts.peak_grid;
    let norms: Vec<f64> = q.grid_norms(g).into_iter().map(|v| v * v).collect();
    let threshold = 1.0 - opts.peak_tol;
    let h = 1.0 / g as f64;
    let mut peaks: Vec<f64> = Vec::new();
    for i in 0..g {
        let prev = norms[(i + g - 1) % g];
        let next = norms[(i + 1) % g];
        let cur = norms[i];
        if cur >= threshold && cur >= prev && cur > next {
            let f = refine_peak(q, i as f64 * h, h, opts.newton_max_steps);
            if peaks.iter().all(|&p| wrap_distance(p, f) > 1e-9) {
                peaks.push(f);
            }
        }
    }
    if peaks.len() > q.degree_span() {
        return Err(RetrievalError::DegenerateDual {
            count: peaks.len(),
            n: q.degree_span(),
        });
    }
    peaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(peaks)
}

/// `(d‖Q‖²/df, d²‖Q‖²/df²)`.
pub fn norm_sq_derivatives(q: &DualPolynomial, f: f64) -> (f64, f64) {
    let [q0, q1, q2] = q.eval_with_derivatives(f);
    let mut d1 = 0.0;
    let mut d2 = 0.0;
    for c in 0..q0.len() {
        d1 += 2.0 * (q1[c] * q0[c].conj()).re;
        d2 += 2.0 * (q2[c] * q0[c].conj()).re + 2.0 * q1[c].norm_sqr();
    }
    (d1, d2)
}

fn refine_peak(q: &DualPolynomial, f0: f64, h: f64, max_steps: usize) -> f64 {
    // Bracket [lo, hi] around the grid maximum where the slope changes sign.
    let mut lo = f0 - h;
    let mut hi = f0 + h;
    let mut f = f0;
    for _ in 0..max_steps {
        let (d1, d2) = norm_sq_derivatives(q, f);
        if d1.abs() < 1e-12 {
            break;
        }
        if d1 > 0.0 {
            lo = f;
        } else {
            hi = f;
        }
        let newton = if d2 < 0.0 { f - d1 / d2 } else { f64::NAN };
        let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - f).abs() < 1e-16 {
            f = next;
            break;
        }
        f = next;
    }
    f.rem_euclid(1.0)
}

/// Wrap-around RMSE between true and estimated frequencies under the best
/// one-to-one matching. `None` when the counts differ.
pub fn rmse(truth: &[f64], estimate: &[f64]) -> Option<f64> {
    if truth.len() != estimate.len() {
        return None;
    }
    let k = truth.len();
    if k == 0 {
        return Some(0.0);
    }
    let cost: Vec<Vec<f64>> = truth
        .iter()
        .map(|&a| estimate.iter().map(|&b| wrap_distance(a, b).powi(2)).collect())
        .collect();
    let assignment = hungarian(&cost);
    let total: f64 = assignment.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
    Some((total / k as f64).sqrt())
}

/// Minimum-cost perfect matching on a square cost matrix; returns the column
/// assigned to each row.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    // Potentials formulation, 1-based with a sentinel column 0.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{atom, draw_frequencies_with_gap, gaussian_matrix, min_separation};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toeplitz_of(n: usize, freqs: &[f64], weights: &[f64]) -> HermitianToeplitz {
        HermitianToeplitz::from_first_row(&toeplitz_from_atoms(n, freqs, weights)).unwrap()
    }

    #[test]
    fn single_atom_decomposition() {
        let t = toeplitz_of(16, &[0.3], &[2.5]);
        let vd = vandermonde_decompose(&t, &RetrievalOptions::default()).unwrap();
        assert_eq!(vd.freqs.len(), 1);
        assert!(wrap_distance(vd.freqs[0], 0.3) < 1e-9);
        assert!((vd.weights[0] - 2.5).abs() < 1e-9);
    }

    #[test]
    fn zero_matrix_decomposes_to_nothing() {
        let vd = vandermonde_decompose(&HermitianToeplitz::zeros(8), &RetrievalOptions::default()).unwrap();
        assert!(vd.freqs.is_empty() && vd.weights.is_empty());
    }

    #[test]
    fn full_rank_is_rejected() {
        let t = HermitianToeplitz::new({
            let mut g = vec![Complex64::new(0.0, 0.0); 6];
            g[0] = Complex64::new(1.0, 0.0);
            g
        })
        .unwrap();
        assert!(matches!(
            vandermonde_decompose(&t, &RetrievalOptions::default()),
            Err(RetrievalError::FullRank { rank: 6 })
        ));
    }

    #[test]
    fn five_component_construct_then_recover() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = draw_frequencies_with_gap(5, 1.0 / 15.0, &mut rng).unwrap();
        let w: Vec<f64> = (0..5).map(|_| 0.5 + rng.random::<f64>()).collect();
        let vd = vandermonde_decompose(&toeplitz_of(64, &f, &w), &RetrievalOptions::default()).unwrap();
        assert_eq!(rmse(&f, &vd.freqs).map(|e| e < 1e-8), Some(true));
        assert!(vd.relative_error < 1e-10);
    }

    #[test]
    fn esprit_single_vector_and_pair() {
        let n = 32;
        let f = 0.731;
        let u: Vec<Complex64> = atom(n, f).iter().map(|z| z / (n as f64).sqrt()).collect();
        let est = esprit(&ComplexMatrix::column(&u), 1e12).unwrap();
        assert!(wrap_distance(est[0], f) < 1e-12);

        // Orthonormalize [a(0.1), a(0.4)] with Gram-Schmidt.
        let a1 = atom(n, 0.1);
        let a2 = atom(n, 0.4);
        let norm = |v: &[Complex64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let q1: Vec<Complex64> = a1.iter().map(|z| z / norm(&a1)).collect();
        let proj: Complex64 = q1.iter().zip(&a2).map(|(a, b)| a.conj() * b).sum();
        let r2: Vec<Complex64> = a2.iter().zip(&q1).map(|(b, a)| b - a * proj).collect();
        let q2: Vec<Complex64> = r2.iter().map(|z| z / norm(&r2)).collect();
        let basis = ComplexMatrix::from_fn(n, 2, |i, j| if j == 0 { q1[i] } else { q2[i] });
        let mut est = esprit(&basis, 1e12).unwrap();
        est.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(wrap_distance(est[0], 0.1) < 1e-9);
        assert!(wrap_distance(est[1], 0.4) < 1e-9);
    }

    #[test]
    fn esprit_eigenvalues_on_unit_circle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let n = 24;
            let r = rng.random_range(1..6);
            let f = draw_frequencies_with_gap(r, 1.0 / 20.0, &mut rng).unwrap();
            let w: Vec<f64> = (0..r).map(|_| 0.2 + rng.random::<f64>()).collect();
            let eig = hermitian_eig(&toeplitz_from_atoms(n, &f, &w)).unwrap();
            let basis = ComplexMatrix::from_fn(n, r, |i, j| eig.vectors[(i, j)]);
            for z in esprit_eigenvalues(&basis).unwrap() {
                assert!((z.norm() - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn esprit_rejects_degenerate_subspace() {
        // A subspace whose first N-1 rows vanish cannot be shifted.
        let mut u = ComplexMatrix::zeros(4, 1);
        u[(3, 0)] = Complex64::new(1.0, 0.0);
        assert!(matches!(esprit(&u, 1e12), Err(RetrievalError::IllConditioned { .. })));
    }

    #[test]
    fn amplitude_fit_exact_and_wrong() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mask = SampleMask::from_indices(32, vec![0, 2, 3, 5, 8, 11, 13, 17, 19, 23, 29, 31]).unwrap();
        let f = [0.12, 0.47, 0.81];
        let s = gaussian_matrix(3, 2, &mut rng);
        let obs = vandermonde(&mask.indices, &f).matmul(&s);
        let (amps, res) = recover_amplitudes(&f, &obs, &mask).unwrap();
        assert!(amps.sub(&s).frobenius_norm() < 1e-10);
        assert!(res <= 1e-8 * obs.frobenius_norm());

        let wrong = [0.12, 0.47, 0.9];
        let (_, res) = recover_amplitudes(&wrong, &obs, &mask).unwrap();
        assert!(res > 1e-2 * obs.frobenius_norm());
    }

    #[test]
    fn amplitude_fit_rejects_duplicate_frequencies() {
        let mask = SampleMask::full(8);
        let obs = ComplexMatrix::zeros(8, 1);
        assert!(matches!(
            recover_amplitudes(&[0.2, 0.2], &obs, &mask),
            Err(RetrievalError::DependentAtoms { .. })
        ));
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[0.1, 0.7], &[0.1, 0.7]), Some(0.0));
        let e = rmse(&[0.25], &[0.25 + 1e-5]).unwrap();
        assert!((e - 1e-5).abs() < 1e-12 && e < 1e-4);
        assert_eq!(rmse(&[0.0, 0.5], &[0.5, 0.0]), Some(0.0));
        assert_eq!(rmse(&[0.0, 0.5], &[0.5]), None);
        // Wrap-around: 0.999 vs 0.001 are 0.002 apart.
        assert!((rmse(&[0.999], &[0.001]).unwrap() - 0.002).abs() < 1e-12);
    }

    #[test]
    fn toeplitz_and_dual_paths_agree() {
        use crate::anm::{solve_anm, AnmProblem, SolverOptions};
        use crate::signal::{draw_mask, MaskMode, SpectralModel};
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let model = SpectralModel::random(32, 3, 2, &mut rng).unwrap();
        let mask = draw_mask(32, MaskMode::UniformSubset { m: 24 }, &mut rng).unwrap();
        let problem = AnmProblem::from_full(&model.data, mask).unwrap();
        let sol = solve_anm(&problem, &SolverOptions::default()).unwrap();
        let opts = RetrievalOptions::default();
        let est = estimate_from_solution(&sol, &problem, &opts).unwrap();
        assert!(rmse(&model.freqs, &est.freqs).unwrap() < 1e-6);
        let peaks = peaks_from_dual(&sol.dual_polynomial(), &opts).unwrap();
        assert_eq!(peaks.len(), est.freqs.len());
        assert!(rmse(&est.freqs, &peaks).unwrap() < 1e-6);
    }

    fn brute_force_rmse(a: &[f64], b: &[f64]) -> f64 {
        fn perms(n: usize) -> Vec<Vec<usize>> {
            if n == 0 {
                return vec![vec![]];
            }
            let mut out = vec![];
            for p in perms(n - 1) {
                for pos in 0..=p.len() {
                    let mut q = p.clone();
                    q.insert(pos, n - 1);
                    out.push(q);
                }
            }
            out
        }
        perms(a.len())
            .iter()
            .map(|p| {
                let s: f64 = p.iter().enumerate().map(|(i, &j)| wrap_distance(a[i], b[j]).powi(2)).sum();
                (s / a.len() as f64).sqrt()
            })
            .fold(f64::INFINITY, f64::min)
    }

    proptest! {
        #[test]
        fn rmse_matches_brute_force_and_is_symmetric(a in prop::collection::vec(0.0f64..1.0, 1..6), seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b: Vec<f64> = a.iter().map(|_| rng.random::<f64>()).collect();
            let fast = rmse(&a, &b).unwrap();
            prop_assert!((fast - brute_force_rmse(&a, &b)).abs() < 1e-12);
            prop_assert!((fast - rmse(&b, &a).unwrap()).abs() < 1e-12);
            let mut shuffled = b.clone();
            shuffled.reverse();
            prop_assert!((fast - rmse(&a, &shuffled).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn decomposition_round_trip(seed in 0u64..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 32;
            let r = rng.random_range(1..=n / 4);
            let gap = 1.0 / ((n - 1) / 4) as f64;
            let f = match draw_frequencies_with_gap(r, gap, &mut rng) {
                Ok(f) => f,
                Err(_) => return Ok(()),
            };
            prop_assume!(min_separation(&f) > gap);
            let w: Vec<f64> = (0..r).map(|_| 0.5 + rng.random::<f64>()).collect();
            let vd = vandermonde_decompose(&toeplitz_of(n, &f, &w), &RetrievalOptions::default()).unwrap();
            prop_assert_eq!(vd.freqs.len(), r);
            prop_assert!(rmse(&f, &vd.freqs).unwrap() < 1e-8);
            let order = hungarian(&f.iter().map(|&a| vd.freqs.iter().map(|&b| wrap_distance(a, b)).collect()).collect::<Vec<_>>());
            for (i, &j) in order.iter().enumerate() {
                prop_assert!((w[i] - vd.weights[j]).abs() < 1e-8 * w[i].max(1.0));
            }
        }
    }
}
