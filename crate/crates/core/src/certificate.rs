//! Dual certificates built from the squared Fejér kernel.
//!
//! Everything here lives on the symmetric index set `J = {−2n, …, 2n}`. The
//! solver indexes samples `0..N`; shifting by `2n` multiplies `a(f)` by the
//! unimodular factor `e^{i2π·2n f}`, which [`solver_phases`] and
//! [`SymmetricMask::from_sample_mask`] account for.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anm::DualPolynomial;
use crate::linalg::{solve_square, ComplexMatrix, LinalgError};
use crate::signal::{min_separation, wrap_distance, SampleMask};

/// Largest acceptable condition estimate for the interpolation system.
pub const MAX_SYSTEM_CONDITION: f64 = 1e10;
/// Interpolation tolerance `‖Q(f_k) − φ_k‖` for a valid certificate.
pub const INTERP_TOL: f64 = 1e-8;
/// Default verification density: points per unit of `n`.
pub const DEFAULT_GRID_DENSITY: usize = 1000;
/// Near-region radius in units of `1/n`.
pub const NEAR_RADIUS: f64 = 0.16;

#[derive(Debug, Error)]
pub enum CertificateError {
    #[error("invalid certificate input: {0}")]
    InvalidInput(String),
    #[error("support separation {separation:.3e} is below 1/n = {bound:.3e}")]
    InsufficientSeparation { separation: f64, bound: f64 },
    #[error("interpolation system is singular or ill-conditioned (condition {condition:.3e})")]
    Infeasible { condition: f64 },
    #[error(transparent)]
    Linalg(LinalgError),
}

impl From<LinalgError> for CertificateError {
    fn from(e: LinalgError) -> Self {
        match e {
            LinalgError::Singular { condition } => CertificateError::Infeasible { condition },
            other => CertificateError::Linalg(other),
        }
    }
}

/// Squared Fejér kernel `𝒦(f) = Σ_j g(j) e^{−i2πjf}`, `|j| ≤ 2n`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FejerKernel {
    n: usize,
    /// `g[j + 2n] = g_n(j)`.
    g: Vec<f64>,
}

/// Coefficients of the squared Fejér kernel: the self-convolution of the
/// triangle `1 − |k|/(n+1)`, normalized so that `𝒦(0) = Σ g = 1`.
pub fn fejer_coeffs(n: usize) -> FejerKernel {
    assert!(n >= 1, "fejer_coeffs: n must be positive");
    let m = (n + 1) as i64;
    let mf = m as f64;
    let g = (-2 * n as i64..=2 * n as i64)
        .map(|j| {
            let lo = (j - m).max(-m);
            let hi = (j + m).min(m);
            let s: f64 = (lo..=hi)
                .map(|k| (1.0 - k.abs() as f64 / mf) * (1.0 - (j - k).abs() as f64 / mf))
                .sum();
            s / (mf * mf)
        })
        .collect();
    FejerKernel { n, g }
}

impl FejerKernel {
    pub fn n(&self) -> usize {
        self.n
    }

    /// `g_n(j)`, zero outside `|j| ≤ 2n`.
    pub fn coeff(&self, j: i64) -> f64 {
        let n = self.n as i64;
        if j.abs() > 2 * n {
            0.0
        } else {
            self.g[(j + 2 * n) as usize]
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.g
    }

    /// `c₀ = √|𝒦″(0)|`.
    pub fn c0(&self) -> f64 {
        let n = self.n as f64;
        (4.0 * PI * PI * n * (n + 2.0) / 3.0).sqrt()
    }

    /// `[sin(π(n+1)f) / ((n+1) sin πf)]⁴`.
    pub fn closed_form(&self, f: f64) -> f64 {
        let m = (self.n + 1) as f64;
        let den = m * (PI * f).sin();
        if den.abs() < 1e-12 {
            return 1.0;
        }
        ((PI * m * f).sin() / den).powi(4)
    }
}

/// Symmetric-index sampling set `Ω ⊆ {−2n, …, 2n}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymmetricMask {
    n: usize,
    indices: Vec<i64>,
}

impl SymmetricMask {
    pub fn full(n: usize) -> Self {
        let n2 = 2 * n as i64;
        Self { n, indices: (-n2..=n2).collect() }
    }

    pub fn from_indices(n: usize, mut indices: Vec<i64>) -> Result<Self, CertificateError> {
        indices.sort_unstable();
        indices.dedup();
        let n2 = 2 * n as i64;
        if indices.iter().any(|j| j.abs() > n2) {
            return Err(CertificateError::InvalidInput(format!(
                "mask index outside [-{n2}, {n2}]"
            )));
        }
        Ok(Self { n, indices })
    }

    /// Independent Bernoulli(`p`) selection of each index in `J`.
    pub fn bernoulli<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Result<Self, CertificateError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(CertificateError::InvalidInput(format!("probability {p} outside [0, 1]")));
        }
        let n2 = 2 * n as i64;
        let indices = (-n2..=n2).filter(|_| rng.random::<f64>() < p).collect();
        Ok(Self { n, indices })
    }

    /// Restricts a solver mask over `0..N` to the first `4n + 1` samples with
    /// `n = ⌊(N−1)/4⌋` and shifts index `i` to `i − 2n`.
    pub fn from_sample_mask(mask: &SampleMask) -> Result<Self, CertificateError> {
        let n = symmetric_half_bandwidth(mask.n)?;
        let n2 = 2 * n as i64;
        let indices = mask
            .indices
            .iter()
            .map(|&i| i as i64 - n2)
            .filter(|&j| j <= n2)
            .collect();
        Ok(Self { n, indices })
    }

    /// The same set in solver layout, `N = 4n + 1`.
    pub fn to_sample_mask(&self) -> SampleMask {
        let n2 = 2 * self.n as i64;
        let idx = self.indices.iter().map(|&j| (j + n2) as usize).collect();
        SampleMask::from_indices(4 * self.n + 1, idx).expect("indices in range by construction")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn indices(&self) -> &[i64] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.indices.len() == 4 * self.n + 1
    }
}

/// `n = ⌊(N−1)/4⌋`; requires `N ≥ 5`.
pub fn symmetric_half_bandwidth(n_samples: usize) -> Result<usize, CertificateError> {
    if n_samples < 5 {
        return Err(CertificateError::InvalidInput(format!(
            "need at least 5 samples for a symmetric certificate, got {n_samples}"
        )));
    }
    Ok((n_samples - 1) / 4)
}

/// Sign pattern `φ_k = s_k/‖s_k‖` re-phased for the symmetric layout, so the
/// certificate interpolates `φ_k` in the solver's `0..N` indexing.
pub fn solver_phases(freqs: &[f64], amps: &ComplexMatrix, n: usize) -> Result<ComplexMatrix, CertificateError> {
    if amps.rows() != freqs.len() {
        return Err(CertificateError::InvalidInput(format!(
            "{} frequencies but {} amplitude rows",
            freqs.len(),
            amps.rows()
        )));
    }
    let norms = amps.row_norms();
    if norms.iter().any(|&r| !(r > 0.0)) {
        return Err(CertificateError::InvalidInput("zero amplitude row".into()));
    }
    let shift = 2.0 * n as f64;
    Ok(ComplexMatrix::from_fn(amps.rows(), amps.cols(), |k, c| {
        amps[(k, c)] / norms[k] * Complex64::from_polar(1.0, 2.0 * PI * shift * freqs[k])
    }))
}

/// `Σ_{j∈Ω} g(j) (−i2πj)^order e^{−i2πjf}`.
pub fn kernel_eval(kernel: &FejerKernel, mask: Option<&SymmetricMask>, f: f64, order: u32) -> Complex64 {
    assert!(order <= 3, "kernel_eval: derivative order above 3");
    let term = |j: i64| {
        let w = Complex64::new(0.0, -2.0 * PI * j as f64);
        kernel.coeff(j) * w.powu(order) * Complex64::from_polar(1.0, -2.0 * PI * j as f64 * f)
    };
    match mask {
        Some(m) => m.indices.iter().map(|&j| term(j)).sum(),
        None => {
            let n2 = 2 * kernel.n as i64;
            (-n2..=n2).map(term).sum()
        }
    }
}

/// Solved interpolation system for `Q(f) = Σ_k α_k 𝒦̄(f − f_k) + β_k 𝒦̄′(f − f_k)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CertificateSystem {
    pub kernel: FejerKernel,
    pub freqs: Vec<f64>,
    pub phases: ComplexMatrix,
    pub mask: SymmetricMask,
    pub dbar: ComplexMatrix,
    pub alpha: ComplexMatrix,
    pub beta: ComplexMatrix,
    pub c0: f64,
    pub condition: f64,
}

/// Assembles and solves the `2K × 2K` system `D̄ (α; c₀β) = (Φ; 0)`.
pub fn build_certificate(
    n: usize,
    freqs: &[f64],
    phases: &ComplexMatrix,
    mask: &SymmetricMask,
) -> Result<CertificateSystem, CertificateError> {
    let k = freqs.len();
    if n == 0 || k == 0 {
        return Err(CertificateError::InvalidInput("need n ≥ 1 and at least one frequency".into()));
    }
    if phases.rows() != k || phases.cols() == 0 {
        return Err(CertificateError::InvalidInput(format!(
            "phases must be {k}×L, got {}×{}",
            phases.rows(),
            phases.cols()
        )));
    }
    if mask.n != n {
        return Err(CertificateError::InvalidInput(format!("mask built for n={}, expected {n}", mask.n)));
    }
    if freqs.iter().any(|f| !f.is_finite()) {
        return Err(CertificateError::InvalidInput("non-finite frequency".into()));
    }
    let bound = 1.0 / n as f64;
    let separation = min_separation(freqs);
    if k > 1 && separation < bound {
        return Err(CertificateError::InsufficientSeparation { separation, bound });
    }

    let kernel = fejer_coeffs(n);
    let c0 = kernel.c0();
    let sub = |order: u32| {
        ComplexMatrix::from_fn(k, k, |r, c| kernel_eval(&kernel, Some(mask), freqs[r] - freqs[c], order))
    };
    let (d0, d1, d2) = (sub(0), sub(1), sub(2));
    let mut dbar = ComplexMatrix::zeros(2 * k, 2 * k);
    dbar.set_submatrix(0, 0, &d0);
    dbar.set_submatrix(0, k, &d1.scale(1.0 / c0));
    dbar.set_submatrix(k, 0, &d1.scale(-1.0 / c0));
    dbar.set_submatrix(k, k, &d2.scale(-1.0 / (c0 * c0)));
    // D̄₁ is skew-Hermitian, so the lower-left block is the adjoint of the upper-right.
    let scale = dbar.frobenius_norm().max(f64::MIN_POSITIVE);
    debug_assert!(dbar.hermitian_deviation() <= 1e-12 * scale, "D̄ is not Hermitian");
    let dbar = dbar.hermitian_part();

    let l = phases.cols();
    let mut rhs = ComplexMatrix::zeros(2 * k, l);
    rhs.set_submatrix(0, 0, phases);
    let (sol, condition) = solve_square(&dbar, &rhs, MAX_SYSTEM_CONDITION)?;
    let alpha = sol.submatrix(0, 0, k, l);
    let beta = sol.submatrix(k, 0, k, l).scale(1.0 / c0);
    Ok(CertificateSystem {
        kernel,
        freqs: freqs.to_vec(),
        phases: phases.clone(),
        mask: mask.clone(),
        dbar,
        alpha,
        beta,
        c0,
        condition,
    })
}

impl CertificateSystem {
    pub fn n(&self) -> usize {
        self.kernel.n
    }

    /// Coefficients `V_j = g(j) Σ_k e^{i2πjf_k}(α_k − i2πj β_k)` for
    /// `j = −2n, …, 2n`; rows off `Ω` are zero.
    pub fn coefficients(&self) -> ComplexMatrix {
        let n2 = 2 * self.n() as i64;
        let l = self.phases.cols();
        let mut v = ComplexMatrix::zeros(4 * self.n() + 1, l);
        for &j in &self.mask.indices {
            let g = self.kernel.coeff(j);
            let w = Complex64::new(0.0, -2.0 * PI * j as f64);
            let row = v.row_mut((j + n2) as usize);
            for (k, &fk) in self.freqs.iter().enumerate() {
                let e = Complex64::from_polar(g, 2.0 * PI * j as f64 * fk);
                for c in 0..l {
                    row[c] += e * (self.alpha[(k, c)] + w * self.beta[(k, c)]);
                }
            }
        }
        v
    }

    /// The certificate as a polynomial over the symmetric index set.
    pub fn polynomial(&self) -> DualPolynomial {
        DualPolynomial::with_offset(self.coefficients(), -2 * self.n() as i64)
    }

    /// Coefficients in the solver layout `0..n_samples` (zero beyond `4n`).
    pub fn solver_coefficients(&self, n_samples: usize) -> Result<ComplexMatrix, CertificateError> {
        if n_samples < 4 * self.n() + 1 {
            return Err(CertificateError::InvalidInput(format!(
                "{n_samples} samples cannot hold a degree-{} certificate",
                4 * self.n()
            )));
        }
        let v = self.coefficients();
        let mut out = ComplexMatrix::zeros(n_samples, v.cols());
        out.set_submatrix(0, 0, &v);
        Ok(out)
    }
}

/// Outcome of a certificate check.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CertificateReport {
    pub n: usize,
    pub freqs: Vec<f64>,
    /// `‖Q(f_k) − φ_k‖`.
    pub interp_errors: Vec<f64>,
    /// `‖Q′(f_k)‖ / c₀`.
    pub derivative_errors: Vec<f64>,
    /// `1 − max ‖Q‖` over the checked off-support points.
    pub off_support_margin: f64,
    /// Largest `d²‖Q‖²/df²` inside each near region (empty for grid checks).
    pub near_curvature: Vec<f64>,
    pub valid: bool,
    pub condition: f64,
    pub mask: Vec<i64>,
    pub seed: Option<u64>,
    pub grid_points: usize,
}

impl CertificateReport {
    fn finish(mut self) -> Self {
        self.valid = self.interp_errors.iter().all(|&e| e <= INTERP_TOL)
            && self.off_support_margin > 0.0
            && self.near_curvature.iter().all(|&c| c < 0.0);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }
}

/// `d²‖Q‖²/df² = 2 Re⟨Q″, Q⟩ + 2‖Q′‖²`.
pub fn norm_sq_curvature(q: &DualPolynomial, f: f64) -> f64 {
    let [v, d1, d2] = q.eval_with_derivatives(f);
    let cross: f64 = d2.iter().zip(&v).map(|(a, b)| (a * b.conj()).re).sum();
    let slope: f64 = d1.iter().map(|z| z.norm_sqr()).sum();
    2.0 * cross + 2.0 * slope
}

fn interpolation_errors(system: &CertificateSystem, q: &DualPolynomial) -> (Vec<f64>, Vec<f64>) {
    system
        .freqs
        .iter()
        .enumerate()
        .map(|(k, &fk)| {
            let [v, d1, _] = q.eval_with_derivatives(fk);
            let e: f64 = v
                .iter()
                .zip(system.phases.row(k))
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            let d: f64 = d1.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            (e, d / system.c0)
        })
        .unzip()
}

fn blank_report(system: &CertificateSystem) -> CertificateReport {
    CertificateReport {
        n: system.n(),
        freqs: system.freqs.clone(),
        interp_errors: Vec::new(),
        derivative_errors: Vec::new(),
        off_support_margin: 1.0,
        near_curvature: Vec::new(),
        valid: false,
        condition: system.condition,
        mask: system.mask.indices.clone(),
        seed: None,
        grid_points: 0,
    }
}

/// Checks interpolation, `‖Q‖ < 1` on the far region and negative curvature
/// of `‖Q‖²` on every near region `|f − f_k| < 0.16/n`, using a uniform grid
/// of `grid_density · n` points plus the support.
pub fn verify_certificate(system: &CertificateSystem, grid_density: usize) -> CertificateReport {
    let q = system.polynomial();
    let n = system.n();
    let radius = NEAR_RADIUS / n as f64;
    let size = (grid_density * n).max(1);
    let points: Vec<f64> = (0..size)
        .map(|g| g as f64 / size as f64)
        .chain(system.freqs.iter().map(|f| f.rem_euclid(1.0)))
        .collect();

    // (index of the near region, value); far points carry None.
    let samples: Vec<(Option<usize>, f64)> = points
        .par_iter()
        .map(|&f| {
            let near = system.freqs.iter().position(|&fk| wrap_distance(f, fk) < radius);
            match near {
                Some(k) => (Some(k), norm_sq_curvature(&q, f)),
                None => (None, q.norm_at(f)),
            }
        })
        .collect();

    let mut near_curvature = vec![f64::NEG_INFINITY; system.freqs.len()];
    let mut far_peak = 0.0f64;
    for (region, value) in samples {
        match region {
            Some(k) => near_curvature[k] = near_curvature[k].max(value),
            None => far_peak = far_peak.max(value),
        }
    }
    let (interp_errors, derivative_errors) = interpolation_errors(system, &q);
    CertificateReport {
        interp_errors,
        derivative_errors,
        off_support_margin: 1.0 - far_peak,
        near_curvature,
        grid_points: points.len(),
        ..blank_report(system)
    }
    .finish()
}

/// Finite-grid version: `‖Q‖ < 1` is required only on `grid \ support`.
pub fn verify_grid_certificate(system: &CertificateSystem, grid: &[f64]) -> Result<CertificateReport, CertificateError> {
    const ON_SUPPORT: f64 = 1e-12;
    for &fk in &system.freqs {
        if !grid.iter().any(|&g| wrap_distance(g, fk) <= ON_SUPPORT) {
            return Err(CertificateError::InvalidInput(format!("support point {fk} is not on the grid")));
        }
    }
    let q = system.polynomial();
    let off: Vec<f64> = grid
        .iter()
        .copied()
        .filter(|&g| system.freqs.iter().all(|&fk| wrap_distance(g, fk) > ON_SUPPORT))
        .collect();
    let peaks: Vec<f64> = off.par_iter().map(|&f| q.norm_at(f)).collect();
    let far_peak = peaks.into_iter().fold(0.0, f64::max);
    let (interp_errors, derivative_errors) = interpolation_errors(system, &q);
    Ok(CertificateReport {
        interp_errors,
        derivative_errors,
        off_support_margin: 1.0 - far_peak,
        grid_points: grid.len(),
        ..blank_report(system)
    }
    .finish())
}
