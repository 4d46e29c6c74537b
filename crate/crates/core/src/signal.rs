//! Ground-truth instances: separated frequencies, sphere-uniform phase rows,
//! amplitudes, the full data matrix and sampling masks.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::ComplexMatrix;

/// Rejections allowed when drawing separated frequencies.
pub const MAX_FREQUENCY_REJECTIONS: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("cannot place {k} frequencies with wrap-around gaps above {bound} (needs k * bound < 1)")]
    InfeasibleSeparation { k: usize, bound: f64 },
    #[error("no separated draw for k={k} after {rejections} rejections")]
    RejectionCapReached { k: usize, rejections: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Length-`n` atom `[1, e^{i2πf}, …, e^{i2π(n-1)f}]`.
pub fn atom(n: usize, f: f64) -> Vec<Complex64> {
    (0..n).map(|j| Complex64::from_polar(1.0, 2.0 * PI * j as f64 * f)).collect()
}

/// Atom restricted to the given sample indices.
pub fn atom_on(indices: &[usize], f: f64) -> Vec<Complex64> {
    indices
        .iter()
        .map(|&j| Complex64::from_polar(1.0, 2.0 * PI * j as f64 * f))
        .collect()
}

/// Matrix whose columns are atoms restricted to `indices`.
pub fn vandermonde(indices: &[usize], freqs: &[f64]) -> ComplexMatrix {
    ComplexMatrix::from_fn(indices.len(), freqs.len(), |i, k| {
        Complex64::from_polar(1.0, 2.0 * PI * indices[i] as f64 * freqs[k])
    })
}

/// Distance between two points of the unit circle `[0, 1)`.
pub fn wrap_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Smallest pairwise wrap-around distance (`+∞` for fewer than two points).
pub fn min_separation(freqs: &[f64]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..freqs.len() {
        for j in i + 1..freqs.len() {
            best = best.min(wrap_distance(freqs[i], freqs[j]));
        }
    }
    best
}

/// Required separation `1 / ⌊(N-1)/4⌋` for length-`n` data.
pub fn separation_bound(n: usize) -> f64 {
    let q = n.saturating_sub(1) / 4;
    if q == 0 {
        f64::INFINITY
    } else {
        1.0 / q as f64
    }
}

/// Draws `k` frequencies in `[0,1)`, sorted ascending, whose pairwise
/// wrap-around distances all exceed [`separation_bound`]`(n)`.
pub fn draw_frequencies<R: Rng + ?Sized>(k: usize, n: usize, rng: &mut R) -> Result<Vec<f64>, SignalError> {
    draw_frequencies_with_gap(k, separation_bound(n), rng)
}

/// As [`draw_frequencies`] with an explicit minimum gap.
pub fn draw_frequencies_with_gap<R: Rng + ?Sized>(
    k: usize,
    gap: f64,
    rng: &mut R,
) -> Result<Vec<f64>, SignalError> {
    if k >= 2 && !(k as f64 * gap < 1.0) {
        return Err(SignalError::InfeasibleSeparation { k, bound: gap });
    }
    for _ in 0..MAX_FREQUENCY_REJECTIONS {
        let mut f: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
        f.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if k < 2 || min_separation(&f) > gap {
            return Ok(f);
        }
    }
    Err(SignalError::RejectionCapReached {
        k,
        rejections: MAX_FREQUENCY_REJECTIONS,
    })
}

/// Standard circularly-symmetric complex Gaussian, `E|z|² = 1`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// `rows × cols` matrix of i.i.d. standard complex Gaussians.
pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng))
}

/// `k × l` matrix whose rows are uniform on the unit complex sphere.
pub fn draw_sphere_phases<R: Rng + ?Sized>(k: usize, l: usize, rng: &mut R) -> Result<ComplexMatrix, SignalError> {
    if l == 0 {
        return Err(SignalError::InvalidParameter("channel count must be at least 1".into()));
    }
    let mut m = gaussian_matrix(k, l, rng);
    for i in 0..k {
        let row = m.row_mut(i);
        let norm = row.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in row.iter_mut() {
            *z /= norm;
        }
    }
    Ok(m)
}

/// Full data matrix `Σ_k a(f_k) s_k` with zero-based sample index.
pub fn synthesize(freqs: &[f64], amps: &ComplexMatrix, n: usize) -> ComplexMatrix {
    assert_eq!(amps.rows(), freqs.len(), "one amplitude row per frequency");
    let rows: Vec<usize> = (0..n).collect();
    if freqs.is_empty() {
        return ComplexMatrix::zeros(n, amps.cols());
    }
    vandermonde(&rows, freqs).matmul(amps)
}

/// Ground-truth multichannel spectral model.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralModel {
    pub n: usize,
    pub freqs: Vec<f64>,
    /// `K × L` amplitude rows.
    pub amps: ComplexMatrix,
    /// `N × L` full data.
    pub data: ComplexMatrix,
}

impl SpectralModel {
    pub fn new(n: usize, freqs: Vec<f64>, amps: ComplexMatrix) -> Self {
        let data = synthesize(&freqs, &amps, n);
        Self { n, freqs, amps, data }
    }

    /// Separated frequencies and i.i.d. standard complex Gaussian amplitudes.
    pub fn random<R: Rng + ?Sized>(n: usize, k: usize, l: usize, rng: &mut R) -> Result<Self, SignalError> {
        if l == 0 {
            return Err(SignalError::InvalidParameter("channel count must be at least 1".into()));
        }
        let freqs = draw_frequencies(k, n, rng)?;
        let amps = gaussian_matrix(k, l, rng);
        Ok(Self::new(n, freqs, amps))
    }

    pub fn k(&self) -> usize {
        self.freqs.len()
    }

    pub fn l(&self) -> usize {
        self.amps.cols()
    }

    /// `‖s_k‖₂` per component.
    pub fn magnitudes(&self) -> Vec<f64> {
        self.amps.row_norms()
    }

    /// Atomic norm of the data when the decomposition is the optimal one.
    pub fn coefficient_norm(&self) -> f64 {
        self.magnitudes().iter().sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MaskMode {
    UniformSubset { m: usize },
    Bernoulli { p: f64 },
}

/// Ordered subset of `{0, …, N-1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleMask {
    pub n: usize,
    pub indices: Vec<usize>,
    pub mode: MaskMode,
}

impl SampleMask {
    pub fn full(n: usize) -> Self {
        Self {
            n,
            indices: (0..n).collect(),
            mode: MaskMode::UniformSubset { m: n },
        }
    }

    /// Validates ordering and range of explicit indices.
    pub fn from_indices(n: usize, indices: Vec<usize>) -> Result<Self, SignalError> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SignalError::InvalidParameter("mask indices must be strictly increasing".into()));
        }
        if indices.last().is_some_and(|&i| i >= n) {
            return Err(SignalError::InvalidParameter(format!("mask index out of range for N={n}")));
        }
        let m = indices.len();
        Ok(Self {
            n,
            indices,
            mode: MaskMode::UniformSubset { m },
        })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.indices.len() == self.n
    }

    /// Indices not in the mask.
    pub fn complement(&self) -> Vec<usize> {
        let mut keep = vec![false; self.n];
        for &i in &self.indices {
            keep[i] = true;
        }
        (0..self.n).filter(|&i| !keep[i]).collect()
    }
}

/// Draws a sampling mask of ambient size `n`.
pub fn draw_mask<R: Rng + ?Sized>(n: usize, mode: MaskMode, rng: &mut R) -> Result<SampleMask, SignalError> {
    let indices = match mode {
        MaskMode::UniformSubset { m } => {
            if m == 0 || m > n {
                return Err(SignalError::InvalidParameter(format!("need 1 <= M <= N, got M={m}, N={n}")));
            }
            let mut idx = rand::seq::index::sample(rng, n, m).into_vec();
            idx.sort_unstable();
            idx
        }
        MaskMode::Bernoulli { p } => {
            if !(p > 0.0 && p <= 1.0) {
                return Err(SignalError::InvalidParameter(format!("need 0 < p <= 1, got p={p}")));
            }
            (0..n).filter(|_| rng.random::<f64>() < p).collect()
        }
    };
    Ok(SampleMask { n, indices, mode })
}

/// Replayable problem instance: model, mask and the seed that produced them.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Instance {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub freqs: Vec<f64>,
    /// `K` rows of `L` complex amplitudes, each as `[re, im]`.
    pub amps: Vec<Vec<[f64; 2]>>,
    pub mask: Vec<usize>,
    pub seed: u64,
}

impl Instance {
    pub fn from_parts(model: &SpectralModel, mask: &SampleMask, seed: u64) -> Self {
        let amps = (0..model.k())
            .map(|k| model.amps.row(k).iter().map(|z| [z.re, z.im]).collect())
            .collect();
        Self {
            n: model.n,
            l: model.l(),
            k: model.k(),
            freqs: model.freqs.clone(),
            amps,
            mask: mask.indices.clone(),
            seed,
        }
    }

    /// Rebuilds the model and mask, validating shapes.
    pub fn to_parts(&self) -> Result<(SpectralModel, SampleMask), SignalError> {
        if self.freqs.len() != self.k || self.amps.len() != self.k {
            return Err(SignalError::InvalidParameter("freqs/amps length must equal K".into()));
        }
        if self.amps.iter().any(|r| r.len() != self.l) {
            return Err(SignalError::InvalidParameter("each amplitude row must have L entries".into()));
        }
        if self.l == 0 {
            return Err(SignalError::InvalidParameter("L must be at least 1".into()));
        }
        let data: Vec<Complex64> = self
            .amps
            .iter()
            .flatten()
            .map(|&[re, im]| Complex64::new(re, im))
            .collect();
        let amps = ComplexMatrix::new(self.k, self.l, data)
            .map_err(|e| SignalError::InvalidParameter(e.to_string()))?;
        let mask = SampleMask::from_indices(self.n, self.mask.clone())?;
        Ok((SpectralModel::new(self.n, self.freqs.clone(), amps), mask))
    }
}
