//! Linear least squares (pivoted Householder QR) and square solves (LU with
//! partial pivoting plus a 1-norm condition estimate).

use num_complex::Complex64;

use super::{ComplexMatrix, LinalgError};

/// Relative threshold on `|R_ii| / |R_00|` below which a column is treated
/// as dependent.
pub const RANK_TOL: f64 = 1e-12;

/// Result of [`least_squares`].
#[derive(Clone, Debug)]
pub struct LeastSquares {
    pub solution: ComplexMatrix,
    pub rank: usize,
    /// Set when `A` lacks full column rank; `solution` is then the minimum-norm minimizer.
    pub rank_deficient: bool,
    /// `‖A X - B‖_F`.
    pub residual: f64,
    /// `|R_00| / |R_rr|` from the pivoted QR, a cheap condition indicator.
    pub condition: f64,
}

struct PivotedQr {
    /// Householder vectors below the diagonal, `R` on and above it.
    qr: ComplexMatrix,
    /// Reflector scalings: `H_k = I - tau_k v_k v_kᴴ` with `v_k[0] = 1`.
    tau: Vec<Complex64>,
    perm: Vec<usize>,
}

impl PivotedQr {
    fn new(a: &ComplexMatrix) -> Self {
        let (m, n) = a.shape();
        let mut qr = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let steps = m.min(n);
        let mut tau = vec![Complex64::new(0.0, 0.0); steps];
        let mut col_norms: Vec<f64> = (0..n)
            .map(|j| (0..m).map(|i| qr[(i, j)].norm_sqr()).sum::<f64>())
            .collect();
        for k in 0..steps {
            // Pivot on the largest remaining column norm.
            let (p, _) = col_norms[k..]
                .iter()
                .enumerate()
                .fold((0, -1.0), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
            let p = p + k;
            if p != k {
                for i in 0..m {
                    let tmp = qr[(i, k)];
                    qr[(i, k)] = qr[(i, p)];
                    qr[(i, p)] = tmp;
                }
                col_norms.swap(k, p);
                perm.swap(k, p);
            }
            let xnorm = (k..m).map(|i| qr[(i, k)].norm_sqr()).sum::<f64>().sqrt();
            if xnorm == 0.0 {
                tau[k] = Complex64::new(0.0, 0.0);
                continue;
            }
            let x0 = qr[(k, k)];
            let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { Complex64::new(1.0, 0.0) };
            let beta = -phase * xnorm;
            let v0 = x0 - beta;
            // Normalize so v[0] = 1.
            for i in k + 1..m {
                qr[(i, k)] /= v0;
            }
            let t = (beta - x0) / beta;
            tau[k] = t.conj();
            qr[(k, k)] = beta;
            // Apply H_k = I - tau v vᴴ to remaining columns. H_kᴴ x = alpha e1 requires
            // using conj(tau) on the left; we store tau such that Qᴴ = Π (I - conj(tau) v vᴴ)ᴴ.
            for j in k + 1..n {
                let mut dot = qr[(k, j)];
                for i in k + 1..m {
                    dot += qr[(i, k)].conj() * qr[(i, j)];
                }
                let s = t * dot;
                qr[(k, j)] -= s;
                for i in k + 1..m {
                    let vik = qr[(i, k)];
                    qr[(i, j)] -= vik * s;
                }
            }
            for j in k + 1..n {
                col_norms[j] = (k + 1..m).map(|i| qr[(i, j)].norm_sqr()).sum::<f64>();
            }
        }
        Self { qr, tau, perm }
    }

    /// Applies `Qᴴ` to `b` in place.
    fn apply_qh(&self, b: &mut ComplexMatrix) {
        let m = self.qr.rows();
        for (k, tau) in self.tau.iter().enumerate() {
            let t = tau.conj();
            if t == Complex64::new(0.0, 0.0) {
                continue;
            }
            for j in 0..b.cols() {
                let mut dot = b[(k, j)];
                for i in k + 1..m {
                    dot += self.qr[(i, k)].conj() * b[(i, j)];
                }
                let s = t * dot;
                b[(k, j)] -= s;
                for i in k + 1..m {
                    b[(i, j)] -= self.qr[(i, k)] * s;
                }
            }
        }
    }

    fn numerical_rank(&self) -> usize {
        let steps = self.tau.len();
        if steps == 0 {
            return 0;
        }
        let r00 = self.qr[(0, 0)].norm();
        if r00 == 0.0 {
            return 0;
        }
        (0..steps).take_while(|&k| self.qr[(k, k)].norm() > RANK_TOL * r00).count()
    }
}

/// Back substitution with the leading `r×r` upper triangle of `u`.
fn upper_solve(u: &ComplexMatrix, r: usize, b: &ComplexMatrix) -> ComplexMatrix {
    let mut x = ComplexMatrix::zeros(r, b.cols());
    for j in 0..b.cols() {
        for i in (0..r).rev() {
            let mut acc = b[(i, j)];
            for k in i + 1..r {
                acc -= u[(i, k)] * x[(k, j)];
            }
            x[(i, j)] = acc / u[(i, i)];
        }
    }
    x
}

/// Minimizes `‖A X - B‖_F`. Requires `rows(A) ≥ cols(A)`.
///
/// Rank-deficient `A` yields the minimum-norm minimizer with
/// `rank_deficient` set.
pub fn least_squares(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<LeastSquares, LinalgError> {
    let (m, n) = a.shape();
    if b.rows() != m {
        return Err(LinalgError::ShapeMismatch {
            expected: (m, b.cols()),
            found: b.shape(),
        });
    }
    if m < n {
        return Err(LinalgError::Underdetermined { rows: m, cols: n });
    }
    if !a.is_finite() || !b.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let l = b.cols();
    if n == 0 {
        return Ok(LeastSquares {
            solution: ComplexMatrix::zeros(0, l),
            rank: 0,
            rank_deficient: false,
            residual: b.frobenius_norm(),
            condition: 1.0,
        });
    }
    let qr = PivotedQr::new(a);
    let rank = qr.numerical_rank();
    let mut qb = b.clone();
    qr.apply_qh(&mut qb);
    let condition = if rank == 0 {
        f64::INFINITY
    } else {
        qr.qr[(0, 0)].norm() / qr.qr[(rank - 1, rank - 1)].norm()
    };

    let permuted = if rank == n {
        upper_solve(&qr.qr, n, &qb)
    } else if rank == 0 {
        ComplexMatrix::zeros(n, l)
    } else {
        // Complete orthogonal decomposition: [R11 R12]ᴴ = Z [S; 0].
        let r_top = ComplexMatrix::from_fn(rank, n, |i, j| if j >= i { qr.qr[(i, j)] } else { Complex64::new(0.0, 0.0) });
        let second = PivotedQr::new(&r_top.adjoint());
        // second has its own column permutation of the rank columns of R_topᴴ.
        // R_topᴴ P2 = Z S  =>  R_top = P2 Sᴴ Zᴴ, minimum-norm y = Z [S^{-H} P2ᵀ c; 0].
        let c = qb.submatrix(0, 0, rank, l);
        let c_perm = ComplexMatrix::from_fn(rank, l, |i, j| c[(second.perm[i], j)]);
        // Solve Sᴴ w = c_perm (lower triangular).
        let mut w = ComplexMatrix::zeros(n, l);
        for j in 0..l {
            for i in 0..rank {
                let mut acc = c_perm[(i, j)];
                for k in 0..i {
                    acc -= second.qr[(k, i)].conj() * w[(k, j)];
                }
                w[(i, j)] = acc / second.qr[(i, i)].conj();
            }
        }
        // y = Z w where Z = H_0 H_1 ... (apply in reverse).
        let nrows = n;
        for k in (0..second.tau.len()).rev() {
            let t = second.tau[k];
            for j in 0..l {
                let mut dot = w[(k, j)];
                for i in k + 1..nrows {
                    dot += second.qr[(i, k)].conj() * w[(i, j)];
                }
                let s = t * dot;
                w[(k, j)] -= s;
                for i in k + 1..nrows {
                    w[(i, j)] -= second.qr[(i, k)] * s;
                }
            }
        }
        w
    };

    let mut solution = ComplexMatrix::zeros(n, l);
    for (k, &p) in qr.perm.iter().enumerate() {
        solution.row_mut(p).copy_from_slice(permuted.row(k));
    }
    let residual = a.matmul(&solution).sub(b).frobenius_norm();
    Ok(LeastSquares {
        solution,
        rank,
        rank_deficient: rank < n,
        residual,
        condition,
    })
}

/// LU factorization with partial pivoting of a square matrix.
#[derive(Clone, Debug)]
pub struct Lu {
    lu: ComplexMatrix,
    perm: Vec<usize>,
    singular: bool,
    norm1: f64,
}

impl Lu {
    pub fn new(a: &ComplexMatrix) -> Result<Self, LinalgError> {
        if !a.is_square() {
            return Err(LinalgError::NotSquare { shape: a.shape() });
        }
        if !a.is_finite() {
            return Err(LinalgError::NonFinite);
        }
        let n = a.rows();
        let norm1 = (0..n)
            .map(|j| (0..n).map(|i| a[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max);
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut singular = false;
        for k in 0..n {
            let (p, pv) = (k..n)
                .map(|i| (i, lu[(i, k)].norm()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if pv == 0.0 {
                singular = true;
                continue;
            }
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                perm.swap(k, p);
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let factor = lu[(i, k)] / pivot;
                lu[(i, k)] = factor;
                for j in k + 1..n {
                    let ukj = lu[(k, j)];
                    lu[(i, j)] -= factor * ukj;
                }
            }
        }
        Ok(Self { lu, perm, singular, norm1 })
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    /// Solves `A X = B`.
    pub fn solve(&self, b: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
        let n = self.lu.rows();
        if b.rows() != n {
            return Err(LinalgError::ShapeMismatch {
                expected: (n, b.cols()),
                found: b.shape(),
            });
        }
        if self.singular {
            return Err(LinalgError::Singular { condition: f64::INFINITY });
        }
        let mut x = b.select_rows(&self.perm);
        for j in 0..x.cols() {
            for i in 0..n {
                let mut acc = x[(i, j)];
                for k in 0..i {
                    acc -= self.lu[(i, k)] * x[(k, j)];
                }
                x[(i, j)] = acc;
            }
            for i in (0..n).rev() {
                let mut acc = x[(i, j)];
                for k in i + 1..n {
                    acc -= self.lu[(i, k)] * x[(k, j)];
                }
                x[(i, j)] = acc / self.lu[(i, i)];
            }
        }
        Ok(x)
    }

    /// Solves `Aᴴ x = b` for a single vector.
    fn solve_adjoint_vec(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.lu.rows();
        // Aᴴ = Uᴴ Lᴴ Pᵀ... with P A = L U  =>  Aᴴ = Uᴴ Lᴴ P.
        let mut y = b.to_vec();
        for i in 0..n {
            let mut acc = y[i];
            for k in 0..i {
                acc -= self.lu[(k, i)].conj() * y[k];
            }
            y[i] = acc / self.lu[(i, i)].conj();
        }
        for i in (0..n).rev() {
            let mut acc = y[i];
            for k in i + 1..n {
                acc -= self.lu[(k, i)].conj() * y[k];
            }
            y[i] = acc;
        }
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = y[i];
        }
        x
    }

    /// 1-norm condition number estimate (Hager's method).
    pub fn condition_estimate(&self) -> f64 {
        let n = self.lu.rows();
        if self.singular {
            return f64::INFINITY;
        }
        if n == 0 {
            return 1.0;
        }
        let mut x = vec![Complex64::new(1.0 / n as f64, 0.0); n];
        let mut est = 0.0;
        for _ in 0..5 {
            let y = self
                .solve(&ComplexMatrix::column(&x))
                .expect("nonsingular")
                .into_vec();
            est = y.iter().map(|z| z.norm()).sum::<f64>();
            let xi: Vec<Complex64> = y
                .iter()
                .map(|z| if z.norm() > 0.0 { z / z.norm() } else { Complex64::new(1.0, 0.0) })
                .collect();
            let z = self.solve_adjoint_vec(&xi);
            let (jmax, zmax) = z
                .iter()
                .enumerate()
                .map(|(j, v)| (j, v.norm()))
                .fold((0, -1.0), |acc, v| if v.1 > acc.1 { v } else { acc });
            let ztx: f64 = z.iter().zip(&x).map(|(a, b)| (a.conj() * b).re).sum();
            if zmax <= ztx {
                break;
            }
            x = vec![Complex64::new(0.0, 0.0); n];
            x[jmax] = Complex64::new(1.0, 0.0);
        }
        est * self.norm1
    }
}

/// Solves the square system `A X = B`, failing when the estimated 1-norm
/// condition number exceeds `max_condition`.
pub fn solve_square(
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    max_condition: f64,
) -> Result<(ComplexMatrix, f64), LinalgError> {
    let lu = Lu::new(a)?;
    let cond = lu.condition_estimate();
    if !(cond <= max_condition) {
        return Err(LinalgError::Singular { condition: cond });
    }
    Ok((lu.solve(b)?, cond))
}
