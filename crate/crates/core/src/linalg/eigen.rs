//! Eigenvalue kernels: Hermitian eigendecomposition, PSD-cone projection and
//! eigenvalues of small general complex matrices.
//!
//! The Hermitian solver reduces to a real symmetric tridiagonal matrix with
//! Householder reflectors and a unimodular diagonal scaling, then runs
//! implicit-shift QL with the rotations accumulated into the complex basis.

use num_complex::Complex64;

use super::{ComplexMatrix, LinalgError};

/// Relative tolerance on `max |A - Aᴴ| / ‖A‖_F` accepted as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// QL iterations allowed per eigenvalue before giving up.
const QL_MAX_ITER: usize = 64;

/// Eigenpairs of a Hermitian matrix, eigenvalues sorted descending.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Column `j` is the unit eigenvector for `values[j]`.
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    /// `U diag(λ) Uᴴ`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let n = self.values.len();
        weighted_outer(&self.vectors, &self.values, (0..n).collect::<Vec<_>>().as_slice())
    }
}

fn check_hermitian(a: &ComplexMatrix) -> Result<(), LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare { shape: a.shape() });
    }
    if !a.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let scale = a.frobenius_norm();
    let dev = a.hermitian_deviation();
    if dev > HERMITIAN_TOL * scale.max(f64::MIN_POSITIVE) && dev > 0.0 {
        return Err(LinalgError::NotHermitian {
            deviation: dev / scale.max(f64::MIN_POSITIVE),
        });
    }
    Ok(())
}

/// Eigendecomposition `A = U diag(λ) Uᴴ` of a Hermitian matrix.
///
/// The input is symmetrized as `(A + Aᴴ)/2` after the Hermitian check, so
/// round-off asymmetry below [`HERMITIAN_TOL`] is ignored.
pub fn hermitian_eig(a: &ComplexMatrix) -> Result<HermitianEigen, LinalgError> {
    check_hermitian(a)?;
    let n = a.rows();
    if n == 0 {
        return Ok(HermitianEigen {
            values: vec![],
            vectors: ComplexMatrix::zeros(0, 0),
        });
    }
    let mut work = a.hermitian_part();
    let (mut diag, sub, reflectors) = tridiagonalize(&mut work);

    // Basis Q = H_0 H_1 ... stored transposed: row j of `basis_t` is column j of Q.
    let q = accumulate_reflectors(n, &reflectors);

    // Unimodular scaling making the subdiagonal real and nonnegative.
    let mut phases = vec![Complex64::new(1.0, 0.0); n];
    let mut off = vec![0.0; n];
    for k in 0..n - 1 {
        let e = sub[k];
        let mag = e.norm();
        phases[k + 1] = if mag > 0.0 { phases[k] * (e / mag) } else { phases[k] };
        off[k] = mag;
    }
    let mut basis_t = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            basis_t[(j, i)] = q[(i, j)] * phases[j];
        }
    }

    tql2(&mut diag, &mut off, &mut basis_t)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diag[j].partial_cmp(&diag[i]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| diag[i]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |i, j| basis_t[(order[j], i)]);
    Ok(HermitianEigen { values, vectors })
}

/// Householder reduction of a Hermitian matrix to tridiagonal form
/// `A = Q T Qᴴ`. Returns the real diagonal, the complex subdiagonal and the
/// reflectors `(offset, v)` with `H = I - 2 v vᴴ` acting on rows `offset..`.
fn tridiagonalize(a: &mut ComplexMatrix) -> (Vec<f64>, Vec<Complex64>, Vec<(usize, Vec<Complex64>)>) {
    let n = a.rows();
    let mut sub = vec![Complex64::new(0.0, 0.0); n.saturating_sub(1)];
    let mut reflectors = Vec::with_capacity(n.saturating_sub(2));
    let mut p = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..n.saturating_sub(2) {
        let m = n - k - 1;
        let x: Vec<Complex64> = (0..m).map(|i| a[(k + 1 + i, k)]).collect();
        let tail_sq: f64 = x[1..].iter().map(|z| z.norm_sqr()).sum();
        if tail_sq == 0.0 {
            sub[k] = x[0];
            continue;
        }
        let xnorm = (x[0].norm_sqr() + tail_sq).sqrt();
        let x0_abs = x[0].norm();
        let phase = if x0_abs > 0.0 { x[0] / x0_abs } else { Complex64::new(1.0, 0.0) };
        let alpha = -phase * xnorm;
        let mut v = x;
        v[0] -= alpha;
        let vnorm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in v.iter_mut() {
            *z /= vnorm;
        }
        sub[k] = alpha;

        // p = A22 v
        let off = k + 1;
        for i in 0..m {
            let row = &a.row(off + i)[off..];
            p[i] = row.iter().zip(&v).map(|(&aij, &vj)| aij * vj).sum();
        }
        let kk: f64 = v.iter().zip(&p[..m]).map(|(vi, pi)| (vi.conj() * pi).re).sum();
        for i in 0..m {
            p[i] -= v[i] * kk;
        }
        // A22 -= 2 (v qᴴ + q vᴴ)
        for i in 0..m {
            let vi2 = v[i] * 2.0;
            let qi2 = p[i] * 2.0;
            let row = &mut a.row_mut(off + i)[off..];
            for j in 0..m {
                row[j] -= vi2 * p[j].conj() + qi2 * v[j].conj();
            }
        }
        reflectors.push((off, v));
    }
    if n >= 2 {
        sub[n - 2] = a[(n - 1, n - 2)];
    }
    let diag = (0..n).map(|i| a[(i, i)].re).collect();
    (diag, sub, reflectors)
}

fn accumulate_reflectors(n: usize, reflectors: &[(usize, Vec<Complex64>)]) -> ComplexMatrix {
    let mut q = ComplexMatrix::identity(n);
    let mut w = vec![Complex64::new(0.0, 0.0); n];
    for (off, v) in reflectors.iter().rev() {
        let off = *off;
        // Q[off.., off..] -= 2 v (vᴴ Q[off.., off..])
        for x in w[off..].iter_mut() {
            *x = Complex64::new(0.0, 0.0);
        }
        for (i, vi) in v.iter().enumerate() {
            let vc = vi.conj();
            let row = &q.row(off + i)[off..];
            for (wj, &qij) in w[off..].iter_mut().zip(row) {
                *wj += vc * qij;
            }
        }
        for (i, vi) in v.iter().enumerate() {
            let vi2 = vi * 2.0;
            let row = &mut q.row_mut(off + i)[off..];
            for (qij, wj) in row.iter_mut().zip(&w[off..]) {
                *qij -= vi2 * wj;
            }
        }
    }
    q
}

/// Implicit-shift QL on a real symmetric tridiagonal matrix. `off[k]` is the
/// entry between rows `k` and `k+1`; rotations are applied to the rows of
/// `basis_t` (the transposed eigenvector basis).
fn tql2(d: &mut [f64], e: &mut [f64], basis_t: &mut ComplexMatrix) -> Result<(), LinalgError> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    e[n - 1] = 0.0;
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1 = 0.0_f64;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > QL_MAX_ITER {
                    return Err(LinalgError::NoConvergence {
                        iterations: QL_MAX_ITER,
                    });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    rotate_rows(basis_t, i, c, s);
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

#[inline]
fn rotate_rows(m: &mut ComplexMatrix, i: usize, c: f64, s: f64) {
    let cols = m.cols();
    let data = m.as_mut_slice();
    let (head, tail) = data.split_at_mut((i + 1) * cols);
    let ri = &mut head[i * cols..];
    let ri1 = &mut tail[..cols];
    for (a, b) in ri.iter_mut().zip(ri1.iter_mut()) {
        let h = *b;
        *b = *a * s + h * c;
        *a = *a * c - h * s;
    }
}

/// `Σ_{j ∈ idx} w_j u_j u_jᴴ` for columns `u_j` of `vectors`.
fn weighted_outer(vectors: &ComplexMatrix, weights: &[f64], idx: &[usize]) -> ComplexMatrix {
    let n = vectors.rows();
    let mut out = ComplexMatrix::zeros(n, n);
    let cols: Vec<(f64, Vec<Complex64>)> =
        idx.iter().map(|&j| (weights[j], vectors.col_vec(j))).collect();
    for i in 0..n {
        let row = out.row_mut(i);
        for (w, u) in &cols {
            let ui = u[i] * *w;
            for (o, uj) in row.iter_mut().zip(u) {
                *o += ui * uj.conj();
            }
        }
    }
    out
}

/// Frobenius-nearest positive semidefinite matrix, `U diag(max(λ,0)) Uᴴ`.
pub fn psd_project(a: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
    Ok(psd_project_with_eigs(a)?.0)
}

/// As [`psd_project`], also returning the eigenvalues of the input.
pub fn psd_project_with_eigs(a: &ComplexMatrix) -> Result<(ComplexMatrix, Vec<f64>), LinalgError> {
    let eig = hermitian_eig(a)?;
    let pos: Vec<usize> = (0..eig.values.len()).filter(|&j| eig.values[j] > 0.0).collect();
    let neg: Vec<usize> = (0..eig.values.len()).filter(|&j| eig.values[j] < 0.0).collect();
    // Sum whichever side has fewer terms.
    let out = if pos.len() <= neg.len() {
        weighted_outer(&eig.vectors, &eig.values, &pos)
    } else {
        a.hermitian_part().sub(&weighted_outer(&eig.vectors, &eig.values, &neg))
    };
    Ok((out, eig.values))
}

/// Eigenvalues of a general square complex matrix (Hessenberg reduction and
/// shifted QR). Order is unspecified.
pub fn general_eigenvalues(a: &ComplexMatrix) -> Result<Vec<Complex64>, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare { shape: a.shape() });
    }
    if !a.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let n = a.rows();
    let mut h = hessenberg(a);
    let mut eigs = Vec::with_capacity(n);
    let mut hi = n;
    let mut iter = 0usize;
    let max_iter = 100 * n.max(1);
    let mut total = 0usize;
    while hi > 0 {
        if hi == 1 {
            eigs.push(h[(0, 0)]);
            break;
        }
        // Locate the start of the active unreduced block.
        let mut l = hi - 1;
        while l > 0 {
            let s = h[(l, l)].norm() + h[(l - 1, l - 1)].norm();
            let s = if s == 0.0 { 1.0 } else { s };
            if h[(l, l - 1)].norm() <= f64::EPSILON * s {
                h[(l, l - 1)] = Complex64::new(0.0, 0.0);
                break;
            }
            l -= 1;
        }
        if l == hi - 1 {
            eigs.push(h[(hi - 1, hi - 1)]);
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        total += 1;
        if total > max_iter {
            return Err(LinalgError::NoConvergence { iterations: max_iter });
        }
        let shift = if iter % 11 == 0 {
            // Exceptional shift to break cycles.
            h[(hi - 1, hi - 1)] + Complex64::new(h[(hi - 1, hi - 2)].norm() * 0.75, 0.0)
        } else {
            wilkinson_shift(
                h[(hi - 2, hi - 2)],
                h[(hi - 2, hi - 1)],
                h[(hi - 1, hi - 2)],
                h[(hi - 1, hi - 1)],
            )
        };
        qr_step(&mut h, l, hi, shift);
    }
    Ok(eigs)
}

fn wilkinson_shift(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    // Eigenvalue of [[a, b], [c, d]] closest to d.
    let tr_half = (a + d) * 0.5;
    let det = a * d - b * c;
    let disc = (tr_half * tr_half - det).sqrt();
    let l1 = tr_half + disc;
    let l2 = tr_half - disc;
    if (l1 - d).norm() < (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

fn qr_step(h: &mut ComplexMatrix, lo: usize, hi: usize, shift: Complex64) {
    let n = h.rows();
    for i in lo..hi {
        h[(i, i)] -= shift;
    }
    let mut rots = Vec::with_capacity(hi - lo);
    for k in lo..hi - 1 {
        let a = h[(k, k)];
        let b = h[(k + 1, k)];
        let r = (a.norm_sqr() + b.norm_sqr()).sqrt();
        let (c, s) = if r == 0.0 {
            (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
        } else {
            (a / r, b / r)
        };
        for j in k..n {
            let x = h[(k, j)];
            let y = h[(k + 1, j)];
            h[(k, j)] = c.conj() * x + s.conj() * y;
            h[(k + 1, j)] = -s * x + c * y;
        }
        rots.push((c, s));
    }
    for (idx, &(c, s)) in rots.iter().enumerate() {
        let k = lo + idx;
        let top = (k + 2).min(hi);
        for i in 0..top {
            let x = h[(i, k)];
            let y = h[(i, k + 1)];
            h[(i, k)] = x * c + y * s;
            h[(i, k + 1)] = -x * s.conj() + y * c.conj();
        }
    }
    for i in lo..hi {
        h[(i, i)] += shift;
    }
}

fn hessenberg(a: &ComplexMatrix) -> ComplexMatrix {
    let n = a.rows();
    let mut h = a.clone();
    for k in 0..n.saturating_sub(2) {
        let x: Vec<Complex64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        let tail_sq: f64 = x[1..].iter().map(|z| z.norm_sqr()).sum();
        if tail_sq == 0.0 {
            continue;
        }
        let xnorm = (x[0].norm_sqr() + tail_sq).sqrt();
        let x0_abs = x[0].norm();
        let phase = if x0_abs > 0.0 { x[0] / x0_abs } else { Complex64::new(1.0, 0.0) };
        let mut v = x;
        v[0] += phase * xnorm;
        let vnorm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in v.iter_mut() {
            *z /= vnorm;
        }
        // Left: rows k+1.. , all columns.
        for j in 0..n {
            let dot: Complex64 = v.iter().enumerate().map(|(i, vi)| vi.conj() * h[(k + 1 + i, j)]).sum();
            for (i, vi) in v.iter().enumerate() {
                h[(k + 1 + i, j)] -= vi * dot * 2.0;
            }
        }
        // Right: all rows, columns k+1..
        for i in 0..n {
            let dot: Complex64 = v.iter().enumerate().map(|(j, vj)| h[(i, k + 1 + j)] * vj).sum();
            for (j, vj) in v.iter().enumerate() {
                h[(i, k + 1 + j)] -= dot * vj.conj() * 2.0;
            }
        }
        for i in k + 2..n {
            h[(i, k)] = Complex64::new(0.0, 0.0);
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, rng: &mut impl Rng) -> ComplexMatrix {
        let g = ComplexMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        g.add(&g.adjoint())
    }

    fn atom(n: usize, f: f64) -> Vec<Complex64> {
        (0..n)
            .map(|j| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 * f))
            .collect()
    }

    #[test]
    fn identity_has_unit_eigenvalues() {
        let eig = hermitian_eig(&ComplexMatrix::identity(2)).unwrap();
        assert_eq!(eig.values.len(), 2);
        for v in &eig.values {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn diagonal_eigenvalues_sorted_descending() {
        let eig = hermitian_eig(&ComplexMatrix::from_diag(&[-1.0, 3.0])).unwrap();
        assert!((eig.values[0] - 3.0).abs() < 1e-15);
        assert!((eig.values[1] + 1.0).abs() < 1e-15);
        assert!((eig.vectors[(1, 0)].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rank_one_atom_outer_product() {
        let a = ComplexMatrix::column(&atom(4, 0.25));
        let t = a.matmul_adjoint(&a);
        let eig = hermitian_eig(&t).unwrap();
        assert!((eig.values[0] - 4.0).abs() < 1e-12);
        for v in &eig.values[1..] {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut a = ComplexMatrix::identity(3);
        a[(0, 2)] = Complex64::new(0.5, 0.0);
        assert!(matches!(hermitian_eig(&a), Err(LinalgError::NotHermitian { .. })));
        assert!(matches!(
            hermitian_eig(&ComplexMatrix::zeros(2, 3)),
            Err(LinalgError::NotSquare { .. })
        ));
    }

    #[test]
    fn residual_and_orthogonality_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [1usize, 2, 3, 5, 17, 40] {
            let a = random_hermitian(n, &mut rng);
            let eig = hermitian_eig(&a).unwrap();
            let r = eig.reconstruct().sub(&a).frobenius_norm();
            assert!(r <= 1e-9 * a.frobenius_norm(), "n={n} residual {r}");
            let gram = eig.vectors.adjoint_matmul(&eig.vectors);
            let o = gram.sub(&ComplexMatrix::identity(n)).frobenius_norm();
            assert!(o <= 1e-9 * (n as f64).sqrt());
            assert!(eig.values.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn psd_projection_clips_negative_part() {
        let p = psd_project(&ComplexMatrix::from_diag(&[1.0, -2.0])).unwrap();
        assert!(p.sub(&ComplexMatrix::from_diag(&[1.0, 0.0])).frobenius_norm() < 1e-15);
        let a = ComplexMatrix::column(&atom(5, 0.1));
        let psd = a.matmul_adjoint(&a);
        let p = psd_project(&psd).unwrap();
        assert!(p.sub(&psd).frobenius_norm() < 1e-9);
    }

    #[test]
    fn general_eigenvalues_of_triangular_and_rotation() {
        let mut a = ComplexMatrix::zeros(3, 3);
        a[(0, 0)] = Complex64::new(1.0, 1.0);
        a[(1, 1)] = Complex64::new(-2.0, 0.0);
        a[(2, 2)] = Complex64::new(0.5, -3.0);
        a[(0, 2)] = Complex64::new(4.0, 0.0);
        let mut e = general_eigenvalues(&a).unwrap();
        e.sort_by(|x, y| x.re.partial_cmp(&y.re).unwrap());
        assert!((e[0] - Complex64::new(-2.0, 0.0)).norm() < 1e-12);
        assert!((e[1] - Complex64::new(0.5, -3.0)).norm() < 1e-12);
        assert!((e[2] - Complex64::new(1.0, 1.0)).norm() < 1e-12);

        // Real rotation by θ has eigenvalues e^{±iθ}.
        let th: f64 = 0.7;
        let r = ComplexMatrix::from_fn(2, 2, |i, j| {
            let v = match (i, j) {
                (0, 0) | (1, 1) => th.cos(),
                (0, 1) => -th.sin(),
                _ => th.sin(),
            };
            Complex64::new(v, 0.0)
        });
        let e = general_eigenvalues(&r).unwrap();
        for z in e {
            assert!((z.norm() - 1.0).abs() < 1e-12);
            assert!((z.arg().abs() - th).abs() < 1e-12);
        }
    }

    #[test]
    fn general_eigenvalues_match_hermitian_solver() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_hermitian(12, &mut rng);
        let mut g: Vec<f64> = general_eigenvalues(&a).unwrap().iter().map(|z| z.re).collect();
        g.sort_by(|x, y| y.partial_cmp(x).unwrap());
        let h = hermitian_eig(&a).unwrap().values;
        for (x, y) in g.iter().zip(&h) {
            assert!((x - y).abs() < 1e-10);
        }
    }
}
