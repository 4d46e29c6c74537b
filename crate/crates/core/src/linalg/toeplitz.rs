use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{ComplexMatrix, LinalgError};

/// Hermitian Toeplitz matrix generated by its first row, `T[m][l] = t[l-m]`
/// for `m ≤ l`, with `t[0]` real.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HermitianToeplitz {
    t: Vec<Complex64>,
}

impl HermitianToeplitz {
    pub fn new(t: Vec<Complex64>) -> Result<Self, LinalgError> {
        if t.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        if let Some(t0) = t.first() {
            if t0.im != 0.0 {
                return Err(LinalgError::NotHermitian { deviation: t0.im.abs() });
            }
        }
        Ok(Self { t })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            t: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    /// Frobenius-nearest Hermitian Toeplitz matrix to a square matrix:
    /// each diagonal is averaged together with the conjugate of its mirror.
    pub fn nearest(a: &ComplexMatrix) -> Self {
        assert!(a.is_square());
        let n = a.rows();
        let mut t = vec![Complex64::new(0.0, 0.0); n];
        for (j, tj) in t.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for m in 0..n - j {
                acc += a[(m, m + j)] + a[(m + j, m)].conj();
            }
            *tj = acc / (2.0 * (n - j) as f64);
        }
        if let Some(t0) = t.first_mut() {
            t0.im = 0.0;
        }
        Self { t }
    }

    /// Reads the generator off the first row of a matrix assumed Hermitian Toeplitz.
    pub fn from_first_row(a: &ComplexMatrix) -> Result<Self, LinalgError> {
        if !a.is_square() {
            return Err(LinalgError::NotSquare { shape: a.shape() });
        }
        Self::new(a.row(0).to_vec())
    }

    pub fn dim(&self) -> usize {
        self.t.len()
    }

    pub fn generator(&self) -> &[Complex64] {
        &self.t
    }

    pub fn t0(&self) -> f64 {
        self.t.first().map_or(0.0, |z| z.re)
    }

    pub fn entry(&self, m: usize, l: usize) -> Complex64 {
        if m <= l {
            self.t[l - m]
        } else {
            self.t[m - l].conj()
        }
    }

    pub fn to_matrix(&self) -> ComplexMatrix {
        let n = self.dim();
        ComplexMatrix::from_fn(n, n, |m, l| self.entry(m, l))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            t: self.t.iter().map(|z| z * s).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_complex_t0() {
        assert!(HermitianToeplitz::new(vec![Complex64::new(1.0, 0.1)]).is_err());
    }

    #[test]
    fn materialized_matrix_is_hermitian_toeplitz() {
        let t = HermitianToeplitz::new(vec![
            Complex64::new(2.0, 0.0),
            Complex64::new(0.5, -0.3),
            Complex64::new(-0.1, 0.7),
        ])
        .unwrap();
        let m = t.to_matrix();
        assert_eq!(m.hermitian_deviation(), 0.0);
        assert_eq!(m[(0, 2)], Complex64::new(-0.1, 0.7));
        assert_eq!(m[(2, 0)], Complex64::new(-0.1, -0.7));
        assert_eq!(m[(1, 2)], m[(0, 1)]);
    }

    proptest! {
        #[test]
        fn round_trips_generator(re in prop::collection::vec(-5.0f64..5.0, 1..12),
                                 im in prop::collection::vec(-5.0f64..5.0, 12)) {
            let mut t: Vec<Complex64> = re.iter().zip(&im).map(|(&a, &b)| Complex64::new(a, b)).collect();
            t[0].im = 0.0;
            let toep = HermitianToeplitz::new(t.clone()).unwrap();
            let m = toep.to_matrix();
            let back = HermitianToeplitz::from_first_row(&m).unwrap();
            prop_assert_eq!(back.generator(), &t[..]);
            let averaged = HermitianToeplitz::nearest(&m);
            for (a, b) in averaged.generator().iter().zip(&t) {
                prop_assert!((a - b).norm() <= 1e-14 * (1.0 + b.norm()));
            }
        }
    }
}
