//! Reference eigensolvers: Sturm-sequence bisection for tridiagonal input
//! and cyclic Jacobi rotations for dense input.
//!
//! Neither shares code with the flow integrator; they exist to check it.

use thiserror::Error;

use crate::band::BandedSymmetricMatrix;
use crate::dense::DenseMatrix;
use crate::Scalar;

/// Largest dimension accepted by [`eigenvalues_dense`].
pub const DENSE_MAX_DIM: usize = 512;

const MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("empty matrix")]
    Empty,
    #[error("non-finite matrix entry")]
    NonFinite,
    #[error("off-diagonal has length {got}, expected {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("matrix is not symmetric (max |a_ij - a_ji| = {max_asymmetry:e})")]
    Asymmetric { max_asymmetry: f64 },
    #[error("dense oracle is limited to N <= {max} (got N = {dim})")]
    TooLarge { dim: usize, max: usize },
    #[error("Jacobi iteration did not converge in {sweeps} sweeps")]
    NotConverged { sweeps: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult<T> {
    /// Ascending.
    pub eigenvalues: Vec<T>,
    /// Bound on the absolute error of every eigenvalue.
    pub residual_bound: T,
}

/// Number of eigenvalues strictly below `x`.
pub fn sturm_count<T: Scalar>(diag: &[T], off: &[T], x: T) -> usize {
    let pivmin = pivmin(off);
    sturm_count_with(diag, off, x, pivmin)
}

fn pivmin<T: Scalar>(off: &[T]) -> T {
    let emax = off.iter().fold(T::one(), |m, e| m.max(*e * *e));
    T::min_positive_value() * emax
}

fn sturm_count_with<T: Scalar>(diag: &[T], off: &[T], x: T, pivmin: T) -> usize {
    let mut count = 0;
    let mut q = T::one();
    for (i, &d) in diag.iter().enumerate() {
        q = if i == 0 { d - x } else { d - x - off[i - 1] * off[i - 1] / q };
        if q.abs() < pivmin {
            q = -pivmin;
        }
        if q < T::zero() {
            count += 1;
        }
    }
    count
}

fn check_finite<T: Scalar>(v: &[T]) -> Result<(), OracleError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(OracleError::NonFinite)
    }
}

/// All eigenvalues of the symmetric tridiagonal matrix with the given
/// diagonal and off-diagonal, by bisection inside the Gershgorin interval.
///
/// Each eigenvalue is bracketed to a few ulps of `||H||`.
#[allow(clippy::needless_range_loop)]
pub fn eigenvalues_tridiag<T: Scalar>(diag: &[T], off: &[T]) -> Result<SpectrumResult<T>, OracleError> {
    let n = diag.len();
    if n == 0 {
        return Err(OracleError::Empty);
    }
    if off.len() + 1 != n {
        return Err(OracleError::LengthMismatch { got: off.len(), expected: n - 1 });
    }
    check_finite(diag)?;
    check_finite(off)?;

    let radius = |i: usize| {
        let left = if i > 0 { off[i - 1].abs() } else { T::zero() };
        let right = if i + 1 < n { off[i].abs() } else { T::zero() };
        left + right
    };
    let mut lo = diag[0] - radius(0);
    let mut hi = diag[0] + radius(0);
    for i in 1..n {
        lo = lo.min(diag[i] - radius(i));
        hi = hi.max(diag[i] + radius(i));
    }
    let norm = lo.abs().max(hi.abs());
    let tol = (T::epsilon() * T::of(4.0) * norm).max(T::min_positive_value());
    // widen so that no eigenvalue sits on the bracket ends
    lo -= tol;
    hi += tol;

    let pm = pivmin(off);
    let mut eigenvalues = Vec::with_capacity(n);
    for k in 0..n {
        let (mut a, mut b) = (eigenvalues.last().copied().unwrap_or(lo).max(lo), hi);
        // lower end may coincide with the previous eigenvalue; step just below
        if k > 0 {
            a -= tol;
        }
        while b - a > tol {
            let mid = a + (b - a) * T::of(0.5);
            if mid <= a || mid >= b {
                break;
            }
            if sturm_count_with(diag, off, mid, pm) > k {
                b = mid;
            } else {
                a = mid;
            }
        }
        eigenvalues.push(a + (b - a) * T::of(0.5));
    }
    Ok(SpectrumResult { eigenvalues, residual_bound: tol })
}

/// All eigenvalues of a dense symmetric matrix by cyclic Jacobi rotations.
pub fn eigenvalues_dense<T: Scalar>(a: &DenseMatrix<T>) -> Result<SpectrumResult<T>, OracleError> {
    let n = a.dim();
    if n == 0 {
        return Err(OracleError::Empty);
    }
    if n > DENSE_MAX_DIM {
        return Err(OracleError::TooLarge { dim: n, max: DENSE_MAX_DIM });
    }
    check_finite(a.as_slice())?;
    let norm = a.frobenius_norm_sq().sqrt();
    let asym = a.max_asymmetry();
    if asym > T::of(1e-12) * norm.max(T::one()) {
        return Err(OracleError::Asymmetric { max_asymmetry: asym.to_f64().unwrap_or(f64::NAN) });
    }

    let mut m: Vec<T> = a.as_slice().to_vec();
    for i in 0..n {
        for j in 0..i {
            let s = (m[i * n + j] + m[j * n + i]) * T::of(0.5);
            m[i * n + j] = s;
            m[j * n + i] = s;
        }
    }
    let target = T::of(1e-13).max(T::epsilon() * T::of(4.0)) * norm;
    let off_norm = |m: &[T]| {
        let mut s = T::zero();
        for i in 0..n {
            for j in 0..i {
                s += m[i * n + j] * m[i * n + j];
            }
        }
        (s * T::of(2.0)).sqrt()
    };

    let mut sweeps = 0;
    while off_norm(&m) > target {
        if sweeps == MAX_SWEEPS {
            return Err(OracleError::NotConverged { sweeps });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == T::zero() {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (T::of(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                let tau = s / (T::one() + c);
                m[p * n + p] -= t * apq;
                m[q * n + q] += t * apq;
                m[p * n + q] = T::zero();
                m[q * n + p] = T::zero();
                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let g = m[r * n + p];
                    let h = m[r * n + q];
                    let rp = g - s * (h + g * tau);
                    let rq = h + s * (g - h * tau);
                    m[r * n + p] = rp;
                    m[p * n + r] = rp;
                    m[r * n + q] = rq;
                    m[q * n + r] = rq;
                }
            }
        }
    }
    let residual_bound = off_norm(&m) + T::epsilon() * norm * T::of_usize(n);
    let mut eigenvalues: Vec<T> = (0..n).map(|i| m[i * n + i]).collect();
    eigenvalues.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
    Ok(SpectrumResult { eigenvalues, residual_bound })
}

/// Eigenvalues of a band matrix: bisection when tridiagonal, Jacobi otherwise.
pub fn eigenvalues_band<T: Scalar>(h: &BandedSymmetricMatrix<T>) -> Result<SpectrumResult<T>, OracleError> {
    if h.occupied_bandwidth() <= 1 {
        let off = if h.bandwidth() >= 1 { h.band(1).to_vec() } else { vec![T::zero(); h.dim() - 1] };
        eigenvalues_tridiag(h.diagonal(), &off)
    } else {
        eigenvalues_dense(&h.to_dense())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn tridiag_examples() {
        let r = eigenvalues_tridiag(&[1.0, 2.0, 3.0], &[0.0, 0.0]).unwrap();
        assert!(close(&r.eigenvalues, &[1.0, 2.0, 3.0], 1e-11));
        let r = eigenvalues_tridiag(&[0.0, 0.0], &[1.0]).unwrap();
        assert!(close(&r.eigenvalues, &[-1.0, 1.0], 1e-11));
        let s3 = 3f64.sqrt();
        let r = eigenvalues_tridiag(&[1.0, 2.0, 3.0], &[1.0, 1.0]).unwrap();
        assert!(close(&r.eigenvalues, &[2.0 - s3, 2.0, 2.0 + s3], 1e-11));
    }

    #[test]
    fn tridiag_multiplicity() {
        let r = eigenvalues_tridiag(&[2.0, 2.0, 2.0, -1.0], &[0.0, 0.0, 0.0]).unwrap();
        assert!(close(&r.eigenvalues, &[-1.0, 2.0, 2.0, 2.0], 1e-11));
    }

    #[test]
    fn tridiag_rejections() {
        assert_eq!(eigenvalues_tridiag::<f64>(&[], &[]), Err(OracleError::Empty));
        assert!(matches!(
            eigenvalues_tridiag(&[1.0, 2.0], &[1.0, 1.0]),
            Err(OracleError::LengthMismatch { .. })
        ));
        assert_eq!(eigenvalues_tridiag(&[1.0, f64::NAN], &[1.0]), Err(OracleError::NonFinite));
    }

    #[test]
    fn sturm_counts() {
        let (d, e) = ([1.0, 2.0, 3.0], [1.0, 1.0]);
        assert_eq!(sturm_count(&d, &e, -10.0), 0);
        assert_eq!(sturm_count(&d, &e, 1.0), 1);
        assert_eq!(sturm_count(&d, &e, 2.5), 2);
        assert_eq!(sturm_count(&d, &e, 10.0), 3);
    }

    #[test]
    fn dense_examples() {
        let r = eigenvalues_dense(&DenseMatrix::<f64>::identity(4)).unwrap();
        assert_eq!(r.eigenvalues, vec![1.0; 4]);
        let x = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(close(&eigenvalues_dense(&x).unwrap().eigenvalues, &[-1.0, 1.0], 1e-13));
        let bad = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![1.1, 0.0]]).unwrap();
        assert!(matches!(eigenvalues_dense(&bad), Err(OracleError::Asymmetric { .. })));
    }

    #[test]
    fn band_dispatch() {
        let h = BandedSymmetricMatrix::from_entries(
            3,
            2,
            [((0, 0), 1.0), ((1, 1), 2.0), ((2, 2), 3.0), ((0, 1), 1.0), ((1, 2), 1.0), ((0, 2), 0.5)],
        )
        .unwrap();
        let dense = eigenvalues_dense(&h.to_dense()).unwrap();
        assert_eq!(eigenvalues_band(&h).unwrap(), dense);
        let d = BandedSymmetricMatrix::from_diagonal(&[3.0, 1.0]).unwrap();
        assert!(close(&eigenvalues_band(&d).unwrap().eigenvalues, &[1.0, 3.0], 1e-11));
    }
}
