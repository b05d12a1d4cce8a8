use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Matrix;

/// Lower-triangular Cholesky factor `L` with `A = L·Lᵀ`.
pub fn cholesky<T: Scalar>(a: &Matrix<T>) -> Result<Matrix<T>> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::shape(format!("cholesky of non-square {:?}", a.shape())));
    }
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut diag = a.get(j, j);
        for k in 0..j {
            diag -= l.get(j, k) * l.get(j, k);
        }
        if !(diag > T::zero()) {
            return Err(Error::numerical("matrix is not positive definite"));
        }
        let ljj = diag.sqrt();
        l.set(j, j, ljj);
        for i in (j + 1)..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / ljj);
        }
    }
    Ok(l)
}

/// Solves `L·y = b` for lower-triangular `L`.
pub fn forward_substitute<T: Scalar>(l: &Matrix<T>, b: &[T]) -> Vec<T> {
    let n = l.rows();
    let mut y = vec![T::zero(); n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l.get(i, k) * y[k];
        }
        y[i] = s / l.get(i, i);
    }
    y
}

/// `ln det A` from its Cholesky factor.
pub fn log_det_from_cholesky<T: Scalar>(l: &Matrix<T>) -> T {
    let two = T::of(2.0);
    (0..l.rows()).map(|i| two * l.get(i, i).ln()).sum()
}

/// `L·z`, for turning standard-normal draws into correlated ones.
pub fn lower_mul<T: Scalar>(l: &Matrix<T>, z: &[T]) -> Vec<T> {
    (0..l.rows())
        .map(|i| (0..=i).map(|k| l.get(i, k) * z[k]).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_reconstructs() {
        let a = Matrix::from_rows(&[[4.0, 2.0, 0.4], [2.0, 3.0, 0.5], [0.4, 0.5, 2.0]]).unwrap();
        let l = cholesky(&a).unwrap();
        let back = l.matmul_t(&l).unwrap();
        assert!(back.max_abs_diff(&a).unwrap() < 1e-12);
        let det: f64 = 4.0 * (3.0 * 2.0 - 0.25) - 2.0 * (2.0 * 2.0 - 0.2) + 0.4 * (1.0 - 1.2);
        assert!((log_det_from_cholesky(&l) - det.ln()).abs() < 1e-12);
    }

    #[test]
    fn solves_triangular() {
        let l = Matrix::from_rows(&[[2.0, 0.0], [1.0, 3.0]]).unwrap();
        let y = forward_substitute(&l, &[4.0, 11.0]);
        assert_eq!(y, vec![2.0, 3.0]);
        assert_eq!(lower_mul(&l, &y), vec![4.0, 11.0]);
    }

    #[test]
    fn rejects_indefinite() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]).unwrap();
        assert!(cholesky(&a).is_err());
    }
}
