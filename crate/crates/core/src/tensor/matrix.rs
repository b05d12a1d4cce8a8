use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(format!(
                "buffer of length {} cannot hold a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("matrix contains non-finite entries"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, T::zero())
    }

    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::shape(format!(
                    "row {i} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn column_vector(values: &[T]) -> Self {
        Self {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: T) {
        self.data[r * self.cols + c] = value;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[T]> {
        // chunks_exact panics on zero; an empty-column matrix has no useful rows
        self.data.chunks_exact(self.cols.max(1))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    fn check_same_shape(&self, other: &Self, op: &str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::shape(format!(
                "{op}: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(())
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::shape(format!(
                "matmul: {:?} · {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let (n, k, m) = (self.rows, self.cols, other.cols);
        let mut out = vec![T::zero(); n * m];
        for i in 0..n {
            let a_row = &self.data[i * k..(i + 1) * k];
            let o_row = &mut out[i * m..(i + 1) * m];
            for (p, &a) in a_row.iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                let b_row = &other.data[p * m..(p + 1) * m];
                for (o, &b) in o_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(Self {
            rows: n,
            cols: m,
            data: out,
        })
    }

    /// `selfᵀ · other` without materializing the transpose.
    pub fn t_matmul(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows {
            return Err(Error::shape(format!(
                "t_matmul: {:?}ᵀ · {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let (k, n, m) = (self.rows, self.cols, other.cols);
        let mut out = vec![T::zero(); n * m];
        for p in 0..k {
            let a_row = &self.data[p * n..(p + 1) * n];
            let b_row = &other.data[p * m..(p + 1) * m];
            for (i, &a) in a_row.iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                let o_row = &mut out[i * m..(i + 1) * m];
                for (o, &b) in o_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(Self {
            rows: n,
            cols: m,
            data: out,
        })
    }

    /// `self · otherᵀ` without materializing the transpose.
    pub fn matmul_t(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return Err(Error::shape(format!(
                "matmul_t: {:?} · {:?}ᵀ",
                self.shape(),
                other.shape()
            )));
        }
        let (n, k, m) = (self.rows, self.cols, other.rows);
        let mut out = Vec::with_capacity(n * m);
        for i in 0..n {
            let a_row = &self.data[i * k..(i + 1) * k];
            for j in 0..m {
                let b_row = &other.data[j * k..(j + 1) * k];
                out.push(a_row.iter().zip(b_row).map(|(&a, &b)| a * b).sum());
            }
        }
        Ok(Self {
            rows: n,
            cols: m,
            data: out,
        })
    }

    pub fn transpose(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                data.push(self.data[r * self.cols + c]);
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "hadamard", |a, b| a * b)
    }

    fn zip_with(&self, other: &Self, op: &str, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.check_same_shape(other, op)?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn scale(&self, factor: T) -> Self {
        self.map(|v| v * factor)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Adds `row` to every row (bias broadcast).
    pub fn add_row_broadcast(&mut self, row: &[T]) -> Result<()> {
        if row.len() != self.cols {
            return Err(Error::shape(format!(
                "broadcast row of length {} onto {} columns",
                row.len(),
                self.cols
            )));
        }
        for r in self.data.chunks_exact_mut(self.cols.max(1)) {
            for (v, &b) in r.iter_mut().zip(row) {
                *v += b;
            }
        }
        Ok(())
    }

    /// Mean of each row.
    pub fn row_means(&self) -> Vec<T> {
        let c = T::of_usize(self.cols.max(1));
        self.iter_rows()
            .map(|r| r.iter().copied().sum::<T>() / c)
            .take(self.rows)
            .collect()
    }

    /// Sum of each column.
    pub fn col_sums(&self) -> Vec<T> {
        let mut sums = vec![T::zero(); self.cols];
        for r in self.iter_rows().take(self.rows) {
            for (s, &v) in sums.iter_mut().zip(r) {
                *s += v;
            }
        }
        sums
    }

    /// Per-column mean and population standard deviation.
    pub fn col_stats(&self) -> Result<(Vec<T>, Vec<T>)> {
        if self.rows == 0 {
            return Err(Error::invalid("column statistics of an empty matrix"));
        }
        let n = T::of_usize(self.rows);
        let means: Vec<T> = self.col_sums().into_iter().map(|s| s / n).collect();
        let mut var = vec![T::zero(); self.cols];
        for r in self.iter_rows().take(self.rows) {
            for ((acc, &v), &m) in var.iter_mut().zip(r).zip(&means) {
                let d = v - m;
                *acc += d * d;
            }
        }
        let stds = var.into_iter().map(|v| (v / n).sqrt()).collect();
        Ok((means, stds))
    }

    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            if i >= self.rows {
                return Err(Error::invalid(format!(
                    "row index {i} out of range for {} rows",
                    self.rows
                )));
            }
            data.extend_from_slice(self.row(i));
        }
        Ok(Self {
            rows: indices.len(),
            cols: self.cols,
            data,
        })
    }

    /// Stacks `other` beneath `self`.
    pub fn vstack(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return Err(Error::shape(format!(
                "vstack: {} vs {} columns",
                self.cols, other.cols
            )));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Self {
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<T> {
        self.check_same_shape(other, "max_abs_diff")?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max))
    }

    pub fn cast<U: Scalar>(&self) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::RngStream;

    fn naive_matmul(a: &Matrix<f64>, b: &Matrix<f64>) -> Matrix<f64> {
        let mut out = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut s = 0.0;
                for p in 0..a.cols() {
                    s += a.get(i, p) * b.get(p, j);
                }
                out.set(i, j, s);
            }
        }
        out
    }

    fn random(rows: usize, cols: usize, rng: &mut RngStream) -> Matrix<f64> {
        let data = (0..rows * cols).map(|_| rng.uniform_range(-2.0, 2.0)).collect();
        Matrix::new(rows, cols, data).unwrap()
    }

    #[test]
    fn identity_is_neutral() {
        let a = Matrix::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [7.0, 8.0, 9.5]]).unwrap();
        assert_eq!(Matrix::identity(3).matmul(&a).unwrap(), a);
    }

    #[test]
    fn transpose_is_involution() {
        let a = Matrix::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap();
        assert_eq!(a.transpose().transpose(), a);
        assert_eq!(a.transpose().shape(), (3, 2));
    }

    #[test]
    fn hand_two_by_two() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[[1.0], [1.0]]).unwrap();
        assert_eq!(a.matmul(&b).unwrap().data(), &[3.0, 7.0]);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let a = Matrix::<f64>::zeros(2, 3);
        let b = Matrix::<f64>::zeros(2, 3);
        assert!(matches!(a.matmul(&b), Err(Error::Shape(_))));
        assert!(matches!(a.add(&b.transpose()), Err(Error::Shape(_))));
        assert!(matches!(Matrix::<f64>::new(2, 2, vec![0.0; 3]), Err(Error::Shape(_))));
    }

    #[test]
    fn kernels_match_triple_loop() {
        let mut rng = RngStream::new(11);
        for _ in 0..20 {
            let a = random(8, 8, &mut rng);
            let b = random(8, 8, &mut rng);
            let oracle = naive_matmul(&a, &b);
            assert!(a.matmul(&b).unwrap().max_abs_diff(&oracle).unwrap() < 1e-12);
            let tn = naive_matmul(&a.transpose(), &b);
            assert!(a.t_matmul(&b).unwrap().max_abs_diff(&tn).unwrap() < 1e-12);
            let nt = naive_matmul(&a, &b.transpose());
            assert!(a.matmul_t(&b).unwrap().max_abs_diff(&nt).unwrap() < 1e-12);

            let sum = a.add(&b).unwrap();
            let had = a.hadamard(&b).unwrap();
            for i in 0..8 {
                for j in 0..8 {
                    assert_eq!(sum.get(i, j), a.get(i, j) + b.get(i, j));
                    assert_eq!(had.get(i, j), a.get(i, j) * b.get(i, j));
                }
            }
        }
    }

    #[test]
    fn col_stats_population() {
        let a = Matrix::from_rows(&[[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]]).unwrap();
        let (m, s) = a.col_stats().unwrap();
        assert_eq!(m, vec![2.0, 5.0]);
        assert!((s[0] - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(s[1], 0.0);
        assert_eq!(a.row_means(), vec![3.0, 3.5, 4.0]);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(Matrix::new(1, 2, vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let a = Matrix::<f32>::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let b = Matrix::<f32>::from_rows(&[[1.0], [1.0]]).unwrap();
        assert_eq!(a.matmul(&b).unwrap().data(), &[3.0f32, 7.0]);
    }
}
