use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Matrix, RngStream};

/// Feature matrix with optional binary labels (1 = outlier).
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    x: Matrix<T>,
    labels: Option<Vec<u8>>,
    name: String,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(x: Matrix<T>, labels: Option<Vec<u8>>, name: impl Into<String>) -> Result<Self> {
        if x.cols() == 0 {
            return Err(Error::invalid("dataset needs at least one feature"));
        }
        if x.rows() == 0 {
            return Err(Error::invalid("dataset has no rows"));
        }
        if let Some(l) = &labels {
            if l.len() != x.rows() {
                return Err(Error::invalid(format!(
                    "{} labels for {} rows",
                    l.len(),
                    x.rows()
                )));
            }
            if let Some(bad) = l.iter().find(|&&v| v > 1) {
                return Err(Error::invalid(format!("label {bad} is not 0 or 1")));
            }
        }
        Ok(Self {
            x,
            labels,
            name: name.into(),
        })
    }

    pub fn unlabeled(x: Matrix<T>, name: impl Into<String>) -> Result<Self> {
        Self::new(x, None, name)
    }

    #[inline]
    pub fn x(&self) -> &Matrix<T> {
        &self.x
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    /// Labels, or `InvalidInput` when the dataset is unlabeled.
    pub fn require_labels(&self) -> Result<&[u8]> {
        self.labels()
            .ok_or_else(|| Error::invalid(format!("dataset '{}' has no labels", self.name)))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn n_samples(&self) -> usize {
        self.x.rows()
    }

    pub fn n_features(&self) -> usize {
        self.x.cols()
    }

    pub fn n_outliers(&self) -> Option<usize> {
        self.labels
            .as_ref()
            .map(|l| l.iter().filter(|&&v| v == 1).count())
    }

    /// Rescales every column to mean 0 and population standard deviation 1.
    /// Constant columns become all zeros.
    pub fn standardize(&self) -> Result<Self> {
        if self.n_samples() < 2 {
            return Err(Error::invalid("standardize needs at least two rows"));
        }
        let (means, stds) = self.x.col_stats()?;
        let mut x = self.x.clone();
        let cols = x.cols();
        for r in 0..x.rows() {
            let row = x.row_mut(r);
            for c in 0..cols {
                row[c] = if stds[c] > T::zero() {
                    (row[c] - means[c]) / stds[c]
                } else {
                    T::zero()
                };
            }
        }
        Ok(Self {
            x,
            labels: self.labels.clone(),
            name: self.name.clone(),
        })
    }

    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let x = self.x.select_rows(indices)?;
        let labels = self
            .labels
            .as_ref()
            .map(|l| indices.iter().map(|&i| l[i]).collect());
        Ok(Self {
            x,
            labels,
            name: self.name.clone(),
        })
    }

    /// Uniform sample of `m` distinct rows.
    pub fn sample_rows(&self, m: usize, rng: &mut RngStream) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("sample size must be at least 1"));
        }
        let idx = rng.sample_indices(self.n_samples(), m)?;
        self.select_rows(&idx)
    }

    /// Drops every row labelled 1. Used to strip original outliers before
    /// re-injection.
    pub fn drop_outliers(&self) -> Result<Self> {
        let labels = self.require_labels()?;
        let keep: Vec<usize> = (0..self.n_samples()).filter(|&i| labels[i] == 0).collect();
        let mut out = self.select_rows(&keep)?;
        out.labels = None;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(values: &[f64]) -> Dataset<f64> {
        Dataset::unlabeled(Matrix::column_vector(values), "c").unwrap()
    }

    #[test]
    fn standardize_hand_case() {
        let s = column(&[1.0, 2.0, 3.0]).standardize().unwrap();
        let expected = [-1.224_744_871_391_589, 0.0, 1.224_744_871_391_589];
        for (a, b) in s.x().data().iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_column_maps_to_zero() {
        let s = column(&[5.0, 5.0, 5.0]).standardize().unwrap();
        assert_eq!(s.x().data(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn standardize_is_idempotent() {
        let mut rng = RngStream::new(5);
        let data: Vec<f64> = (0..60).map(|_| rng.uniform_range(-10.0, 30.0)).collect();
        let ds = Dataset::new(
            Matrix::new(20, 3, data).unwrap(),
            Some(vec![0; 20]),
            "r",
        )
        .unwrap();
        let once = ds.standardize().unwrap();
        let twice = once.standardize().unwrap();
        assert!(once.x().max_abs_diff(twice.x()).unwrap() < 1e-12);
        assert_eq!(twice.labels(), ds.labels());
    }

    #[test]
    fn standardize_rejects_single_row() {
        assert!(column(&[1.0]).standardize().is_err());
    }

    #[test]
    fn label_validation() {
        let x = Matrix::<f64>::zeros(3, 1);
        assert!(Dataset::new(x.clone(), Some(vec![0, 1]), "a").is_err());
        assert!(Dataset::new(x.clone(), Some(vec![0, 1, 2]), "a").is_err());
        assert!(Dataset::new(x, Some(vec![0, 1, 1]), "a").is_ok());
    }

    #[test]
    fn sample_rows_full_is_permutation() {
        let ds = column(&[0.0, 1.0, 2.0, 3.0, 4.0]);
        let s = ds.sample_rows(5, &mut RngStream::new(1)).unwrap();
        let mut v = s.x().data().to_vec();
        v.sort_by(f64::total_cmp);
        assert_eq!(v, ds.x().data());
    }

    #[test]
    fn sample_rows_single() {
        let ds = column(&[7.0]);
        let s = ds.sample_rows(1, &mut RngStream::new(1)).unwrap();
        assert_eq!(s.x().data(), &[7.0]);
    }

    #[test]
    fn sample_rows_deterministic() {
        let ds = column(&(0..100).map(f64::from).collect::<Vec<_>>());
        let a = ds.sample_rows(5, &mut RngStream::new(99)).unwrap();
        let b = ds.sample_rows(5, &mut RngStream::new(99)).unwrap();
        assert_eq!(a, b);
        assert!(ds.sample_rows(101, &mut RngStream::new(1)).is_err());
    }

    #[test]
    fn sample_rows_uniform_chi_square() {
        // single-row draws with counter seeds cover indices uniformly
        let n = 10;
        let ds = column(&(0..n).map(|i| i as f64).collect::<Vec<_>>());
        let draws = 100_000;
        let mut counts = vec![0usize; n];
        for i in 0..draws {
            let s = ds.sample_rows(1, &mut RngStream::new(i as u64)).unwrap();
            counts[s.x().get(0, 0) as usize] += 1;
        }
        let expected = draws as f64 / n as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 9 degrees of freedom, upper 0.001 quantile
        assert!(chi2 < 27.877, "chi2 = {chi2}");
    }

    #[test]
    fn drop_outliers_keeps_inliers() {
        let ds = Dataset::new(
            Matrix::column_vector(&[1.0, 2.0, 3.0]),
            Some(vec![0, 1, 0]),
            "d",
        )
        .unwrap();
        let clean = ds.drop_outliers().unwrap();
        assert_eq!(clean.x().data(), &[1.0, 3.0]);
        assert!(clean.labels().is_none());
    }
}
