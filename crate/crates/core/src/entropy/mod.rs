//! Loss entropy: how flat the per-sample loss distribution is.
//!
//! Per-sample losses on a fixed evaluation set are normalized into a
//! probability vector `p_i = J_i / Σ J` and summarized by the Shannon entropy
//! `H = −Σ p_i ln p_i`. When the model fits inliers faster than outliers the
//! few outlier losses dominate and `H` falls; when the outliers catch up `H`
//! rises again.

mod diagnostics;
mod trace;

pub use diagnostics::{gradient_effect, loss_split_diagnostic, GradientEffect, LossSplit};
pub use trace::{write_trace_csv, write_trace_csv_to, EntropyTrace, TraceRecord};

use crate::error::{Error, Result};
use crate::models::OdModel;
use crate::scalar::Scalar;
use crate::tensor::{Dataset, Matrix, RngStream};

/// Evaluation-set size used unless configured otherwise (capped at `n`).
pub const DEFAULT_N_EVAL: usize = 1024;

/// Probability vector over the evaluation set.
#[derive(Clone, Debug, PartialEq)]
pub struct LossDistribution<T>(Vec<T>);

impl<T: Scalar> LossDistribution<T> {
    /// Wraps an already-normalized vector. Entries must be nonnegative and
    /// sum to one within `1e-9`.
    pub fn from_probabilities(p: Vec<T>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::invalid("empty distribution"));
        }
        if p.iter().any(|&v| !(v >= T::zero())) {
            return Err(Error::invalid("probabilities must be nonnegative"));
        }
        let total: T = p.iter().copied().sum();
        if (total - T::one()).abs() > T::of(1e-9) {
            return Err(Error::invalid(format!("probabilities sum to {total}")));
        }
        Ok(Self(p))
    }

    pub fn probabilities(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn entropy(&self) -> T {
        loss_entropy(self)
    }
}

/// `p_i = losses_i / Σ losses`; all-zero losses give the uniform distribution.
pub fn normalize_losses<T: Scalar>(losses: &[T]) -> Result<LossDistribution<T>> {
    if losses.is_empty() {
        return Err(Error::invalid("cannot normalize an empty loss vector"));
    }
    if losses.iter().any(|l| !l.is_finite()) {
        return Err(Error::numerical("non-finite loss"));
    }
    if losses.iter().any(|&l| l < T::zero()) {
        return Err(Error::invalid("losses must be nonnegative"));
    }
    let total: T = losses.iter().copied().sum();
    let p = if total > T::zero() {
        losses.iter().map(|&l| l / total).collect()
    } else {
        vec![T::one() / T::of_usize(losses.len()); losses.len()]
    };
    Ok(LossDistribution(p))
}

/// Shannon entropy in nats, with `0 · ln 0 = 0`. Lies in `[0, ln N]`.
pub fn loss_entropy<T: Scalar>(dist: &LossDistribution<T>) -> T {
    let h = -dist
        .0
        .iter()
        .filter(|&&p| p > T::zero())
        .map(|&p| p * p.ln())
        .sum::<T>();
    // -0.0 for a one-hot vector
    h.max(T::zero())
}

/// Fixed evaluation rows, drawn once before training.
#[derive(Clone, Debug)]
pub struct EvalSet<T> {
    data: Matrix<T>,
    indices: Vec<usize>,
    seed: u64,
}

impl<T: Scalar> EvalSet<T> {
    /// Samples `min(n_eval, n)` distinct rows with a stream seeded by `seed`.
    pub fn sample(ds: &Dataset<T>, n_eval: usize, seed: u64) -> Result<Self> {
        if n_eval == 0 {
            return Err(Error::invalid("evaluation set size must be at least 1"));
        }
        let m = n_eval.min(ds.n_samples());
        let mut rng = RngStream::new(seed);
        let mut indices = rng.sample_indices(ds.n_samples(), m)?;
        // sorted so the row order is independent of the sampling algorithm
        indices.sort_unstable();
        Ok(Self {
            data: ds.x().select_rows(&indices)?,
            indices,
            seed,
        })
    }

    /// Every row of `ds`, in order.
    pub fn full(ds: &Dataset<T>) -> Self {
        Self {
            data: ds.x().clone(),
            indices: (0..ds.n_samples()).collect(),
            seed: 0,
        }
    }

    pub fn data(&self) -> &Matrix<T> {
        &self.data
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Entropy of the eval-mode loss distribution over `eval_set`.
pub fn eval_entropy<T: Scalar, M: OdModel<T> + ?Sized>(model: &M, eval_set: &EvalSet<T>) -> Result<T> {
    let losses = model.score(eval_set.data())?;
    Ok(loss_entropy(&normalize_losses(&losses)?))
}
