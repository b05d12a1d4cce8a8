//! Label-dependent evaluation: ROC AUC, normalized cross-dataset scores,
//! Pearson correlation and the one-sided paired Wilcoxon signed-rank test.

mod wilcoxon;

pub use wilcoxon::{wilcoxon_one_sided, TestReport, EXACT_LIMIT};

use crate::error::{Error, Result};
use crate::models::OdModel;
use crate::scalar::Scalar;
use crate::stopper::{train, StopMode, TrainConfig};
use crate::tensor::Dataset;

/// Average 1-based ranks with ties sharing their mean rank.
pub fn midranks<T: Scalar>(values: &[T]) -> Vec<T> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let mut ranks = vec![T::zero(); values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i..j hold ranks i+1..=j
        let avg = T::of_usize(i + 1 + j) / T::of(2.0);
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

/// ROC AUC via the Mann–Whitney statistic with midranks for ties.
///
/// `AUC = (R₊ − m(m+1)/2) / (m·(n−m))`, where `R₊` is the rank sum of the
/// `m` positives (label 1).
pub fn auc<T: Scalar>(scores: &[T], labels: &[u8]) -> Result<T> {
    if scores.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::numerical("non-finite score"));
    }
    let m = labels.iter().filter(|&&l| l == 1).count();
    let n = labels.len();
    if m == 0 || m == n {
        return Err(Error::invalid("AUC needs both classes among the labels"));
    }
    let ranks = midranks(scores);
    let r_pos: T = ranks
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l == 1)
        .map(|(&r, _)| r)
        .sum();
    let mf = T::of_usize(m);
    let u = r_pos - mf * (mf + T::one()) / T::of(2.0);
    Ok(u / (mf * T::of_usize(n - m)))
}

/// Per-algorithm mean of dataset-wise AUC divided by the best AUC on that
/// dataset. `table[a][j]` is algorithm `a` on dataset `j`.
pub fn score_auc<T: Scalar>(table: &[Vec<T>]) -> Result<Vec<T>> {
    let Some(first) = table.first() else {
        return Err(Error::invalid("score table has no algorithms"));
    };
    let n_ds = first.len();
    if n_ds == 0 || table.iter().any(|r| r.len() != n_ds) {
        return Err(Error::invalid("every algorithm needs one AUC per dataset"));
    }
    let maxima: Vec<T> = (0..n_ds)
        .map(|j| table.iter().map(|r| r[j]).fold(T::neg_infinity(), T::max))
        .collect();
    if let Some(j) = maxima.iter().position(|&m| !(m > T::zero())) {
        return Err(Error::invalid(format!("dataset column {j} has no positive AUC")));
    }
    let nf = T::of_usize(n_ds);
    Ok(table
        .iter()
        .map(|r| r.iter().zip(&maxima).map(|(&a, &m)| a / m).sum::<T>() / nf)
        .collect())
}

/// Sample Pearson correlation.
pub fn pearson<T: Scalar>(x: &[T], y: &[T]) -> Result<T> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::invalid("pearson needs two equally long series of length >= 2"));
    }
    let n = T::of_usize(x.len());
    let mx = x.iter().copied().sum::<T>() / n;
    let my = y.iter().copied().sum::<T>() / n;
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == T::zero() || syy == T::zero() {
        return Err(Error::invalid("pearson is undefined for a constant series"));
    }
    let r = sxy / (sxx.sqrt() * syy.sqrt());
    Ok(r.max(-T::one()).min(T::one()))
}

/// Full-dataset AUC before training and after every update, i.e. the
/// curve whose maximum defines the label-oracle optimum. Leaves `model` at its
/// best-AUC parameters.
pub fn auc_trace<T: Scalar, M: OdModel<T>>(model: &mut M, ds: &Dataset<T>, config: &TrainConfig<T>) -> Result<Vec<T>> {
    let out = train(model, ds, config, StopMode::Optimal, &mut crate::stopper::NoObserver)?;
    Ok(out.auc_trace.expect("optimal mode records AUC"))
}
