//! Label-dependent views of training: how the loss splits between inliers and
//! outliers, and how strongly the mean gradient serves each group.

use crate::error::{Error, Result};
use crate::models::OdModel;
use crate::scalar::Scalar;
use crate::tensor::{Dataset, RngStream};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossSplit<T> {
    pub inlier: T,
    pub outlier: T,
}

/// Mean eval-mode loss over label-0 rows and over label-1 rows.
pub fn loss_split_diagnostic<T: Scalar, M: OdModel<T> + ?Sized>(model: &M, ds: &Dataset<T>) -> Result<LossSplit<T>> {
    let labels = ds.require_labels()?;
    let losses = model.score(ds.x())?;
    let (inlier, outlier) = class_means(&losses, labels)?;
    Ok(LossSplit { inlier, outlier })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradientEffect<T> {
    pub inlier: T,
    pub outlier: T,
}

/// Per-sample gradient effect `⟨g_i, ḡ⟩ / ‖g_i‖` averaged per class.
///
/// `ḡ` is the mean per-sample gradient over at most `sample_cap` rows drawn
/// with `rng` (all rows when the cap covers the dataset). Samples with a zero
/// gradient contribute an effect of 0.
pub fn gradient_effect<T: Scalar, M: OdModel<T> + ?Sized>(
    model: &M,
    ds: &Dataset<T>,
    sample_cap: usize,
    rng: &mut RngStream,
) -> Result<GradientEffect<T>> {
    let labels = ds.require_labels()?;
    if sample_cap == 0 {
        return Err(Error::invalid("sample cap must be at least 1"));
    }
    let n = ds.n_samples();
    let idx: Vec<usize> = if sample_cap >= n {
        (0..n).collect()
    } else {
        let mut idx = rng.sample_indices(n, sample_cap)?;
        idx.sort_unstable();
        idx
    };
    let x = ds.x().select_rows(&idx)?;
    let grads = model.per_sample_gradients(&x)?;
    let sub_labels: Vec<u8> = idx.iter().map(|&i| labels[i]).collect();
    let effects = gradient_effects(&grads);
    let (inlier, outlier) = class_means(&effects, &sub_labels)?;
    Ok(GradientEffect { inlier, outlier })
}

/// `⟨g_i, ḡ⟩ / ‖g_i‖` for each gradient, with `ḡ` their mean.
pub fn gradient_effects<T: Scalar>(grads: &[Vec<T>]) -> Vec<T> {
    let Some(dim) = grads.first().map(Vec::len) else {
        return Vec::new();
    };
    let n = T::of_usize(grads.len());
    let mut mean = vec![T::zero(); dim];
    for g in grads {
        for (m, &v) in mean.iter_mut().zip(g) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    grads
        .iter()
        .map(|g| {
            let norm = g.iter().map(|&v| v * v).sum::<T>().sqrt();
            if norm > T::zero() {
                g.iter().zip(&mean).map(|(&a, &b)| a * b).sum::<T>() / norm
            } else {
                T::zero()
            }
        })
        .collect()
}

fn class_means<T: Scalar>(values: &[T], labels: &[u8]) -> Result<(T, T)> {
    let mut sums = [T::zero(); 2];
    let mut counts = [0usize; 2];
    for (&v, &l) in values.iter().zip(labels) {
        sums[l as usize] += v;
        counts[l as usize] += 1;
    }
    if counts.contains(&0) {
        return Err(Error::invalid(format!(
            "both classes needed, got {} inliers and {} outliers",
            counts[0], counts[1]
        )));
    }
    Ok((sums[0] / T::of_usize(counts[0]), sums[1] / T::of_usize(counts[1])))
}
