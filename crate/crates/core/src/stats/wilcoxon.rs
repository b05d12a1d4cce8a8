use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::stats::midranks;

/// Largest number of nonzero differences for which the exact null
/// distribution is used.
pub const EXACT_LIMIT: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    /// Sum of the ranks of positive differences (`W⁺`).
    pub statistic: f64,
    /// `P(W⁺ ≥ observed)` under the symmetric null.
    pub p_value: f64,
    pub n_effective: usize,
    pub exact: bool,
}

/// Paired Wilcoxon signed-rank test of `a − b` with alternative "`a` tends to
/// be larger".
///
/// Zero differences are dropped and tied `|d|` share midranks. Up to
/// [`EXACT_LIMIT`] nonzero differences the p-value is exact, computed from the
/// distribution of `W⁺` over all `2ⁿ` sign assignments of the (tied) ranks.
/// Beyond that a normal approximation with tie and continuity corrections is
/// used.
pub fn wilcoxon_one_sided<T: Scalar>(a: &[T], b: &[T]) -> Result<TestReport> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "paired samples of lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| (x - y).as_f64())
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::numerical("non-finite paired difference"));
    }
    let n = diffs.len();
    if n == 0 {
        return Err(Error::invalid("all paired differences are zero"));
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = midranks(&abs);
    let w_plus: f64 = ranks
        .iter()
        .zip(&diffs)
        .filter(|(_, d)| **d > 0.0)
        .map(|(r, _)| r)
        .sum();

    if n <= EXACT_LIMIT {
        // midranks are multiples of ½, so doubled ranks are integers
        let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
        let total: usize = doubled.iter().sum();
        let mut counts = vec![0.0f64; total + 1];
        counts[0] = 1.0;
        let mut reach = 0;
        for &r in &doubled {
            for s in (0..=reach).rev() {
                if counts[s] > 0.0 {
                    counts[s + r] += counts[s];
                }
            }
            reach += r;
        }
        let observed = (w_plus * 2.0).round() as usize;
        let tail: f64 = counts[observed..].iter().sum();
        let p = tail / 2f64.powi(n as i32);
        return Ok(TestReport {
            statistic: w_plus,
            p_value: p.min(1.0),
            n_effective: n,
            exact: true,
        });
    }

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let mut tie_term = 0.0;
    let mut sorted = abs.clone();
    sorted.sort_by(f64::total_cmp);
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let z = (w_plus - mean - 0.5) / var.sqrt();
    let p = 0.5 * libm::erfc(z / std::f64::consts::SQRT_2);
    Ok(TestReport {
        statistic: w_plus,
        p_value: p.clamp(f64::MIN_POSITIVE, 1.0),
        n_effective: n,
        exact: false,
    })
}
