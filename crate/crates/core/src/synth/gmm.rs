use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::linalg::{cholesky, forward_substitute, log_det_from_cholesky, lower_mul};
use crate::tensor::{Matrix, RngStream};

/// Gaussian mixture with full covariances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmmModel<T> {
    pub weights: Vec<T>,
    pub means: Vec<Vec<T>>,
    pub covariances: Vec<Matrix<T>>,
}

impl<T: Scalar> GmmModel<T> {
    pub fn new(weights: Vec<T>, means: Vec<Vec<T>>, covariances: Vec<Matrix<T>>) -> Result<Self> {
        let m = Self {
            weights,
            means,
            covariances,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.weights.len();
        if k == 0 || self.means.len() != k || self.covariances.len() != k {
            return Err(Error::invalid("mixture needs matching weights, means and covariances"));
        }
        let total: T = self.weights.iter().copied().sum();
        if self.weights.iter().any(|&w| !(w >= T::zero())) || (total - T::one()).abs() > T::of(1e-9) {
            return Err(Error::invalid("mixture weights must be nonnegative and sum to 1"));
        }
        let d = self.dim();
        for (mu, cov) in self.means.iter().zip(&self.covariances) {
            if mu.len() != d || cov.shape() != (d, d) {
                return Err(Error::shape("component dimensions disagree"));
            }
            cholesky(cov).map_err(|_| Error::invalid("covariance is not positive definite"))?;
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    /// Draws `n` samples; also returns each sample's component.
    pub fn sample(&self, n: usize, rng: &mut RngStream) -> Result<(Matrix<T>, Vec<usize>)> {
        let factors = self
            .covariances
            .iter()
            .map(cholesky)
            .collect::<Result<Vec<_>>>()?;
        let d = self.dim();
        let mut data = Vec::with_capacity(n * d);
        let mut comps = Vec::with_capacity(n);
        for _ in 0..n {
            let c = self.pick_component(rng.uniform());
            let z: Vec<T> = (0..d).map(|_| T::of(rng.normal())).collect();
            let offset = lower_mul(&factors[c], &z);
            data.extend(self.means[c].iter().zip(offset).map(|(&m, o)| m + o));
            comps.push(c);
        }
        Ok((Matrix::new(n, d, data)?, comps))
    }

    fn pick_component(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w.as_f64();
            if u < acc {
                return i;
            }
        }
        self.weights.len() - 1
    }

    /// Every covariance multiplied by `alpha`.
    pub fn with_scaled_covariances(&self, alpha: T) -> Self {
        Self {
            covariances: self.covariances.iter().map(|c| c.scale(alpha)).collect(),
            ..self.clone()
        }
    }

    /// Every mean multiplied by `alpha`.
    pub fn with_scaled_means(&self, alpha: T) -> Self {
        Self {
            means: self
                .means
                .iter()
                .map(|m| m.iter().map(|&v| v * alpha).collect())
                .collect(),
            ..self.clone()
        }
    }

    /// Mean per-sample log-likelihood of `x`.
    pub fn mean_log_likelihood(&self, x: &Matrix<T>) -> Result<T> {
        let comps = ComponentDensities::new(self)?;
        let mut total = T::zero();
        let mut buf = vec![T::zero(); self.n_components()];
        for row in x.iter_rows().take(x.rows()) {
            comps.log_joint(row, &mut buf);
            total += log_sum_exp(&buf);
        }
        Ok(total / T::of_usize(x.rows().max(1)))
    }
}

struct ComponentDensities<'a, T> {
    model: &'a GmmModel<T>,
    factors: Vec<Matrix<T>>,
    log_norm: Vec<T>,
}

impl<'a, T: Scalar> ComponentDensities<'a, T> {
    fn new(model: &'a GmmModel<T>) -> Result<Self> {
        let d = T::of_usize(model.dim());
        let ln_2pi = T::of((2.0 * std::f64::consts::PI).ln());
        let factors = model
            .covariances
            .iter()
            .map(cholesky)
            .collect::<Result<Vec<_>>>()?;
        let log_norm = factors
            .iter()
            .zip(&model.weights)
            .map(|(l, &w)| w.ln() - T::of(0.5) * (d * ln_2pi + log_det_from_cholesky(l)))
            .collect();
        Ok(Self {
            model,
            factors,
            log_norm,
        })
    }

    /// `ln π_k + ln N(x | μ_k, Σ_k)` for every component.
    fn log_joint(&self, x: &[T], out: &mut [T]) {
        for (k, slot) in out.iter_mut().enumerate() {
            let diff: Vec<T> = x.iter().zip(&self.model.means[k]).map(|(&a, &b)| a - b).collect();
            let y = forward_substitute(&self.factors[k], &diff);
            let maha: T = y.iter().map(|&v| v * v).sum();
            *slot = self.log_norm[k] - T::of(0.5) * maha;
        }
    }
}

fn log_sum_exp<T: Scalar>(v: &[T]) -> T {
    let m = v.iter().copied().fold(T::neg_infinity(), T::max);
    if m == T::neg_infinity() {
        return m;
    }
    m + v.iter().map(|&x| (x - m).exp()).sum::<T>().ln()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmmFitConfig {
    pub max_iter: usize,
    /// Stop when the mean log-likelihood improves by less than this.
    pub tol: f64,
    /// Added to every covariance diagonal.
    pub jitter: f64,
    pub max_restarts: usize,
}

impl Default for GmmFitConfig {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol: 1e-6,
            jitter: 1e-6,
            max_restarts: 5,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GmmFit<T> {
    pub model: GmmModel<T>,
    /// Mean log-likelihood after each EM iteration.
    pub log_likelihood: Vec<T>,
    pub restarts: usize,
}

/// EM fit with default settings.
pub fn gmm_fit<T: Scalar>(x: &Matrix<T>, k: usize, rng: &mut RngStream) -> Result<GmmModel<T>> {
    Ok(gmm_fit_with(x, k, &GmmFitConfig::default(), rng)?.model)
}

/// Expectation-maximization with k-means++ seeding.
///
/// A component whose total responsibility drops below `d + 1` triggers a
/// fresh seeding, up to `max_restarts` times.
pub fn gmm_fit_with<T: Scalar>(x: &Matrix<T>, k: usize, cfg: &GmmFitConfig, rng: &mut RngStream) -> Result<GmmFit<T>> {
    let (n, d) = x.shape();
    if k == 0 {
        return Err(Error::invalid("mixture needs at least one component"));
    }
    if n <= k * (d + 1) {
        return Err(Error::invalid(format!(
            "{n} samples are too few for {k} components in {d} dimensions"
        )));
    }
    let mut last_reason = String::new();
    for attempt in 0..=cfg.max_restarts {
        match em_attempt(x, k, cfg, rng) {
            Ok((model, log_likelihood)) => {
                return Ok(GmmFit {
                    model,
                    log_likelihood,
                    restarts: attempt,
                })
            }
            Err(Error::DegenerateFit(reason)) => last_reason = reason,
            Err(other) => return Err(other),
        }
    }
    Err(Error::DegenerateFit(format!(
        "{} restarts exhausted: {last_reason}",
        cfg.max_restarts
    )))
}

fn em_attempt<T: Scalar>(x: &Matrix<T>, k: usize, cfg: &GmmFitConfig, rng: &mut RngStream) -> Result<(GmmModel<T>, Vec<T>)> {
    let (n, d) = x.shape();
    let jitter = T::of(cfg.jitter);
    let (global_mean, _) = x.col_stats()?;
    let global_cov = weighted_covariance(x, &vec![T::one(); n], &global_mean, jitter);

    let mut model = GmmModel {
        weights: vec![T::one() / T::of_usize(k); k],
        means: kmeans_pp_seeds(x, k, rng),
        covariances: vec![global_cov; k],
    };
    let mut resp = vec![T::zero(); n * k];
    let mut history = Vec::new();
    let mut buf = vec![T::zero(); k];
    let floor = T::of_usize(d + 1);

    for _ in 0..cfg.max_iter {
        // E-step
        let dens = ComponentDensities::new(&model).map_err(|_| Error::DegenerateFit("covariance lost definiteness".into()))?;
        let mut ll = T::zero();
        for (i, row) in x.iter_rows().take(n).enumerate() {
            dens.log_joint(row, &mut buf);
            let lse = log_sum_exp(&buf);
            ll += lse;
            for c in 0..k {
                resp[i * k + c] = (buf[c] - lse).exp();
            }
        }
        let ll = ll / T::of_usize(n);
        if !ll.is_finite() {
            return Err(Error::DegenerateFit("non-finite log-likelihood".into()));
        }
        let converged = history
            .last()
            .is_some_and(|&prev: &T| (ll - prev).abs() < T::of(cfg.tol));
        history.push(ll);
        if converged {
            break;
        }

        // M-step
        for c in 0..k {
            let w: Vec<T> = (0..n).map(|i| resp[i * k + c]).collect();
            let nk: T = w.iter().copied().sum();
            if nk < floor {
                return Err(Error::DegenerateFit(format!(
                    "component {c} holds {:.3} samples' worth of responsibility",
                    nk.as_f64()
                )));
            }
            let mut mu = vec![T::zero(); d];
            for (row, &wi) in x.iter_rows().zip(&w) {
                for (m, &v) in mu.iter_mut().zip(row) {
                    *m += wi * v;
                }
            }
            mu.iter_mut().for_each(|m| *m /= nk);
            model.covariances[c] = weighted_covariance(x, &w, &mu, jitter);
            model.means[c] = mu;
            model.weights[c] = nk / T::of_usize(n);
        }
    }
    // final log-likelihood reflects the last M-step
    let final_ll = model.mean_log_likelihood(x)?;
    if history.last() != Some(&final_ll) {
        history.push(final_ll);
    }
    Ok((model, history))
}

/// `Σ w_i (x_i − μ)(x_i − μ)ᵀ / Σ w_i + jitter·I`.
fn weighted_covariance<T: Scalar>(x: &Matrix<T>, w: &[T], mu: &[T], jitter: T) -> Matrix<T> {
    let d = x.cols();
    let total: T = w.iter().copied().sum();
    let mut cov = Matrix::zeros(d, d);
    let mut diff = vec![T::zero(); d];
    for (row, &wi) in x.iter_rows().zip(w) {
        for ((df, &v), &m) in diff.iter_mut().zip(row).zip(mu) {
            *df = v - m;
        }
        for a in 0..d {
            let wa = wi * diff[a];
            for b in a..d {
                let v = cov.get(a, b) + wa * diff[b];
                cov.set(a, b, v);
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            let v = cov.get(a, b) / total;
            cov.set(a, b, v);
            cov.set(b, a, v);
        }
        let v = cov.get(a, a) + jitter;
        cov.set(a, a, v);
    }
    cov
}

fn kmeans_pp_seeds<T: Scalar>(x: &Matrix<T>, k: usize, rng: &mut RngStream) -> Vec<Vec<T>> {
    let n = x.rows();
    let mut seeds = vec![x.row(rng.below(n)).to_vec()];
    let sq = |a: &[T], b: &[T]| a.iter().zip(b).map(|(&p, &q)| (p - q) * (p - q)).sum::<T>();
    let mut dist: Vec<f64> = x.iter_rows().take(n).map(|r| sq(r, &seeds[0]).as_f64()).collect();
    while seeds.len() < k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.uniform() * total;
            let mut acc = 0.0;
            dist.iter()
                .position(|&dd| {
                    acc += dd;
                    acc > target
                })
                .unwrap_or(n - 1)
        } else {
            rng.below(n)
        };
        let c = x.row(pick).to_vec();
        for (dd, r) in dist.iter_mut().zip(x.iter_rows()) {
            *dd = dd.min(sq(r, &c).as_f64());
        }
        seeds.push(c);
    }
    seeds
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_blobs() -> GmmModel<f64> {
        GmmModel::new(
            vec![0.5, 0.5],
            vec![vec![-4.0, 0.0], vec![4.0, 2.0]],
            vec![Matrix::identity(2).scale(0.5), Matrix::identity(2).scale(0.8)],
        )
        .unwrap()
    }

    #[test]
    fn single_component_is_closed_form() {
        let mut rng = RngStream::new(1);
        let truth = two_blobs();
        let (x, _) = truth.sample(400, &mut rng).unwrap();
        let fit = gmm_fit(&x, 1, &mut rng).unwrap();
        let (mean, _) = x.col_stats().unwrap();
        for (a, b) in fit.means[0].iter().zip(&mean) {
            assert!((a - b).abs() < 1e-9);
        }
        let cov = weighted_covariance(&x, &vec![1.0; 400], &mean, 1e-6);
        assert!(fit.covariances[0].max_abs_diff(&cov).unwrap() < 1e-9);
        assert!((fit.weights[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn recovers_separated_blobs() {
        let mut rng = RngStream::new(2);
        let truth = two_blobs();
        let (x, _) = truth.sample(2000, &mut rng).unwrap();
        let fit = gmm_fit(&x, 2, &mut rng).unwrap();
        for true_mu in &truth.means {
            let best = fit
                .means
                .iter()
                .map(|m| m.iter().zip(true_mu).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(f64::MAX, f64::min);
            assert!(best < 0.1, "closest fitted mean is {best} away");
        }
    }

    #[test]
    fn em_log_likelihood_never_decreases() {
        let mut rng = RngStream::new(3);
        let truth = two_blobs();
        let (x, _) = truth.sample(600, &mut rng).unwrap();
        let fit = gmm_fit_with(&x, 3, &GmmFitConfig::default(), &mut rng).unwrap();
        for w in fit.log_likelihood.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "{} then {}", w[0], w[1]);
        }
    }

    #[test]
    fn too_few_samples() {
        let x = Matrix::<f64>::zeros(5, 2);
        assert!(matches!(gmm_fit(&x, 2, &mut RngStream::new(0)), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn collapsed_data_is_degenerate() {
        // all mass on one point: a second component can never hold d+1 samples
        let mut rows = vec![vec![0.0, 0.0]; 40];
        rows.push(vec![50.0, 50.0]);
        let x = Matrix::from_rows(&rows).unwrap();
        let err = gmm_fit(&x, 2, &mut RngStream::new(4)).unwrap_err();
        assert!(matches!(err, Error::DegenerateFit(_)), "{err:?}");
    }

    #[test]
    fn validation_catches_bad_weights() {
        let bad = GmmModel::new(vec![0.7, 0.7], vec![vec![0.0], vec![1.0]], vec![Matrix::identity(1); 2]);
        assert!(bad.is_err());
    }

    #[test]
    fn sampling_matches_moments() {
        let g = GmmModel::<f64>::new(
            vec![1.0],
            vec![vec![1.0, -2.0]],
            vec![Matrix::from_rows(&[[2.0, 0.6], [0.6, 1.0]]).unwrap()],
        )
        .unwrap();
        let (x, _) = g.sample(20_000, &mut RngStream::new(5)).unwrap();
        let (m, s) = x.col_stats().unwrap();
        assert!((m[0] - 1.0).abs() < 0.05 && (m[1] + 2.0).abs() < 0.05);
        assert!((s[0] * s[0] - 2.0).abs() < 0.1 && (s[1] * s[1] - 1.0).abs() < 0.05);
    }
}
