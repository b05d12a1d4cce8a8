use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::synth::GmmModel;
use crate::tensor::{Dataset, Matrix, RngStream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InjectionKind {
    /// Mixture with inflated covariances.
    Local,
    /// Uniform over the stretched per-feature range.
    Global,
    /// Mixture with pushed-out means.
    Cluster,
}

impl InjectionKind {
    pub const ALL: [InjectionKind; 3] = [InjectionKind::Local, InjectionKind::Global, InjectionKind::Cluster];

    pub fn default_alpha(self) -> f64 {
        match self {
            InjectionKind::Local => 5.0,
            InjectionKind::Global => 1.1,
            InjectionKind::Cluster => 5.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            InjectionKind::Local => "local",
            InjectionKind::Global => "global",
            InjectionKind::Cluster => "cluster",
        }
    }

    /// Global outliers need no mixture model.
    pub fn needs_mixture(self) -> bool {
        self != InjectionKind::Global
    }
}

impl fmt::Display for InjectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InjectionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "local" => Ok(InjectionKind::Local),
            "global" => Ok(InjectionKind::Global),
            "cluster" => Ok(InjectionKind::Cluster),
            other => Err(Error::invalid(format!("unknown injection kind {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InjectionConfig {
    pub kind: InjectionKind,
    pub alpha: f64,
    /// Outlier fraction of the final dataset, in `(0, 1)`.
    pub ratio: f64,
    pub seed: u64,
}

impl InjectionConfig {
    pub fn new(kind: InjectionKind, ratio: f64, seed: u64) -> Self {
        Self {
            kind,
            alpha: kind.default_alpha(),
            ratio,
            seed,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(Error::invalid(format!("outlier ratio {} outside (0, 1)", self.ratio)));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::invalid(format!("alpha {} must be positive", self.alpha)));
        }
        Ok(())
    }
}

/// Outliers needed so that they make up `ratio` of the result:
/// `⌈ratio / (1 − ratio) · n_in⌉`.
pub fn outlier_count(n_inliers: usize, ratio: f64) -> Result<usize> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::invalid(format!("outlier ratio {ratio} outside (0, 1)")));
    }
    let exact = ratio / (1.0 - ratio) * n_inliers as f64;
    // 0.1 / 0.9 · 900 evaluates to 100.00000000000001
    Ok((exact - 1e-9).ceil().max(0.0) as usize)
}

/// Appends synthetic outliers to `inliers` and shuffles the rows.
///
/// Local and cluster outliers are drawn from `mixture`, which should have been
/// fitted to the inliers. Inliers get label 0, outliers label 1. Input labels,
/// if any, are ignored.
pub fn inject<T: Scalar>(inliers: &Dataset<T>, mixture: Option<&GmmModel<T>>, cfg: &InjectionConfig) -> Result<Dataset<T>> {
    cfg.validate()?;
    let n_in = inliers.n_samples();
    let n_out = outlier_count(n_in, cfg.ratio)?;
    let mut rng = RngStream::new(cfg.seed);
    let alpha = T::of(cfg.alpha);
    let outliers = match cfg.kind {
        InjectionKind::Global => global_outliers(inliers.x(), alpha, n_out, &mut rng)?,
        kind => {
            let g = mixture.ok_or_else(|| Error::invalid(format!("{kind} injection needs a fitted mixture")))?;
            if g.dim() != inliers.n_features() {
                return Err(Error::shape(format!(
                    "mixture has {} features, data has {}",
                    g.dim(),
                    inliers.n_features()
                )));
            }
            let shifted = if kind == InjectionKind::Local {
                g.with_scaled_covariances(alpha)
            } else {
                if g.means.iter().all(|m| norm(m) < 1e-8) {
                    return Err(Error::DegenerateInjection(
                        "every mixture mean is at the origin, so scaling cannot move it".into(),
                    ));
                }
                g.with_scaled_means(alpha)
            };
            shifted.sample(n_out, &mut rng)?.0
        }
    };
    let x = inliers.x().vstack(&outliers)?;
    let mut labels = vec![0u8; n_in];
    labels.resize(n_in + n_out, 1);
    let mut order: Vec<usize> = (0..n_in + n_out).collect();
    rng.shuffle(&mut order);
    let x = x.select_rows(&order)?;
    let labels = order.iter().map(|&i| labels[i]).collect();
    Dataset::new(x, Some(labels), inliers.name())
}

fn norm<T: Scalar>(v: &[T]) -> f64 {
    v.iter().map(|x| x.as_f64().powi(2)).sum::<f64>().sqrt()
}

fn global_outliers<T: Scalar>(x: &Matrix<T>, alpha: T, n_out: usize, rng: &mut RngStream) -> Result<Matrix<T>> {
    let d = x.cols();
    let mut lo = vec![T::infinity(); d];
    let mut hi = vec![T::neg_infinity(); d];
    for row in x.iter_rows() {
        for ((l, h), &v) in lo.iter_mut().zip(hi.iter_mut()).zip(row) {
            *l = l.min(v);
            *h = h.max(v);
        }
    }
    let mut data = Vec::with_capacity(n_out * d);
    for _ in 0..n_out {
        for k in 0..d {
            let (a, b) = ((alpha * lo[k]).as_f64(), (alpha * hi[k]).as_f64());
            let (a, b) = if a <= b { (a, b) } else { (b, a) };
            data.push(T::of(a + (b - a) * rng.uniform()));
        }
    }
    Matrix::new(n_out, d, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_blob(n: usize, center: [f64; 2], seed: u64) -> (Dataset<f64>, GmmModel<f64>) {
        let g = GmmModel::new(vec![1.0], vec![center.to_vec()], vec![Matrix::identity(2)]).unwrap();
        let (x, _) = g.sample(n, &mut RngStream::new(seed)).unwrap();
        (Dataset::unlabeled(x, "blob").unwrap(), g)
    }

    fn outlier_rows(ds: &Dataset<f64>) -> Matrix<f64> {
        let idx: Vec<usize> = (0..ds.n_samples()).filter(|&i| ds.labels().unwrap()[i] == 1).collect();
        ds.x().select_rows(&idx).unwrap()
    }

    #[test]
    fn count_formula() {
        assert_eq!(outlier_count(900, 0.1).unwrap(), 100);
        assert_eq!(outlier_count(1000, 0.1).unwrap(), 112);
        assert_eq!(outlier_count(1000, 0.4).unwrap(), 667);
        assert!(outlier_count(10, 1.0).is_err());
    }

    #[test]
    fn local_variance_scales_by_alpha() {
        let (ds, g) = unit_blob(2000, [0.0, 0.0], 1);
        let out = inject(&ds, Some(&g), &InjectionConfig::new(InjectionKind::Local, 0.4, 9)).unwrap();
        let (_, sd) = outlier_rows(&out).col_stats().unwrap();
        for s in sd {
            let var = s * s;
            assert!((var - 5.0).abs() < 1.0, "variance {var}");
        }
    }

    #[test]
    fn global_within_stretched_bounds() {
        let (ds, _) = unit_blob(500, [2.0, -1.0], 2);
        let cfg = InjectionConfig::new(InjectionKind::Global, 0.2, 3);
        let out = inject(&ds, None, &cfg).unwrap();
        let o = outlier_rows(&out);
        for k in 0..2 {
            let col: Vec<f64> = ds.x().iter_rows().map(|r| r[k]).collect();
            let (lo, hi) = col.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
            let (a, b) = ((1.1 * lo).min(1.1 * hi), (1.1 * lo).max(1.1 * hi));
            assert!(o.iter_rows().all(|r| r[k] >= a && r[k] <= b));
        }
    }

    #[test]
    fn cluster_centroid_moves_out() {
        let (ds, g) = unit_blob(2000, [1.0, 0.0], 4);
        let out = inject(&ds, Some(&g), &InjectionConfig::new(InjectionKind::Cluster, 0.3, 5)).unwrap();
        let (m, _) = outlier_rows(&out).col_stats().unwrap();
        assert!((m[0] - 5.0).abs() < 0.15 && m[1].abs() < 0.15, "{m:?}");
    }

    #[test]
    fn cluster_at_origin_is_degenerate() {
        let (ds, g) = unit_blob(100, [0.0, 0.0], 6);
        let err = inject(&ds, Some(&g), &InjectionConfig::new(InjectionKind::Cluster, 0.1, 0)).unwrap_err();
        assert!(matches!(err, Error::DegenerateInjection(_)));
    }

    #[test]
    fn labels_and_sizes() {
        let (ds, g) = unit_blob(900, [0.0, 1.0], 7);
        let out = inject(&ds, Some(&g), &InjectionConfig::new(InjectionKind::Local, 0.1, 1)).unwrap();
        assert_eq!(out.n_samples(), 1000);
        assert_eq!(out.n_outliers(), Some(100));
    }

    #[test]
    fn deterministic_and_order_independent() {
        let (ds, g) = unit_blob(300, [1.0, 1.0], 8);
        for kind in InjectionKind::ALL {
            let cfg = InjectionConfig::new(kind, 0.2, 11);
            let a = inject(&ds, Some(&g), &cfg).unwrap();
            let b = inject(&ds, Some(&g), &cfg).unwrap();
            assert_eq!(a, b);

            let mut perm: Vec<usize> = (0..ds.n_samples()).collect();
            RngStream::new(99).shuffle(&mut perm);
            let shuffled = ds.select_rows(&perm).unwrap();
            let c = inject(&shuffled, Some(&g), &cfg).unwrap();
            let key = |d: &Dataset<f64>| {
                let mut rows: Vec<(Vec<u64>, u8)> = d
                    .x()
                    .iter_rows()
                    .zip(d.labels().unwrap())
                    .map(|(r, &l)| (r.iter().map(|v| v.to_bits()).collect(), l))
                    .collect();
                rows.sort();
                rows
            };
            assert_eq!(key(&a), key(&c), "{kind}");
        }
    }

    #[test]
    fn distance_baseline_separates_cluster_outliers() {
        let (ds, g) = unit_blob(900, [1.0, 0.5], 12);
        let out = inject(&ds, Some(&g), &InjectionConfig::new(InjectionKind::Cluster, 0.1, 13)).unwrap();
        let (c, _) = out.x().col_stats().unwrap();
        let scores: Vec<f64> = out
            .x()
            .iter_rows()
            .map(|r| r.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum())
            .collect();
        let a = crate::stats::auc(&scores, out.labels().unwrap()).unwrap();
        assert!(a > 0.9, "{a}");
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("Cluster".parse::<InjectionKind>().unwrap(), InjectionKind::Cluster);
        assert!("none".parse::<InjectionKind>().is_err());
    }
}
