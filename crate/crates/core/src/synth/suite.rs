use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::synth::{gmm_fit_with, inject, GmmFitConfig, GmmModel, InjectionConfig, InjectionKind};
use crate::tensor::{derive_seed, write_dataset, Dataset, Matrix, RngStream};

pub const MANIFEST_FILE: &str = "manifest.json";

const TRUTH_STREAM: u64 = 0;
const FIT_STREAM: u64 = 1;
const INJECT_STREAM: u64 = 2;

/// Ground-truth means are drawn uniformly from a ball of this radius.
pub const MEAN_RADIUS: f64 = 3.0;
/// Ground-truth covariance eigenvalues are drawn from this range.
pub const EIGEN_RANGE: (f64, f64) = (0.5, 1.5);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    /// Independent ground-truth mixtures; every one is injected once per
    /// (kind, ratio) pair.
    pub n_datasets: usize,
    /// Inliers per dataset.
    pub n: usize,
    pub d: usize,
    /// Mixture components, both for the ground truth and the fit.
    pub k: usize,
    pub kinds: Vec<InjectionKind>,
    pub ratios: Vec<f64>,
    /// Overrides the per-kind default.
    #[serde(default)]
    pub alpha: Option<f64>,
    pub seed: u64,
}

impl SuiteConfig {
    pub fn new(n_datasets: usize, n: usize, d: usize, k: usize, kinds: Vec<InjectionKind>, ratios: Vec<f64>, seed: u64) -> Self {
        Self {
            n_datasets,
            n,
            d,
            k,
            kinds,
            ratios,
            alpha: None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_datasets == 0 || self.kinds.is_empty() || self.ratios.is_empty() {
            return Err(Error::invalid("suite needs at least one dataset, kind and ratio"));
        }
        if self.d == 0 || self.k == 0 {
            return Err(Error::invalid("suite needs d >= 1 and K >= 1"));
        }
        if self.n <= self.k * (self.d + 1) {
            return Err(Error::invalid(format!(
                "{} inliers are too few to fit {} components in {} dimensions",
                self.n, self.k, self.d
            )));
        }
        for &r in &self.ratios {
            InjectionConfig::new(InjectionKind::Local, r, 0).validate()?;
        }
        if let Some(a) = self.alpha {
            InjectionConfig::new(InjectionKind::Local, 0.1, 0).with_alpha(a).validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SuiteEntry<T> {
    pub name: String,
    /// Standardized, labeled.
    pub dataset: Dataset<T>,
    pub index: usize,
    pub injection: InjectionConfig,
    pub truth: GmmModel<T>,
    pub fitted: GmmModel<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub file: String,
    pub index: usize,
    pub inlier_seed: u64,
    pub fit_seed: u64,
    pub injection: InjectionConfig,
    pub rows: usize,
    pub outliers: usize,
    pub truth: GmmModel<f64>,
    pub fitted: GmmModel<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteManifest {
    pub config: SuiteConfig,
    pub standardized: bool,
    pub datasets: Vec<ManifestEntry>,
}

impl SuiteManifest {
    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }
}

fn entry_name(kind: InjectionKind, ratio: f64, index: usize) -> String {
    format!("{kind}_{ratio}_{index:02}")
}

/// Random mixture with means in a ball of radius [`MEAN_RADIUS`] and
/// covariances `Q diag(λ) Qᵀ` with a random rotation `Q`.
pub fn random_gmm<T: Scalar>(d: usize, k: usize, rng: &mut RngStream) -> Result<GmmModel<T>> {
    let raw: Vec<f64> = (0..k).map(|_| rng.uniform_range(0.5, 1.5)).collect();
    let total: f64 = raw.iter().sum();
    let weights = raw.iter().map(|w| T::of(w / total)).collect();
    let means = (0..k)
        .map(|_| {
            let dir: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
            let len = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            let radius = MEAN_RADIUS * rng.uniform().powf(1.0 / d as f64);
            dir.iter().map(|v| T::of(v / len * radius)).collect()
        })
        .collect();
    let covariances = (0..k)
        .map(|_| {
            let q = random_rotation(d, rng);
            let lambda: Vec<f64> = (0..d).map(|_| rng.uniform_range(EIGEN_RANGE.0, EIGEN_RANGE.1)).collect();
            let mut data = vec![T::zero(); d * d];
            for a in 0..d {
                for b in 0..d {
                    let v: f64 = (0..d).map(|m| q[a][m] * lambda[m] * q[b][m]).sum();
                    data[a * d + b] = T::of(v);
                }
            }
            // exact symmetry
            for a in 0..d {
                for b in 0..a {
                    data[a * d + b] = data[b * d + a];
                }
            }
            Matrix::new(d, d, data)
        })
        .collect::<Result<Vec<_>>>()?;
    GmmModel::new(weights, means, covariances)
}

/// Gram–Schmidt on a Gaussian matrix; columns are `q[·][m]`.
fn random_rotation(d: usize, rng: &mut RngStream) -> Vec<Vec<f64>> {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(d);
    while cols.len() < d {
        let mut v: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        for c in &cols {
            let dot: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(c).for_each(|(a, b)| *a -= dot * b);
        }
        let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if len > 1e-8 {
            cols.push(v.into_iter().map(|x| x / len).collect());
        }
    }
    (0..d).map(|a| (0..d).map(|m| cols[m][a]).collect()).collect()
}

/// Builds the suite: per ground-truth index, sample raw inliers, fit a
/// mixture to them, inject each (kind, ratio) on the raw features and
/// standardize the result.
pub fn make_synthetic_suite<T: Scalar>(cfg: &SuiteConfig) -> Result<Vec<SuiteEntry<T>>> {
    cfg.validate()?;
    let groups: Vec<Vec<SuiteEntry<T>>> = (0..cfg.n_datasets)
        .into_par_iter()
        .map(|i| suite_group(cfg, i))
        .collect::<Result<_>>()?;
    let mut entries: Vec<SuiteEntry<T>> = groups.into_iter().flatten().collect();
    // kind, ratio, then index
    entries.sort_by(|a, b| {
        (a.injection.kind, a.injection.ratio.to_bits(), a.index).cmp(&(b.injection.kind, b.injection.ratio.to_bits(), b.index))
    });
    Ok(entries)
}

fn seeds_for(cfg: &SuiteConfig, index: usize) -> (u64, u64, u64) {
    let base = derive_seed(cfg.seed, index as u64);
    (
        derive_seed(base, TRUTH_STREAM),
        derive_seed(base, FIT_STREAM),
        derive_seed(base, INJECT_STREAM),
    )
}

fn suite_group<T: Scalar>(cfg: &SuiteConfig, index: usize) -> Result<Vec<SuiteEntry<T>>> {
    let (truth_seed, fit_seed, inject_seed) = seeds_for(cfg, index);
    let mut rng = RngStream::new(truth_seed);
    let truth = random_gmm::<T>(cfg.d, cfg.k, &mut rng)?;
    let (x, _) = truth.sample(cfg.n, &mut rng)?;
    let fitted = gmm_fit_with(&x, cfg.k, &GmmFitConfig::default(), &mut RngStream::new(fit_seed))?.model;
    let inliers = Dataset::unlabeled(x, "inliers")?;

    let mut out = Vec::new();
    for (ki, &kind) in cfg.kinds.iter().enumerate() {
        for (ri, &ratio) in cfg.ratios.iter().enumerate() {
            let mut inj = InjectionConfig::new(kind, ratio, derive_seed(inject_seed, (ki * cfg.ratios.len() + ri) as u64));
            if let Some(a) = cfg.alpha {
                inj = inj.with_alpha(a);
            }
            let name = entry_name(kind, ratio, index);
            let ds = inject(&inliers, Some(&fitted), &inj)?.standardize()?.with_name(name.clone());
            out.push(SuiteEntry {
                name,
                dataset: ds,
                index,
                injection: inj,
                truth: truth.clone(),
                fitted: fitted.clone(),
            });
        }
    }
    Ok(out)
}

fn to_f64<T: Scalar>(g: &GmmModel<T>) -> GmmModel<f64> {
    GmmModel {
        weights: g.weights.iter().map(|w| w.as_f64()).collect(),
        means: g.means.iter().map(|m| m.iter().map(|v| v.as_f64()).collect()).collect(),
        covariances: g.covariances.iter().map(|c| c.cast()).collect(),
    }
}

pub fn suite_manifest<T: Scalar>(cfg: &SuiteConfig, entries: &[SuiteEntry<T>]) -> SuiteManifest {
    let datasets = entries
        .iter()
        .map(|e| {
            let (inlier_seed, fit_seed, _) = seeds_for(cfg, e.index);
            ManifestEntry {
                name: e.name.clone(),
                file: format!("{}.csv", e.name),
                index: e.index,
                inlier_seed,
                fit_seed,
                injection: e.injection,
                rows: e.dataset.n_samples(),
                outliers: e.dataset.n_outliers().unwrap_or(0),
                truth: to_f64(&e.truth),
                fitted: to_f64(&e.fitted),
            }
        })
        .collect();
    SuiteManifest {
        config: cfg.clone(),
        standardized: true,
        datasets,
    }
}

/// Generates the suite and writes one CSV per dataset plus
/// [`MANIFEST_FILE`] into `dir`.
pub fn write_suite(cfg: &SuiteConfig, dir: &Path) -> Result<SuiteManifest> {
    let entries = make_synthetic_suite::<f64>(cfg)?;
    fs::create_dir_all(dir)?;
    let manifest = suite_manifest(cfg, &entries);
    for (e, m) in entries.iter().zip(&manifest.datasets) {
        write_dataset(&e.dataset, dir.join(&m.file))?;
    }
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    fs::write(dir.join(MANIFEST_FILE), json)?;
    Ok(manifest)
}

/// Regenerates a suite from its manifest into `dir`.
pub fn replay_manifest(manifest: &SuiteManifest, dir: &Path) -> Result<SuiteManifest> {
    write_suite(&manifest.config, dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kinds: Vec<InjectionKind>, ratios: Vec<f64>, seed: u64) -> SuiteConfig {
        SuiteConfig::new(3, 300, 4, 2, kinds, ratios, seed)
    }

    #[test]
    fn reproducible_from_seed() {
        let cfg = small(InjectionKind::ALL.to_vec(), vec![0.1], 5);
        let a = make_synthetic_suite::<f64>(&cfg).unwrap();
        let b = make_synthetic_suite::<f64>(&cfg).unwrap();
        assert_eq!(a.len(), 9);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.dataset, y.dataset);
            assert_eq!(x.name, y.name);
        }
        let c = make_synthetic_suite::<f64>(&small(InjectionKind::ALL.to_vec(), vec![0.1], 6)).unwrap();
        assert_ne!(a[0].dataset, c[0].dataset);
    }

    #[test]
    fn outlier_fraction_matches_ratio() {
        let cfg = small(vec![InjectionKind::Global, InjectionKind::Cluster], vec![0.1, 0.4], 1);
        for e in make_synthetic_suite::<f64>(&cfg).unwrap() {
            let n_out = e.dataset.n_outliers().unwrap() as f64;
            let want = e.injection.ratio * e.dataset.n_samples() as f64;
            assert!((n_out - want).abs() <= 1.0, "{}: {n_out} vs {want}", e.name);
        }
    }

    #[test]
    fn truth_means_inside_ball_and_covariances_in_range() {
        let mut rng = RngStream::new(3);
        for _ in 0..20 {
            let g = random_gmm::<f64>(5, 3, &mut rng).unwrap();
            for m in &g.means {
                assert!(m.iter().map(|v| v * v).sum::<f64>().sqrt() <= MEAN_RADIUS + 1e-12);
            }
            for c in &g.covariances {
                // trace is the eigenvalue sum
                let tr: f64 = (0..5).map(|i| c.get(i, i)).sum();
                assert!(tr >= 5.0 * EIGEN_RANGE.0 - 1e-9 && tr <= 5.0 * EIGEN_RANGE.1 + 1e-9);
            }
        }
    }

    #[test]
    fn rotation_is_orthogonal() {
        let q = random_rotation(6, &mut RngStream::new(4));
        for a in 0..6 {
            for b in 0..6 {
                let dot: f64 = (0..6).map(|m| q[a][m] * q[b][m]).sum();
                assert!((dot - (a == b) as u8 as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn written_suite_replays_identically() {
        let cfg = small(vec![InjectionKind::Cluster], vec![0.1], 2);
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let m = write_suite(&cfg, d1.path()).unwrap();
        let back = SuiteManifest::read(&d1.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(back, m);
        replay_manifest(&back, d2.path()).unwrap();
        for e in &m.datasets {
            let a = fs::read(d1.path().join(&e.file)).unwrap();
            let b = fs::read(d2.path().join(&e.file)).unwrap();
            assert_eq!(a, b);
        }
        assert_eq!(
            fs::read(d1.path().join(MANIFEST_FILE)).unwrap(),
            fs::read(d2.path().join(MANIFEST_FILE)).unwrap()
        );
    }

    #[test]
    fn invalid_configs() {
        assert!(make_synthetic_suite::<f64>(&small(vec![], vec![0.1], 0)).is_err());
        assert!(make_synthetic_suite::<f64>(&small(vec![InjectionKind::Local], vec![1.2], 0)).is_err());
        let mut c = small(vec![InjectionKind::Local], vec![0.1], 0);
        c.n = 5;
        assert!(make_synthetic_suite::<f64>(&c).is_err());
    }
}
