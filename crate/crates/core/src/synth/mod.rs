//! Synthetic benchmark data: Gaussian-mixture inliers fitted by EM and three
//! kinds of injected outliers.

mod gmm;
mod inject;
mod suite;

pub use gmm::{gmm_fit, gmm_fit_with, GmmFit, GmmFitConfig, GmmModel};
pub use inject::{inject, outlier_count, InjectionConfig, InjectionKind};
pub use suite::{
    make_synthetic_suite, random_gmm, replay_manifest, suite_manifest, write_suite, ManifestEntry, SuiteConfig,
    SuiteEntry, SuiteManifest, EIGEN_RANGE, MANIFEST_FILE, MEAN_RADIUS,
};
