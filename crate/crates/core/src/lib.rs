//! Label-free training stopping for unsupervised outlier detection.
//!
//! Deep outlier detectors trained on contaminated data first fit the inlier
//! majority, then start fitting the outliers as well, which erodes the gap
//! between their reconstruction losses. The Shannon entropy of the normalized
//! per-sample loss distribution on a small fixed evaluation set tracks that
//! gap without labels: it falls while inliers are being learned and rises
//! once the outliers catch up. [`stopper::EntropyStopper`] watches the
//! entropy curve and keeps the parameters at the lowest point that passes a
//! downtrend-significance test.
//!
//! The numeric code is generic over [`Scalar`] (`f32`/`f64`); the aliases at
//! the crate root fix it to `f64`, which is what the training harness uses.

pub mod entropy;
pub mod error;
pub mod harness;
pub mod models;
pub mod nn;
pub mod scalar;
pub mod stats;
pub mod stopper;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Matrix = tensor::Matrix<f64>;
pub type Dataset = tensor::Dataset<f64>;
pub type Mlp = nn::Mlp<f64>;
pub type ParamSnapshot = nn::ParamSnapshot<f64>;
pub type Autoencoder = models::AutoencoderModel<f64>;
pub type DeepSvddLite = models::DeepSvddLiteModel<f64>;
pub type EntropyStopper = stopper::EntropyStopper<f64>;
pub type GmmModel = synth::GmmModel<f64>;
