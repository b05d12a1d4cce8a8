//! Dense matrices, seeded randomness, and dataset preprocessing.

mod csv_io;
mod dataset;
pub mod linalg;
mod matrix;
mod rng;

pub use csv_io::{read_dataset, read_dataset_from, write_dataset, write_dataset_to, LABEL_COLUMN};
pub use dataset::Dataset;
pub use matrix::Matrix;
pub use rng::{derive_seed, RngStream};
