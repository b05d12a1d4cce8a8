//! Dataset CSV format.
//!
//! A header row, then one row per sample. Feature columns hold decimal floats.
//! An optional final column named exactly `label` holds 0/1 outlier flags.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Dataset, Matrix};

pub const LABEL_COLUMN: &str = "label";

pub fn read_dataset<T: Scalar>(path: impl AsRef<Path>) -> Result<Dataset<T>> {
    let path = path.as_ref();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_owned());
    read_dataset_from(File::open(path)?, name)
}

pub fn read_dataset_from<T: Scalar, R: Read>(reader: R, name: impl Into<String>) -> Result<Dataset<T>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "missing header row".into(),
        });
    }
    let has_label = headers.iter().next_back() == Some(LABEL_COLUMN);
    if headers.iter().rev().skip(1).any(|h| h == LABEL_COLUMN) {
        return Err(Error::Parse {
            line: 1,
            message: "`label` must be the final column".into(),
        });
    }
    let n_features = headers.len() - usize::from(has_label);

    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut rows = 0usize;
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::Parse {
                line,
                message: e.to_string(),
            }
        })?;
        let line = record.position().map_or(0, |p| p.line());
        for (c, field) in record.iter().enumerate().take(n_features) {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                line,
                message: format!("column '{}': cannot parse '{field}' as a number", &headers[c]),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("column '{}': non-finite value", &headers[c]),
                });
            }
            data.push(T::of(v));
        }
        if has_label {
            let field = record[n_features].trim();
            let label = match field {
                "0" | "0.0" => 0,
                "1" | "1.0" => 1,
                other => {
                    return Err(Error::Parse {
                        line,
                        message: format!("label must be 0 or 1, got '{other}'"),
                    })
                }
            };
            labels.push(label);
        }
        rows += 1;
    }
    let x = Matrix::new(rows, n_features, data)?;
    Dataset::new(x, has_label.then_some(labels), name)
}

pub fn write_dataset<T: Scalar>(ds: &Dataset<T>, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path)?;
    write_dataset_to(ds, file)
}

pub fn write_dataset_to<T: Scalar, W: Write>(ds: &Dataset<T>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (0..ds.n_features()).map(|i| format!("x{i}")).collect();
    if ds.labels().is_some() {
        header.push(LABEL_COLUMN.to_owned());
    }
    w.write_record(&header)?;
    for (i, row) in ds.x().iter_rows().enumerate().take(ds.n_samples()) {
        // `{}` on f64 prints the shortest round-tripping decimal
        let mut rec: Vec<String> = row.iter().map(|v| format!("{}", v.as_f64())).collect();
        if let Some(l) = ds.labels() {
            rec.push(l[i].to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
