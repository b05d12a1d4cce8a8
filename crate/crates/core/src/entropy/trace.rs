use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Entropy values `e_0, e_1, …`, where `e_0` is measured before the first
/// update and `e_j` after update `j`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EntropyTrace<T> {
    values: Vec<T>,
}

impl<T: Scalar> EntropyTrace<T> {
    pub fn new() -> Self {
        Self { values: Vec::new() }
    }

    pub fn push(&mut self, e: T) -> Result<()> {
        if !e.is_finite() {
            return Err(Error::numerical(format!(
                "non-finite entropy at iteration {}",
                self.values.len()
            )));
        }
        self.values.push(e);
        Ok(())
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.as_f64()).collect()
    }
}

/// One row of the exported trace. Label-dependent columns stay empty when the
/// data has no labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub entropy: Option<f64>,
    pub train_loss: Option<f64>,
    pub auc: Option<f64>,
    #[serde(rename = "L_in")]
    pub l_in: Option<f64>,
    #[serde(rename = "L_out")]
    pub l_out: Option<f64>,
}

pub fn write_trace_csv(records: &[TraceRecord], path: impl AsRef<Path>) -> Result<()> {
    write_trace_csv_to(records, std::fs::File::create(path)?)
}

/// Columns: `iter, entropy, train_loss` and, when any record carries them,
/// `auc, L_in, L_out`.
pub fn write_trace_csv_to<W: Write>(records: &[TraceRecord], writer: W) -> Result<()> {
    let labelled = records
        .iter()
        .any(|r| r.auc.is_some() || r.l_in.is_some() || r.l_out.is_some());
    let mut w = csv::Writer::from_writer(writer);
    let fmt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    if labelled {
        w.write_record(["iter", "entropy", "train_loss", "auc", "L_in", "L_out"])?;
    } else {
        w.write_record(["iter", "entropy", "train_loss"])?;
    }
    for r in records {
        let mut row = vec![r.iter.to_string(), fmt(r.entropy), fmt(r.train_loss)];
        if labelled {
            row.extend([fmt(r.auc), fmt(r.l_in), fmt(r.l_out)]);
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
