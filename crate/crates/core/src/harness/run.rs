use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::entropy::{loss_split_diagnostic, write_trace_csv, TraceRecord};
use crate::error::{Error, Result};
use crate::harness::{DataSource, ModelSpec, Mode, RunConfig};
use crate::models::{AutoencoderModel, DeepSvddLiteModel, OdModel};
use crate::nn::Mlp;
use crate::stats::auc;
use crate::stopper::{train, RunOutput};
use crate::synth::make_synthetic_suite;
use crate::tensor::{derive_seed, read_dataset, Dataset, Matrix, RngStream};

/// Seed tag for weight initialization; the trainer uses tags 1 and 2.
pub const MODEL_STREAM: u64 = 0;

/// Either model kind behind one concrete type.
#[derive(Clone, Debug)]
pub enum AnyModel {
    Ae(AutoencoderModel<f64>),
    Svdd(DeepSvddLiteModel<f64>),
}

impl AnyModel {
    /// Fresh weights from `derive(seed, MODEL_STREAM)`. The SVDD center is
    /// fixed from `x` under those weights.
    pub fn build(spec: &ModelSpec, x: &Matrix<f64>, seed: u64) -> Result<Self> {
        if spec.input_dim() != x.cols() {
            return Err(Error::shape(format!(
                "model expects {} features, data has {}",
                spec.input_dim(),
                x.cols()
            )));
        }
        let mut rng = RngStream::new(derive_seed(seed, MODEL_STREAM));
        Ok(match spec {
            ModelSpec::Ae(c) => AnyModel::Ae(AutoencoderModel::new(c, &mut rng)?),
            ModelSpec::Svdd(c) => AnyModel::Svdd(DeepSvddLiteModel::with_center(c, x, &mut rng)?),
        })
    }
}

impl OdModel<f64> for AnyModel {
    fn network(&self) -> &Mlp<f64> {
        match self {
            AnyModel::Ae(m) => m.network(),
            AnyModel::Svdd(m) => m.network(),
        }
    }

    fn network_mut(&mut self) -> &mut Mlp<f64> {
        match self {
            AnyModel::Ae(m) => m.network_mut(),
            AnyModel::Svdd(m) => m.network_mut(),
        }
    }

    fn losses_from_output(&self, x: &Matrix<f64>, output: &Matrix<f64>) -> Result<(Vec<f64>, Matrix<f64>)> {
        match self {
            AnyModel::Ae(m) => m.losses_from_output(x, output),
            AnyModel::Svdd(m) => m.losses_from_output(x, output),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub dataset: String,
    pub model: String,
    pub mode: Mode,
    pub config_hash: String,
    pub seed: u64,
    /// Full-data AUC of the selected parameters, when labels exist.
    pub auc: Option<f64>,
    pub selected_iter: usize,
    /// Updates performed.
    pub total_iters: usize,
    /// Updates the configuration allows.
    pub max_iters: usize,
    pub scores: Vec<f64>,
    pub entropy: Vec<f64>,
    /// Training-loop time only. Left out of the JSON so identical runs
    /// serialize identically.
    #[serde(skip)]
    pub wall_time_s: f64,
}

impl RunResult {
    fn from_output(cfg: &RunConfig, ds: &Dataset<f64>, mode: Mode, out: &RunOutput<f64>) -> Result<Self> {
        let auc = match ds.labels() {
            Some(l) if l.contains(&0) && l.contains(&1) => Some(auc(&out.scores, l)?),
            _ => None,
        };
        Ok(Self {
            dataset: ds.name().to_string(),
            model: cfg.model.name().to_string(),
            mode,
            config_hash: cfg.hash(),
            seed: cfg.seed,
            auc,
            selected_iter: out.selected_iter,
            total_iters: out.iterations,
            max_iters: out.max_iters,
            scores: out.scores.clone(),
            entropy: out.entropy.to_f64(),
            wall_time_s: out.wall_time.as_secs_f64(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

/// One training run of `cfg` on `ds`, selecting parameters by `mode`.
pub fn run_single(cfg: &RunConfig, ds: &Dataset<f64>, mode: Mode) -> Result<RunResult> {
    Ok(run_traced(cfg, ds, mode, false)?.0)
}

/// Like [`run_single`], also returning one trace record per iteration.
/// `diagnostics` adds the inlier/outlier loss split to every record, which
/// costs a full-data forward pass per iteration and needs labels.
pub fn run_traced(cfg: &RunConfig, ds: &Dataset<f64>, mode: Mode, diagnostics: bool) -> Result<(RunResult, Vec<TraceRecord>)> {
    cfg.validate()?;
    let mut model = AnyModel::build(&cfg.model, ds.x(), cfg.seed)?;
    if diagnostics {
        ds.require_labels()?;
    }
    let mut splits = Vec::new();
    let mut observer = |_: usize, m: &dyn OdModel<f64>| -> Result<()> {
        if diagnostics {
            let s = loss_split_diagnostic(m, ds)?;
            splits.push((s.inlier, s.outlier));
        }
        Ok(())
    };
    let out = train(&mut model, ds, &cfg.train_config(), cfg.stop_mode(mode), &mut observer)?;
    let result = RunResult::from_output(cfg, ds, mode, &out)?;

    let entropy = out.entropy.values();
    let aucs = out.auc_trace.as_deref();
    let records = (0..=out.iterations)
        .map(|j| TraceRecord {
            iter: j,
            entropy: entropy.get(j).copied(),
            train_loss: j.checked_sub(1).and_then(|i| out.train_losses.get(i)).copied(),
            auc: aucs.and_then(|a| a.get(j)).copied(),
            l_in: splits.get(j).map(|s| s.0),
            l_out: splits.get(j).map(|s| s.1),
        })
        .collect();
    Ok((result, records))
}

/// Loads a CSV, optionally drops label-1 rows, then standardizes.
pub fn load_csv(path: &Path, drop_label_1: bool, standardize: bool) -> Result<Dataset<f64>> {
    let mut ds = read_dataset(path)?;
    if drop_label_1 {
        ds = ds.drop_outliers()?;
    }
    if standardize {
        ds = ds.standardize()?;
    }
    Ok(ds)
}

pub fn load_source(source: &DataSource) -> Result<Dataset<f64>> {
    match source {
        DataSource::Csv {
            path,
            drop_label_1,
            standardize,
        } => load_csv(path, *drop_label_1, *standardize),
        DataSource::Synthetic { suite, index } => {
            let mut entries = make_synthetic_suite::<f64>(suite)?;
            if *index >= entries.len() {
                return Err(Error::invalid(format!(
                    "suite has {} datasets, index {index} requested",
                    entries.len()
                )));
            }
            Ok(entries.swap_remove(*index).dataset)
        }
    }
}

pub fn write_trace(records: &[TraceRecord], path: &Path) -> Result<()> {
    write_trace_csv(records, path)
}
