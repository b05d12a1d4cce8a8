use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::{activation_name, parse_activation};
use crate::harness::{run_single, ModelSpec, Mode, RunConfig};
use crate::tensor::{derive_seed, Dataset};

/// Caps the number of runs a sweep executes at once.
pub const THREADS_ENV: &str = "ENTROPYSTOP_THREADS";

/// Thread cap from [`THREADS_ENV`], if set to a positive integer.
pub fn sweep_threads() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(0) | Err(_) => Err(Error::invalid(format!("{THREADS_ENV}={v:?} is not a positive integer"))),
            Ok(n) => Ok(Some(n)),
        },
    }
}

/// Runs `f` on a pool sized by [`THREADS_ENV`] (rayon's default otherwise).
pub fn in_sweep_pool<R: Send>(f: impl FnOnce() -> R + Send) -> Result<R> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = sweep_threads()? {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Cartesian product of autoencoder hyperparameter lists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub activation: Vec<String>,
    pub dropout: Vec<f64>,
    pub h_dim: Vec<usize>,
    pub lr: Vec<f64>,
    pub layers: Vec<usize>,
    pub epochs: Vec<usize>,
}

impl GridSpec {
    /// The 64-configuration autoencoder grid: two values for each of
    /// activation, dropout, width, learning rate, depth and epochs.
    pub fn full_ae() -> Self {
        Self {
            activation: vec!["relu".into(), "sigmoid".into()],
            dropout: vec![0.0, 0.2],
            h_dim: vec![64, 256],
            lr: vec![0.005, 0.001],
            layers: vec![2, 4],
            epochs: vec![100, 500],
        }
    }

    /// Activation × dropout × lr × layers at h_dim 64 and 250 epochs
    /// (16 configurations).
    pub fn small_ae() -> Self {
        Self {
            h_dim: vec![64],
            epochs: vec![250],
            ..Self::full_ae()
        }
    }

    /// The single configuration `base` already describes.
    pub fn single(base: &RunConfig) -> Result<Self> {
        let ModelSpec::Ae(ae) = &base.model else {
            return Err(Error::invalid("grids vary autoencoder hyperparameters only"));
        };
        Ok(Self {
            activation: vec![activation_name(ae.activation).into()],
            dropout: vec![ae.dropout],
            h_dim: vec![ae.h_dim],
            lr: vec![base.optimizer.lr],
            layers: vec![ae.layers],
            epochs: vec![base.epochs],
        })
    }

    pub fn len(&self) -> usize {
        self.activation.len() * self.dropout.len() * self.h_dim.len() * self.lr.len() * self.layers.len() * self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every combination applied to `base`. Configuration `i` (in
    /// activation-major order) gets seed `derive_seed(base.seed, i)`, or
    /// `base.seed` itself when the grid has one point.
    pub fn configs(&self, base: &RunConfig) -> Result<Vec<RunConfig>> {
        let ModelSpec::Ae(ae) = &base.model else {
            return Err(Error::invalid("grids vary autoencoder hyperparameters only"));
        };
        if self.is_empty() {
            return Err(Error::invalid("grid has an empty value list"));
        }
        let single = self.len() == 1;
        let mut out = Vec::with_capacity(self.len());
        for act in &self.activation {
            let activation = parse_activation(act)?;
            for &dropout in &self.dropout {
                for &h_dim in &self.h_dim {
                    for &lr in &self.lr {
                        for &layers in &self.layers {
                            for &epochs in &self.epochs {
                                let mut c = base.clone();
                                c.model = ModelSpec::Ae(crate::models::AeConfig {
                                    activation,
                                    dropout,
                                    h_dim,
                                    layers,
                                    ..*ae
                                });
                                c.optimizer.lr = lr;
                                c.epochs = epochs;
                                if !single {
                                    c.seed = derive_seed(base.seed, out.len() as u64);
                                }
                                c.validate()?;
                                out.push(c);
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

impl FromStr for GridSpec {
    type Err = Error;

    /// `full` (alias `paper`) or `small`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" | "paper" => Ok(Self::full_ae()),
            "small" => Ok(Self::small_ae()),
            other => Err(Error::invalid(format!("unknown grid preset {other:?}"))),
        }
    }
}

/// Dataset names are `<group>_<rest>`; the group is what reports aggregate
/// over. Names without an underscore form their own group.
pub fn dataset_group(name: &str) -> &str {
    name.split('_').next().unwrap_or(name)
}

/// One run of a sweep. Failed runs keep their configuration columns and
/// carry the error message instead of results.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub dataset: String,
    pub group: String,
    pub model: String,
    pub config_hash: String,
    pub seed: u64,
    pub activation: String,
    pub dropout: Option<f64>,
    pub h_dim: Option<usize>,
    pub lr: f64,
    pub layers: Option<usize>,
    pub epochs: usize,
    pub mode: Mode,
    pub auc: Option<f64>,
    pub selected_iter: Option<usize>,
    pub total_iters: Option<usize>,
    pub max_iters: Option<usize>,
    pub wall_time_s: Option<f64>,
    pub error: Option<String>,
}

impl GridRow {
    fn new(ds: &Dataset<f64>, cfg: &RunConfig, mode: Mode, outcome: Result<crate::harness::RunResult>) -> Self {
        let (dropout, h_dim, layers) = match &cfg.model {
            ModelSpec::Ae(a) => (Some(a.dropout), Some(a.h_dim), Some(a.layers)),
            ModelSpec::Svdd(_) => (None, None, None),
        };
        let mut row = Self {
            dataset: ds.name().to_string(),
            group: dataset_group(ds.name()).to_string(),
            model: cfg.model.name().to_string(),
            config_hash: cfg.hash(),
            seed: cfg.seed,
            activation: cfg.activation_name().to_string(),
            dropout,
            h_dim,
            lr: cfg.optimizer.lr,
            layers,
            epochs: cfg.epochs,
            mode,
            auc: None,
            selected_iter: None,
            total_iters: None,
            max_iters: None,
            wall_time_s: None,
            error: None,
        };
        match outcome {
            Ok(r) => {
                row.auc = r.auc;
                row.selected_iter = Some(r.selected_iter);
                row.total_iters = Some(r.total_iters);
                row.max_iters = Some(r.max_iters);
                row.wall_time_s = Some(r.wall_time_s);
            }
            Err(e) => row.error = Some(e.to_string()),
        }
        row
    }

    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }
}

/// Runs every configuration in every mode on every dataset.
///
/// Configurations are resized to each dataset's width. Runs execute in
/// parallel (see [`THREADS_ENV`]); a failing run becomes a row with `error`
/// set and the sweep continues. Rows come back sorted by dataset, config
/// hash and mode, so the output does not depend on scheduling.
pub fn run_grid(datasets: &[Dataset<f64>], configs: &[RunConfig], modes: &[Mode]) -> Result<Vec<GridRow>> {
    if datasets.is_empty() || configs.is_empty() || modes.is_empty() {
        return Err(Error::invalid("sweep needs at least one dataset, configuration and mode"));
    }
    let jobs: Vec<(&Dataset<f64>, RunConfig, Mode)> = datasets
        .iter()
        .flat_map(|ds| {
            configs.iter().flat_map(move |c| {
                let mut c = c.clone();
                c.model = c.model.with_input_dim(ds.n_features());
                modes.iter().map(move |&m| (ds, c.clone(), m))
            })
        })
        .collect();
    let mut rows: Vec<GridRow> = in_sweep_pool(|| {
        jobs.par_iter()
            .map(|(ds, cfg, mode)| GridRow::new(ds, cfg, *mode, run_single(cfg, ds, *mode)))
            .collect()
    })?;
    rows.sort_by(|a, b| {
        (&a.dataset, &a.config_hash, a.mode).cmp(&(&b.dataset, &b.config_hash, b.mode))
    });
    Ok(rows)
}

pub fn write_rows<W: Write>(rows: &[GridRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_rows_csv(rows: &[GridRow], path: &Path) -> Result<()> {
    write_rows(rows, std::fs::File::create(path)?)
}

pub fn read_rows<R: Read>(reader: R) -> Result<Vec<GridRow>> {
    let mut r = csv::Reader::from_reader(reader);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn read_rows_csv(path: &Path) -> Result<Vec<GridRow>> {
    read_rows(std::fs::File::open(path)?)
}

/// AUC distribution of one mode across a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeStats {
    pub mode: Mode,
    pub runs: usize,
    pub failed: usize,
    pub mean_auc: Option<f64>,
    /// Population standard deviation.
    pub std_auc: Option<f64>,
    pub mean_total_iters: Option<f64>,
}

pub fn mode_stats(rows: &[GridRow]) -> Vec<ModeStats> {
    let mut modes: Vec<Mode> = rows.iter().map(|r| r.mode).collect();
    modes.sort();
    modes.dedup();
    modes
        .into_iter()
        .map(|mode| {
            let of_mode: Vec<&GridRow> = rows.iter().filter(|r| r.mode == mode).collect();
            let aucs: Vec<f64> = of_mode.iter().filter_map(|r| r.auc).collect();
            let iters: Vec<f64> = of_mode.iter().filter_map(|r| r.total_iters.map(|t| t as f64)).collect();
            let (mean_auc, std_auc) = mean_std(&aucs).unzip();
            ModeStats {
                mode,
                runs: of_mode.len(),
                failed: of_mode.iter().filter(|r| !r.succeeded()).count(),
                mean_auc,
                std_auc,
                mean_total_iters: mean_std(&iters).map(|m| m.0),
            }
        })
        .collect()
}

/// Mean and population standard deviation.
pub fn mean_std(v: &[f64]) -> Option<(f64, f64)> {
    if v.is_empty() {
        return None;
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    Some((m, var.sqrt()))
}
