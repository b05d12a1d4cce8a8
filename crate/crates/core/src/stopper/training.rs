use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::entropy::{eval_entropy, EntropyTrace, EvalSet, DEFAULT_N_EVAL};
use crate::error::{Error, Result};
use crate::models::OdModel;
use crate::nn::{ForwardMode, Optimizer, OptimizerConfig, ParamSnapshot};
use crate::scalar::Scalar;
use crate::stats::auc;
use crate::stopper::{EntropyStopper, StepDecision, StopperConfig};
use crate::tensor::{Dataset, RngStream};

/// Seed tags for the independent streams a run uses.
const EVAL_SET_STREAM: u64 = 1;
const BATCH_STREAM: u64 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig<T> {
    pub batch_size: usize,
    pub epochs: usize,
    pub optimizer: OptimizerConfig<T>,
    /// Evaluation-set size, capped at the dataset size.
    pub n_eval: usize,
    /// Record the entropy curve even when it is not needed for stopping.
    pub track_entropy: bool,
    pub seed: u64,
}

impl<T: Scalar> TrainConfig<T> {
    /// Batch 256, 250 epochs, Adam at lr 1e-3, `N_eval` 1024.
    pub fn new(seed: u64) -> Self {
        Self {
            batch_size: 256,
            epochs: 250,
            optimizer: OptimizerConfig::adam(T::of(1e-3)),
            n_eval: DEFAULT_N_EVAL,
            track_entropy: false,
            seed,
        }
    }

    /// `epochs × ⌈n / batch_size⌉`.
    pub fn max_iters(&self, n: usize) -> usize {
        self.epochs * n.div_ceil(self.batch_size.max(1))
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if self.n_eval == 0 {
            return Err(Error::invalid("evaluation set size must be at least 1"));
        }
        self.optimizer.validate()
    }
}

/// How the returned parameters are chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopMode<T> {
    /// Train all iterations, keep the final parameters.
    Naive,
    /// Stop on the entropy curve and keep its best point.
    Entropy(StopperConfig<T>),
    /// Train all iterations, keep the parameters with the highest AUC on the
    /// full labelled dataset. A label oracle, for reference only.
    Optimal,
}

impl<T> StopMode<T> {
    pub fn name(&self) -> &'static str {
        match self {
            StopMode::Naive => "naive",
            StopMode::Entropy(_) => "entropy",
            StopMode::Optimal => "optimal",
        }
    }
}

/// Called with the model before training (iteration 0) and after every update.
pub trait TrainObserver<T: Scalar> {
    fn observe(&mut self, iter: usize, model: &dyn OdModel<T>) -> Result<()>;
}

pub struct NoObserver;

impl<T: Scalar> TrainObserver<T> for NoObserver {
    fn observe(&mut self, _iter: usize, _model: &dyn OdModel<T>) -> Result<()> {
        Ok(())
    }
}

impl<T: Scalar, F: FnMut(usize, &dyn OdModel<T>) -> Result<()>> TrainObserver<T> for F {
    fn observe(&mut self, iter: usize, model: &dyn OdModel<T>) -> Result<()> {
        self(iter, model)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunOutput<T> {
    pub mode: &'static str,
    /// Outlier scores of the full dataset under the selected parameters.
    pub scores: Vec<T>,
    pub selected_iter: usize,
    /// Updates actually performed.
    pub iterations: usize,
    /// Updates the configuration allows (`T`).
    pub max_iters: usize,
    /// `e_0 …`; empty when entropy was neither needed nor tracked.
    pub entropy: EntropyTrace<T>,
    /// Mean training-batch loss of each update.
    pub train_losses: Vec<T>,
    /// Full-data AUC per iteration, `Optimal` mode only.
    pub auc_trace: Option<Vec<T>>,
    #[serde(skip)]
    pub wall_time: Duration,
}

/// Runs the training loop with early stopping on the entropy curve.
pub fn train_with_stopper<T: Scalar, M: OdModel<T>>(
    model: &mut M,
    ds: &Dataset<T>,
    config: &TrainConfig<T>,
    stopper: StopperConfig<T>,
) -> Result<RunOutput<T>> {
    train(model, ds, config, StopMode::Entropy(stopper), &mut NoObserver)
}

/// Trains `model` on `ds` and leaves it holding the selected parameters.
///
/// Each iteration draws the next batch from a per-epoch shuffle, takes one
/// optimizer step on the batch's mean loss (dropout active) and then, when
/// needed, measures entropy on the fixed evaluation set with dropout off.
/// The evaluation rows and the batch/dropout stream are derived from
/// `config.seed`, so runs with the same seed follow the same trajectory
/// whatever the mode.
pub fn train<T: Scalar, M: OdModel<T>>(
    model: &mut M,
    ds: &Dataset<T>,
    config: &TrainConfig<T>,
    mode: StopMode<T>,
    observer: &mut dyn TrainObserver<T>,
) -> Result<RunOutput<T>> {
    config.validate()?;
    if let StopMode::Entropy(s) = &mode {
        s.validate()?;
    }
    let labels = match mode {
        StopMode::Optimal => Some(ds.require_labels()?),
        _ => None,
    };
    if ds.n_features() != model.input_dim() {
        return Err(Error::shape(format!(
            "model expects {} features, dataset has {}",
            model.input_dim(),
            ds.n_features()
        )));
    }

    let root = RngStream::new(config.seed);
    let n = ds.n_samples();
    let max_iters = config.max_iters(n);
    let track = config.track_entropy || matches!(mode, StopMode::Entropy(_));
    let eval_set = if track {
        Some(EvalSet::sample(ds, config.n_eval, root.derive(EVAL_SET_STREAM).seed())?)
    } else {
        None
    };
    let mut rng = root.derive(BATCH_STREAM);
    let mut optimizer = Optimizer::new(config.optimizer)?;

    let started = Instant::now();
    let mut trace = EntropyTrace::new();
    let mut train_losses = Vec::new();
    let mut auc_values = Vec::new();

    let abort = |iteration: usize, err: Error, trace: &EntropyTrace<T>| match err {
        Error::Numerical(reason) => Error::TrainingAborted {
            iteration,
            reason,
            partial_trace: trace.to_f64(),
        },
        other => other,
    };

    if let Some(es) = &eval_set {
        let e0 = eval_entropy(model, es).map_err(|e| abort(0, e, &trace))?;
        trace.push(e0)?;
    }
    let mut stopper: Option<EntropyStopper<T>> = match mode {
        StopMode::Entropy(cfg) => Some(EntropyStopper::new(trace.values()[0], model.snapshot(), cfg)?),
        _ => None,
    };
    let mut best_auc: Option<(T, usize, ParamSnapshot<T>)> = None;
    if let Some(l) = labels {
        let a = auc(&model.score(ds.x())?, l)?;
        auc_values.push(a);
        best_auc = Some((a, 0, model.snapshot()));
    }
    observer.observe(0, model)?;

    let mut order: Vec<usize> = (0..n).collect();
    let mut cursor = n;
    let mut iterations = 0;
    for j in 1..=max_iters {
        if cursor >= n {
            rng.shuffle(&mut order);
            cursor = 0;
        }
        let end = (cursor + config.batch_size).min(n);
        let batch = ds.x().select_rows(&order[cursor..end])?;
        cursor = end;

        let step = (|| -> Result<T> {
            let (loss, grad) = model.loss_gradient(&batch, ForwardMode::Train, &mut rng)?;
            let mut params = model.params();
            optimizer.step(&mut params, &grad)?;
            model.set_params(&params)?;
            Ok(loss)
        })();
        let loss = step.map_err(|e| abort(j, e, &trace))?;
        train_losses.push(loss);
        iterations = j;

        let mut decision = StepDecision::Continue;
        if let Some(es) = &eval_set {
            let e = eval_entropy(model, es).map_err(|e| abort(j, e, &trace))?;
            trace.push(e)?;
            if let Some(s) = stopper.as_mut() {
                decision = s.step(e, || model.snapshot())?;
            }
        }
        if let Some(l) = labels {
            let a = auc(&model.score(ds.x())?, l)?;
            auc_values.push(a);
            if let Some((best, _, _)) = &best_auc {
                if a > *best {
                    best_auc = Some((a, j, model.snapshot()));
                }
            }
        }
        observer.observe(j, model)?;
        if decision == StepDecision::Stop {
            break;
        }
    }
    let wall_time = started.elapsed();

    let selected_iter = match (stopper, best_auc) {
        (Some(s), _) => {
            let best_iter = s.best_iter();
            model.restore(&s.into_best())?;
            best_iter
        }
        (None, Some((_, iter, snap))) => {
            model.restore(&snap)?;
            iter
        }
        (None, None) => iterations,
    };

    Ok(RunOutput {
        mode: mode.name(),
        scores: model.score(ds.x())?,
        selected_iter,
        iterations,
        max_iters,
        entropy: trace,
        train_losses,
        auc_trace: labels.map(|_| auc_values),
        wall_time,
    })
}
