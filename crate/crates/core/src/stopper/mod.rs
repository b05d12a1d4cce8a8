//! Patience-based stopping on the loss-entropy curve.
//!
//! The stopper keeps the lowest entropy value `e_min` that passed a
//! downtrend test. For every new value `e_j` it adds `|e_j − e_{j−1}|` to the
//! accumulated variation `G` since the last accepted point; `e_j` becomes the
//! new best only when it is strictly below `e_min` and
//! `(e_min − e_j) / G > R_down`. A monotone decrease has ratio exactly 1;
//! a jagged one scores lower. Every other step spends one unit of patience,
//! and training stops when `k` units are spent in a row.

mod training;

pub use training::{
    train, train_with_stopper, NoObserver, RunOutput, StopMode, TrainConfig, TrainObserver,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::ParamSnapshot;
use crate::scalar::Scalar;

pub const DEFAULT_PATIENCE: usize = 100;
pub const DEFAULT_R_DOWN: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StopperConfig<T> {
    /// `k`: consecutive non-accepting steps tolerated.
    pub patience: usize,
    /// Downtrend threshold in `(0, 1)`.
    pub r_down: T,
}

impl<T: Scalar> Default for StopperConfig<T> {
    fn default() -> Self {
        Self {
            patience: DEFAULT_PATIENCE,
            r_down: T::of(DEFAULT_R_DOWN),
        }
    }
}

impl<T: Scalar> StopperConfig<T> {
    pub fn new(patience: usize, r_down: T) -> Result<Self> {
        let cfg = Self { patience, r_down };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.patience == 0 {
            return Err(Error::invalid("patience must be at least 1"));
        }
        if !(self.r_down > T::zero() && self.r_down < T::one()) {
            return Err(Error::invalid(format!("R_down {} outside (0, 1)", self.r_down)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepDecision {
    Continue,
    NewBest,
    /// Patience exhausted; no further steps are accepted.
    Stop,
}

/// Stopping state machine. `S` is whatever the caller wants kept alongside the
/// best point, normally a parameter snapshot; use `()` to replay curves.
#[derive(Clone, Debug)]
pub struct EntropyStopper<T, S = ParamSnapshot<T>> {
    config: StopperConfig<T>,
    e_min: T,
    variation: T,
    patience: usize,
    best_iter: usize,
    best: S,
    last_e: T,
    iter: usize,
    stopped: bool,
}

impl<T: Scalar, S> EntropyStopper<T, S> {
    /// Starts from the pre-training entropy `e_0` and the initial parameters.
    pub fn new(e0: T, snapshot: S, config: StopperConfig<T>) -> Result<Self> {
        config.validate()?;
        if !e0.is_finite() {
            return Err(Error::numerical("initial entropy is not finite"));
        }
        Ok(Self {
            config,
            e_min: e0,
            variation: T::zero(),
            patience: 0,
            best_iter: 0,
            best: snapshot,
            last_e: e0,
            iter: 0,
            stopped: false,
        })
    }

    /// Feeds `e_j` for the next iteration. `snapshot` is called only when the
    /// point is accepted.
    pub fn step(&mut self, e: T, snapshot: impl FnOnce() -> S) -> Result<StepDecision> {
        if self.stopped {
            return Err(Error::ContractViolation("stopper already signalled Stop".into()));
        }
        if !e.is_finite() {
            return Err(Error::numerical(format!(
                "non-finite entropy at iteration {}",
                self.iter + 1
            )));
        }
        self.iter += 1;
        self.variation += (e - self.last_e).abs();
        self.last_e = e;
        if e < self.e_min && self.variation > T::zero() && (self.e_min - e) / self.variation > self.config.r_down {
            self.e_min = e;
            self.variation = T::zero();
            self.patience = 0;
            self.best = snapshot();
            self.best_iter = self.iter;
            return Ok(StepDecision::NewBest);
        }
        self.patience += 1;
        if self.patience >= self.config.patience {
            self.stopped = true;
            Ok(StepDecision::Stop)
        } else {
            Ok(StepDecision::Continue)
        }
    }

    pub fn config(&self) -> &StopperConfig<T> {
        &self.config
    }

    pub fn e_min(&self) -> T {
        self.e_min
    }

    pub fn variation(&self) -> T {
        self.variation
    }

    pub fn patience_used(&self) -> usize {
        self.patience
    }

    pub fn best_iter(&self) -> usize {
        self.best_iter
    }

    pub fn best(&self) -> &S {
        &self.best
    }

    pub fn into_best(self) -> S {
        self.best
    }

    pub fn iterations(&self) -> usize {
        self.iter
    }

    pub fn is_stopped(&self) -> bool {
        self.stopped
    }
}

/// Outcome of running a recorded curve through a fresh stopper.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Replay {
    pub decisions: Vec<StepDecision>,
    pub best_iter: usize,
    /// Iterations consumed (equals the curve length minus one when no stop).
    pub iterations: usize,
    pub stopped: bool,
}

/// Replays `curve = [e_0, e_1, …]` through the stopper.
pub fn replay<T: Scalar>(curve: &[T], config: StopperConfig<T>) -> Result<Replay> {
    let (&e0, rest) = curve
        .split_first()
        .ok_or_else(|| Error::invalid("curve needs at least e_0"))?;
    let mut s = EntropyStopper::new(e0, (), config)?;
    let mut decisions = Vec::with_capacity(rest.len());
    for &e in rest {
        let d = s.step(e, || ())?;
        decisions.push(d);
        if d == StepDecision::Stop {
            break;
        }
    }
    Ok(Replay {
        decisions,
        best_iter: s.best_iter(),
        iterations: s.iterations(),
        stopped: s.is_stopped(),
    })
}
