use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind<T> {
    Sgd,
    Adam { beta1: T, beta2: T, eps: T },
}

impl<T: Scalar> OptimizerKind<T> {
    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: T::of(0.9),
            beta2: T::of(0.999),
            eps: T::of(1e-8),
        }
    }
}

/// Weight decay is applied as an L2 term added to the gradient; it is the
/// only auxiliary loss the models use.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig<T> {
    pub kind: OptimizerKind<T>,
    pub lr: T,
    pub weight_decay: T,
}

impl<T: Scalar> OptimizerConfig<T> {
    pub fn adam(lr: T) -> Self {
        Self {
            kind: OptimizerKind::adam(),
            lr,
            weight_decay: T::zero(),
        }
    }

    pub fn sgd(lr: T) -> Self {
        Self {
            kind: OptimizerKind::Sgd,
            lr,
            weight_decay: T::zero(),
        }
    }

    pub fn with_weight_decay(mut self, wd: T) -> Self {
        self.weight_decay = wd;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= T::zero()) || !self.lr.is_finite() {
            return Err(Error::invalid(format!("learning rate {} must be >= 0", self.lr)));
        }
        if !(self.weight_decay >= T::zero()) {
            return Err(Error::invalid("weight decay must be >= 0"));
        }
        if let OptimizerKind::Adam { beta1, beta2, eps } = self.kind {
            let unit = |b: T| b >= T::zero() && b < T::one();
            if !unit(beta1) || !unit(beta2) || !(eps > T::zero()) {
                return Err(Error::invalid("Adam needs beta1, beta2 in [0, 1) and eps > 0"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Optimizer<T> {
    config: OptimizerConfig<T>,
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
}

impl<T: Scalar> Optimizer<T> {
    pub fn new(config: OptimizerConfig<T>) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            m: Vec::new(),
            v: Vec::new(),
            t: 0,
        })
    }

    pub fn config(&self) -> &OptimizerConfig<T> {
        &self.config
    }

    pub fn steps_taken(&self) -> i32 {
        self.t
    }

    pub fn step(&mut self, params: &mut [T], grad: &[T]) -> Result<()> {
        if params.len() != grad.len() {
            return Err(Error::shape(format!(
                "{} parameters but {} gradient entries",
                params.len(),
                grad.len()
            )));
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::numerical("non-finite gradient"));
        }
        let OptimizerConfig {
            kind,
            lr,
            weight_decay: wd,
        } = self.config;
        match kind {
            OptimizerKind::Sgd => {
                for (p, &g) in params.iter_mut().zip(grad) {
                    *p -= lr * (g + wd * *p);
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                if self.m.len() != params.len() {
                    self.m = vec![T::zero(); params.len()];
                    self.v = vec![T::zero(); params.len()];
                    self.t = 0;
                }
                self.t += 1;
                let c1 = T::one() - beta1.powi(self.t);
                let c2 = T::one() - beta2.powi(self.t);
                for ((p, &g), (m, v)) in params
                    .iter_mut()
                    .zip(grad)
                    .zip(self.m.iter_mut().zip(self.v.iter_mut()))
                {
                    let g = g + wd * *p;
                    *m = beta1 * *m + (T::one() - beta1) * g;
                    *v = beta2 * *v + (T::one() - beta2) * g * g;
                    let m_hat = *m / c1;
                    let v_hat = *v / c2;
                    *p -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::numerical("parameters became non-finite"));
        }
        Ok(())
    }
}
