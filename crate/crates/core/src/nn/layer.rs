use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation<T> {
    Relu,
    LeakyRelu(T),
    Sigmoid,
    Identity,
}

impl<T: Scalar> Activation<T> {
    #[inline]
    pub fn apply(&self, z: T) -> T {
        match *self {
            Activation::Relu => z.max(T::zero()),
            Activation::LeakyRelu(slope) => {
                if z > T::zero() {
                    z
                } else {
                    slope * z
                }
            }
            Activation::Sigmoid => T::one() / (T::one() + (-z).exp()),
            Activation::Identity => z,
        }
    }

    /// Derivative at pre-activation `z`, given `a = apply(z)`.
    #[inline]
    pub fn derivative(&self, z: T, a: T) -> T {
        match *self {
            Activation::Relu => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::LeakyRelu(slope) => {
                if z > T::zero() {
                    T::one()
                } else {
                    slope
                }
            }
            Activation::Sigmoid => a * (T::one() - a),
            Activation::Identity => T::one(),
        }
    }

    /// Whether the derivative jumps at zero.
    pub fn has_kink(&self) -> bool {
        matches!(self, Activation::Relu | Activation::LeakyRelu(_))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec<T> {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation<T>,
    pub use_bias: bool,
}

impl<T: Scalar> LayerSpec<T> {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation<T>, use_bias: bool) -> Self {
        Self {
            in_dim,
            out_dim,
            activation,
            use_bias,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_dim == 0 || self.out_dim == 0 {
            return Err(Error::invalid("layer dimensions must be at least 1"));
        }
        if let Activation::LeakyRelu(s) = self.activation {
            if !(s > T::zero() && s < T::one()) {
                return Err(Error::invalid(format!("leaky relu slope {s} outside (0, 1)")));
            }
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.in_dim * self.out_dim + if self.use_bias { self.out_dim } else { 0 }
    }
}
