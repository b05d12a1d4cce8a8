use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{squared_error, OdModel};
use crate::nn::{Activation, LayerSpec, Mlp};
use crate::scalar::Scalar;
use crate::tensor::{Matrix, RngStream};

/// Symmetric fully connected autoencoder.
///
/// The encoder has `layers` dense maps: `d → h_dim → … → h_dim → bottleneck`,
/// where the bottleneck is `max(1, ⌊d/2⌋)` for two layers and halves for each
/// extra layer. The decoder mirrors it. `activation` follows every layer but
/// the output, which is linear.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AeConfig<T> {
    pub input_dim: usize,
    pub h_dim: usize,
    pub layers: usize,
    pub activation: Activation<T>,
    pub dropout: T,
}

impl<T: Scalar> AeConfig<T> {
    /// relu, dropout 0.2, h_dim 64, 2 layers.
    pub fn default_for(input_dim: usize) -> Self {
        Self {
            input_dim,
            h_dim: 64,
            layers: 2,
            activation: Activation::Relu,
            dropout: T::of(0.2),
        }
    }

    pub fn bottleneck(&self) -> usize {
        let base = (self.input_dim / 2).max(1);
        (base >> self.layers.saturating_sub(2)).max(1)
    }

    /// Widths from input to output, e.g. `[8, 64, 4, 64, 8]`.
    pub fn dims(&self) -> Vec<usize> {
        let mut enc = vec![self.input_dim];
        enc.extend(std::iter::repeat_n(self.h_dim, self.layers.saturating_sub(1)));
        enc.push(self.bottleneck());
        let mut dims = enc.clone();
        dims.extend(enc.iter().rev().skip(1));
        dims
    }
}

#[derive(Clone, Debug)]
pub struct AutoencoderModel<T> {
    net: Mlp<T>,
}

impl<T: Scalar> AutoencoderModel<T> {
    pub fn new(config: &AeConfig<T>, rng: &mut RngStream) -> Result<Self> {
        if config.layers == 0 {
            return Err(Error::invalid("autoencoder needs at least one encoder layer"));
        }
        Self::from_dims(&config.dims(), config.activation, config.dropout, rng)
    }

    /// Explicit widths; first and last must match.
    pub fn from_dims(dims: &[usize], activation: Activation<T>, dropout: T, rng: &mut RngStream) -> Result<Self> {
        if dims.len() < 2 || dims[0] != dims[dims.len() - 1] {
            return Err(Error::invalid(format!(
                "autoencoder widths {dims:?} must start and end at the input width"
            )));
        }
        let last = dims.len() - 2;
        let specs: Vec<LayerSpec<T>> = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i == last { Activation::Identity } else { activation };
                LayerSpec::new(w[0], w[1], act, true)
            })
            .collect();
        Ok(Self {
            net: Mlp::new(&specs, dropout, rng)?,
        })
    }

    /// Wraps an existing network whose output width equals its input width.
    pub fn from_network(net: Mlp<T>) -> Result<Self> {
        if net.input_dim() != net.output_dim() {
            return Err(Error::shape("autoencoder output width must equal input width"));
        }
        Ok(Self { net })
    }

    pub fn reconstruct(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        self.net.predict(x)
    }
}

impl<T: Scalar> OdModel<T> for AutoencoderModel<T> {
    fn network(&self) -> &Mlp<T> {
        &self.net
    }

    fn network_mut(&mut self) -> &mut Mlp<T> {
        &mut self.net
    }

    /// `J(x) = ‖x − x̂‖² / d`.
    fn losses_from_output(&self, x: &Matrix<T>, output: &Matrix<T>) -> Result<(Vec<T>, Matrix<T>)> {
        if x.shape() != output.shape() {
            return Err(Error::shape(format!(
                "reconstruction {:?} vs input {:?}",
                output.shape(),
                x.shape()
            )));
        }
        squared_error(output, x, None, T::of_usize(x.cols()))
    }
}
