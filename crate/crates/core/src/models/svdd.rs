use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{squared_error, OdModel};
use crate::nn::{Activation, LayerSpec, Mlp};
use crate::scalar::Scalar;
use crate::tensor::{Matrix, RngStream};

/// Bias-free MLP embedding with leaky-ReLU hidden layers, e.g. `[8, 32, 16]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvddConfig<T> {
    pub dims: Vec<usize>,
    pub relu_slope: T,
}

impl<T: Scalar> SvddConfig<T> {
    pub fn default_for(input_dim: usize) -> Self {
        Self {
            dims: vec![input_dim, 32, 16],
            relu_slope: T::of(0.1),
        }
    }
}

/// One-class hypersphere model: `J(x) = ‖φ(x) − c‖²` with a fixed center `c`.
#[derive(Clone, Debug)]
pub struct DeepSvddLiteModel<T> {
    net: Mlp<T>,
    center: Option<Vec<T>>,
}

/// Coordinates of the center closer to zero than this are pushed out to it.
pub const CENTER_FLOOR: f64 = 0.1;

impl<T: Scalar> DeepSvddLiteModel<T> {
    /// Builds the network; call [`Self::init_center`] before computing losses.
    pub fn new(config: &SvddConfig<T>, rng: &mut RngStream) -> Result<Self> {
        if config.dims.len() < 2 {
            return Err(Error::invalid("embedding network needs at least one layer"));
        }
        let last = config.dims.len() - 2;
        let specs: Vec<LayerSpec<T>> = config
            .dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i == last {
                    Activation::Identity
                } else {
                    Activation::LeakyRelu(config.relu_slope)
                };
                LayerSpec::new(w[0], w[1], act, false)
            })
            .collect();
        Ok(Self {
            net: Mlp::new(&specs, T::zero(), rng)?,
            center: None,
        })
    }

    /// Builds the network and fixes the center from `x` under the initial weights.
    pub fn with_center(config: &SvddConfig<T>, x: &Matrix<T>, rng: &mut RngStream) -> Result<Self> {
        let mut m = Self::new(config, rng)?;
        m.init_center(x)?;
        Ok(m)
    }

    /// `c = mean φ(x)` in eval mode, with every `|c_k| < 0.1` moved to
    /// `±0.1` (sign kept, zero goes positive).
    pub fn init_center(&mut self, x: &Matrix<T>) -> Result<&[T]> {
        if x.rows() == 0 {
            return Err(Error::invalid("center needs at least one sample"));
        }
        let emb = self.net.predict(x)?;
        let n = T::of_usize(emb.rows());
        let floor = T::of(CENTER_FLOOR);
        let c = emb
            .col_sums()
            .into_iter()
            .map(|s| {
                let v = s / n;
                if v.abs() >= floor {
                    v
                } else if v < T::zero() {
                    -floor
                } else {
                    floor
                }
            })
            .collect();
        Ok(self.center.insert(c))
    }

    pub fn center(&self) -> Option<&[T]> {
        self.center.as_deref()
    }

    pub fn embed(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        self.net.predict(x)
    }
}

impl<T: Scalar> OdModel<T> for DeepSvddLiteModel<T> {
    fn network(&self) -> &Mlp<T> {
        &self.net
    }

    fn network_mut(&mut self) -> &mut Mlp<T> {
        &mut self.net
    }

    fn losses_from_output(&self, _x: &Matrix<T>, output: &Matrix<T>) -> Result<(Vec<T>, Matrix<T>)> {
        let c = self
            .center
            .as_deref()
            .ok_or_else(|| Error::ContractViolation("hypersphere center not initialized".into()))?;
        squared_error(output, output, Some(c), T::one())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::grad_check;

    fn random(rows: usize, cols: usize, rng: &mut RngStream) -> Matrix<f64> {
        Matrix::new(rows, cols, (0..rows * cols).map(|_| rng.normal()).collect()).unwrap()
    }

    #[test]
    fn no_bias_anywhere() {
        let mut rng = RngStream::new(1);
        let m = DeepSvddLiteModel::<f64>::new(&SvddConfig::default_for(8), &mut rng).unwrap();
        assert!(m.network().specs().iter().all(|s| !s.use_bias));
        assert_eq!(m.network().param_count(), 8 * 32 + 32 * 16);
    }

    #[test]
    fn single_sample_center() {
        let mut rng = RngStream::new(2);
        let x = random(1, 8, &mut rng);
        let m = DeepSvddLiteModel::with_center(&SvddConfig::default_for(8), &x, &mut rng).unwrap();
        let phi = m.embed(&x).unwrap();
        for (&c, &p) in m.center().unwrap().iter().zip(phi.row(0)) {
            if p.abs() >= 0.1 {
                assert_eq!(c, p);
            } else {
                assert_eq!(c, 0.1f64.copysign(if p < 0.0 { -1.0 } else { 1.0 }));
            }
        }
    }

    #[test]
    fn zero_network_center_is_floor() {
        let mut rng = RngStream::new(3);
        let cfg = SvddConfig { dims: vec![4, 3], relu_slope: 0.1 };
        let mut m = DeepSvddLiteModel::<f64>::new(&cfg, &mut rng).unwrap();
        m.network_mut().set_layer_weights(0, Matrix::zeros(4, 3)).unwrap();
        m.init_center(&random(5, 4, &mut rng)).unwrap();
        assert_eq!(m.center().unwrap(), &[0.1, 0.1, 0.1]);
        // zero embeddings with a clamped center still carry loss
        let s = m.score(&random(3, 4, &mut rng)).unwrap();
        assert!(s.iter().all(|&l| (l - 0.03).abs() < 1e-15));
    }

    #[test]
    fn symmetric_samples_with_odd_map_clamp() {
        // a single linear layer is odd, so ±x average to the zero vector
        let mut rng = RngStream::new(4);
        let cfg = SvddConfig { dims: vec![3, 2], relu_slope: 0.1 };
        let mut m = DeepSvddLiteModel::<f64>::new(&cfg, &mut rng).unwrap();
        let x = Matrix::from_rows(&[[1.0, -2.0, 0.5], [-1.0, 2.0, -0.5]]).unwrap();
        m.init_center(&x).unwrap();
        assert!(m.center().unwrap().iter().all(|c| c.abs() == 0.1));
    }

    #[test]
    fn loss_requires_center() {
        let mut rng = RngStream::new(5);
        let m = DeepSvddLiteModel::<f64>::new(&SvddConfig::default_for(4), &mut rng).unwrap();
        assert!(matches!(m.score(&random(2, 4, &mut rng)), Err(Error::ContractViolation(_))));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = RngStream::new(6);
        let x = random(12, 5, &mut rng);
        let cfg = SvddConfig { dims: vec![5, 7, 3], relu_slope: 0.1 };
        let m = DeepSvddLiteModel::with_center(&cfg, &x, &mut rng).unwrap();
        let loss = |out: &Matrix<f64>| {
            let (l, up) = m.losses_from_output(&x, out)?;
            Ok((l.iter().sum::<f64>() / l.len() as f64, up))
        };
        let err = grad_check(m.network(), loss, &x, 1e-5).unwrap();
        assert!(err < 1e-4, "{err}");
    }
}
