use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, LayerSpec};
use crate::scalar::Scalar;
use crate::tensor::{Matrix, RngStream};

/// Every parameter mutation draws a fresh tag so a forward cache can tell
/// whether it still describes the current weights.
static PARAM_VERSION: AtomicU64 = AtomicU64::new(1);

fn next_version() -> u64 {
    PARAM_VERSION.fetch_add(1, Ordering::Relaxed)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForwardMode {
    Train,
    /// Dropout off; output is a pure function of the input and parameters.
    Eval,
}

#[derive(Clone, Debug)]
struct Dense<T> {
    spec: LayerSpec<T>,
    /// `in_dim × out_dim`
    weights: Matrix<T>,
    bias: Vec<T>,
}

/// Shape of one layer's parameters inside a flat snapshot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamShape {
    pub in_dim: usize,
    pub out_dim: usize,
    pub bias: bool,
}

impl ParamShape {
    fn len(&self) -> usize {
        self.in_dim * self.out_dim + if self.bias { self.out_dim } else { 0 }
    }
}

/// All weights and biases of a network, flattened layer by layer
/// (weights row-major, then bias).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSnapshot<T> {
    pub values: Vec<T>,
    pub manifest: Vec<ParamShape>,
}

impl<T> ParamSnapshot<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Activations recorded by [`Mlp::forward`] for a later [`Mlp::backward`].
#[derive(Clone, Debug)]
pub struct ForwardCache<T> {
    inputs: Vec<Matrix<T>>,
    pre: Vec<Matrix<T>>,
    post: Vec<Matrix<T>>,
    masks: Vec<Option<Matrix<T>>>,
    output: Matrix<T>,
    version: u64,
}

impl<T: Scalar> ForwardCache<T> {
    pub fn output(&self) -> &Matrix<T> {
        &self.output
    }

    pub fn into_output(self) -> Matrix<T> {
        self.output
    }

    /// Activations after each layer (post-dropout for hidden layers).
    pub fn layer_outputs(&self) -> Vec<&Matrix<T>> {
        self.inputs.iter().skip(1).chain(std::iter::once(&self.output)).collect()
    }

    /// Smallest |z| over all pre-activations. Finite-difference checks skip
    /// configurations that sit too close to a ReLU kink.
    pub fn min_abs_preactivation(&self) -> T {
        self.pre
            .iter()
            .flat_map(|m| m.data().iter())
            .map(|z| z.abs())
            .fold(T::infinity(), T::min)
    }
}

/// Feed-forward network of dense layers.
///
/// Dropout, when enabled, follows the activation of every layer except the
/// last and uses inverted scaling, so evaluation needs no rescaling.
#[derive(Clone, Debug)]
pub struct Mlp<T> {
    layers: Vec<Dense<T>>,
    dropout: T,
    version: u64,
}

impl<T: Scalar> Mlp<T> {
    /// Glorot-uniform weights, zero biases.
    pub fn new(specs: &[LayerSpec<T>], dropout: T, rng: &mut RngStream) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::invalid("network needs at least one layer"));
        }
        if !(dropout >= T::zero() && dropout <= T::one()) {
            return Err(Error::invalid(format!("dropout rate {dropout} outside [0, 1]")));
        }
        for (i, s) in specs.iter().enumerate() {
            s.validate()?;
            if i > 0 && specs[i - 1].out_dim != s.in_dim {
                return Err(Error::shape(format!(
                    "layer {i} expects {} inputs but layer {} emits {}",
                    s.in_dim,
                    i - 1,
                    specs[i - 1].out_dim
                )));
            }
        }
        let layers = specs
            .iter()
            .map(|&spec| {
                let limit = (6.0 / (spec.in_dim + spec.out_dim) as f64).sqrt();
                let w = (0..spec.in_dim * spec.out_dim)
                    .map(|_| T::of(rng.uniform_range(-limit, limit)))
                    .collect();
                Dense {
                    spec,
                    weights: Matrix::new(spec.in_dim, spec.out_dim, w)
                        .expect("initialized weights are finite"),
                    bias: if spec.use_bias {
                        vec![T::zero(); spec.out_dim]
                    } else {
                        Vec::new()
                    },
                }
            })
            .collect();
        Ok(Self {
            layers,
            dropout,
            version: next_version(),
        })
    }

    pub fn specs(&self) -> Vec<LayerSpec<T>> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].spec.in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].spec.out_dim
    }

    pub fn dropout(&self) -> T {
        self.dropout
    }

    pub fn set_dropout(&mut self, rate: T) -> Result<()> {
        if !(rate >= T::zero() && rate <= T::one()) {
            return Err(Error::invalid(format!("dropout rate {rate} outside [0, 1]")));
        }
        self.dropout = rate;
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.spec.param_count()).sum()
    }

    pub fn forward(&self, x: &Matrix<T>, mode: ForwardMode, rng: &mut RngStream) -> Result<ForwardCache<T>> {
        if x.cols() != self.input_dim() {
            return Err(Error::shape(format!(
                "network expects {} features, got {}",
                self.input_dim(),
                x.cols()
            )));
        }
        let depth = self.layers.len();
        let mut inputs = Vec::with_capacity(depth);
        let mut pre = Vec::with_capacity(depth);
        let mut post = Vec::with_capacity(depth);
        let mut masks = Vec::with_capacity(depth);
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = h.matmul(&layer.weights)?;
            if layer.spec.use_bias {
                z.add_row_broadcast(&layer.bias)?;
            }
            let act = layer.spec.activation;
            let a = z.map(|v| act.apply(v));
            let hidden = i + 1 < depth;
            let mask = if hidden && mode == ForwardMode::Train && self.dropout > T::zero() {
                Some(self.dropout_mask(a.rows(), a.cols(), rng))
            } else {
                None
            };
            let next = match &mask {
                Some(m) => a.hadamard(m)?,
                None => a.clone(),
            };
            inputs.push(std::mem::replace(&mut h, next));
            pre.push(z);
            post.push(a);
            masks.push(mask);
        }
        Ok(ForwardCache {
            inputs,
            pre,
            post,
            masks,
            output: h,
            version: self.version,
        })
    }

    /// Forward pass in eval mode, returning only the output.
    pub fn predict(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        // eval mode never touches the stream
        let mut unused = RngStream::new(0);
        Ok(self.forward(x, ForwardMode::Eval, &mut unused)?.into_output())
    }

    fn dropout_mask(&self, rows: usize, cols: usize, rng: &mut RngStream) -> Matrix<T> {
        let keep = T::one() - self.dropout;
        let scale = if keep > T::zero() { T::one() / keep } else { T::zero() };
        let p_drop = self.dropout.as_f64();
        let data = (0..rows * cols)
            .map(|_| if rng.uniform() < p_drop { T::zero() } else { scale })
            .collect();
        Matrix::new(rows, cols, data).expect("mask entries are finite")
    }

    /// Gradient of a scalar loss with respect to every parameter, in snapshot
    /// layout, given `upstream = ∂loss/∂output`.
    pub fn backward(&self, cache: &ForwardCache<T>, upstream: &Matrix<T>) -> Result<Vec<T>> {
        if cache.version != self.version {
            return Err(Error::ContractViolation(
                "forward cache was recorded before the parameters changed".into(),
            ));
        }
        if upstream.shape() != cache.output.shape() {
            return Err(Error::shape(format!(
                "upstream gradient {:?} vs output {:?}",
                upstream.shape(),
                cache.output.shape()
            )));
        }
        let mut per_layer: Vec<Vec<T>> = Vec::with_capacity(self.layers.len());
        let mut grad = upstream.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            if let Some(mask) = &cache.masks[i] {
                grad = grad.hadamard(mask)?;
            }
            let act = layer.spec.activation;
            let z = &cache.pre[i];
            let a = &cache.post[i];
            let dz_data = grad
                .data()
                .iter()
                .zip(z.data().iter().zip(a.data()))
                .map(|(&g, (&zv, &av))| g * act.derivative(zv, av))
                .collect();
            let dz = Matrix::new(grad.rows(), grad.cols(), dz_data)
                .map_err(|_| Error::numerical("non-finite gradient during backprop"))?;
            let mut g = cache.inputs[i].t_matmul(&dz)?.into_data();
            if layer.spec.use_bias {
                g.extend(dz.col_sums());
            }
            per_layer.push(g);
            if i > 0 {
                grad = dz.matmul_t(&layer.weights)?;
            }
        }
        per_layer.reverse();
        Ok(per_layer.concat())
    }

    pub fn manifest(&self) -> Vec<ParamShape> {
        self.layers
            .iter()
            .map(|l| ParamShape {
                in_dim: l.spec.in_dim,
                out_dim: l.spec.out_dim,
                bias: l.spec.use_bias,
            })
            .collect()
    }

    pub fn params(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(l.weights.data());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_params(&mut self, values: &[T]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::shape(format!(
                "{} parameter values for a network with {}",
                values.len(),
                self.param_count()
            )));
        }
        let mut offset = 0;
        for l in &mut self.layers {
            let nw = l.weights.data().len();
            l.weights.data_mut().copy_from_slice(&values[offset..offset + nw]);
            offset += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&values[offset..offset + nb]);
            offset += nb;
        }
        self.version = next_version();
        Ok(())
    }

    pub fn snapshot(&self) -> ParamSnapshot<T> {
        ParamSnapshot {
            values: self.params(),
            manifest: self.manifest(),
        }
    }

    pub fn restore(&mut self, snapshot: &ParamSnapshot<T>) -> Result<()> {
        if snapshot.manifest != self.manifest() {
            return Err(Error::shape("snapshot manifest does not match network"));
        }
        debug_assert_eq!(
            snapshot.manifest.iter().map(ParamShape::len).sum::<usize>(),
            snapshot.values.len()
        );
        self.set_params(&snapshot.values)
    }

    /// Overwrites one layer's weights. Mostly useful for hand-built test nets.
    pub fn set_layer_weights(&mut self, layer: usize, weights: Matrix<T>) -> Result<()> {
        let l = self
            .layers
            .get_mut(layer)
            .ok_or_else(|| Error::invalid(format!("no layer {layer}")))?;
        if weights.shape() != l.weights.shape() {
            return Err(Error::shape(format!(
                "layer {layer} weights are {:?}, got {:?}",
                l.weights.shape(),
                weights.shape()
            )));
        }
        l.weights = weights;
        self.version = next_version();
        Ok(())
    }

    pub fn activation(&self, layer: usize) -> Option<Activation<T>> {
        self.layers.get(layer).map(|l| l.spec.activation)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear(d: usize, rng: &mut RngStream) -> Mlp<f64> {
        Mlp::new(&[LayerSpec::new(d, d, Activation::Identity, true)], 0.0, rng).unwrap()
    }

    fn random_matrix(rows: usize, cols: usize, rng: &mut RngStream) -> Matrix<f64> {
        Matrix::new(rows, cols, (0..rows * cols).map(|_| rng.normal()).collect()).unwrap()
    }

    #[test]
    fn identity_network_passes_input_through() {
        let mut rng = RngStream::new(1);
        let mut net = linear(3, &mut rng);
        net.set_layer_weights(0, Matrix::identity(3)).unwrap();
        let x = random_matrix(5, 3, &mut rng);
        assert_eq!(net.predict(&x).unwrap(), x);
    }

    #[test]
    fn eval_is_deterministic() {
        let mut rng = RngStream::new(2);
        let specs = [
            LayerSpec::new(4, 6, Activation::Relu, true),
            LayerSpec::new(6, 4, Activation::Identity, true),
        ];
        let net = Mlp::new(&specs, 0.5, &mut rng).unwrap();
        let x = random_matrix(7, 4, &mut rng);
        let a = net.forward(&x, ForwardMode::Eval, &mut RngStream::new(10)).unwrap();
        let b = net.forward(&x, ForwardMode::Eval, &mut RngStream::new(20)).unwrap();
        assert_eq!(a.output(), b.output());
    }

    #[test]
    fn full_dropout_zeroes_hidden() {
        let mut rng = RngStream::new(3);
        let specs = [
            LayerSpec::new(4, 6, Activation::Sigmoid, true),
            LayerSpec::new(6, 4, Activation::Identity, true),
        ];
        let net = Mlp::new(&specs, 1.0, &mut rng).unwrap();
        let x = random_matrix(3, 4, &mut rng);
        let cache = net.forward(&x, ForwardMode::Train, &mut rng).unwrap();
        assert!(cache.layer_outputs()[0].data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn wrong_input_width() {
        let mut rng = RngStream::new(4);
        let net = linear(3, &mut rng);
        let x = Matrix::zeros(2, 4);
        assert!(matches!(net.predict(&x), Err(Error::Shape(_))));
    }

    #[test]
    fn zero_upstream_zero_gradient() {
        let mut rng = RngStream::new(5);
        let specs = [
            LayerSpec::new(3, 5, Activation::Sigmoid, true),
            LayerSpec::new(5, 2, Activation::Identity, true),
        ];
        let net = Mlp::new(&specs, 0.0, &mut rng).unwrap();
        let x = random_matrix(4, 3, &mut rng);
        let cache = net.forward(&x, ForwardMode::Eval, &mut rng).unwrap();
        let g = net.backward(&cache, &Matrix::zeros(4, 2)).unwrap();
        assert_eq!(g.len(), net.param_count());
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_least_squares_gradient() {
        // loss = (1/n)·Σ‖xW − y‖², closed form ∂/∂W = 2·Xᵀ(XW − Y)/n
        let mut rng = RngStream::new(6);
        let specs = [LayerSpec::new(3, 2, Activation::Identity, false)];
        let net = Mlp::new(&specs, 0.0, &mut rng).unwrap();
        let x = random_matrix(6, 3, &mut rng);
        let y = random_matrix(6, 2, &mut rng);
        let n = 6.0;
        let cache = net.forward(&x, ForwardMode::Eval, &mut rng).unwrap();
        let resid = cache.output().sub(&y).unwrap();
        let upstream = resid.scale(2.0 / n);
        let g = net.backward(&cache, &upstream).unwrap();
        let w = Matrix::new(3, 2, net.params()).unwrap();
        let closed = x.transpose().matmul(&x.matmul(&w).unwrap().sub(&y).unwrap()).unwrap().scale(2.0 / n);
        for (a, b) in g.iter().zip(closed.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn stale_cache_is_rejected() {
        let mut rng = RngStream::new(7);
        let mut net = linear(2, &mut rng);
        let x = random_matrix(3, 2, &mut rng);
        let cache = net.forward(&x, ForwardMode::Eval, &mut rng).unwrap();
        let p = net.params();
        net.set_params(&p).unwrap();
        assert!(matches!(
            net.backward(&cache, &Matrix::zeros(3, 2)),
            Err(Error::ContractViolation(_))
        ));
    }

    #[test]
    fn snapshot_restore_bit_exact() {
        let mut rng = RngStream::new(8);
        let specs = [
            LayerSpec::new(4, 8, Activation::Relu, true),
            LayerSpec::new(8, 4, Activation::Identity, true),
        ];
        let mut net = Mlp::new(&specs, 0.2, &mut rng).unwrap();
        let x = random_matrix(5, 4, &mut rng);
        let before = net.predict(&x).unwrap();
        let snap = net.snapshot();
        let perturbed: Vec<f64> = snap.values.iter().map(|v| v + 0.3).collect();
        net.set_params(&perturbed).unwrap();
        assert_ne!(net.predict(&x).unwrap(), before);
        net.restore(&snap).unwrap();
        assert_eq!(net.predict(&x).unwrap(), before);
        assert_eq!(net.snapshot(), snap);
    }

    #[test]
    fn restore_rejects_foreign_manifest() {
        let mut rng = RngStream::new(9);
        let mut a = linear(2, &mut rng);
        let b = linear(3, &mut rng);
        assert!(a.restore(&b.snapshot()).is_err());
    }

    #[test]
    fn layer_shape_chain_is_checked() {
        let mut rng = RngStream::new(10);
        let specs = [
            LayerSpec::<f64>::new(4, 8, Activation::Relu, true),
            LayerSpec::new(7, 4, Activation::Identity, true),
        ];
        assert!(Mlp::new(&specs, 0.0, &mut rng).is_err());
    }
}
