//! Deep outlier detectors behind a common contract.
//!
//! A model's training objective is a mean of nonnegative per-sample losses
//! `J(x; Θ)`, and its outlier score is exactly that loss evaluated with
//! dropout off. Ranking by score and ranking by loss therefore coincide for
//! every model here, which is what lets the loss distribution stand in for
//! detection quality.

mod autoencoder;
mod svdd;

pub use autoencoder::{AeConfig, AutoencoderModel};
pub use svdd::{DeepSvddLiteModel, SvddConfig};

use crate::error::{Error, Result};
use crate::nn::{ForwardMode, Mlp, ParamSnapshot};
use crate::scalar::Scalar;
use crate::tensor::{Matrix, RngStream};

pub trait OdModel<T: Scalar>: Send {
    fn network(&self) -> &Mlp<T>;

    fn network_mut(&mut self) -> &mut Mlp<T>;

    /// Per-sample losses and `∂(mean loss)/∂output` for a network output.
    fn losses_from_output(&self, x: &Matrix<T>, output: &Matrix<T>) -> Result<(Vec<T>, Matrix<T>)>;

    fn input_dim(&self) -> usize {
        self.network().input_dim()
    }

    fn per_sample_loss(&self, x: &Matrix<T>, mode: ForwardMode, rng: &mut RngStream) -> Result<Vec<T>> {
        let cache = self.network().forward(x, mode, rng)?;
        let (losses, _) = self.losses_from_output(x, cache.output())?;
        check_losses(&losses)?;
        Ok(losses)
    }

    /// Outlier scores: eval-mode per-sample loss. Higher means more outlying.
    fn score(&self, x: &Matrix<T>) -> Result<Vec<T>> {
        let mut unused = RngStream::new(0);
        self.per_sample_loss(x, ForwardMode::Eval, &mut unused)
    }

    /// Mean loss over `batch` and its gradient with respect to the parameters.
    fn loss_gradient(&self, batch: &Matrix<T>, mode: ForwardMode, rng: &mut RngStream) -> Result<(T, Vec<T>)> {
        let net = self.network();
        let cache = net.forward(batch, mode, rng)?;
        let (losses, upstream) = self.losses_from_output(batch, cache.output())?;
        check_losses(&losses)?;
        let mean = losses.iter().copied().sum::<T>() / T::of_usize(losses.len().max(1));
        let grad = net.backward(&cache, &upstream)?;
        Ok((mean, grad))
    }

    /// Gradient of `J(x_i; Θ)` for every row, computed one row at a time in
    /// eval mode.
    fn per_sample_gradients(&self, x: &Matrix<T>) -> Result<Vec<Vec<T>>> {
        let mut unused = RngStream::new(0);
        (0..x.rows())
            .map(|i| {
                let row = x.select_rows(&[i])?;
                Ok(self.loss_gradient(&row, ForwardMode::Eval, &mut unused)?.1)
            })
            .collect()
    }

    fn params(&self) -> Vec<T> {
        self.network().params()
    }

    fn set_params(&mut self, values: &[T]) -> Result<()> {
        self.network_mut().set_params(values)
    }

    fn snapshot(&self) -> ParamSnapshot<T> {
        self.network().snapshot()
    }

    fn restore(&mut self, snapshot: &ParamSnapshot<T>) -> Result<()> {
        self.network_mut().restore(snapshot)
    }
}

fn check_losses<T: Scalar>(losses: &[T]) -> Result<()> {
    if losses.iter().any(|l| !l.is_finite()) {
        return Err(Error::numerical("non-finite per-sample loss"));
    }
    Ok(())
}

/// Squared Euclidean distance of each output row to `target_row`, or to the
/// matching input row when `target_row` is `None`, divided by `per_row_scale`.
/// Also returns the gradient of the batch mean with respect to the output.
fn squared_error<T: Scalar>(
    output: &Matrix<T>,
    reference: &Matrix<T>,
    target_row: Option<&[T]>,
    per_row_scale: T,
) -> Result<(Vec<T>, Matrix<T>)> {
    let n = output.rows();
    let cols = output.cols();
    let grad_scale = T::of(2.0) / (per_row_scale * T::of_usize(n.max(1)));
    let mut losses = Vec::with_capacity(n);
    let mut grad = Vec::with_capacity(n * cols);
    for i in 0..n {
        let target = target_row.unwrap_or_else(|| reference.row(i));
        let mut s = T::zero();
        for (&o, &t) in output.row(i).iter().zip(target) {
            let d = o - t;
            s += d * d;
            grad.push(d * grad_scale);
        }
        losses.push(s / per_row_scale);
    }
    Ok((losses, Matrix::new(n, cols, grad).map_err(|_| Error::numerical("non-finite output"))?))
}
