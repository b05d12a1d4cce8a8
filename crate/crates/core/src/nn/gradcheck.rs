use crate::error::Result;
use crate::nn::{ForwardMode, Mlp};
use crate::scalar::Scalar;
use crate::tensor::{Matrix, RngStream};

/// Maximum relative disagreement between backprop and central differences.
///
/// `loss_fn` maps the network output to `(loss, ∂loss/∂output)`. Each
/// parameter is nudged by `±h` and the relative error
/// `|analytic − numeric| / max(1e-8, |analytic| + |numeric|)` is maximized
/// over all coordinates. Runs in eval mode.
pub fn grad_check<T, F>(net: &Mlp<T>, loss_fn: F, x: &Matrix<T>, h: T) -> Result<T>
where
    T: Scalar,
    F: Fn(&Matrix<T>) -> Result<(T, Matrix<T>)>,
{
    let mut rng = RngStream::new(0);
    let cache = net.forward(x, ForwardMode::Eval, &mut rng)?;
    let (_, upstream) = loss_fn(cache.output())?;
    let analytic = net.backward(&cache, &upstream)?;
    let numeric = finite_difference(net.params(), |p| {
        let mut probe = net.clone();
        probe.set_params(p)?;
        Ok(loss_fn(&probe.predict(x)?)?.0)
    }, h)?;
    Ok(max_relative_error(&analytic, &numeric))
}

/// Central-difference gradient of `f` at `params`.
pub fn finite_difference<T, F>(mut params: Vec<T>, mut f: F, h: T) -> Result<Vec<T>>
where
    T: Scalar,
    F: FnMut(&[T]) -> Result<T>,
{
    let two_h = h + h;
    let mut out = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let orig = params[i];
        params[i] = orig + h;
        let plus = f(&params)?;
        params[i] = orig - h;
        let minus = f(&params)?;
        params[i] = orig;
        out.push((plus - minus) / two_h);
    }
    Ok(out)
}

pub fn max_relative_error<T: Scalar>(analytic: &[T], numeric: &[T]) -> T {
    let floor = T::of(1e-8);
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| (a - n).abs() / floor.max(a.abs() + n.abs()))
        .fold(T::zero(), T::max)
}
