//! Gaussian negative log-likelihood and its gradient through a network.

use super::network::{Cache, GaussianPrediction, Network, Samples};
use crate::error::{Error, Result};
use crate::real::{sigmoid, Real};

/// `0.5 * ln(2 pi)`, the constant that turns the loss into a true negative log-density.
pub const NLL_CONST: f64 = 0.918_938_533_204_672_7;

/// Mean over all elements of `ln(var)/2 + (y - mu)^2 / (2 var) + ln(2 pi)/2`.
pub fn nll_loss<T: Real>(pred: &GaussianPrediction<T>, y: &[T]) -> Result<T> {
    if pred.len() != y.len() {
        return Err(Error::dims(pred.len(), y.len(), "prediction/target length"));
    }
    if y.is_empty() {
        return Err(Error::Domain("empty target".into()));
    }
    let mut total = T::zero();
    for ((&mu, &var), &target) in pred.mean.iter().zip(&pred.variance).zip(y) {
        if !(var > T::zero()) {
            return Err(Error::Domain(format!("variance {var} is not positive")));
        }
        total += pointwise_nll(mu, var, target);
    }
    Ok(total / T::from_usize_lossy(y.len()))
}

#[inline]
pub fn pointwise_nll<T: Real>(mu: T, var: T, y: T) -> T {
    let r = y - mu;
    T::lit(0.5) * var.ln() + r * r / (T::lit(2.0) * var) + T::lit(NLL_CONST)
}

/// Mean NLL over the selected samples and its gradient with respect to every weight.
pub fn gradient<T: Real>(net: &Network<T>, data: &Samples<T>, batch: &[usize]) -> Result<(T, Vec<T>)> {
    let mut grad = vec![T::zero(); net.param_count()];
    let loss = accumulate_gradient(net, data, batch, &mut grad)?;
    Ok((loss, grad))
}

/// Like [`gradient`] but reuses the caller's buffer, which is overwritten.
pub fn accumulate_gradient<T: Real>(
    net: &Network<T>,
    data: &Samples<T>,
    batch: &[usize],
    grad: &mut [T],
) -> Result<T> {
    let outputs = net.spec().output_dim;
    if data.target_len != outputs {
        return Err(Error::dims(outputs, data.target_len, "target width"));
    }
    if batch.is_empty() {
        return Err(Error::Domain("empty batch".into()));
    }
    grad.iter_mut().for_each(|g| *g = T::zero());
    let scale = T::one() / T::from_usize_lossy(batch.len() * outputs);
    let mut cache = Cache::default();
    let mut d_mean = vec![T::zero(); outputs];
    let mut d_raw = vec![T::zero(); outputs];
    let mut loss = T::zero();
    for &i in batch {
        net.forward_cached(data.input(i), &mut cache)?;
        for (k, &y) in data.target(i).iter().enumerate() {
            let mu = cache.mean[k];
            let raw = cache.raw_var[k];
            let var = super::network::head_variance(raw);
            loss += pointwise_nll(mu, var, y);
            let r = y - mu;
            d_mean[k] = -r / var * scale;
            let d_var = (T::lit(0.5) / var - r * r / (T::lit(2.0) * var * var)) * scale;
            d_raw[k] = d_var * sigmoid(raw);
        }
        net.backward(&cache, &d_mean, &d_raw, grad)?;
    }
    Ok(loss * scale)
}

/// Mean NLL of the network over a whole sample set.
pub fn evaluate_nll<T: Real>(net: &Network<T>, data: &Samples<T>) -> Result<T> {
    let pred = net.forward_gaussian(&data.inputs)?;
    nll_loss(&pred, &data.targets)
}
