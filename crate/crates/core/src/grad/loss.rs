use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Numerically stable softmax.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&v| (v - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Cross-entropy of one logit vector against `label`, with the gradient
/// `softmax - one_hot`. Infinite logits are accepted for limit cases, NaN is not.
pub fn softmax_cross_entropy<T: Scalar>(logits: &[T], label: usize) -> Result<(T, Vec<T>)> {
    if label >= logits.len() {
        return Err(Error::LabelOutOfRange(label));
    }
    if logits.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite);
    }
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    if max == T::infinity() {
        // All mass sits on the infinite entries.
        let winners = logits.iter().filter(|&&v| v == max).count();
        let p = T::one() / T::of(winners as f64);
        let mut grad: Vec<T> = logits.iter().map(|&v| if v == max { p } else { T::zero() }).collect();
        grad[label] -= T::one();
        let loss = if logits[label] == max {
            T::of((winners as f64).ln())
        } else {
            T::infinity()
        };
        return Ok((loss, grad));
    }
    let lse = max + logits.iter().map(|&v| (v - max).exp()).sum::<T>().ln();
    let mut grad: Vec<T> = logits.iter().map(|&v| (v - lse).exp()).collect();
    grad[label] -= T::one();
    Ok((lse - logits[label], grad))
}

/// Mean cross-entropy over a `[batch, classes]` tensor; the gradient carries
/// the `1 / batch` factor.
pub fn batch_cross_entropy<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<(f64, Tensor<T>)> {
    let [n, k] = logits.shape()[..] else {
        return Err(Error::ShapeMismatch(format!("logits {:?}", logits.shape())));
    };
    if labels.len() != n || n == 0 {
        return Err(Error::ShapeMismatch(format!("{} labels for batch {n}", labels.len())));
    }
    let scale = T::one() / T::of(n as f64);
    let mut total = 0.0;
    let mut grad = Vec::with_capacity(n * k);
    for (row, &label) in logits.data().chunks(k).zip(labels) {
        let (loss, g) = softmax_cross_entropy(row, label)?;
        total += loss.f64();
        grad.extend(g.into_iter().map(|v| v * scale));
    }
    Ok((total / n as f64, Tensor::new(vec![n, k], grad)?))
}
