use super::{Param, Scalar, Tensor};
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics, active dropout, activations cached for backward.
    Train,
    /// Running statistics, identity dropout, nothing cached.
    Eval,
}

/// A differentiable layer with explicit forward and backward passes.
///
/// `backward` consumes the activations cached by the last `Train` forward,
/// accumulates parameter gradients and returns the input gradient.
pub trait Module<T: Scalar>: Send + Sync {
    /// Eval-mode forward; touches no state, so a frozen model can be shared.
    fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>>;

    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>>;

    fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>>;

    fn visit(&self, _f: &mut dyn FnMut(&Param<T>)) {}

    fn visit_mut(&mut self, _f: &mut dyn FnMut(&mut Param<T>)) {}

    /// Makes stochastic layers reuse their last draw; a no-op elsewhere.
    fn freeze_dropout(&mut self, _frozen: bool) {}

    /// Short description for model summaries.
    fn describe(&self) -> String;
}

/// Sum of learnable scalars in a module.
pub fn count_learnable<T: Scalar>(m: &dyn Module<T>) -> usize {
    let mut n = 0;
    m.visit(&mut |p| {
        if p.learnable {
            n += p.len();
        }
    });
    n
}

/// Layers applied in order.
#[derive(Default)]
pub struct Sequential<T> {
    pub layers: Vec<Box<dyn Module<T>>>,
}

impl<T: Scalar> Sequential<T> {
    pub fn new(layers: Vec<Box<dyn Module<T>>>) -> Self {
        Self { layers }
    }
}

impl<T: Scalar> Module<T> for Sequential<T> {
    fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut layers = self.layers.iter();
        let Some(first) = layers.next() else {
            return Ok(x.clone());
        };
        let mut h = first.infer(x)?;
        for l in layers {
            h = l.infer(&h)?;
        }
        Ok(h)
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let mut layers = self.layers.iter_mut();
        let Some(first) = layers.next() else {
            return Ok(x.clone());
        };
        let mut h = first.forward(x, mode)?;
        for l in layers {
            h = l.forward(&h, mode)?;
        }
        Ok(h)
    }

    fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let mut g = grad.clone();
        for l in self.layers.iter_mut().rev() {
            g = l.backward(&g)?;
        }
        Ok(g)
    }

    fn visit(&self, f: &mut dyn FnMut(&Param<T>)) {
        self.layers.iter().for_each(|l| l.visit(f));
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        self.layers.iter_mut().for_each(|l| l.visit_mut(f));
    }

    fn freeze_dropout(&mut self, frozen: bool) {
        self.layers.iter_mut().for_each(|l| l.freeze_dropout(frozen));
    }

    fn describe(&self) -> String {
        let parts: Vec<String> = self.layers.iter().map(|l| l.describe()).collect();
        format!("seq[{}]", parts.join(", "))
    }
}
