use super::{Mode, Module, Scalar, Tensor};
use crate::error::{Error, Result};

pub struct Relu<T> {
    cache: Option<Tensor<T>>,
}

impl<T> Relu<T> {
    pub fn new() -> Self {
        Self { cache: None }
    }
}

impl<T> Default for Relu<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Module<T> for Relu<T> {
    fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(x.map(|v| v.max(T::zero())))
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        self.cache = (mode == Mode::Train).then(|| x.clone());
        self.infer(x)
    }

    fn backward(&mut self, g: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self.cache.take().ok_or(Error::BackwardWithoutForward)?;
        g.zip_map(&x, |gv, xv| if xv > T::zero() { gv } else { T::zero() })
    }

    fn describe(&self) -> String {
        "relu".into()
    }
}

/// `x * sigmoid(x)`.
pub struct Swish<T> {
    cache: Option<Tensor<T>>,
}

impl<T> Swish<T> {
    pub fn new() -> Self {
        Self { cache: None }
    }
}

impl<T> Default for Swish<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn sigmoid<T: Scalar>(x: T) -> T {
    // Branches keep exp() from overflowing.
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

impl<T: Scalar> Module<T> for Swish<T> {
    fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(x.map(|v| v * sigmoid(v)))
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        self.cache = (mode == Mode::Train).then(|| x.clone());
        self.infer(x)
    }

    fn backward(&mut self, g: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self.cache.take().ok_or(Error::BackwardWithoutForward)?;
        g.zip_map(&x, |gv, xv| {
            let s = sigmoid(xv);
            gv * s * (T::one() + xv * (T::one() - s))
        })
    }

    fn describe(&self) -> String {
        "swish".into()
    }
}
