use rand::Rng;

use super::{Conv2d, Conv2dConfig, Mode, Module, Param, Scalar, Tensor};
use crate::error::{Error, Result};

/// Pointwise convolution with bias on a pooled `[n, c, 1, 1]` map,
/// producing `[n, classes]` logits.
pub struct ClassifierHead<T> {
    conv: Conv2d<T>,
}

impl<T: Scalar> ClassifierHead<T> {
    pub fn new<R: Rng + ?Sized>(name: &str, in_channels: usize, classes: usize, rng: &mut R) -> Result<Self> {
        let cfg = Conv2dConfig::pointwise(in_channels, classes).bias(true);
        Ok(Self {
            conv: Conv2d::new(name, cfg, rng)?,
        })
    }

    fn check(x: &Tensor<T>) -> Result<usize> {
        let (n, _, h, w) = x.dims4()?;
        if (h, w) != (1, 1) {
            return Err(Error::ShapeMismatch(format!(
                "classifier head needs a pooled map, got {:?}",
                x.shape()
            )));
        }
        Ok(n)
    }

    fn flatten(&self, y: Tensor<T>, n: usize) -> Result<Tensor<T>> {
        y.reshape(&[n, self.conv.config().out_channels])
    }
}

impl<T: Scalar> Module<T> for ClassifierHead<T> {
    fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let n = Self::check(x)?;
        self.flatten(self.conv.infer(x)?, n)
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let n = Self::check(x)?;
        let y = self.conv.forward(x, mode)?;
        self.flatten(y, n)
    }

    fn backward(&mut self, g: &Tensor<T>) -> Result<Tensor<T>> {
        let classes = self.conv.config().out_channels;
        match g.shape() {
            [n, c] if *c == classes => {
                let n = *n;
                self.conv.backward(&g.clone().reshape(&[n, classes, 1, 1])?)
            }
            s => Err(Error::ShapeMismatch(format!("head gradient {s:?}"))),
        }
    }

    fn visit(&self, f: &mut dyn FnMut(&Param<T>)) {
        self.conv.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        self.conv.visit_mut(f);
    }

    fn describe(&self) -> String {
        let c = self.conv.config();
        format!("head {}->{}", c.in_channels, c.out_channels)
    }
}
