use std::f64::consts::PI;

use super::{Module, Scalar, Tensor};
use crate::error::{Error, Result};

pub const MOMENTUM: f64 = 0.9;
pub const WEIGHT_DECAY: f64 = 1e-3;

/// SGD with heavy-ball momentum and coupled weight decay:
/// `v = m v + (g + wd w)`, `w -= lr v`.
#[derive(Clone, Debug)]
pub struct Sgd<T> {
    pub momentum: f64,
    pub weight_decay: f64,
    velocity: Vec<Tensor<T>>,
}

impl<T: Scalar> Sgd<T> {
    pub fn new(momentum: f64, weight_decay: f64) -> Self {
        Self {
            momentum,
            weight_decay,
            velocity: Vec::new(),
        }
    }

    pub fn velocity(&self) -> &[Tensor<T>] {
        &self.velocity
    }

    /// Updates every learnable parameter of `model` in visiting order.
    ///
    /// Gradients are checked for finiteness before anything is modified.
    pub fn step(&mut self, model: &mut dyn Module<T>, lr: f64) -> Result<()> {
        let mut finite = true;
        model.visit(&mut |p| finite &= !p.learnable || p.grad.is_finite());
        if !finite {
            return Err(Error::Divergence);
        }
        let (m, wd, lr) = (T::of(self.momentum), T::of(self.weight_decay), T::of(lr));
        let mut idx = 0;
        let velocity = &mut self.velocity;
        let mut shape_error = None;
        model.visit_mut(&mut |p| {
            if !p.learnable {
                return;
            }
            if velocity.len() == idx {
                velocity.push(Tensor::zeros(p.value.shape()));
            }
            let v = &mut velocity[idx];
            idx += 1;
            if v.shape() != p.value.shape() {
                shape_error = Some(p.name.clone());
                return;
            }
            let (w, g) = (p.value.data_mut(), p.grad.data());
            for ((wi, &gi), vi) in w.iter_mut().zip(g).zip(v.data_mut()) {
                *vi = m * *vi + (gi + wd * *wi);
                *wi -= lr * *vi;
            }
        });
        match shape_error {
            Some(name) => Err(Error::ShapeMismatch(format!("optimizer state for {name}"))),
            None => Ok(()),
        }
    }
}

impl<T: Scalar> Default for Sgd<T> {
    fn default() -> Self {
        Self::new(MOMENTUM, WEIGHT_DECAY)
    }
}

/// Linear warm-up from 0 to `peak`, then cosine annealing to 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LrSchedule {
    pub warmup_epochs: f64,
    pub total_epochs: f64,
    pub peak: f64,
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self {
            warmup_epochs: 5.0,
            total_epochs: 200.0,
            peak: 0.1,
        }
    }
}

impl LrSchedule {
    pub fn at(&self, epoch: f64) -> Result<f64> {
        if !(0.0..=self.total_epochs).contains(&epoch) {
            return Err(Error::InvalidArgument(format!(
                "epoch {epoch} outside [0, {}]",
                self.total_epochs
            )));
        }
        if epoch < self.warmup_epochs {
            return Ok(self.peak * epoch / self.warmup_epochs);
        }
        let span = self.total_epochs - self.warmup_epochs;
        if span <= 0.0 {
            return Ok(self.peak);
        }
        let progress = (epoch - self.warmup_epochs) / span;
        if progress == 1.0 {
            // cos(pi) rounds to slightly above -1.
            return Ok(0.0);
        }
        Ok(0.5 * self.peak * (1.0 + (PI * progress).cos()))
    }
}

/// Learning rate under the default 200-epoch schedule.
pub fn lr_at_epoch(epoch: f64) -> Result<f64> {
    LrSchedule::default().at(epoch)
}
