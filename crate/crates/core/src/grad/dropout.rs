use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Mode, Module, Scalar, Tensor};
use crate::error::{Error, Result};

/// Channel-wise dropout: whole `[freq, time]` planes are zeroed with
/// probability `rate` and survivors are scaled by `1 / (1 - rate)`.
pub struct Dropout2d<T> {
    rate: f64,
    rng: ChaCha8Rng,
    /// Reuse the last mask instead of drawing a new one; lets finite
    /// differences see a fixed function.
    pub frozen: bool,
    mask: Option<(Vec<usize>, Vec<T>)>,
    active: bool,
}

impl<T: Scalar> Dropout2d<T> {
    pub fn new(rate: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidArgument(format!("dropout rate {rate} outside [0, 1)")));
        }
        Ok(Self {
            rate,
            rng: ChaCha8Rng::seed_from_u64(seed),
            frozen: false,
            mask: None,
            active: false,
        })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    fn draw(&mut self, n: usize, c: usize) -> Vec<T> {
        let keep = T::of(1.0 / (1.0 - self.rate));
        (0..n * c)
            .map(|_| {
                if self.rng.random::<f64>() < self.rate {
                    T::zero()
                } else {
                    keep
                }
            })
            .collect()
    }

    fn apply(x: &Tensor<T>, mask: &[T]) -> Tensor<T> {
        let (_, _, f, t) = x.dims4().expect("checked rank");
        let mut out = x.clone();
        for (plane, &m) in out.data_mut().chunks_mut(f * t).zip(mask) {
            plane.iter_mut().for_each(|v| *v *= m);
        }
        out
    }
}

impl<T: Scalar> Module<T> for Dropout2d<T> {
    fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        x.dims4()?;
        Ok(x.clone())
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let (n, c, _, _) = x.dims4()?;
        self.active = mode == Mode::Train;
        if mode == Mode::Eval || self.rate == 0.0 {
            self.mask = None;
            return Ok(x.clone());
        }
        let reuse = self.frozen && matches!(&self.mask, Some((s, _)) if s[..] == [n, c]);
        if !reuse {
            let m = self.draw(n, c);
            self.mask = Some((vec![n, c], m));
        }
        let (_, mask) = self.mask.as_ref().expect("mask drawn");
        Ok(Self::apply(x, mask))
    }

    fn backward(&mut self, g: &Tensor<T>) -> Result<Tensor<T>> {
        if !std::mem::take(&mut self.active) {
            return Err(Error::BackwardWithoutForward);
        }
        match &self.mask {
            Some((s, mask)) => {
                let (n, c, _, _) = g.dims4()?;
                if s[..] != [n, c] {
                    return Err(Error::ShapeMismatch("dropout gradient shape".into()));
                }
                Ok(Self::apply(g, mask))
            }
            None => Ok(g.clone()),
        }
    }

    fn freeze_dropout(&mut self, frozen: bool) {
        self.frozen = frozen;
    }

    fn describe(&self) -> String {
        format!("dropout2d {}", self.rate)
    }
}
