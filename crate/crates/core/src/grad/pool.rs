use super::{Mode, Module, Scalar, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoolAxis {
    /// `[n, c, f, t] -> [n, c, 1, t]`.
    Frequency,
    /// `[n, c, f, t] -> [n, c, 1, 1]`.
    Global,
}

pub struct MeanPool {
    axis: PoolAxis,
    input_shape: Option<Vec<usize>>,
}

impl MeanPool {
    pub fn new(axis: PoolAxis) -> Self {
        Self {
            axis,
            input_shape: None,
        }
    }
}

impl<T: Scalar> Module<T> for MeanPool {
    fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (n, c, f, t) = x.dims4()?;
        let d = x.data();
        match self.axis {
            PoolAxis::Frequency => {
                let scale = T::one() / T::of(f as f64);
                let mut out = Tensor::zeros(&[n, c, 1, t]);
                for (nc, dst) in out.data_mut().chunks_mut(t).enumerate() {
                    for row in d[nc * f * t..][..f * t].chunks(t) {
                        dst.iter_mut().zip(row).for_each(|(o, &v)| *o += v);
                    }
                    dst.iter_mut().for_each(|o| *o *= scale);
                }
                Ok(out)
            }
            PoolAxis::Global => {
                let p = f * t;
                let scale = T::one() / T::of(p as f64);
                let vals = d.chunks(p).map(|plane| plane.iter().copied().sum::<T>() * scale);
                Tensor::new(vec![n, c, 1, 1], vals.collect())
            }
        }
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        self.input_shape = (mode == Mode::Train).then(|| x.shape().to_vec());
        self.infer(x)
    }

    fn backward(&mut self, g: &Tensor<T>) -> Result<Tensor<T>> {
        let shape = self.input_shape.take().ok_or(Error::BackwardWithoutForward)?;
        let (n, c, f, t) = (shape[0], shape[1], shape[2], shape[3]);
        let expected = match self.axis {
            PoolAxis::Frequency => [n, c, 1, t],
            PoolAxis::Global => [n, c, 1, 1],
        };
        if g.shape() != expected {
            return Err(Error::ShapeMismatch(format!(
                "pool gradient {:?}, expected {expected:?}",
                g.shape()
            )));
        }
        let mut dx = Tensor::zeros(&shape);
        match self.axis {
            PoolAxis::Frequency => {
                let scale = T::one() / T::of(f as f64);
                for (nc, gr) in g.data().chunks(t).enumerate() {
                    for row in dx.data_mut()[nc * f * t..][..f * t].chunks_mut(t) {
                        row.iter_mut().zip(gr).for_each(|(o, &v)| *o = v * scale);
                    }
                }
            }
            PoolAxis::Global => {
                let p = f * t;
                let scale = T::one() / T::of(p as f64);
                for (plane, &gv) in dx.data_mut().chunks_mut(p).zip(g.data()) {
                    plane.iter_mut().for_each(|o| *o = gv * scale);
                }
            }
        }
        Ok(dx)
    }

    fn describe(&self) -> String {
        match self.axis {
            PoolAxis::Frequency => "freq-mean".into(),
            PoolAxis::Global => "global-mean".into(),
        }
    }
}
