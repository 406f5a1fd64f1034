use super::{Mode, Module, Param, Scalar, Tensor};
use crate::error::{Error, Result};

pub const NORM_MOMENTUM: f64 = 0.1;
pub const NORM_EPS: f64 = 1e-5;

struct NormCache<T> {
    normalized: Vec<T>,
    inv_std: Vec<f64>,
}

/// Per-channel batch normalization over `(batch, freq, time)`.
pub struct BatchNorm<T> {
    channels: usize,
    pub gamma: Param<T>,
    pub beta: Param<T>,
    pub running_mean: Param<T>,
    pub running_var: Param<T>,
    cache: Option<NormCache<T>>,
}

impl<T: Scalar> BatchNorm<T> {
    pub fn new(name: &str, channels: usize) -> Self {
        Self {
            channels,
            gamma: Param::learnable(format!("{name}.weight"), Tensor::full(&[channels], T::one())),
            beta: Param::learnable(format!("{name}.bias"), Tensor::zeros(&[channels])),
            running_mean: Param::buffer(format!("{name}.running_mean"), Tensor::zeros(&[channels])),
            running_var: Param::buffer(
                format!("{name}.running_var"),
                Tensor::full(&[channels], T::one()),
            ),
            cache: None,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// `(batch, plane)` once the channel count is checked.
    fn layout(&self, x: &Tensor<T>) -> Result<(usize, usize)> {
        let (n, c, h, w) = x.dims4()?;
        if c != self.channels {
            return Err(Error::ShapeMismatch(format!(
                "norm expects {} channels, got {c}",
                self.channels
            )));
        }
        Ok((n, h * w))
    }

    fn affine(&self, x: &Tensor<T>, mean: &[f64], inv_std: &[f64]) -> Result<Tensor<T>> {
        let (n, plane) = self.layout(x)?;
        let mut out = x.clone();
        let (g, b) = (self.gamma.value.data(), self.beta.value.data());
        for bi in 0..n {
            for c in 0..self.channels {
                let scale = g[c].f64() * inv_std[c];
                let shift = b[c].f64() - mean[c] * scale;
                for v in &mut out.data_mut()[(bi * self.channels + c) * plane..][..plane] {
                    *v = T::of(v.f64() * scale + shift);
                }
            }
        }
        Ok(out)
    }

    fn train_forward(&mut self, x: &Tensor<T>, keep: bool) -> Result<Tensor<T>> {
        let (n, plane) = self.layout(x)?;
        let count = n * plane;
        if count < 2 {
            return Err(Error::ShapeMismatch(
                "batch statistics need at least two values per channel".into(),
            ));
        }
        let c_n = self.channels;
        let mut mean = vec![0.0f64; c_n];
        let mut var = vec![0.0f64; c_n];
        for c in 0..c_n {
            let vals = (0..n).flat_map(|b| x.data()[(b * c_n + c) * plane..][..plane].iter());
            let mut s = 0.0;
            for v in vals.clone() {
                s += v.f64();
            }
            let m = s / count as f64;
            let mut ss = 0.0;
            for v in vals {
                ss += (v.f64() - m).powi(2);
            }
            mean[c] = m;
            var[c] = ss / count as f64;
        }
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + NORM_EPS).sqrt()).collect();
        let unbias = count as f64 / (count - 1) as f64;
        let rm = self.running_mean.value.data_mut();
        for c in 0..c_n {
            rm[c] = T::of((1.0 - NORM_MOMENTUM) * rm[c].f64() + NORM_MOMENTUM * mean[c]);
        }
        let rv = self.running_var.value.data_mut();
        for c in 0..c_n {
            rv[c] = T::of((1.0 - NORM_MOMENTUM) * rv[c].f64() + NORM_MOMENTUM * var[c] * unbias);
        }
        let out = self.affine(x, &mean, &inv_std)?;
        self.cache = keep.then(|| {
            let mut normalized = x.data().to_vec();
            for b in 0..n {
                for c in 0..c_n {
                    for v in &mut normalized[(b * c_n + c) * plane..][..plane] {
                        *v = T::of((v.f64() - mean[c]) * inv_std[c]);
                    }
                }
            }
            NormCache { normalized, inv_std }
        });
        Ok(out)
    }

    fn eval_stats(&self) -> (Vec<f64>, Vec<f64>) {
        let mean = self.running_mean.value.data().iter().map(|v| v.f64()).collect();
        let inv_std = self
            .running_var
            .value
            .data()
            .iter()
            .map(|v| 1.0 / (v.f64() + NORM_EPS).sqrt())
            .collect();
        (mean, inv_std)
    }
}

impl<T: Scalar> Module<T> for BatchNorm<T> {
    fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (mean, inv_std) = self.eval_stats();
        self.affine(x, &mean, &inv_std)
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        match mode {
            Mode::Train => self.train_forward(x, true),
            Mode::Eval => {
                self.cache = None;
                self.infer(x)
            }
        }
    }

    fn backward(&mut self, g: &Tensor<T>) -> Result<Tensor<T>> {
        let cache = self.cache.take().ok_or(Error::BackwardWithoutForward)?;
        let (n, plane) = self.layout(g)?;
        if g.len() != cache.normalized.len() {
            return Err(Error::ShapeMismatch("norm gradient does not match forward".into()));
        }
        let c_n = self.channels;
        let m = (n * plane) as f64;
        let mut dx = g.clone();
        for c in 0..c_n {
            let mut sum_g = 0.0;
            let mut sum_gx = 0.0;
            for b in 0..n {
                let off = (b * c_n + c) * plane;
                for i in off..off + plane {
                    let gv = g.data()[i].f64();
                    sum_g += gv;
                    sum_gx += gv * cache.normalized[i].f64();
                }
            }
            self.gamma.grad.data_mut()[c] += T::of(sum_gx);
            self.beta.grad.data_mut()[c] += T::of(sum_g);
            let k = self.gamma.value.data()[c].f64() * cache.inv_std[c] / m;
            for b in 0..n {
                let off = (b * c_n + c) * plane;
                for i in off..off + plane {
                    let xh = cache.normalized[i].f64();
                    let gv = g.data()[i].f64();
                    dx.data_mut()[i] = T::of(k * (m * gv - sum_g - xh * sum_gx));
                }
            }
        }
        Ok(dx)
    }

    fn visit(&self, f: &mut dyn FnMut(&Param<T>)) {
        f(&self.gamma);
        f(&self.beta);
        f(&self.running_mean);
        f(&self.running_var);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        f(&mut self.gamma);
        f(&mut self.beta);
        f(&mut self.running_mean);
        f(&mut self.running_var);
    }

    fn describe(&self) -> String {
        format!("bn {}", self.channels)
    }
}

/// Batch normalization applied separately to each of `sub_bands` equal
/// frequency slices, i.e. over `channels * sub_bands` virtual channels.
pub struct SubSpectralNorm<T> {
    sub_bands: usize,
    inner: BatchNorm<T>,
}

impl<T: Scalar> SubSpectralNorm<T> {
    pub fn new(name: &str, channels: usize, sub_bands: usize) -> Result<Self> {
        if sub_bands == 0 {
            return Err(Error::InvalidArgument("sub_bands must be positive".into()));
        }
        Ok(Self {
            sub_bands,
            inner: BatchNorm::new(name, channels * sub_bands),
        })
    }

    pub fn sub_bands(&self) -> usize {
        self.sub_bands
    }

    pub fn inner(&self) -> &BatchNorm<T> {
        &self.inner
    }

    /// `[n, c, f, t]` viewed as `[n, c*s, f/s, t]`; the memory layout is shared.
    fn split(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (n, c, f, t) = x.dims4()?;
        if f % self.sub_bands != 0 {
            return Err(Error::ShapeMismatch(format!(
                "{} sub-bands do not divide {f} frequency bins",
                self.sub_bands
            )));
        }
        x.clone().reshape(&[n, c * self.sub_bands, f / self.sub_bands, t])
    }
}

impl<T: Scalar> Module<T> for SubSpectralNorm<T> {
    fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.inner.infer(&self.split(x)?)?.reshape(x.shape())
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let view = self.split(x)?;
        self.inner.forward(&view, mode)?.reshape(x.shape())
    }

    fn backward(&mut self, g: &Tensor<T>) -> Result<Tensor<T>> {
        let view = self.split(g)?;
        self.inner.backward(&view)?.reshape(g.shape())
    }

    fn visit(&self, f: &mut dyn FnMut(&Param<T>)) {
        self.inner.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        self.inner.visit_mut(f);
    }

    fn describe(&self) -> String {
        format!(
            "ssn {}x{}",
            self.inner.channels() / self.sub_bands,
            self.sub_bands
        )
    }
}
