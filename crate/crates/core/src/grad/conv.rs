use rand::Rng;

use super::{Mode, Module, Param, Scalar, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Conv2dConfig {
    pub in_channels: usize,
    pub out_channels: usize,
    /// `(freq, time)` extents.
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    pub padding: (usize, usize),
    pub dilation: (usize, usize),
    /// 1 (dense) or `in_channels` (depthwise).
    pub groups: usize,
    pub bias: bool,
}

impl Conv2dConfig {
    pub fn dense(in_channels: usize, out_channels: usize, kernel: (usize, usize)) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel,
            stride: (1, 1),
            padding: (0, 0),
            dilation: (1, 1),
            groups: 1,
            bias: false,
        }
    }

    pub fn pointwise(in_channels: usize, out_channels: usize) -> Self {
        Self::dense(in_channels, out_channels, (1, 1))
    }

    pub fn depthwise(channels: usize, kernel: (usize, usize)) -> Self {
        Self {
            groups: channels,
            ..Self::dense(channels, channels, kernel)
        }
    }

    pub fn stride(self, stride: (usize, usize)) -> Self {
        Self { stride, ..self }
    }

    pub fn padding(self, padding: (usize, usize)) -> Self {
        Self { padding, ..self }
    }

    pub fn dilation(self, dilation: (usize, usize)) -> Self {
        Self { dilation, ..self }
    }

    pub fn bias(self, bias: bool) -> Self {
        Self { bias, ..self }
    }

    fn is_depthwise(&self) -> bool {
        self.groups > 1
    }

    fn fan_in(&self) -> usize {
        self.in_channels / self.groups * self.kernel.0 * self.kernel.1
    }

    /// Output extent along one axis, `None` if the kernel does not fit.
    fn out_extent(len: usize, k: usize, s: usize, p: usize, d: usize) -> Option<usize> {
        let span = d * (k - 1) + 1;
        (len + 2 * p >= span).then(|| (len + 2 * p - span) / s + 1)
    }

    pub fn output_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let oh = Self::out_extent(h, self.kernel.0, self.stride.0, self.padding.0, self.dilation.0);
        let ow = Self::out_extent(w, self.kernel.1, self.stride.1, self.padding.1, self.dilation.1);
        match (oh, ow) {
            (Some(oh), Some(ow)) => Ok((oh, ow)),
            _ => Err(Error::ShapeMismatch(format!(
                "kernel {:?} does not fit input {h}x{w}",
                self.kernel
            ))),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.in_channels > 0
            && self.out_channels > 0
            && self.kernel.0 > 0
            && self.kernel.1 > 0
            && self.stride.0 > 0
            && self.stride.1 > 0
            && self.dilation.0 > 0
            && self.dilation.1 > 0
            && (self.groups == 1
                || (self.groups == self.in_channels && self.in_channels == self.out_channels));
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("unsupported convolution {self:?}")))
        }
    }
}

/// 2-D convolution, dense (im2col + GEMM) or depthwise (direct loops).
pub struct Conv2d<T> {
    cfg: Conv2dConfig,
    pub weight: Param<T>,
    pub bias: Option<Param<T>>,
    cache: Option<Tensor<T>>,
}

impl<T: Scalar> Conv2d<T> {
    /// Uniform init in `±1/sqrt(fan_in)` for weights and bias.
    pub fn new<R: Rng + ?Sized>(name: &str, cfg: Conv2dConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let bound = 1.0 / (cfg.fan_in() as f64).sqrt();
        let mut draw = |n: usize| -> Vec<T> {
            (0..n).map(|_| T::of(rng.random_range(-bound..bound))).collect()
        };
        let shape = vec![
            cfg.out_channels,
            cfg.in_channels / cfg.groups,
            cfg.kernel.0,
            cfg.kernel.1,
        ];
        let n: usize = shape.iter().product();
        let weight = Param::learnable(format!("{name}.weight"), Tensor::new(shape, draw(n))?);
        let bias = if cfg.bias {
            let b = Tensor::new(vec![cfg.out_channels], draw(cfg.out_channels))?;
            Some(Param::learnable(format!("{name}.bias"), b))
        } else {
            None
        };
        Ok(Self {
            cfg,
            weight,
            bias,
            cache: None,
        })
    }

    pub fn config(&self) -> &Conv2dConfig {
        &self.cfg
    }

    fn is_plain_pointwise(&self) -> bool {
        let c = &self.cfg;
        !c.is_depthwise() && c.kernel == (1, 1) && c.stride == (1, 1) && c.padding == (0, 0)
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<(usize, usize, usize, usize)> {
        let (n, c, h, w) = x.dims4()?;
        if c != self.cfg.in_channels {
            return Err(Error::ShapeMismatch(format!(
                "conv expects {} channels, got {c}",
                self.cfg.in_channels
            )));
        }
        Ok((n, c, h, w))
    }

    /// Source coordinate of output `o` for kernel tap `k` along one axis.
    #[inline]
    fn src(o: usize, k: usize, s: usize, p: usize, d: usize) -> isize {
        (o * s + k * d) as isize - p as isize
    }

    fn im2col(&self, x: &[T], h: usize, w: usize, oh: usize, ow: usize, cols: &mut [T]) {
        let c = &self.cfg;
        let (kh, kw) = c.kernel;
        let p = oh * ow;
        for ci in 0..c.in_channels {
            let plane = &x[ci * h * w..(ci + 1) * h * w];
            for i in 0..kh {
                for j in 0..kw {
                    let row = &mut cols[((ci * kh + i) * kw + j) * p..][..p];
                    for y in 0..oh {
                        let sy = Self::src(y, i, c.stride.0, c.padding.0, c.dilation.0);
                        let dst = &mut row[y * ow..(y + 1) * ow];
                        if sy < 0 || sy >= h as isize {
                            dst.iter_mut().for_each(|v| *v = T::zero());
                            continue;
                        }
                        let src_row = &plane[sy as usize * w..(sy as usize + 1) * w];
                        for (xo, d) in dst.iter_mut().enumerate() {
                            let sx = Self::src(xo, j, c.stride.1, c.padding.1, c.dilation.1);
                            *d = if sx < 0 || sx >= w as isize {
                                T::zero()
                            } else {
                                src_row[sx as usize]
                            };
                        }
                    }
                }
            }
        }
    }

    fn col2im(&self, cols: &[T], h: usize, w: usize, oh: usize, ow: usize, dx: &mut [T]) {
        let c = &self.cfg;
        let (kh, kw) = c.kernel;
        let p = oh * ow;
        for ci in 0..c.in_channels {
            let plane = &mut dx[ci * h * w..(ci + 1) * h * w];
            for i in 0..kh {
                for j in 0..kw {
                    let row = &cols[((ci * kh + i) * kw + j) * p..][..p];
                    for y in 0..oh {
                        let sy = Self::src(y, i, c.stride.0, c.padding.0, c.dilation.0);
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        let dst_row = &mut plane[sy as usize * w..(sy as usize + 1) * w];
                        for (xo, &g) in row[y * ow..(y + 1) * ow].iter().enumerate() {
                            let sx = Self::src(xo, j, c.stride.1, c.padding.1, c.dilation.1);
                            if sx >= 0 && sx < w as isize {
                                dst_row[sx as usize] += g;
                            }
                        }
                    }
                }
            }
        }
    }

    fn dense_forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (n, ci, h, w) = self.check_input(x)?;
        let (oh, ow) = self.cfg.output_hw(h, w)?;
        let co = self.cfg.out_channels;
        let k = self.cfg.fan_in();
        let p = oh * ow;
        let mut out = Tensor::zeros(&[n, co, oh, ow]);
        let mut cols = vec![T::zero(); if self.is_plain_pointwise() { 0 } else { k * p }];
        let wt = self.weight.value.data();
        for b in 0..n {
            let xb = &x.data()[b * ci * h * w..(b + 1) * ci * h * w];
            let rhs: &[T] = if self.is_plain_pointwise() {
                xb
            } else {
                self.im2col(xb, h, w, oh, ow, &mut cols);
                &cols
            };
            let ob = &mut out.data_mut()[b * co * p..(b + 1) * co * p];
            T::gemm(co, k, p, wt, (k, 1), rhs, (p, 1), T::zero(), ob);
        }
        Ok(out)
    }

    fn dense_backward(&mut self, x: &Tensor<T>, g: &Tensor<T>) -> Result<Tensor<T>> {
        let (n, ci, h, w) = x.dims4()?;
        let (_, co, oh, ow) = g.dims4()?;
        let k = self.cfg.fan_in();
        let p = oh * ow;
        let pointwise = self.is_plain_pointwise();
        let mut dx = Tensor::zeros(x.shape());
        let mut cols = vec![T::zero(); if pointwise { 0 } else { k * p }];
        let mut dcols = vec![T::zero(); k * p];
        for b in 0..n {
            let xb = &x.data()[b * ci * h * w..(b + 1) * ci * h * w];
            let gb = &g.data()[b * co * p..(b + 1) * co * p];
            let rhs: &[T] = if pointwise {
                xb
            } else {
                self.im2col(xb, h, w, oh, ow, &mut cols);
                &cols
            };
            // dW += g cols^T
            T::gemm(co, p, k, gb, (p, 1), rhs, (1, p), T::one(), self.weight.grad.data_mut());
            // dcols = W^T g
            T::gemm(k, co, p, self.weight.value.data(), (1, k), gb, (p, 1), T::zero(), &mut dcols);
            let dxb = &mut dx.data_mut()[b * ci * h * w..(b + 1) * ci * h * w];
            if pointwise {
                dxb.copy_from_slice(&dcols);
            } else {
                self.col2im(&dcols, h, w, oh, ow, dxb);
            }
        }
        Ok(dx)
    }

    fn depthwise_forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (n, c, h, w) = self.check_input(x)?;
        let (oh, ow) = self.cfg.output_hw(h, w)?;
        let cfg = self.cfg;
        let (kh, kw) = cfg.kernel;
        let mut out = Tensor::zeros(&[n, c, oh, ow]);
        let wt = self.weight.value.data();
        for b in 0..n {
            for ch in 0..c {
                let plane = &x.data()[(b * c + ch) * h * w..][..h * w];
                let dst = &mut out.data_mut()[(b * c + ch) * oh * ow..][..oh * ow];
                for i in 0..kh {
                    for j in 0..kw {
                        let wv = wt[(ch * kh + i) * kw + j];
                        let (lo, hi) = valid_range(ow, w, j, cfg.stride.1, cfg.padding.1, cfg.dilation.1);
                        for y in 0..oh {
                            let sy = Self::src(y, i, cfg.stride.0, cfg.padding.0, cfg.dilation.0);
                            if sy < 0 || sy >= h as isize {
                                continue;
                            }
                            let src_row = &plane[sy as usize * w..][..w];
                            let dst_row = &mut dst[y * ow..][..ow];
                            for xo in lo..hi {
                                let sx = (xo * cfg.stride.1 + j * cfg.dilation.1) - cfg.padding.1;
                                dst_row[xo] += wv * src_row[sx];
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    fn depthwise_backward(&mut self, x: &Tensor<T>, g: &Tensor<T>) -> Result<Tensor<T>> {
        let (n, c, h, w) = x.dims4()?;
        let (_, _, oh, ow) = g.dims4()?;
        let cfg = self.cfg;
        let (kh, kw) = cfg.kernel;
        let mut dx = Tensor::zeros(x.shape());
        let wt = self.weight.value.data().to_vec();
        let dw = self.weight.grad.data_mut();
        for b in 0..n {
            for ch in 0..c {
                let plane = &x.data()[(b * c + ch) * h * w..][..h * w];
                let gp = &g.data()[(b * c + ch) * oh * ow..][..oh * ow];
                let dxp = &mut dx.data_mut()[(b * c + ch) * h * w..][..h * w];
                for i in 0..kh {
                    for j in 0..kw {
                        let widx = (ch * kh + i) * kw + j;
                        let wv = wt[widx];
                        let mut acc = T::zero();
                        let (lo, hi) = valid_range(ow, w, j, cfg.stride.1, cfg.padding.1, cfg.dilation.1);
                        for y in 0..oh {
                            let sy = Self::src(y, i, cfg.stride.0, cfg.padding.0, cfg.dilation.0);
                            if sy < 0 || sy >= h as isize {
                                continue;
                            }
                            let sy = sy as usize;
                            for xo in lo..hi {
                                let sx = (xo * cfg.stride.1 + j * cfg.dilation.1) - cfg.padding.1;
                                let gv = gp[y * ow + xo];
                                acc += gv * plane[sy * w + sx];
                                dxp[sy * w + sx] += gv * wv;
                            }
                        }
                        dw[widx] += acc;
                    }
                }
            }
        }
        Ok(dx)
    }
}

/// Output columns `lo..hi` whose source column for tap `j` is inside `0..w`.
fn valid_range(ow: usize, w: usize, j: usize, s: usize, p: usize, d: usize) -> (usize, usize) {
    let off = j * d;
    // Need p <= xo*s + off < w + p.
    let lo = if off >= p { 0 } else { (p - off).div_ceil(s) };
    let hi = if w + p > off { ((w + p - off - 1) / s + 1).min(ow) } else { 0 };
    (lo.min(hi), hi)
}

impl<T: Scalar> Module<T> for Conv2d<T> {
    fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut out = if self.cfg.is_depthwise() {
            self.depthwise_forward(x)?
        } else {
            self.dense_forward(x)?
        };
        if let Some(bias) = &self.bias {
            let (n, co, oh, ow) = out.dims4()?;
            let p = oh * ow;
            for b in 0..n {
                for c in 0..co {
                    let bv = bias.value.data()[c];
                    out.data_mut()[(b * co + c) * p..][..p].iter_mut().for_each(|v| *v += bv);
                }
            }
        }
        Ok(out)
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let out = self.infer(x)?;
        self.cache = (mode == Mode::Train).then(|| x.clone());
        Ok(out)
    }

    fn backward(&mut self, g: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self.cache.take().ok_or(Error::BackwardWithoutForward)?;
        if let Some(bias) = &mut self.bias {
            let (n, co, oh, ow) = g.dims4()?;
            let p = oh * ow;
            for b in 0..n {
                for c in 0..co {
                    bias.grad.data_mut()[c] += g.data()[(b * co + c) * p..][..p].iter().copied().sum();
                }
            }
        }
        if self.cfg.is_depthwise() {
            self.depthwise_backward(&x, g)
        } else {
            self.dense_backward(&x, g)
        }
    }

    fn visit(&self, f: &mut dyn FnMut(&Param<T>)) {
        f(&self.weight);
        if let Some(b) = &self.bias {
            f(b);
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        f(&mut self.weight);
        if let Some(b) = &mut self.bias {
            f(b);
        }
    }

    fn describe(&self) -> String {
        let c = &self.cfg;
        let kind = if c.is_depthwise() { "dwconv" } else { "conv" };
        format!(
            "{kind} {}->{} k{}x{} s{}x{} d{}x{}{}",
            c.in_channels,
            c.out_channels,
            c.kernel.0,
            c.kernel.1,
            c.stride.0,
            c.stride.1,
            c.dilation.0,
            c.dilation.1,
            if c.bias { " +bias" } else { "" }
        )
    }
}
