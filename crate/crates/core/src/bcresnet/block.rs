use rand::Rng;

use crate::error::{Error, Result};
use crate::grad::{
    BatchNorm, Conv2d, Conv2dConfig, Dropout2d, MeanPool, Mode, Module, Param, PoolAxis, Relu,
    Scalar, Sequential, SubSpectralNorm, Swish, Tensor,
};

pub const SUB_BANDS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BcResBlockSpec {
    pub in_channels: usize,
    pub channels: usize,
    /// Transition blocks project channels first and drop the identity shortcut.
    pub is_transition: bool,
    pub freq_stride: usize,
    pub temporal_dilation: usize,
}

/// Broadcast residual block.
///
/// A frequency-depthwise 2-D path produces `aux`; its frequency mean feeds a
/// temporal 1-D path whose output is broadcast back over frequency:
/// `out = relu(aux + broadcast(temporal) [+ input])`.
pub struct BcResBlock<T> {
    spec: BcResBlockSpec,
    projection: Option<Sequential<T>>,
    spectral: Sequential<T>,
    pool: MeanPool,
    temporal: Sequential<T>,
    relu: Relu<T>,
    freq_bins: Option<usize>,
}

/// Intermediate tensors of one eval-mode pass, for inspection.
pub struct BlockBranches<T> {
    pub aux: Tensor<T>,
    /// Temporal path expanded to the full frequency extent.
    pub broadcast: Tensor<T>,
    pub output: Tensor<T>,
}

impl<T: Scalar> BcResBlock<T> {
    pub fn new<R: Rng + ?Sized>(name: &str, spec: BcResBlockSpec, dropout: f64, rng: &mut R) -> Result<Self> {
        if !spec.is_transition && (spec.in_channels != spec.channels || spec.freq_stride != 1) {
            return Err(Error::InvalidArgument(format!(
                "normal block must preserve shape: {spec:?}"
            )));
        }
        let c = spec.channels;
        let projection = if spec.is_transition {
            let conv = Conv2dConfig::pointwise(spec.in_channels, c);
            Some(Sequential::new(vec![
                Box::new(Conv2d::new(&format!("{name}.proj.conv"), conv, rng)?) as Box<dyn Module<T>>,
                Box::new(BatchNorm::new(&format!("{name}.proj.bn"), c)),
                Box::new(Relu::new()),
            ]))
        } else {
            None
        };
        let freq_conv = Conv2dConfig::depthwise(c, (3, 1))
            .stride((spec.freq_stride, 1))
            .padding((1, 0));
        let spectral = Sequential::new(vec![
            Box::new(Conv2d::new(&format!("{name}.f2.conv"), freq_conv, rng)?) as Box<dyn Module<T>>,
            Box::new(SubSpectralNorm::new(&format!("{name}.f2.ssn"), c, SUB_BANDS)?),
        ]);
        let d = spec.temporal_dilation;
        let time_conv = Conv2dConfig::depthwise(c, (1, 3))
            .padding((0, d))
            .dilation((1, d));
        let temporal = Sequential::new(vec![
            Box::new(Conv2d::new(&format!("{name}.f1.conv"), time_conv, rng)?) as Box<dyn Module<T>>,
            Box::new(BatchNorm::new(&format!("{name}.f1.bn"), c)),
            Box::new(Swish::new()),
            Box::new(Conv2d::new(
                &format!("{name}.f1.pw"),
                Conv2dConfig::pointwise(c, c),
                rng,
            )?),
            Box::new(Dropout2d::new(dropout, rng.random())?),
        ]);
        Ok(Self {
            spec,
            projection,
            spectral,
            pool: MeanPool::new(PoolAxis::Frequency),
            temporal,
            relu: Relu::new(),
            freq_bins: None,
        })
    }

    pub fn spec(&self) -> &BcResBlockSpec {
        &self.spec
    }

    /// `aux + broadcast(temporal)`, plus `shortcut` when given.
    fn combine(aux: &Tensor<T>, temporal: &Tensor<T>, shortcut: Option<&Tensor<T>>) -> Result<Tensor<T>> {
        let (n, c, f, t) = aux.dims4()?;
        if temporal.shape() != [n, c, 1, t] {
            return Err(Error::ShapeMismatch("temporal path shape".into()));
        }
        let mut out = aux.clone();
        for (nc, plane) in out.data_mut().chunks_mut(f * t).enumerate() {
            let row = &temporal.data()[nc * t..][..t];
            for frame in plane.chunks_mut(t) {
                frame.iter_mut().zip(row).for_each(|(o, &v)| *o += v);
            }
        }
        if let Some(s) = shortcut {
            out.add_assign(s)?;
        }
        Ok(out)
    }

    fn broadcast(temporal: &Tensor<T>, f: usize) -> Result<Tensor<T>> {
        let (n, c, _, t) = temporal.dims4()?;
        Self::combine(&Tensor::zeros(&[n, c, f, t]), temporal, None)
    }

    pub fn branches(&self, x: &Tensor<T>) -> Result<BlockBranches<T>> {
        let h = match &self.projection {
            Some(p) => p.infer(x)?,
            None => x.clone(),
        };
        let aux = self.spectral.infer(&h)?;
        let temporal = self.temporal.infer(&self.pool.infer(&aux)?)?;
        let shortcut = self.projection.is_none().then_some(x);
        let output = self.relu.infer(&Self::combine(&aux, &temporal, shortcut)?)?;
        let broadcast = Self::broadcast(&temporal, aux.dims4()?.2)?;
        Ok(BlockBranches {
            aux,
            broadcast,
            output,
        })
    }
}

impl<T: Scalar> Module<T> for BcResBlock<T> {
    fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let h = match &self.projection {
            Some(p) => p.infer(x)?,
            None => x.clone(),
        };
        let aux = self.spectral.infer(&h)?;
        let temporal = self.temporal.infer(&self.pool.infer(&aux)?)?;
        let shortcut = self.projection.is_none().then_some(x);
        self.relu.infer(&Self::combine(&aux, &temporal, shortcut)?)
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let h = match &mut self.projection {
            Some(p) => p.forward(x, mode)?,
            None => x.clone(),
        };
        let aux = self.spectral.forward(&h, mode)?;
        let pooled = Module::<T>::forward(&mut self.pool, &aux, mode)?;
        let temporal = self.temporal.forward(&pooled, mode)?;
        let shortcut = self.projection.is_none().then_some(x);
        let sum = Self::combine(&aux, &temporal, shortcut)?;
        self.freq_bins = (mode == Mode::Train).then(|| aux.shape()[2]);
        self.relu.forward(&sum, mode)
    }

    fn backward(&mut self, g: &Tensor<T>) -> Result<Tensor<T>> {
        let f = self.freq_bins.take().ok_or(Error::BackwardWithoutForward)?;
        let g_sum = self.relu.backward(g)?;
        let (n, c, gf, t) = g_sum.dims4()?;
        if gf != f {
            return Err(Error::ShapeMismatch("block gradient frequency extent".into()));
        }
        // Broadcast over frequency sums the gradient back.
        let mut g_temporal = Tensor::zeros(&[n, c, 1, t]);
        for (nc, plane) in g_sum.data().chunks(f * t).enumerate() {
            let dst = &mut g_temporal.data_mut()[nc * t..][..t];
            for frame in plane.chunks(t) {
                dst.iter_mut().zip(frame).for_each(|(o, &v)| *o += v);
            }
        }
        let g_pooled = self.temporal.backward(&g_temporal)?;
        let mut g_aux = Module::<T>::backward(&mut self.pool, &g_pooled)?;
        g_aux.add_assign(&g_sum)?;
        let g_h = self.spectral.backward(&g_aux)?;
        match &mut self.projection {
            Some(p) => p.backward(&g_h),
            None => {
                let mut gx = g_h;
                gx.add_assign(&g_sum)?;
                Ok(gx)
            }
        }
    }

    fn visit(&self, f: &mut dyn FnMut(&Param<T>)) {
        if let Some(p) = &self.projection {
            p.visit(f);
        }
        self.spectral.visit(f);
        self.temporal.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        if let Some(p) = &mut self.projection {
            p.visit_mut(f);
        }
        self.spectral.visit_mut(f);
        self.temporal.visit_mut(f);
    }

    fn freeze_dropout(&mut self, frozen: bool) {
        self.temporal.freeze_dropout(frozen);
    }

    fn describe(&self) -> String {
        let s = &self.spec;
        format!(
            "{} {}->{} fs{} d{}",
            if s.is_transition { "bcres-transition" } else { "bcres" },
            s.in_channels,
            s.channels,
            s.freq_stride,
            s.temporal_dilation
        )
    }
}
