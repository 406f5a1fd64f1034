use rand::Rng;

use super::{
    BatchNorm, ClassifierHead, Conv2d, Conv2dConfig, Dropout2d, MeanPool, Module, PoolAxis, Relu,
    Scalar, SubSpectralNorm, Swish,
};
use crate::error::Result;

/// Declarative description of one layer, turned into a module by [`build`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LayerSpec {
    Conv2d(Conv2dConfig),
    DepthwiseConv2d {
        channels: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        padding: (usize, usize),
        dilation: (usize, usize),
    },
    BatchNorm {
        channels: usize,
    },
    SubSpectralNorm {
        channels: usize,
        sub_bands: usize,
    },
    Relu,
    Swish,
    PointwiseConv {
        in_channels: usize,
        out_channels: usize,
    },
    AvgPool(PoolAxis),
    Dropout {
        rate: f64,
    },
    ClassifierHead {
        in_channels: usize,
        classes: usize,
    },
}

/// Instantiates `spec`; parameters are named `<name>.weight` and so on.
pub fn build<T: Scalar, R: Rng + ?Sized>(
    name: &str,
    spec: LayerSpec,
    rng: &mut R,
) -> Result<Box<dyn Module<T>>> {
    Ok(match spec {
        LayerSpec::Conv2d(cfg) => Box::new(Conv2d::new(name, cfg, rng)?),
        LayerSpec::DepthwiseConv2d {
            channels,
            kernel,
            stride,
            padding,
            dilation,
        } => {
            let cfg = Conv2dConfig::depthwise(channels, kernel)
                .stride(stride)
                .padding(padding)
                .dilation(dilation);
            Box::new(Conv2d::new(name, cfg, rng)?)
        }
        LayerSpec::BatchNorm { channels } => Box::new(BatchNorm::new(name, channels)),
        LayerSpec::SubSpectralNorm {
            channels,
            sub_bands,
        } => Box::new(SubSpectralNorm::new(name, channels, sub_bands)?),
        LayerSpec::Relu => Box::new(Relu::new()),
        LayerSpec::Swish => Box::new(Swish::new()),
        LayerSpec::PointwiseConv {
            in_channels,
            out_channels,
        } => Box::new(Conv2d::new(
            name,
            Conv2dConfig::pointwise(in_channels, out_channels),
            rng,
        )?),
        LayerSpec::AvgPool(axis) => Box::new(MeanPool::new(axis)),
        LayerSpec::Dropout { rate } => Box::new(Dropout2d::new(rate, rng.random())?),
        LayerSpec::ClassifierHead {
            in_channels,
            classes,
        } => Box::new(ClassifierHead::new(name, in_channels, classes, rng)?),
    })
}
