//! BC-ResNet keyword-spotting models scaled by a width factor `tau`.

mod block;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use block::{BcResBlock, BcResBlockSpec, BlockBranches, SUB_BANDS};

use crate::error::{Error, Result};
use crate::grad::{
    BatchNorm, ClassifierHead, Conv2d, Conv2dConfig, MeanPool, Mode, Module, Param, PoolAxis,
    Relu, Scalar, Sequential, Tensor,
};
use crate::mel::{FeatureMap, N_MELS};
use crate::scene::NUM_CLASSES;

pub const SUPPORTED_TAUS: [f64; 6] = [1.0, 1.5, 2.0, 3.0, 6.0, 8.0];
/// Base widths: stem, four stages, classifier expansion.
const BASE_WIDTHS: [f64; 6] = [16.0, 8.0, 12.0, 16.0, 20.0, 32.0];
const STAGE_DEPTHS: [usize; 4] = [2, 2, 4, 4];
const STAGE_DILATIONS: [usize; 4] = [1, 2, 4, 8];
const STAGE_FREQ_STRIDES: [usize; 4] = [1, 2, 2, 1];
pub const DROPOUT_RATE: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub tau: f64,
    pub in_channels: usize,
    pub num_classes: usize,
    pub dropout: f64,
}

impl ModelConfig {
    pub fn new(tau: f64, in_channels: usize) -> Self {
        Self {
            tau,
            in_channels,
            num_classes: NUM_CLASSES,
            dropout: DROPOUT_RATE,
        }
    }

    /// `[stem, stage0..stage3, expansion]` channel counts.
    pub fn widths(&self) -> Result<[usize; 6]> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::NonIntegerWidth(self.tau));
        }
        let mut out = [0; 6];
        for (o, base) in out.iter_mut().zip(BASE_WIDTHS) {
            let w = base * self.tau;
            if w.fract() != 0.0 {
                return Err(Error::NonIntegerWidth(self.tau));
            }
            *o = w as usize;
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        self.widths()?;
        if !(1..=3).contains(&self.in_channels) {
            return Err(Error::InvalidArgument(format!(
                "in_channels {} outside 1..=3",
                self.in_channels
            )));
        }
        if self.num_classes == 0 {
            return Err(Error::InvalidArgument("num_classes must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument(format!("dropout {}", self.dropout)));
        }
        Ok(())
    }

    pub fn block_specs(&self) -> Result<Vec<BcResBlockSpec>> {
        let w = self.widths()?;
        let mut specs = Vec::new();
        let mut prev = w[0];
        for stage in 0..4 {
            let c = w[stage + 1];
            for i in 0..STAGE_DEPTHS[stage] {
                let first = i == 0;
                specs.push(BcResBlockSpec {
                    in_channels: prev,
                    channels: c,
                    is_transition: first && prev != c,
                    freq_stride: if first { STAGE_FREQ_STRIDES[stage] } else { 1 },
                    temporal_dilation: STAGE_DILATIONS[stage],
                });
                prev = c;
            }
        }
        Ok(specs)
    }
}

/// One row of a model summary.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub name: String,
    pub description: String,
    pub output_shape: Vec<usize>,
    pub params: usize,
    pub cumulative: usize,
}

pub struct BcResNet<T> {
    config: ModelConfig,
    stem: Sequential<T>,
    blocks: Vec<BcResBlock<T>>,
    classifier: Sequential<T>,
}

fn boxed<T: Scalar, M: Module<T> + 'static>(m: M) -> Box<dyn Module<T>> {
    Box::new(m)
}

fn learnable_count<T: Scalar>(m: &dyn Module<T>) -> usize {
    crate::grad::count_learnable(m)
}

impl<T: Scalar> BcResNet<T> {
    /// Builds the network with parameters drawn from a stream seeded by `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let w = config.widths()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let stem_conv = Conv2dConfig::dense(config.in_channels, w[0], (5, 5))
            .stride((2, 1))
            .padding((2, 2));
        let stem = Sequential::new(vec![
            boxed(Conv2d::new("stem.conv", stem_conv, &mut rng)?),
            boxed(BatchNorm::new("stem.bn", w[0])),
            boxed(Relu::new()),
        ]);
        let blocks = config
            .block_specs()?
            .into_iter()
            .enumerate()
            .map(|(i, spec)| BcResBlock::new(&format!("blocks.{i}"), spec, config.dropout, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let last = w[4];
        let classifier = Sequential::new(vec![
            boxed(Conv2d::new(
                "classifier.dw",
                Conv2dConfig::depthwise(last, (5, 5)).padding((0, 2)),
                &mut rng,
            )?),
            boxed(Conv2d::new(
                "classifier.pw",
                Conv2dConfig::pointwise(last, w[5]),
                &mut rng,
            )?),
            boxed(BatchNorm::new("classifier.bn", w[5])),
            boxed(Relu::new()),
            boxed(MeanPool::new(PoolAxis::Global)),
            boxed(ClassifierHead::new("classifier.fc", w[5], config.num_classes, &mut rng)?),
        ]);
        Ok(Self {
            config,
            stem,
            blocks,
            classifier,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn blocks(&self) -> &[BcResBlock<T>] {
        &self.blocks
    }

    /// Learnable scalars; running statistics are excluded.
    pub fn count_params(&self) -> usize {
        learnable_count(self)
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        let (_, c, f, t) = x.dims4()?;
        if c != self.config.in_channels || f != N_MELS || t == 0 {
            return Err(Error::ShapeMismatch(format!(
                "model expects [batch, {}, {N_MELS}, frames], got {:?}",
                self.config.in_channels,
                x.shape()
            )));
        }
        Ok(())
    }

    /// Eval-mode logits of one feature map.
    pub fn predict(&self, features: &FeatureMap) -> Result<Vec<T>> {
        Ok(self.infer(&features_to_tensor(&[features])?)?.into_data())
    }

    /// Named intermediate outputs of an eval pass on `x`, with parameter
    /// counts, for auditing against the published totals.
    pub fn summary(&self, x: &Tensor<T>) -> Result<Vec<SummaryRow>> {
        self.check_input(x)?;
        let mut rows = Vec::new();
        let mut total = 0;
        let mut push = |rows: &mut Vec<SummaryRow>, name: String, m: &dyn Module<T>, out: &Tensor<T>| {
            let params = learnable_count(m);
            total += params;
            rows.push(SummaryRow {
                name,
                description: m.describe(),
                output_shape: out.shape().to_vec(),
                params,
                cumulative: total,
            });
        };
        let mut h = x.clone();
        let stem_names = ["stem.conv", "stem.bn", "stem.relu"];
        for (name, layer) in stem_names.iter().zip(&self.stem.layers) {
            h = layer.infer(&h)?;
            push(&mut rows, name.to_string(), layer.as_ref(), &h);
        }
        for (i, b) in self.blocks.iter().enumerate() {
            h = b.infer(&h)?;
            push(&mut rows, format!("blocks.{i}"), b, &h);
        }
        let head_names = [
            "classifier.dw",
            "classifier.pw",
            "classifier.bn",
            "classifier.relu",
            "classifier.pool",
            "classifier.fc",
        ];
        for (name, layer) in head_names.iter().zip(&self.classifier.layers) {
            h = layer.infer(&h)?;
            push(&mut rows, name.to_string(), layer.as_ref(), &h);
        }
        Ok(rows)
    }
}

/// Text table of a summary.
pub fn format_summary(rows: &[SummaryRow]) -> String {
    let mut s = format!(
        "{:<18} {:<28} {:<18} {:>8} {:>10}\n",
        "layer", "kind", "output", "params", "total"
    );
    for r in rows {
        s.push_str(&format!(
            "{:<18} {:<28} {:<18} {:>8} {:>10}\n",
            r.name,
            r.description,
            format!("{:?}", r.output_shape),
            r.params,
            r.cumulative
        ));
    }
    s
}

/// Stacks equally shaped feature maps into a `[batch, channels, bins, frames]` tensor.
pub fn features_to_tensor<T: Scalar>(maps: &[&FeatureMap]) -> Result<Tensor<T>> {
    let first = maps.first().ok_or(Error::EmptyOperand)?;
    let [c, f, t] = first.shape();
    let mut data = Vec::with_capacity(maps.len() * c * f * t);
    for m in maps {
        if m.shape() != [c, f, t] {
            return Err(Error::ShapeMismatch(format!(
                "{:?} vs {:?}",
                m.shape(),
                first.shape()
            )));
        }
        data.extend(m.values().iter().map(|&v| T::of(v)));
    }
    Tensor::new(vec![maps.len(), c, f, t], data)
}

impl<T: Scalar> Module<T> for BcResNet<T> {
    fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(x)?;
        let mut h = self.stem.infer(x)?;
        for b in &self.blocks {
            h = b.infer(&h)?;
        }
        self.classifier.infer(&h)
    }

    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        self.check_input(x)?;
        let mut h = self.stem.forward(x, mode)?;
        for b in &mut self.blocks {
            h = b.forward(&h, mode)?;
        }
        self.classifier.forward(&h, mode)
    }

    fn backward(&mut self, g: &Tensor<T>) -> Result<Tensor<T>> {
        let mut g = self.classifier.backward(g)?;
        for b in self.blocks.iter_mut().rev() {
            g = b.backward(&g)?;
        }
        self.stem.backward(&g)
    }

    fn visit(&self, f: &mut dyn FnMut(&Param<T>)) {
        self.stem.visit(f);
        self.blocks.iter().for_each(|b| b.visit(f));
        self.classifier.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        self.stem.visit_mut(f);
        self.blocks.iter_mut().for_each(|b| b.visit_mut(f));
        self.classifier.visit_mut(f);
    }

    fn freeze_dropout(&mut self, frozen: bool) {
        self.blocks.iter_mut().for_each(|b| b.freeze_dropout(frozen));
    }

    fn describe(&self) -> String {
        format!("bcresnet tau={} in={}", self.config.tau, self.config.in_channels)
    }
}
