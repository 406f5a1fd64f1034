//! Dense tensors with hand-written reverse-mode layers, loss, optimizer and
//! learning-rate schedule.

mod act;
mod checkpoint;
mod conv;
mod dropout;
mod head;
mod loss;
mod module;
mod norm;
mod optim;
mod param;
mod pool;
mod scalar;
mod spec;
mod tensor;

pub use act::{Relu, Swish};
pub use checkpoint::{Checkpoint, StoredTensor};
pub use conv::{Conv2d, Conv2dConfig};
pub use dropout::Dropout2d;
pub use head::ClassifierHead;
pub use loss::{batch_cross_entropy, softmax, softmax_cross_entropy};
pub use module::{count_learnable, Mode, Module, Sequential};
pub use norm::{BatchNorm, SubSpectralNorm, NORM_EPS, NORM_MOMENTUM};
pub use optim::{lr_at_epoch, LrSchedule, Sgd, MOMENTUM, WEIGHT_DECAY};
pub use param::Param;
pub use pool::{MeanPool, PoolAxis};
pub use scalar::Scalar;
pub use spec::{build, LayerSpec};
pub use tensor::Tensor;

/// Clears every learnable gradient in `model`.
pub fn zero_grad<T: Scalar>(model: &mut dyn Module<T>) {
    model.visit_mut(&mut |p| p.zero_grad());
}
