//! Transfer-function estimation and perturbation.

mod ir;
mod lms;
mod perturb;
mod sweep;

pub use ir::{
    parse_mic_subset, ImpulseResponse, IrHeader, IrKind, Loudspeaker, Mic, TransferFunctionSet,
    NUM_LOUDSPEAKERS,
};
pub use lms::{estimate_ir_lms, estimate_ir_lms_with, LmsConfig};
pub use perturb::{perturb_tf, PerturbMode, PerturbationParams};
pub use sweep::{deconvolve_sweep, generate_exp_sweep, ExpSweep, SweepEstimate};
