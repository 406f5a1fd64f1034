//! Training-time multiplicative/additive Gaussian perturbation of an IR.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::ImpulseResponse;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PerturbMode {
    /// Fresh gain and offset draws for every tap.
    #[default]
    PerTap,
    /// One gain and one offset draw shared by all taps.
    PerResponse,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PerturbationParams {
    /// Standard deviation of the multiplicative term.
    pub sigma_mult: f64,
    /// Standard deviation of the additive term.
    pub sigma_add: f64,
    pub mode: PerturbMode,
}

impl Default for PerturbationParams {
    fn default() -> Self {
        Self {
            sigma_mult: 0.1,
            sigma_add: 1e-5,
            mode: PerturbMode::PerTap,
        }
    }
}

impl PerturbationParams {
    pub fn none() -> Self {
        Self {
            sigma_mult: 0.0,
            sigma_add: 0.0,
            mode: PerturbMode::PerTap,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_mult >= 0.0 && self.sigma_add >= 0.0)
            || !self.sigma_mult.is_finite()
            || !self.sigma_add.is_finite()
        {
            return Err(Error::InvalidArgument(format!(
                "perturbation sigmas must be finite and >= 0 (got {}, {})",
                self.sigma_mult, self.sigma_add
            )));
        }
        Ok(())
    }
}

/// `tap' = (1 + g) * tap + d` with `g ~ N(0, sigma_mult)`, `d ~ N(0, sigma_add)`.
///
/// Zero sigmas return the input unchanged, bit for bit.
pub fn perturb_tf<R: Rng + ?Sized>(
    ir: &ImpulseResponse,
    params: &PerturbationParams,
    rng: &mut R,
) -> Result<ImpulseResponse> {
    params.validate()?;
    if params.sigma_mult == 0.0 && params.sigma_add == 0.0 {
        return Ok(ir.clone());
    }
    let gain = Normal::new(0.0, params.sigma_mult).expect("validated sigma");
    let offset = Normal::new(0.0, params.sigma_add).expect("validated sigma");
    let taps = match params.mode {
        PerturbMode::PerTap => ir
            .taps()
            .iter()
            .map(|&h| {
                let g = gain.sample(rng);
                let d = offset.sample(rng);
                (1.0 + g) * h + d
            })
            .collect(),
        PerturbMode::PerResponse => {
            let g = gain.sample(rng);
            let d = offset.sample(rng);
            ir.taps().iter().map(|&h| (1.0 + g) * h + d).collect()
        }
    };
    Ok(ir.with_taps(taps))
}
