//! Optimizer steps: Muon, Muon-NSR, Muon-VS, Muon-NSR-Reshuffled, AdamW and
//! Signum, plus parameter partitioning, schedules and global-norm clipping.

mod config;
mod schedule;
mod slot;
mod steps;

pub use config::{
    scale_factor, OptimizerConfig, ScaleRule, Variant, DEFAULT_ADAM_BETAS, DEFAULT_BETA,
    DEFAULT_EPSILON, DEFAULT_GAMMA,
};
pub use schedule::Schedule;
pub use slot::{partition_params, Family, NamedParam, ParamShape, ParamSlot, SlotState};
pub use steps::{
    adamw_step, muon_nsr_reshuffled_step, muon_variant_step, nsr_post_scaling, precondition_nsr,
    precondition_vs, sign0, signum_step, step_slot, StepOutcome,
};

use thiserror::Error;

use crate::linalg::{LinalgError, Matrix};
use crate::moments::MomentError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Moments(#[from] MomentError),
    #[error("invalid optimizer config: {0}")]
    InvalidConfig(String),
    #[error("unsupported parameter shape {0:?} (only 1-D and 2-D tensors)")]
    UnsupportedShape(Vec<usize>),
    #[error("slot `{id}`: weights have shape {got:?}, expected {expected:?}")]
    WeightShape {
        id: String,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("slot `{id}`: gradient has shape {got:?}, expected {expected:?}")]
    GradientShape {
        id: String,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("slot `{0}`: non-finite gradient")]
    NonFiniteGradient(String),
    #[error("slot `{id}` belongs to {family:?}")]
    WrongFamily { id: String, family: Family },
    #[error("variant `{0}` has no matrix-sign step")]
    WrongVariant(Variant),
    #[error("slot `{id}`: expected {wanted} state, found {found}")]
    StateMismatch {
        id: String,
        wanted: &'static str,
        found: &'static str,
    },
    #[error("negative variance estimate {0}")]
    NegativeVariance(f64),
    #[error("variance-scaled direction is not finite (zero variance with epsilon = 0)")]
    DegenerateVariance,
    #[error("expected {expected} gradients, got {got}")]
    GradientCount { expected: usize, got: usize },
}

/// Global L2 norm over all gradients, summed in slot order.
pub fn global_norm(grads: &[Matrix]) -> f64 {
    grads
        .iter()
        .map(|g| g.frobenius_norm_sq())
        .sum::<f64>()
        .sqrt()
}

/// Rescales all gradients jointly so their global norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [Matrix], max_norm: f64) -> f64 {
    let norm = global_norm(grads);
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        grads.iter_mut().for_each(|g| g.scale_in_place(s));
    }
    norm
}

/// Totals over one optimizer step across all slots.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepStats {
    pub update_norm: f64,
    pub skipped_slots: usize,
}

/// A set of parameter slots driven by one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    cfg: OptimizerConfig,
    slots: Vec<ParamSlot>,
}

impl Optimizer {
    pub fn new(cfg: OptimizerConfig, slots: Vec<ParamSlot>) -> Result<Self, OptimError> {
        cfg.validate()?;
        Ok(Self { cfg, slots })
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.cfg
    }

    pub fn slots(&self) -> &[ParamSlot] {
        &self.slots
    }

    pub fn slots_mut(&mut self) -> &mut [ParamSlot] {
        &mut self.slots
    }

    pub fn into_slots(self) -> Vec<ParamSlot> {
        self.slots
    }

    pub fn weights(&self) -> Vec<Matrix> {
        self.slots.iter().map(|s| s.weights.clone()).collect()
    }

    /// Applies one step with learning rate `eta` to every slot. `grads` are
    /// matched to slots by position. Slots are independent, so they may run in
    /// parallel; the per-slot results are reduced in slot order.
    pub fn step(&mut self, grads: &[Matrix], eta: f64) -> Result<StepStats, OptimError> {
        if grads.len() != self.slots.len() {
            return Err(OptimError::GradientCount {
                expected: self.slots.len(),
                got: grads.len(),
            });
        }
        let cfg = &self.cfg;
        let outcomes: Vec<Result<StepOutcome, OptimError>> = {
            #[cfg(feature = "parallel")]
            {
                use rayon::prelude::*;
                self.slots
                    .par_iter_mut()
                    .zip(grads.par_iter())
                    .map(|(slot, g)| step_slot(slot, g, cfg, eta))
                    .collect()
            }
            #[cfg(not(feature = "parallel"))]
            {
                self.slots
                    .iter_mut()
                    .zip(grads)
                    .map(|(slot, g)| step_slot(slot, g, cfg, eta))
                    .collect()
            }
        };
        let mut sq = 0.0;
        let mut skipped = 0;
        for o in outcomes {
            let o = o?;
            sq += o.update_norm * o.update_norm;
            skipped += usize::from(o.skipped_orthogonalization);
        }
        Ok(StepStats {
            update_norm: sq.sqrt(),
            skipped_slots: skipped,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clip_scales_jointly() {
        let mut grads = vec![
            Matrix::from_rows(&[&[3.0]]),
            Matrix::from_rows(&[&[0.0, 4.0]]),
        ];
        let pre = clip_global_norm(&mut grads, 1.0);
        assert_eq!(pre, 5.0);
        assert!((global_norm(&grads) - 1.0).abs() < 1e-15);
        assert!((grads[0][(0, 0)] - 0.6).abs() < 1e-15);

        let mut small = vec![Matrix::from_rows(&[&[0.1]])];
        clip_global_norm(&mut small, 1.0);
        assert_eq!(small[0][(0, 0)], 0.1);
    }

    #[test]
    fn optimizer_checks_gradient_count() {
        let slots = partition_params(vec![NamedParam::new("w", &[2, 2], vec![1.0; 4])]).unwrap();
        let mut opt = Optimizer::new(OptimizerConfig::default(), slots).unwrap();
        assert!(matches!(
            opt.step(&[], 0.1),
            Err(OptimError::GradientCount {
                expected: 1,
                got: 0
            })
        ));
    }
}
