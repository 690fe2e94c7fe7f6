//! Learning-rate schedules as pure functions of the (1-based) step index.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::OptimError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Schedule {
    Constant {},
    /// Linear ramp from 0 over `warmup` steps, then flat.
    WarmupConstant {
        warmup: u64,
    },
    /// Linear warmup, then half-cosine from peak down to `min_lr_ratio × peak`
    /// at the final step.
    CosineWarmup {
        warmup: u64,
        min_lr_ratio: f64,
    },
    /// Warmup, stable plateau, and a linear decay to zero over the last
    /// `decay_fraction` of training.
    Wsd {
        warmup: u64,
        decay_fraction: f64,
    },
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule::CosineWarmup {
            warmup: 0,
            min_lr_ratio: 0.0,
        }
    }
}

impl Schedule {
    pub fn validate(&self, total_steps: u64) -> Result<(), OptimError> {
        let bad = |m: String| Err(OptimError::InvalidConfig(m));
        let warmup = match *self {
            Schedule::Constant {} => 0,
            Schedule::WarmupConstant { warmup } => warmup,
            Schedule::CosineWarmup {
                warmup,
                min_lr_ratio,
            } => {
                if !(0.0..=1.0).contains(&min_lr_ratio) {
                    return bad(format!(
                        "min_lr_ratio must lie in [0, 1], got {min_lr_ratio}"
                    ));
                }
                warmup
            }
            Schedule::Wsd {
                warmup,
                decay_fraction,
            } => {
                if !(0.0..=1.0).contains(&decay_fraction) {
                    return bad(format!(
                        "decay_fraction must lie in [0, 1], got {decay_fraction}"
                    ));
                }
                warmup
            }
        };
        if warmup > total_steps {
            return bad(format!(
                "warmup ({warmup}) exceeds total steps ({total_steps})"
            ));
        }
        Ok(())
    }

    /// Learning rate at `step ∈ [1, total]` for peak rate `peak`.
    pub fn lr_at(&self, step: u64, total: u64, peak: f64) -> f64 {
        let step = step.max(1);
        let warm =
            |w: u64| -> Option<f64> { (w > 0 && step <= w).then(|| peak * step as f64 / w as f64) };
        match *self {
            Schedule::Constant {} => peak,
            Schedule::WarmupConstant { warmup } => warm(warmup).unwrap_or(peak),
            Schedule::CosineWarmup {
                warmup,
                min_lr_ratio,
            } => {
                if let Some(lr) = warm(warmup) {
                    return lr;
                }
                let span = total.saturating_sub(warmup);
                if span == 0 {
                    return peak;
                }
                let progress = (step - warmup) as f64 / span as f64;
                let min_lr = min_lr_ratio * peak;
                min_lr + (peak - min_lr) * 0.5 * (1.0 + (PI * progress.min(1.0)).cos())
            }
            Schedule::Wsd {
                warmup,
                decay_fraction,
            } => {
                if let Some(lr) = warm(warmup) {
                    return lr;
                }
                let decay_steps = ((decay_fraction * total as f64).round() as u64).max(1);
                let decay_start = total.saturating_sub(decay_steps).max(warmup);
                if step <= decay_start {
                    return peak;
                }
                let len = (total - decay_start) as f64;
                peak * (total.saturating_sub(step)) as f64 / len
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_and_warmup() {
        assert_eq!(Schedule::Constant {}.lr_at(17, 100, 0.3), 0.3);
        let s = Schedule::WarmupConstant { warmup: 4 };
        let lrs: Vec<f64> = (1..=6).map(|t| s.lr_at(t, 10, 1.0)).collect();
        assert_eq!(lrs, vec![0.25, 0.5, 0.75, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn cosine_endpoints() {
        let s = Schedule::CosineWarmup {
            warmup: 10,
            min_lr_ratio: 0.01,
        };
        assert_eq!(s.lr_at(5, 110, 2.0), 1.0);
        assert_eq!(s.lr_at(10, 110, 2.0), 2.0);
        assert!((s.lr_at(60, 110, 2.0) - (0.02 + 1.98 * 0.5)).abs() < 1e-12);
        assert!((s.lr_at(110, 110, 2.0) - 0.02).abs() < 1e-12);
    }

    #[test]
    fn wsd_linear_tail() {
        let s = Schedule::Wsd {
            warmup: 0,
            decay_fraction: 0.8,
        };
        // decay over the last 8 of 10 steps, ending at 0
        assert_eq!(s.lr_at(1, 10, 1.0), 1.0);
        assert_eq!(s.lr_at(2, 10, 1.0), 1.0);
        assert_eq!(s.lr_at(6, 10, 1.0), 0.5);
        assert_eq!(s.lr_at(10, 10, 1.0), 0.0);
        let full = Schedule::Wsd {
            warmup: 0,
            decay_fraction: 1.0,
        };
        assert_eq!(full.lr_at(1, 4, 1.0), 0.75);
    }

    #[test]
    fn validation() {
        assert!(Schedule::WarmupConstant { warmup: 11 }
            .validate(10)
            .is_err());
        assert!(Schedule::Wsd {
            warmup: 0,
            decay_fraction: 1.5
        }
        .validate(10)
        .is_err());
        assert!(Schedule::default().validate(1).is_ok());
    }
}
