//! Single-slot update rules.
//!
//! Every rule applies decoupled weight decay `W ← W(1 − ηλ)` before adding
//! its own direction, so the decay never passes through the preconditioner or
//! the orthogonalization.

use log::warn;

use super::config::{scale_factor, OptimizerConfig, Variant};
use super::slot::{Family, ParamSlot, SlotState};
use super::OptimError;
use crate::linalg::{newton_schulz_with, LinalgError, Matrix};
use crate::moments::{bias_correction_factor, nesterov_lookahead, MomentState};

/// What a single slot step did.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepOutcome {
    /// `‖W_t − W_{t-1}‖_F`.
    pub update_norm: f64,
    /// The direction fed to Newton–Schulz was exactly zero; only decay ran.
    pub skipped_orthogonalization: bool,
}

/// `M̃ / (√(M̃² + γΓ̂) + ε)`, elementwise.
///
/// Coordinates with `M̃ = 0` map to 0 even when the denominator vanishes.
pub fn precondition_nsr(
    m_tilde: &Matrix,
    gamma_hat: &Matrix,
    gamma: f64,
    epsilon: f64,
) -> Result<Matrix, OptimError> {
    check_precondition_inputs(m_tilde, gamma_hat, epsilon)?;
    if gamma.is_nan() || gamma < 0.0 {
        return Err(OptimError::InvalidConfig(format!(
            "gamma must be >= 0, got {gamma}"
        )));
    }
    Ok(m_tilde.zip_map(gamma_hat, |m, v| {
        if m == 0.0 {
            0.0
        } else {
            m / ((m * m + gamma * v).sqrt() + epsilon)
        }
    })?)
}

/// `M̃ / (√Γ̂ + ε)`, elementwise.
pub fn precondition_vs(
    m_tilde: &Matrix,
    gamma_hat: &Matrix,
    epsilon: f64,
) -> Result<Matrix, OptimError> {
    check_precondition_inputs(m_tilde, gamma_hat, epsilon)?;
    let out = m_tilde.zip_map(gamma_hat, |m, v| {
        if m == 0.0 {
            0.0
        } else {
            m / (v.sqrt() + epsilon)
        }
    })?;
    if !out.is_finite() {
        return Err(OptimError::DegenerateVariance);
    }
    Ok(out)
}

/// Elementwise post-orthogonalization damping `S = √(1 + γΓ̂/(M̃² + ε))`.
pub fn nsr_post_scaling(
    m_tilde: &Matrix,
    gamma_hat: &Matrix,
    gamma: f64,
    epsilon: f64,
) -> Result<Matrix, OptimError> {
    check_precondition_inputs(m_tilde, gamma_hat, epsilon)?;
    let s = m_tilde.zip_map(gamma_hat, |m, v| {
        if gamma == 0.0 || v == 0.0 {
            1.0
        } else {
            (1.0 + gamma * v / (m * m + epsilon)).sqrt()
        }
    })?;
    // S = ∞ (zero signal, ε = 0) is fine: it zeroes the coordinate.
    if s.as_slice().iter().any(|x| x.is_nan()) {
        return Err(OptimError::DegenerateVariance);
    }
    Ok(s)
}

fn check_precondition_inputs(
    m_tilde: &Matrix,
    gamma_hat: &Matrix,
    epsilon: f64,
) -> Result<(), OptimError> {
    m_tilde.ensure_same_shape(gamma_hat)?;
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(OptimError::InvalidConfig(format!(
            "epsilon must be >= 0, got {epsilon}"
        )));
    }
    if let Some(&neg) = gamma_hat
        .as_slice()
        .iter()
        .find(|&&v| v.is_nan() || v < 0.0)
    {
        return Err(OptimError::NegativeVariance(neg));
    }
    Ok(())
}

/// `W ← W(1 − ηλ) − η·scale·dir`, returning `‖ΔW‖_F`.
fn apply_update(weights: &mut Matrix, dir: Option<&Matrix>, eta: f64, wd: f64, scale: f64) -> f64 {
    let decay = 1.0 - eta * wd;
    let step = eta * scale;
    let mut sq = 0.0;
    match dir {
        Some(d) => {
            for (w, &o) in weights.as_mut_slice().iter_mut().zip(d.as_slice()) {
                let new = *w * decay - step * o;
                sq += (new - *w) * (new - *w);
                *w = new;
            }
        }
        None => {
            for w in weights.as_mut_slice() {
                let new = *w * decay;
                sq += (new - *w) * (new - *w);
                *w = new;
            }
        }
    }
    sq.sqrt()
}

fn check_grad(slot: &ParamSlot, g: &Matrix) -> Result<(), OptimError> {
    if slot.weights.shape() != g.shape() {
        return Err(OptimError::GradientShape {
            id: slot.id.clone(),
            expected: slot.weights.shape(),
            got: g.shape(),
        });
    }
    if !g.is_finite() {
        return Err(OptimError::NonFiniteGradient(slot.id.clone()));
    }
    Ok(())
}

fn require_family(slot: &ParamSlot, family: Family) -> Result<(), OptimError> {
    if slot.family == family {
        Ok(())
    } else {
        Err(OptimError::WrongFamily {
            id: slot.id.clone(),
            family: slot.family,
        })
    }
}

fn state_mismatch(slot: &ParamSlot, wanted: &'static str) -> OptimError {
    OptimError::StateMismatch {
        id: slot.id.clone(),
        wanted,
        found: slot.state.as_ref().map_or("none", SlotState::kind),
    }
}

/// Orthogonalizes `dir`, mapping a zero input to `None`.
fn orthogonalize(
    slot_id: &str,
    dir: &Matrix,
    cfg: &OptimizerConfig,
) -> Result<Option<Matrix>, OptimError> {
    match newton_schulz_with(dir, cfg.ns_iters, cfg.ns_coefficients) {
        Ok(o) => Ok(Some(o)),
        Err(LinalgError::ZeroInput) => {
            warn!("slot `{slot_id}`: zero update direction, applying weight decay only");
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

/// EMA statistics, optional bias correction, and the lookahead `(M̃, Γ̂)`.
fn ema_lookahead(
    slot: &mut ParamSlot,
    g: &Matrix,
    cfg: &OptimizerConfig,
) -> Result<(Matrix, Matrix), OptimError> {
    let (rows, cols) = slot.weights.shape();
    let state = slot
        .state
        .get_or_insert_with(|| SlotState::Moments(MomentState::zeros(rows, cols)));
    let SlotState::Moments(moments) = state else {
        return Err(state_mismatch(slot, "moments"));
    };
    moments.update(g, cfg.beta)?;
    let (m_hat, gamma_hat) = if cfg.bias_correction {
        moments.bias_corrected(cfg.beta)?
    } else {
        moments.raw()
    };
    let m_tilde = nesterov_lookahead(g, &m_hat, cfg.beta)?;
    Ok((m_tilde, gamma_hat))
}

/// One step of Muon, Muon-NSR or Muon-VS on a matrix slot.
///
/// Muon keeps the unnormalized momentum `B ← βB + G` and orthogonalizes
/// `βB + G`. The variance-adaptive variants run the EMA pipeline:
/// moments → bias correction → lookahead → preconditioner → Newton–Schulz.
pub fn muon_variant_step(
    slot: &mut ParamSlot,
    g: &Matrix,
    cfg: &OptimizerConfig,
    eta: f64,
) -> Result<StepOutcome, OptimError> {
    require_family(slot, Family::MuonFamily)?;
    check_grad(slot, g)?;
    let direction = match cfg.variant {
        Variant::Muon => {
            let (rows, cols) = slot.weights.shape();
            let state = slot.state.get_or_insert_with(|| SlotState::Momentum {
                buf: Matrix::zeros(rows, cols),
                t: 0,
            });
            let SlotState::Momentum { buf, t } = state else {
                return Err(state_mismatch(slot, "momentum"));
            };
            buf.scale_in_place(cfg.beta);
            buf.axpy(1.0, g)?;
            *t += 1;
            let mut d = g.clone();
            d.axpy(cfg.beta, buf)?;
            d
        }
        Variant::MuonNsr => {
            let (m_tilde, gamma_hat) = ema_lookahead(slot, g, cfg)?;
            precondition_nsr(&m_tilde, &gamma_hat, cfg.gamma, cfg.epsilon)?
        }
        Variant::MuonVs => {
            let (m_tilde, gamma_hat) = ema_lookahead(slot, g, cfg)?;
            precondition_vs(&m_tilde, &gamma_hat, cfg.epsilon)?
        }
        Variant::MuonNsrReshuffled => return muon_nsr_reshuffled_step(slot, g, cfg, eta),
        other => return Err(OptimError::WrongVariant(other)),
    };
    let o = orthogonalize(&slot.id, &direction, cfg)?;
    let (m, n) = slot.weights.shape();
    let scale = scale_factor(m, n, cfg.scale_rule);
    let update_norm = apply_update(&mut slot.weights, o.as_ref(), eta, cfg.weight_decay, scale);
    Ok(StepOutcome {
        update_norm,
        skipped_orthogonalization: o.is_none(),
    })
}

/// Muon-NSR with the NSR damping moved after orthogonalization:
/// `O = NS(M̃)`, `O_post = O ⊘ √(1 + γΓ̂/(M̃² + ε))`, and `O_post` drives the update.
pub fn muon_nsr_reshuffled_step(
    slot: &mut ParamSlot,
    g: &Matrix,
    cfg: &OptimizerConfig,
    eta: f64,
) -> Result<StepOutcome, OptimError> {
    require_family(slot, Family::MuonFamily)?;
    check_grad(slot, g)?;
    let (m_tilde, gamma_hat) = ema_lookahead(slot, g, cfg)?;
    let o = match orthogonalize(&slot.id, &m_tilde, cfg)? {
        Some(o) => {
            let s = nsr_post_scaling(&m_tilde, &gamma_hat, cfg.gamma, cfg.epsilon)?;
            Some(o.zip_map(&s, |x, d| x / d)?)
        }
        None => None,
    };
    let (m, n) = slot.weights.shape();
    let scale = scale_factor(m, n, cfg.scale_rule);
    let update_norm = apply_update(&mut slot.weights, o.as_ref(), eta, cfg.weight_decay, scale);
    Ok(StepOutcome {
        update_norm,
        skipped_orthogonalization: o.is_none(),
    })
}

/// AdamW with decoupled decay. Bias correction follows `cfg.bias_correction`.
pub fn adamw_step(
    slot: &mut ParamSlot,
    g: &Matrix,
    cfg: &OptimizerConfig,
    eta: f64,
) -> Result<StepOutcome, OptimError> {
    check_grad(slot, g)?;
    let (rows, cols) = slot.weights.shape();
    let state = slot.state.get_or_insert_with(|| SlotState::Adam {
        m: Matrix::zeros(rows, cols),
        v: Matrix::zeros(rows, cols),
        t: 0,
    });
    let SlotState::Adam { m, v, t } = state else {
        return Err(state_mismatch(slot, "adam"));
    };
    let (b1, b2) = cfg.adam_betas;
    *t += 1;
    let (c1, c2) = if cfg.bias_correction {
        (
            bias_correction_factor(b1, *t),
            bias_correction_factor(b2, *t),
        )
    } else {
        (1.0, 1.0)
    };
    let mut dir = Matrix::zeros(rows, cols);
    for (((mi, vi), &gi), d) in m
        .as_mut_slice()
        .iter_mut()
        .zip(v.as_mut_slice())
        .zip(g.as_slice())
        .zip(dir.as_mut_slice())
    {
        *mi = b1 * *mi + (1.0 - b1) * gi;
        *vi = b2 * *vi + (1.0 - b2) * gi * gi;
        let m_hat = *mi / c1;
        let v_hat = *vi / c2;
        *d = m_hat / (v_hat.sqrt() + cfg.adam_epsilon);
    }
    let update_norm = apply_update(&mut slot.weights, Some(&dir), eta, cfg.weight_decay, 1.0);
    Ok(StepOutcome {
        update_norm,
        skipped_orthogonalization: false,
    })
}

/// Signum: `m ← βm + (1−β)g`, step along `sign(m)` with `sign(0) = 0`.
pub fn signum_step(
    slot: &mut ParamSlot,
    g: &Matrix,
    cfg: &OptimizerConfig,
    eta: f64,
) -> Result<StepOutcome, OptimError> {
    check_grad(slot, g)?;
    let (rows, cols) = slot.weights.shape();
    let state = slot.state.get_or_insert_with(|| SlotState::Momentum {
        buf: Matrix::zeros(rows, cols),
        t: 0,
    });
    let SlotState::Momentum { buf, t } = state else {
        return Err(state_mismatch(slot, "momentum"));
    };
    let beta = cfg.beta;
    for (b, &gi) in buf.as_mut_slice().iter_mut().zip(g.as_slice()) {
        *b = beta * *b + (1.0 - beta) * gi;
    }
    *t += 1;
    let dir = buf.map(sign0);
    let update_norm = apply_update(&mut slot.weights, Some(&dir), eta, cfg.weight_decay, 1.0);
    Ok(StepOutcome {
        update_norm,
        skipped_orthogonalization: false,
    })
}

/// Sign with `sign(0) = 0`.
pub fn sign0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Routes a slot to its update rule under the configured variant.
///
/// `adamw` and `signum` apply to every slot; the orthogonalized variants
/// handle Muon-family slots and fall back to AdamW for the rest.
pub fn step_slot(
    slot: &mut ParamSlot,
    g: &Matrix,
    cfg: &OptimizerConfig,
    eta: f64,
) -> Result<StepOutcome, OptimError> {
    match cfg.variant {
        Variant::Adamw => adamw_step(slot, g, cfg, eta),
        Variant::Signum => signum_step(slot, g, cfg, eta),
        _ if slot.family == Family::AdamwFamily => adamw_step(slot, g, cfg, eta),
        Variant::MuonNsrReshuffled => muon_nsr_reshuffled_step(slot, g, cfg, eta),
        _ => muon_variant_step(slot, g, cfg, eta),
    }
}
