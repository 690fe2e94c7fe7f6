//! Per-parameter running statistics: EMA mean `M`, variance surrogate `Γ`,
//! bias correction, and the Nesterov lookahead direction.
//!
//! With a shared decay `β`, the recursion
//!
//! ```text
//! Γ_t = β·Γ_{t-1} + β(1-β)·(M_{t-1} - G_t)²
//! M_t = β·M_{t-1} + (1-β)·G_t
//! ```
//!
//! tracks exactly `v_t - m_t²` of Adam's two EMAs, so `Γ` is an online
//! estimate of per-coordinate gradient variance around the running mean.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{LinalgError, Matrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MomentError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("beta must lie in [0, 1), got {0}")]
    BetaOutOfRange(f64),
    #[error("bias correction needs at least one update (t = 0)")]
    ColdState,
}

fn check_beta(beta: f64) -> Result<(), MomentError> {
    if (0.0..1.0).contains(&beta) {
        Ok(())
    } else {
        Err(MomentError::BetaOutOfRange(beta))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentState {
    pub m: Matrix,
    pub gamma: Matrix,
    pub t: u64,
}

impl MomentState {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            m: Matrix::zeros(rows, cols),
            gamma: Matrix::zeros(rows, cols),
            t: 0,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.m.shape()
    }

    /// One step of the coupled recursion. `Γ` reads the pre-update `M`.
    pub fn update(&mut self, g: &Matrix, beta: f64) -> Result<(), MomentError> {
        check_beta(beta)?;
        self.m.ensure_same_shape(g)?;
        g.ensure_finite()?;
        let w = beta * (1.0 - beta);
        for ((m, gam), &gi) in self
            .m
            .as_mut_slice()
            .iter_mut()
            .zip(self.gamma.as_mut_slice())
            .zip(g.as_slice())
        {
            let surprise = *m - gi;
            *gam = beta * *gam + w * surprise * surprise;
            *m = beta * *m + (1.0 - beta) * gi;
        }
        self.t += 1;
        Ok(())
    }

    /// `(M / (1-βᵗ), Γ / (1-βᵗ))`.
    pub fn bias_corrected(&self, beta: f64) -> Result<(Matrix, Matrix), MomentError> {
        if self.t == 0 {
            return Err(MomentError::ColdState);
        }
        check_beta(beta)?;
        let corr = bias_correction_factor(beta, self.t);
        Ok((self.m.scale(1.0 / corr), self.gamma.scale(1.0 / corr)))
    }

    /// Uncorrected statistics, for the bias-correction-off mode.
    pub fn raw(&self) -> (Matrix, Matrix) {
        (self.m.clone(), self.gamma.clone())
    }
}

/// `1 - βᵗ`.
pub fn bias_correction_factor(beta: f64, t: u64) -> f64 {
    // powi saturates cleanly to 0 for large t
    let t = i32::try_from(t).unwrap_or(i32::MAX);
    1.0 - beta.powi(t)
}

/// Free-function form of [`MomentState::update`].
pub fn update_moments(state: &mut MomentState, g: &Matrix, beta: f64) -> Result<(), MomentError> {
    state.update(g, beta)
}

/// Free-function form of [`MomentState::bias_corrected`].
pub fn bias_correct(state: &MomentState, beta: f64) -> Result<(Matrix, Matrix), MomentError> {
    state.bias_corrected(beta)
}

/// `G + β/(1-β) · M̂`. Rescaling by `1/(1-β)` puts the EMA mean on the same
/// footing as an unnormalized momentum sum `Σ βᵏ G`.
pub fn nesterov_lookahead(g: &Matrix, m_hat: &Matrix, beta: f64) -> Result<Matrix, MomentError> {
    check_beta(beta)?;
    let k = beta / (1.0 - beta);
    let mut out = g.clone();
    out.axpy(k, m_hat)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(x: f64) -> Matrix {
        Matrix::filled(1, 1, x)
    }

    #[test]
    fn first_two_steps_match_adam_oracle() {
        // Adam with β₁=β₂=0.5 from zero: m₁=0.5, v₁=0.5 → v₁-m₁²=0.25
        // g₂=2: m₂=1.25, v₂=2.25 → v₂-m₂²=0.6875
        let mut s = MomentState::zeros(1, 1);
        s.update(&scalar(1.0), 0.5).unwrap();
        assert_eq!(s.m[(0, 0)], 0.5);
        assert_eq!(s.gamma[(0, 0)], 0.25);
        assert_eq!(s.t, 1);
        s.update(&scalar(2.0), 0.5).unwrap();
        assert_eq!(s.m[(0, 0)], 1.25);
        assert_eq!(s.gamma[(0, 0)], 0.6875);
        assert_eq!(s.t, 2);
    }

    #[test]
    fn zero_surprise_is_pure_decay() {
        let mut s = MomentState::zeros(1, 2);
        s.m = Matrix::from_rows(&[&[0.3, -1.2]]);
        s.gamma = Matrix::from_rows(&[&[2.0, 0.5]]);
        let g = s.m.clone();
        s.update(&g, 0.9).unwrap();
        assert_eq!(s.gamma, Matrix::from_rows(&[&[0.9 * 2.0, 0.9 * 0.5]]));
    }

    #[test]
    fn update_errors() {
        let mut s = MomentState::zeros(2, 2);
        assert!(matches!(
            s.update(&Matrix::zeros(2, 3), 0.9),
            Err(MomentError::Linalg(LinalgError::ShapeMismatch { .. }))
        ));
        let mut bad = Matrix::zeros(2, 2);
        bad[(0, 0)] = f64::INFINITY;
        assert!(matches!(
            s.update(&bad, 0.9),
            Err(MomentError::Linalg(LinalgError::NonFinite))
        ));
        assert!(matches!(
            s.update(&Matrix::zeros(2, 2), 1.0),
            Err(MomentError::BetaOutOfRange(_))
        ));
        assert_eq!(s.t, 0);
    }

    #[test]
    fn bias_correction_cases() {
        let s = MomentState::zeros(1, 1);
        assert_eq!(s.bias_corrected(0.9), Err(MomentError::ColdState));

        let mut s = MomentState::zeros(1, 1);
        s.update(&scalar(3.0), 0.9).unwrap();
        let (m_hat, g_hat) = s.bias_corrected(0.9).unwrap();
        assert!((m_hat[(0, 0)] - 3.0).abs() < 1e-15);
        // Γ₁ = β(1-β)g² → Γ̂₁ = βg²
        assert!((g_hat[(0, 0)] - 0.9 * 9.0).abs() < 1e-13);

        let s = MomentState {
            m: scalar(1.25),
            gamma: scalar(0.0),
            t: 2,
        };
        let (m_hat, _) = s.bias_corrected(0.5).unwrap();
        assert!((m_hat[(0, 0)] - 1.25 / 0.75).abs() < 1e-15);

        let s = MomentState {
            m: scalar(0.7),
            gamma: scalar(0.1),
            t: 100_000,
        };
        let (m_hat, g_hat) = s.bias_corrected(0.95).unwrap();
        assert!((m_hat[(0, 0)] - 0.7).abs() < 1e-12);
        assert!((g_hat[(0, 0)] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn lookahead_cases() {
        // after g₁=1 at β=0.5 with no correction: M=0.5 → 1 + 1·0.5
        let la = nesterov_lookahead(&scalar(1.0), &scalar(0.5), 0.5).unwrap();
        assert_eq!(la[(0, 0)], 1.5);
        let g = Matrix::from_rows(&[&[1.0, -2.0]]);
        assert_eq!(
            nesterov_lookahead(&g, &Matrix::zeros(1, 2), 0.9).unwrap(),
            g
        );
        assert_eq!(
            nesterov_lookahead(&g, &Matrix::from_rows(&[&[5.0, 5.0]]), 0.0).unwrap(),
            g
        );
        assert!(matches!(
            nesterov_lookahead(&g, &g, 1.0),
            Err(MomentError::BetaOutOfRange(_))
        ));
    }
}
