use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::OptimError;
use crate::linalg::{NsCoefficients, DEFAULT_NS_ITERS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Muon,
    MuonNsr,
    MuonVs,
    MuonNsrReshuffled,
    Adamw,
    Signum,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Muon,
        Variant::MuonNsr,
        Variant::MuonVs,
        Variant::MuonNsrReshuffled,
        Variant::Adamw,
        Variant::Signum,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Muon => "muon",
            Variant::MuonNsr => "muon_nsr",
            Variant::MuonVs => "muon_vs",
            Variant::MuonNsrReshuffled => "muon_nsr_reshuffled",
            Variant::Adamw => "adamw",
            Variant::Signum => "signum",
        }
    }

    /// Whether `gamma` enters the update.
    pub fn uses_gamma(self) -> bool {
        matches!(self, Variant::MuonNsr | Variant::MuonNsrReshuffled)
    }

    /// Whether matrix slots go through Newton–Schulz.
    pub fn is_orthogonalized(self) -> bool {
        matches!(
            self,
            Variant::Muon | Variant::MuonNsr | Variant::MuonVs | Variant::MuonNsrReshuffled
        )
    }

    /// Peak learning rate used when a config does not set one. Tuned on the
    /// deterministic 16×16 quadratic with the default cosine schedule.
    pub fn default_lr(self) -> f64 {
        match self {
            Variant::Muon | Variant::MuonNsr | Variant::MuonVs | Variant::MuonNsrReshuffled => 0.1,
            Variant::Adamw => 0.05,
            Variant::Signum => 0.02,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = OptimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| OptimError::InvalidConfig(format!("unknown variant `{s}`")))
    }
}

/// Dimension-dependent multiplier on the orthogonalized update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleRule {
    /// `0.2 · √max(m, n)`, matching AdamW's update RMS.
    #[default]
    #[serde(rename = "muon_02sqrt")]
    Muon02Sqrt,
    /// `√max(1, m/n)`.
    RmsRatio,
}

pub fn scale_factor(rows: usize, cols: usize, rule: ScaleRule) -> f64 {
    let (m, n) = (rows as f64, cols as f64);
    match rule {
        ScaleRule::Muon02Sqrt => 0.2 * m.max(n).sqrt(),
        ScaleRule::RmsRatio => (m / n).max(1.0).sqrt(),
    }
}

pub const DEFAULT_BETA: f64 = 0.95;
pub const DEFAULT_GAMMA: f64 = 10.0;
pub const DEFAULT_EPSILON: f64 = 1e-8;
pub const DEFAULT_ADAM_BETAS: (f64, f64) = (0.9, 0.95);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub variant: Variant,
    /// Peak learning rate; the schedule scales it per step.
    pub lr: f64,
    pub weight_decay: f64,
    pub beta: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub ns_iters: usize,
    pub ns_coefficients: NsCoefficients,
    pub scale_rule: ScaleRule,
    pub bias_correction: bool,
    pub adam_betas: (f64, f64),
    pub adam_epsilon: f64,
}

impl OptimizerConfig {
    pub fn new(variant: Variant) -> Self {
        Self {
            variant,
            lr: variant.default_lr(),
            weight_decay: 0.0,
            beta: DEFAULT_BETA,
            gamma: DEFAULT_GAMMA,
            epsilon: DEFAULT_EPSILON,
            ns_iters: DEFAULT_NS_ITERS,
            ns_coefficients: NsCoefficients::default(),
            scale_rule: ScaleRule::default(),
            bias_correction: true,
            adam_betas: DEFAULT_ADAM_BETAS,
            adam_epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn with_lr(mut self, lr: f64) -> Self {
        self.lr = lr;
        self
    }

    pub fn with_weight_decay(mut self, wd: f64) -> Self {
        self.weight_decay = wd;
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_epsilon(mut self, eps: f64) -> Self {
        self.epsilon = eps;
        self
    }

    pub fn with_bias_correction(mut self, on: bool) -> Self {
        self.bias_correction = on;
        self
    }

    pub fn with_scale_rule(mut self, rule: ScaleRule) -> Self {
        self.scale_rule = rule;
        self
    }

    pub fn validate(&self) -> Result<(), OptimError> {
        let bad = |msg: String| Err(OptimError::InvalidConfig(msg));
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad(format!("lr must be > 0, got {}", self.lr));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return bad(format!(
                "weight_decay must be >= 0, got {}",
                self.weight_decay
            ));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return bad(format!("beta must lie in [0, 1), got {}", self.beta));
        }
        if self.variant.uses_gamma() && !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return bad(format!("gamma must be >= 0, got {}", self.gamma));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return bad(format!("epsilon must be > 0, got {}", self.epsilon));
        }
        if self.ns_iters == 0 {
            return bad("ns_iters must be >= 1".into());
        }
        let (b1, b2) = self.adam_betas;
        if !(0.0..1.0).contains(&b1) || !(0.0..1.0).contains(&b2) {
            return bad(format!("adam_betas must lie in [0, 1), got ({b1}, {b2})"));
        }
        if !(self.adam_epsilon.is_finite() && self.adam_epsilon > 0.0) {
            return bad(format!(
                "adam_epsilon must be > 0, got {}",
                self.adam_epsilon
            ));
        }
        Ok(())
    }
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self::new(Variant::MuonNsr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale_factor_examples() {
        assert!((scale_factor(1024, 256, ScaleRule::Muon02Sqrt) - 6.4).abs() < 1e-12);
        assert_eq!(scale_factor(1024, 256, ScaleRule::RmsRatio), 2.0);
        assert_eq!(scale_factor(37, 37, ScaleRule::RmsRatio), 1.0);
        assert_eq!(scale_factor(256, 1024, ScaleRule::RmsRatio), 1.0);
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.as_str().parse::<Variant>().unwrap(), v);
            let json = serde_json::to_string(&v).unwrap();
            assert_eq!(json, format!("\"{}\"", v.as_str()));
        }
        assert!("sgd".parse::<Variant>().is_err());
    }

    #[test]
    fn validation() {
        assert!(OptimizerConfig::default().validate().is_ok());
        assert!(OptimizerConfig::default().with_lr(0.0).validate().is_err());
        assert!(OptimizerConfig::default()
            .with_epsilon(0.0)
            .validate()
            .is_err());
        assert!(OptimizerConfig::default()
            .with_beta(1.0)
            .validate()
            .is_err());
        assert!(OptimizerConfig::default()
            .with_gamma(-1.0)
            .validate()
            .is_err());
        // gamma is ignored by variants that do not use it
        assert!(OptimizerConfig::new(Variant::MuonVs)
            .with_gamma(-1.0)
            .validate()
            .is_ok());
    }
}
