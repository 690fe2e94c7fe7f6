//! Run configuration: TOML with dotted sections and strict keys.
//!
//! ```toml
//! steps = 500
//! log_every = 10
//! clip_norm = 1.0        # 0 disables clipping
//! master_seed = 0
//! threshold = 1e-3       # optional; enables steps-to-threshold
//!
//! [problem]
//! kind = "noisy_quadratic"
//! rows = 16
//! cols = 16
//!
//! [optimizer]
//! variant = "muon_nsr"
//! gamma = 10.0
//!
//! [schedule]
//! kind = "cosine_warmup"
//! warmup = 0
//! min_lr_ratio = 0.0
//!
//! [output]
//! dir = "runs/nsr"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::linalg::NsCoefficients;
use crate::optim::{OptimizerConfig, ScaleRule, Schedule, Variant};
use crate::problems::ProblemSpec;

pub const DEFAULT_STEPS: u64 = 500;
pub const DEFAULT_LOG_EVERY: u64 = 10;
pub const DEFAULT_CLIP_NORM: f64 = 1.0;

/// Optimizer table as written in a config file; omitted keys take the
/// variant's defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSection {
    pub variant: Option<Variant>,
    pub lr: Option<f64>,
    pub weight_decay: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub epsilon: Option<f64>,
    pub ns_iters: Option<usize>,
    pub ns_coefficients: Option<NsCoefficients>,
    pub scale_rule: Option<ScaleRule>,
    pub bias_correction: Option<bool>,
    pub adam_betas: Option<(f64, f64)>,
    pub adam_epsilon: Option<f64>,
}

impl OptimizerSection {
    pub fn resolve(&self) -> OptimizerConfig {
        let mut c = OptimizerConfig::new(self.variant.unwrap_or(Variant::MuonNsr));
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { c.$f = v; } )* };
        }
        take!(
            lr,
            weight_decay,
            beta,
            gamma,
            epsilon,
            ns_iters,
            ns_coefficients,
            scale_rule,
            bias_correction,
            adam_betas,
            adam_epsilon
        );
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub csv: String,
    pub summary: String,
    pub checkpoint: String,
    /// Write a checkpoint every this many steps; 0 disables.
    pub checkpoint_every: u64,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("runs/default"),
            csv: "metrics.csv".into(),
            summary: "summary.json".into(),
            checkpoint: "checkpoint.json".into(),
            checkpoint_every: 0,
        }
    }
}

impl OutputSection {
    pub fn csv_path(&self) -> PathBuf {
        self.dir.join(&self.csv)
    }

    pub fn summary_path(&self) -> PathBuf {
        self.dir.join(&self.summary)
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.dir.join(&self.checkpoint)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawRunConfig {
    steps: u64,
    log_every: u64,
    clip_norm: f64,
    master_seed: u64,
    threshold: Option<f64>,
    record_wall_time: bool,
    problem: ProblemSpec,
    optimizer: OptimizerSection,
    schedule: Schedule,
    output: OutputSection,
}

impl Default for RawRunConfig {
    fn default() -> Self {
        Self {
            steps: DEFAULT_STEPS,
            log_every: DEFAULT_LOG_EVERY,
            clip_norm: DEFAULT_CLIP_NORM,
            master_seed: 0,
            threshold: None,
            record_wall_time: true,
            problem: ProblemSpec::default(),
            optimizer: OptimizerSection::default(),
            schedule: Schedule::default(),
            output: OutputSection::default(),
        }
    }
}

/// Fully resolved and validated experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRunConfig")]
pub struct RunConfig {
    pub steps: u64,
    pub log_every: u64,
    /// Global gradient-norm cap; 0 means no clipping.
    pub clip_norm: f64,
    /// Seeds parameter initialization and gradient noise. The problem's own
    /// seed fixes its data.
    pub master_seed: u64,
    pub threshold: Option<f64>,
    /// When false every record carries `wall_ms = 0`, which makes metric files
    /// byte-identical across runs.
    pub record_wall_time: bool,
    pub problem: ProblemSpec,
    pub optimizer: OptimizerConfig,
    pub schedule: Schedule,
    pub output: OutputSection,
}

impl TryFrom<RawRunConfig> for RunConfig {
    type Error = HarnessError;

    fn try_from(raw: RawRunConfig) -> Result<Self, Self::Error> {
        let cfg = RunConfig {
            steps: raw.steps,
            log_every: raw.log_every,
            clip_norm: raw.clip_norm,
            master_seed: raw.master_seed,
            threshold: raw.threshold,
            record_wall_time: raw.record_wall_time,
            problem: raw.problem,
            optimizer: raw.optimizer.resolve(),
            schedule: raw.schedule,
            output: raw.output,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RawRunConfig::default()
            .try_into()
            .expect("defaults are valid")
    }
}

impl RunConfig {
    pub fn new(problem: ProblemSpec, optimizer: OptimizerConfig) -> Self {
        Self {
            problem,
            optimizer,
            ..Self::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let raw: RawRunConfig =
            toml::from_str(text).map_err(|e| HarnessError::Parse(e.to_string()))?;
        raw.try_into()
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let invalid = |field: &str, message: String| {
            Err(HarnessError::Invalid {
                field: field.to_string(),
                message,
            })
        };
        if self.steps == 0 {
            return invalid("steps", "must be >= 1".into());
        }
        if self.log_every == 0 {
            return invalid("log_every", "must be >= 1".into());
        }
        if !(self.clip_norm.is_finite() && self.clip_norm >= 0.0) {
            return invalid(
                "clip_norm",
                format!("must be finite and >= 0, got {}", self.clip_norm),
            );
        }
        if let Some(t) = self.threshold {
            if !t.is_finite() {
                return invalid("threshold", format!("must be finite, got {t}"));
            }
        }
        if let Err(e) = self.problem.validate() {
            return invalid("problem", e.to_string());
        }
        if let Err(e) = self.optimizer.validate() {
            return invalid("optimizer", e.to_string());
        }
        if let Err(e) = self.schedule.validate(self.steps) {
            return invalid("schedule", e.to_string());
        }
        Ok(())
    }
}

/// Reads and validates a TOML run configuration.
pub fn load_config(path: &Path) -> Result<RunConfig, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    RunConfig::from_toml_str(&text).map_err(|e| match e {
        HarnessError::Parse(msg) => HarnessError::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::ProblemKind;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = RunConfig::from_toml_str(
            "[problem]\nkind = \"quadratic\"\n[optimizer]\nvariant = \"muon_vs\"\n",
        )
        .unwrap();
        assert_eq!(cfg.problem.kind, ProblemKind::Quadratic);
        assert_eq!(cfg.optimizer.variant, Variant::MuonVs);
        assert_eq!(cfg.optimizer.beta, 0.95);
        assert_eq!(cfg.optimizer.epsilon, 1e-8);
        assert_eq!(cfg.optimizer.ns_iters, 5);
        assert_eq!(cfg.optimizer.gamma, 10.0);
        assert_eq!(cfg.clip_norm, 1.0);
        assert_eq!(cfg.steps, DEFAULT_STEPS);
    }

    #[test]
    fn zero_steps_names_the_field() {
        let err = RunConfig::from_toml_str("steps = 0\n").unwrap_err();
        assert!(matches!(err, HarnessError::Invalid { ref field, .. } if field == "steps"));
    }

    #[test]
    fn unknown_keys_are_rejected_with_context() {
        for text in [
            "stepz = 3\n",
            "[optimizer]\nvariant = \"muon\"\nlearning_rate = 0.1\n",
            "[problem]\nkind = \"quadratic\"\nsize = 4\n",
            "[schedule]\nkind = \"constant\"\nwarmup = 3\n",
        ] {
            match RunConfig::from_toml_str(text) {
                Err(HarnessError::Parse(msg)) => assert!(msg.contains("line"), "{msg}"),
                other => panic!("expected parse error for {text:?}, got {other:?}"),
            }
        }
    }

    #[test]
    fn schedule_longer_than_run_is_invalid() {
        let err = RunConfig::from_toml_str(
            "steps = 10\n[schedule]\nkind = \"warmup_constant\"\nwarmup = 20\n",
        )
        .unwrap_err();
        assert!(matches!(err, HarnessError::Invalid { ref field, .. } if field == "schedule"));
    }

    #[test]
    fn toml_echo_round_trips() {
        let cfg = RunConfig::from_toml_str(
            "steps = 40\nthreshold = 0.5\n[problem]\nkind = \"noisy_quadratic\"\nnoise_sigma = [0.5, 1.0]\n\
             [optimizer]\nvariant = \"adamw\"\nadam_betas = [0.8, 0.9]\n\
             [schedule]\nkind = \"wsd\"\nwarmup = 4\ndecay_fraction = 0.8\n",
        )
        .unwrap();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), cfg);
    }
}
