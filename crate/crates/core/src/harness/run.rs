//! The training loop: sample a gradient, clip, step, evaluate, log.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::checkpoint::Checkpoint;
use super::{HarnessError, RunConfig};
use crate::linalg::Matrix;
use crate::optim::{clip_global_norm, global_norm, partition_params, Optimizer, Variant};
use crate::problems::{make_problem, Problem};

/// One logged step. `train_loss` is the full loss after the step's update;
/// `grad_norm` is the global gradient norm before clipping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub step: u64,
    pub eta: f64,
    pub train_loss: f64,
    pub grad_norm: f64,
    pub update_norm: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub variant: Variant,
    pub steps: u64,
    pub initial_loss: f64,
    pub final_loss: f64,
    /// Lowest logged loss and the step it was logged at.
    pub best_loss: f64,
    pub best_step: u64,
    pub threshold: Option<f64>,
    /// First logged step whose loss is at or below `threshold`.
    pub steps_to_threshold: Option<u64>,
    /// Slot-steps where orthogonalization was skipped on an all-zero input.
    pub skipped_orthogonalizations: u64,
}

impl RunSummary {
    pub fn reduction(&self) -> f64 {
        self.initial_loss / self.final_loss
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub records: Vec<RunRecord>,
    pub summary: RunSummary,
}

/// Summary statistics over a non-empty record list.
pub fn summarize(
    cfg: &RunConfig,
    initial_loss: f64,
    records: &[RunRecord],
    skipped: u64,
) -> RunSummary {
    let last = records.last().expect("at least one record");
    let best = records
        .iter()
        .min_by(|a, b| a.train_loss.total_cmp(&b.train_loss))
        .expect("at least one record");
    let steps_to_threshold = cfg
        .threshold
        .and_then(|t| records.iter().find(|r| r.train_loss <= t).map(|r| r.step));
    RunSummary {
        variant: cfg.optimizer.variant,
        steps: last.step,
        initial_loss,
        final_loss: last.train_loss,
        best_loss: best.train_loss,
        best_step: best.step,
        threshold: cfg.threshold,
        steps_to_threshold,
        skipped_orthogonalizations: skipped,
    }
}

/// A run in progress. Holds everything needed to continue or checkpoint.
#[derive(Debug)]
pub struct Experiment {
    cfg: RunConfig,
    problem: Problem,
    opt: Optimizer,
    step: u64,
    initial_loss: f64,
    records: Vec<RunRecord>,
    skipped: u64,
    started: Instant,
}

impl Experiment {
    pub fn new(cfg: RunConfig) -> Result<Self, HarnessError> {
        cfg.validate()?;
        let mut problem = make_problem(&cfg.problem)?;
        problem.set_noise_seed(cfg.master_seed);
        let params = problem.initial_params(cfg.master_seed);
        let initial_loss = problem.evaluate_loss(&params)?;
        let slots = partition_params(problem.named_params(&params)?)?;
        let opt = Optimizer::new(cfg.optimizer.clone(), slots)?;
        Ok(Self {
            cfg,
            problem,
            opt,
            step: 0,
            initial_loss,
            records: Vec::new(),
            skipped: 0,
            started: Instant::now(),
        })
    }

    /// Rebuilds a run from a checkpoint; continuing it reproduces the
    /// uninterrupted run bit for bit.
    pub fn resume(ckpt: Checkpoint) -> Result<Self, HarnessError> {
        let mut exp = Self::new(ckpt.config)?;
        let expected: Vec<_> = exp
            .opt
            .slots()
            .iter()
            .map(|s| (s.id.clone(), s.shape))
            .collect();
        let found: Vec<_> = ckpt.slots.iter().map(|s| (s.id.clone(), s.shape)).collect();
        if expected != found {
            return Err(HarnessError::CheckpointMismatch(format!(
                "slot layout {found:?} does not match the configured problem {expected:?}"
            )));
        }
        if ckpt.step > exp.cfg.steps {
            return Err(HarnessError::CheckpointMismatch(format!(
                "checkpoint step {} is past the configured {} steps",
                ckpt.step, exp.cfg.steps
            )));
        }
        exp.opt = Optimizer::new(exp.cfg.optimizer.clone(), ckpt.slots)?;
        exp.step = ckpt.step;
        exp.initial_loss = ckpt.initial_loss;
        exp.records = ckpt.records;
        exp.skipped = ckpt.skipped_orthogonalizations;
        Ok(exp)
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    pub fn is_done(&self) -> bool {
        self.step >= self.cfg.steps
    }

    pub fn records(&self) -> &[RunRecord] {
        &self.records
    }

    pub fn weights(&self) -> Vec<Matrix> {
        self.opt.weights()
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::new(
            self.cfg.clone(),
            self.step,
            self.opt.slots().to_vec(),
            self.records.clone(),
            self.initial_loss,
            self.skipped,
        )
    }

    /// Advances one step. Returns the record if this step is logged.
    pub fn advance(&mut self) -> Result<Option<RunRecord>, HarnessError> {
        if self.is_done() {
            return Ok(None);
        }
        let t = self.step + 1;
        let eta = self
            .cfg
            .schedule
            .lr_at(t, self.cfg.steps, self.cfg.optimizer.lr);
        let mut grads = self.problem.sample_gradient(&self.opt.weights(), t)?;
        let grad_norm = if self.cfg.clip_norm > 0.0 {
            clip_global_norm(&mut grads, self.cfg.clip_norm)
        } else {
            global_norm(&grads)
        };
        let stats = self.opt.step(&grads, eta)?;
        self.skipped += stats.skipped_slots as u64;
        let loss = self.problem.evaluate_loss(&self.opt.weights())?;
        self.step = t;

        let wall_ms = if self.cfg.record_wall_time {
            self.started.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        };
        let record = RunRecord {
            step: t,
            eta,
            train_loss: loss,
            grad_norm,
            update_norm: stats.update_norm,
            wall_ms,
        };
        if ![loss, grad_norm, stats.update_norm]
            .iter()
            .all(|x| x.is_finite())
        {
            return Err(HarnessError::NonFiniteLoss {
                diagnostic: record,
                records: std::mem::take(&mut self.records),
            });
        }
        let logged = t.is_multiple_of(self.cfg.log_every) || t == self.cfg.steps;
        if logged {
            self.records.push(record);
        }
        Ok(logged.then_some(record))
    }

    /// Runs to `step` (clamped to the configured total). `on_checkpoint` is
    /// called after every step that is a multiple of `checkpoint_every`.
    pub fn run_until(
        &mut self,
        step: u64,
        mut on_checkpoint: impl FnMut(&Experiment) -> Result<(), HarnessError>,
    ) -> Result<(), HarnessError> {
        let every = self.cfg.output.checkpoint_every;
        while self.step < step.min(self.cfg.steps) {
            self.advance()?;
            if every > 0 && self.step.is_multiple_of(every) {
                on_checkpoint(self)?;
            }
        }
        Ok(())
    }

    pub fn finish(self) -> Result<RunOutput, HarnessError> {
        if !self.is_done() {
            return Err(HarnessError::Incomplete {
                step: self.step,
                total: self.cfg.steps,
            });
        }
        let summary = summarize(&self.cfg, self.initial_loss, &self.records, self.skipped);
        Ok(RunOutput {
            records: self.records,
            summary,
        })
    }
}

/// Runs a whole experiment in memory.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunOutput, HarnessError> {
    let mut exp = Experiment::new(cfg.clone())?;
    exp.run_until(cfg.steps, |_| Ok(()))?;
    exp.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::{OptimizerConfig, Schedule};
    use crate::problems::{ProblemKind, ProblemSpec};

    fn small(variant: Variant) -> RunConfig {
        RunConfig {
            steps: 25,
            log_every: 10,
            threshold: Some(1e9),
            record_wall_time: false,
            ..RunConfig::new(
                ProblemSpec {
                    rows: 4,
                    cols: 3,
                    ..ProblemSpec::new(ProblemKind::NoisyQuadratic)
                },
                OptimizerConfig::new(variant),
            )
        }
    }

    #[test]
    fn logs_at_interval_and_final_step() {
        let out = run_experiment(&small(Variant::MuonNsr)).unwrap();
        let steps: Vec<u64> = out.records.iter().map(|r| r.step).collect();
        assert_eq!(steps, vec![10, 20, 25]);
        assert_eq!(out.summary.steps, 25);
        assert_eq!(out.summary.final_loss, out.records[2].train_loss);
        assert_eq!(out.summary.steps_to_threshold, Some(10));
        assert!(out.records.iter().all(|r| r.wall_ms == 0.0));
    }

    #[test]
    fn steps_to_threshold_is_first_logged_hit() {
        let cfg = small(Variant::Muon);
        let out = run_experiment(&cfg).unwrap();
        let t = out.records[1].train_loss;
        let s = summarize(
            &RunConfig {
                threshold: Some(t),
                ..cfg.clone()
            },
            1.0,
            &out.records,
            0,
        );
        let first = out.records.iter().find(|r| r.train_loss <= t).unwrap().step;
        assert_eq!(s.steps_to_threshold, Some(first));
        let never = summarize(
            &RunConfig {
                threshold: Some(-1.0),
                ..cfg
            },
            1.0,
            &out.records,
            0,
        );
        assert_eq!(never.steps_to_threshold, None);
    }

    #[test]
    fn clip_zero_disables_clipping() {
        let mut cfg = small(Variant::Adamw);
        cfg.clip_norm = 0.0;
        cfg.log_every = 1;
        let out = run_experiment(&cfg).unwrap();
        // unclipped gradients at the origin are far above 1
        assert!(out.records[0].grad_norm > 1.0);
    }

    #[test]
    fn divergence_aborts_with_diagnostic() {
        let mut cfg = small(Variant::Adamw);
        cfg.problem = ProblemSpec {
            rows: 2,
            cols: 2,
            curvature: 1e300,
            ..ProblemSpec::new(ProblemKind::Quadratic)
        };
        cfg.problem.noise_sigma = None;
        cfg.optimizer.lr = 1e10;
        cfg.schedule = Schedule::Constant {};
        cfg.log_every = 1;
        match run_experiment(&cfg) {
            Err(HarnessError::NonFiniteLoss { diagnostic, .. }) => {
                let d = diagnostic;
                assert!(![d.train_loss, d.grad_norm, d.update_norm]
                    .iter()
                    .all(|x| x.is_finite()))
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn finish_requires_completion() {
        let mut exp = Experiment::new(small(Variant::Signum)).unwrap();
        exp.run_until(5, |_| Ok(())).unwrap();
        assert!(matches!(
            exp.finish(),
            Err(HarnessError::Incomplete { step: 5, total: 25 })
        ));
    }
}
