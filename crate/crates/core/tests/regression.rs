//! Frozen final losses on the default quadratic (500 steps, clip 1, cosine
//! schedule, default learning rates). A run may not drift more than 10x above
//! its reference.

use varmuon::harness::{run_experiment, RunConfig};
use varmuon::optim::{OptimizerConfig, Variant};
use varmuon::problems::{ProblemKind, ProblemSpec};

fn quadratic_run(cfg: OptimizerConfig) -> RunConfig {
    RunConfig {
        record_wall_time: false,
        ..RunConfig::new(ProblemSpec::new(ProblemKind::Quadratic), cfg)
    }
}

#[test]
fn final_losses_stay_near_reference() {
    let refs = [
        (Variant::Muon, 1.409e-9),
        (Variant::MuonNsr, 1.762e-9),
        (Variant::MuonVs, 1.866e-9),
        (Variant::Adamw, 1.228e-12),
        (Variant::MuonNsrReshuffled, 1.094e-10),
        (Variant::Signum, 8.361e-6),
    ];
    for (variant, reference) in refs {
        let out = run_experiment(&quadratic_run(OptimizerConfig::new(variant))).unwrap();
        let f = out.summary.final_loss;
        assert!(
            f <= 10.0 * reference,
            "{variant}: final loss {f:e} vs reference {reference:e}"
        );
    }
}

#[test]
fn muon_at_half_default_lr_still_converges() {
    let out = run_experiment(&quadratic_run(
        OptimizerConfig::new(Variant::Muon).with_lr(0.05),
    ))
    .unwrap();
    let s = out.summary;
    assert!(
        s.final_loss <= 1e-3 * s.initial_loss,
        "{} -> {}",
        s.initial_loss,
        s.final_loss
    );
}
