//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::time::{Duration, Instant};

use varmuon::harness::{
    emit_metrics, load_summary, records_to_csv, run_experiment, run_sweep, sweep_report,
    Checkpoint, Experiment, RunConfig, SweepParam,
};
use varmuon::optim::{partition_params, Optimizer, OptimizerConfig, Variant};
use varmuon::problems::{make_problem, NoiseSigma, ProblemKind, ProblemSpec};
use varmuon::verify::{
    check_adam_sign_form, check_gamma_limit, check_nesterov_equivalence, check_polar_agreement,
    check_regularized_mle, check_scale_invariance, check_variance_recursion, fd_problem_specs,
    finite_difference_check, CheckReport, PolarCheckParams,
};

const SEED: u64 = 20240607;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn from_reports(reports: &[CheckReport], budget: Option<(Duration, Duration)>) -> Outcome {
    let mut passed = reports.iter().all(|r| r.passed);
    let mut parts: Vec<String> = reports
        .iter()
        .map(|r| format!("{} {:.3e} <= {:e}", r.name, r.measured, r.tolerance))
        .collect();
    if let Some((took, limit)) = budget {
        passed &= took <= limit;
        parts.push(format!(
            "{:.2}s of {:.0}s",
            took.as_secs_f64(),
            limit.as_secs_f64()
        ));
    }
    Outcome {
        passed,
        detail: parts.join("; "),
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed())
}

fn variance_recursion() -> Outcome {
    let (reports, took) = timed(|| {
        [0.5, 0.9, 0.99]
            .map(|b| check_variance_recursion(1000, b, SEED))
            .to_vec()
    });
    from_reports(&reports, Some((took, Duration::from_secs(1))))
}

fn adam_sign_form() -> Outcome {
    let (reports, took) = timed(|| {
        [0.5, 0.9, 0.99]
            .map(|b| check_adam_sign_form(1000, b, SEED))
            .to_vec()
    });
    from_reports(&reports, Some((took, Duration::from_secs(1))))
}

fn regularized_mle() -> Outcome {
    let (report, took) = timed(|| check_regularized_mle(100, SEED));
    from_reports(&[report], Some((took, Duration::from_secs(10))))
}

fn polar_oracle() -> Outcome {
    let (reports, took) = timed(|| check_polar_agreement(PolarCheckParams::default(), SEED));
    let mut o = from_reports(&reports, Some((took, Duration::from_secs(30))));
    o.detail.push_str(&format!("; {}", reports[1].details));
    o
}

fn scale_invariance() -> Outcome {
    from_reports(&[check_scale_invariance(50, SEED)], None)
}

fn nesterov_equivalence() -> Outcome {
    let reports: Vec<CheckReport> = [0.5, 0.95, 0.99]
        .map(|b| check_nesterov_equivalence(500, b, SEED))
        .to_vec();
    from_reports(&reports, None)
}

fn large_gamma_limit() -> Outcome {
    let reports: Vec<CheckReport> = (0..3)
        .map(|k| check_gamma_limit(1e8, 200, SEED + k))
        .collect();
    from_reports(&reports, None)
}

fn gradient_oracles() -> Outcome {
    let reports: Vec<CheckReport> = fd_problem_specs()
        .iter()
        .map(|spec| finite_difference_check(&make_problem(spec).unwrap(), 1e-5, SEED))
        .collect();
    let kinds = fd_problem_specs().len();
    let mut o = from_reports(&reports, None);
    o.passed &= kinds == 5;
    o
}

fn noisy_run(variant: Variant, steps: u64) -> RunConfig {
    RunConfig {
        steps,
        log_every: 5,
        master_seed: SEED,
        record_wall_time: false,
        ..RunConfig::new(
            ProblemSpec {
                rows: 12,
                cols: 8,
                condition: 5.0,
                ..ProblemSpec::new(ProblemKind::NoisyQuadratic)
            },
            OptimizerConfig::new(variant),
        )
    }
}

fn bits(exp: &Experiment) -> Vec<u64> {
    exp.weights()
        .iter()
        .flat_map(|m| m.as_slice().iter().map(|x| x.to_bits()))
        .collect()
}

fn determinism_and_checkpoint() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for variant in [
        Variant::MuonNsr,
        Variant::Muon,
        Variant::Adamw,
        Variant::MuonNsrReshuffled,
    ] {
        let cfg = noisy_run(variant, 120);
        let a = records_to_csv(&run_experiment(&cfg).unwrap().records);
        let b = records_to_csv(&run_experiment(&cfg).unwrap().records);
        let serial = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| records_to_csv(&run_experiment(&cfg).unwrap().records));
        let repeat = a == b && a == serial;

        let mut full = Experiment::new(cfg.clone()).unwrap();
        full.run_until(cfg.steps, |_| Ok(())).unwrap();
        let mut first = Experiment::new(cfg.clone()).unwrap();
        first.run_until(47, |_| Ok(())).unwrap();
        let text = first.checkpoint().to_json().unwrap();
        let mut resumed = Experiment::resume(Checkpoint::from_json(&text).unwrap()).unwrap();
        resumed.run_until(cfg.steps, |_| Ok(())).unwrap();
        let restored = bits(&full) == bits(&resumed) && full.records() == resumed.records();

        ok &= repeat && restored;
        notes.push(format!(
            "{variant}: repeat {} restore {}",
            if repeat { "identical" } else { "DIFFERS" },
            if restored { "bit-exact" } else { "DIFFERS" }
        ));
    }
    Outcome {
        passed: ok,
        detail: notes.join(", "),
    }
}

fn toy_convergence() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for variant in [
        Variant::Muon,
        Variant::MuonNsr,
        Variant::MuonVs,
        Variant::Adamw,
    ] {
        let cfg = RunConfig {
            steps: 500,
            record_wall_time: false,
            ..RunConfig::new(
                ProblemSpec::new(ProblemKind::Quadratic),
                OptimizerConfig::new(variant),
            )
        };
        let (out, took) = timed(|| run_experiment(&cfg).unwrap());
        let red = out.summary.reduction();
        let pass = red >= 1e3 && took <= Duration::from_secs(10);
        ok &= pass;
        notes.push(format!(
            "{variant} lr={} x{red:.2e} ({:.2}s)",
            cfg.optimizer.lr,
            took.as_secs_f64()
        ));
    }
    Outcome {
        passed: ok,
        detail: notes.join(", "),
    }
}

fn gamma_sweep_protocol() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut base = noisy_run(Variant::MuonNsr, 300);
    base.problem.rows = 16;
    base.problem.cols = 16;
    base.problem.noise_sigma = Some(NoiseSigma::Uniform(2.0));
    base.output.dir = dir.path().to_path_buf();
    let values = [0.1, 1.0, 10.0, 100.0];
    let points = run_sweep(&base, SweepParam::Gamma, &values, None).unwrap();
    let mut ok = points.len() == values.len();
    for p in &points {
        match &p.result {
            Ok(out) => {
                emit_metrics(&p.config, &out.records, &out.summary).unwrap();
                let back = load_summary(&p.config.output.summary_path()).unwrap();
                ok &= back.config.optimizer.gamma == p.value
                    && back.summary.final_loss.is_finite()
                    && back.summary == out.summary;
            }
            Err(_) => ok = false,
        }
    }
    let report = sweep_report(SweepParam::Gamma, &points);
    let losses: Vec<String> = report
        .rows
        .iter()
        .map(|r| {
            format!(
                "{}:{:.4}",
                r.value,
                r.summary.as_ref().map_or(f64::NAN, |s| s.final_loss)
            )
        })
        .collect();
    Outcome {
        passed: ok,
        detail: format!(
            "final loss by gamma {}; unimodal (reported only): {}",
            losses.join(" "),
            report.unimodal
        ),
    }
}

fn reshuffled_degenerate() -> Outcome {
    let spec = ProblemSpec {
        rows: 10,
        cols: 7,
        condition: 8.0,
        ..ProblemSpec::new(ProblemKind::NoisyQuadratic)
    };
    let mut problem = make_problem(&spec).unwrap();
    problem.set_noise_seed(SEED);
    let init = problem.initial_params(SEED);
    let make = |cfg: OptimizerConfig| {
        Optimizer::new(
            cfg,
            partition_params(problem.named_params(&init).unwrap()).unwrap(),
        )
        .unwrap()
    };
    let mut muon = make(OptimizerConfig::new(Variant::Muon));
    let mut resh = make(
        OptimizerConfig::new(Variant::MuonNsrReshuffled)
            .with_lr(Variant::Muon.default_lr())
            .with_gamma(0.0)
            .with_bias_correction(false),
    );
    let mut worst: f64 = 0.0;
    for t in 1..=300 {
        // both optimizers see the gradient at Muon's iterate
        let g = problem.sample_gradient(&muon.weights(), t).unwrap();
        muon.step(&g, 0.05).unwrap();
        resh.step(&g, 0.05).unwrap();
        for (a, b) in muon.weights().iter().zip(resh.weights()) {
            worst = worst.max(a.sub(&b).unwrap().max_abs());
        }
    }
    let end_to_end = run_experiment(&noisy_run(Variant::MuonNsrReshuffled, 200));
    let e2e = end_to_end
        .as_ref()
        .map(|o| o.summary.final_loss.is_finite() && o.summary.final_loss < o.summary.initial_loss)
        .unwrap_or(false);
    Outcome {
        passed: worst <= 1e-12 && e2e,
        detail: format!(
            "max weight gap over 300 steps {worst:.3e} <= 1e-12; gamma=10 run end-to-end {}",
            if e2e { "ok" } else { "FAILED" }
        ),
    }
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("variance recursion identity", variance_recursion),
        ("adam sign-form identity", adam_sign_form),
        ("regularized MLE closed form", regularized_mle),
        ("polar oracle", polar_oracle),
        ("newton-schulz scale invariance", scale_invariance),
        ("nesterov equivalence", nesterov_equivalence),
        ("large-gamma limit", large_gamma_limit),
        ("gradient oracles", gradient_oracles),
        ("determinism and checkpointing", determinism_and_checkpoint),
        ("toy convergence", toy_convergence),
        ("gamma-sweep protocol", gamma_sweep_protocol),
        ("reshuffled ordering at gamma=0", reshuffled_degenerate),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        failed += usize::from(!o.passed);
        println!(
            "{} [{:>2}] {name}: {}",
            if o.passed { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
    }
    println!(
        "acceptance: {}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
