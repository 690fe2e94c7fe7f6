//! Command implementations shared by the `bench` and `verify` binaries.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use varmuon::harness::{
    apply_worker_cap, emit_metrics, load_checkpoint, load_config, parse_values, records_to_csv,
    run_sweep, save_checkpoint, sweep_report, Checkpoint, Experiment, HarnessError, RunConfig,
    SweepParam,
};
use varmuon::verify::{run_suite, CheckReport};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_NUMERICAL: u8 = 2;
pub const EXIT_VERIFY: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "bench",
    version,
    about = "Run varmuon experiments, sweeps and checks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one configuration and write metrics.csv and summary.json.
    Run(RunArgs),
    /// Run the base configuration once per value of one optimizer parameter.
    Sweep(SweepArgs),
    /// Run the oracle check suite and print one JSON line per check.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Continue from a checkpoint instead of starting fresh. The checkpoint
    /// carries its own config, so `--config` is ignored.
    #[arg(long, conflicts_with = "config")]
    pub resume: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
    /// Stop after this many steps (a checkpoint is written there).
    #[arg(long)]
    pub stop_after: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = "gamma")]
    pub param: String,
    /// Comma-separated values, e.g. 0.1,1,10,100.
    #[arg(long)]
    pub values: String,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct Overrides {
    /// Overrides `master_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `output.dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Log `wall_ms = 0` so repeated runs produce identical files.
    #[arg(long)]
    pub no_wall_time: bool,
}

impl Overrides {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(seed) = self.seed {
            cfg.master_seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.output.dir = out.clone();
        }
        if self.no_wall_time {
            cfg.record_wall_time = false;
        }
    }
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Only run checks whose name contains this string.
    #[arg(long)]
    pub filter: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn exit_code_for(err: &HarnessError) -> u8 {
    match err {
        e if e.is_config_error() => EXIT_CONFIG,
        HarnessError::Io { .. } | HarnessError::Json(_) | HarnessError::Csv { .. } => EXIT_CONFIG,
        _ => EXIT_NUMERICAL,
    }
}

fn fail(err: &HarnessError) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(exit_code_for(err))
}

pub fn dispatch(cli: Cli) -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    apply_worker_cap();
    match cli.command {
        Command::Run(a) => cmd_run(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Verify(a) => cmd_verify(&a),
    }
}

fn load_with_overrides(path: &Path, o: &Overrides) -> Result<RunConfig, HarnessError> {
    let mut cfg = load_config(path)?;
    o.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

pub fn cmd_run(a: &RunArgs) -> ExitCode {
    let exp = match (&a.config, &a.resume) {
        (_, Some(ckpt)) => load_checkpoint(ckpt).and_then(|mut c: Checkpoint| {
            if let Some(out) = &a.overrides.out {
                c.config.output.dir = out.clone();
            }
            if a.overrides.no_wall_time {
                c.config.record_wall_time = false;
            }
            Experiment::resume(c)
        }),
        (Some(path), None) => load_with_overrides(path, &a.overrides).and_then(Experiment::new),
        (None, None) => Err(HarnessError::Invalid {
            field: "config".into(),
            message: "pass --config <path> or --resume <checkpoint>".into(),
        }),
    };
    let mut exp = match exp {
        Ok(e) => e,
        Err(e) => return fail(&e),
    };
    let cfg = exp.config().clone();
    let ckpt_path = cfg.output.checkpoint_path();
    let target = a.stop_after.unwrap_or(cfg.steps);
    let result = exp
        .run_until(target, |e| save_checkpoint(&ckpt_path, &e.checkpoint()))
        .and_then(|()| {
            if exp.is_done() {
                Ok(true)
            } else {
                save_checkpoint(&ckpt_path, &exp.checkpoint()).map(|()| false)
            }
        });
    match result {
        Ok(false) => {
            eprintln!(
                "stopped at step {} of {}; checkpoint {}",
                exp.step_index(),
                cfg.steps,
                ckpt_path.display()
            );
            ExitCode::SUCCESS
        }
        Ok(true) => {
            let out = match exp.finish() {
                Ok(o) => o,
                Err(e) => return fail(&e),
            };
            match emit_metrics(&cfg, &out.records, &out.summary) {
                Ok(files) => {
                    let s = &out.summary;
                    println!(
                        "{} steps={} initial={:.6e} final={:.6e} best={:.6e}@{} to_threshold={}",
                        s.variant,
                        s.steps,
                        s.initial_loss,
                        s.final_loss,
                        s.best_loss,
                        s.best_step,
                        s.steps_to_threshold
                            .map_or_else(|| "-".to_string(), |t| t.to_string())
                    );
                    println!(
                        "wrote {} and {}",
                        files.csv.display(),
                        files.summary.display()
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
        Err(HarnessError::NonFiniteLoss {
            diagnostic,
            records,
        }) => {
            let partial = cfg.output.dir.join("partial_metrics.csv");
            let mut rows = records;
            rows.push(diagnostic);
            if std::fs::create_dir_all(&cfg.output.dir).is_ok() {
                let _ = std::fs::write(&partial, records_to_csv(&rows));
            }
            eprintln!(
                "error: non-finite value at step {} (loss {}, grad norm {}, update norm {}); partial log in {}",
                diagnostic.step,
                diagnostic.train_loss,
                diagnostic.grad_norm,
                diagnostic.update_norm,
                partial.display()
            );
            ExitCode::from(EXIT_NUMERICAL)
        }
        Err(e) => fail(&e),
    }
}

pub fn cmd_sweep(a: &SweepArgs) -> ExitCode {
    let setup = (|| {
        let cfg = load_with_overrides(&a.config, &a.overrides)?;
        let param: SweepParam = a.param.parse()?;
        let values = parse_values(&a.values)?;
        Ok::<_, HarnessError>((cfg, param, values))
    })();
    let (cfg, param, values) = match setup {
        Ok(s) => s,
        Err(e) => return fail(&e),
    };
    let points = match run_sweep(&cfg, param, &values, None) {
        Ok(p) => p,
        Err(e) => return fail(&e),
    };
    let mut any_failed = false;
    println!(
        "{param:>12}  {:>14}  {:>14}  {:>10}",
        "final_loss", "best_loss", "to_thresh"
    );
    for p in &points {
        match &p.result {
            Ok(out) => {
                if let Err(e) = emit_metrics(&p.config, &out.records, &out.summary) {
                    return fail(&e);
                }
                let s = &out.summary;
                println!(
                    "{:>12}  {:>14.6e}  {:>14.6e}  {:>10}",
                    p.value,
                    s.final_loss,
                    s.best_loss,
                    s.steps_to_threshold
                        .map_or_else(|| "-".to_string(), |t| t.to_string())
                );
            }
            Err(e) => {
                any_failed = true;
                println!("{:>12}  failed: {e}", p.value);
            }
        }
    }
    let report = sweep_report(param, &points);
    println!(
        "unimodal in {param}: {}; best {param} = {}",
        if report.unimodal { "yes" } else { "no" },
        report
            .best_value
            .map_or_else(|| "-".to_string(), |v| v.to_string())
    );
    let path = cfg.output.dir.join("sweep.json");
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    if let Err(source) =
        std::fs::create_dir_all(&cfg.output.dir).and_then(|()| std::fs::write(&path, json))
    {
        return fail(&HarnessError::Io { path, source });
    }
    if any_failed {
        ExitCode::from(EXIT_NUMERICAL)
    } else {
        ExitCode::SUCCESS
    }
}

/// Prints one JSON object per check on stdout and a tally on stderr.
pub fn print_reports(reports: &[CheckReport]) -> bool {
    for r in reports {
        println!("{}", serde_json::to_string(r).expect("report serializes"));
    }
    let passed = reports.iter().filter(|r| r.passed).count();
    eprintln!("{passed}/{} checks passed", reports.len());
    passed == reports.len()
}

pub fn cmd_verify(a: &VerifyArgs) -> ExitCode {
    let reports = run_suite(a.seed, a.filter.as_deref());
    if reports.is_empty() {
        eprintln!(
            "error: no check matches `{}`",
            a.filter.as_deref().unwrap_or_default()
        );
        return ExitCode::from(EXIT_CONFIG);
    }
    if print_reports(&reports) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_VERIFY)
    }
}
