//! CSV loss curves and JSON run summaries.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{write_atomic, HarnessError, RunConfig, RunRecord, RunSummary};

pub const CSV_HEADER: &str = "step,eta,train_loss,grad_norm,update_norm,wall_ms";

/// 17 significant digits: enough for any f64 to parse back to the same bits.
fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn records_to_csv(records: &[RunRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.step,
            fmt_f64(r.eta),
            fmt_f64(r.train_loss),
            fmt_f64(r.grad_norm),
            fmt_f64(r.update_norm),
            fmt_f64(r.wall_ms)
        );
    }
    out
}

pub fn parse_csv(text: &str) -> Result<Vec<RunRecord>, HarnessError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == CSV_HEADER => {}
        _ => {
            return Err(HarnessError::Csv {
                line: 1,
                message: format!("expected header `{CSV_HEADER}`"),
            })
        }
    }
    lines
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            let err = |message: String| HarnessError::Csv {
                line: i + 1,
                message,
            };
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 6 {
                return Err(err(format!("expected 6 fields, got {}", fields.len())));
            }
            let num = |k: usize| -> Result<f64, HarnessError> {
                fields[k]
                    .parse()
                    .map_err(|e| err(format!("field {k}: {e}")))
            };
            Ok(RunRecord {
                step: fields[0].parse().map_err(|e| err(format!("step: {e}")))?,
                eta: num(1)?,
                train_loss: num(2)?,
                grad_norm: num(3)?,
                update_norm: num(4)?,
                wall_ms: num(5)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildInfo {
    pub package: String,
    pub version: String,
    pub git_rev: String,
}

impl BuildInfo {
    pub fn current() -> Self {
        Self {
            package: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            git_rev: env!("VARMUON_GIT_REV").into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryFile {
    pub build: BuildInfo,
    pub config: RunConfig,
    pub summary: RunSummary,
}

pub fn summary_to_json(cfg: &RunConfig, summary: &RunSummary) -> Result<String, HarnessError> {
    let file = SummaryFile {
        build: BuildInfo::current(),
        config: cfg.clone(),
        summary: summary.clone(),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn load_summary(path: &Path) -> Result<SummaryFile, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmittedFiles {
    pub csv: PathBuf,
    pub summary: PathBuf,
}

/// Writes `metrics.csv` and `summary.json` under the configured output
/// directory, creating it if needed.
pub fn emit_metrics(
    cfg: &RunConfig,
    records: &[RunRecord],
    summary: &RunSummary,
) -> Result<EmittedFiles, HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::EmptyRecords);
    }
    let files = EmittedFiles {
        csv: cfg.output.csv_path(),
        summary: cfg.output.summary_path(),
    };
    write_atomic(&files.csv, records_to_csv(records).as_bytes())?;
    write_atomic(&files.summary, summary_to_json(cfg, summary)?.as_bytes())?;
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::Variant;

    fn rec(step: u64, loss: f64) -> RunRecord {
        RunRecord {
            step,
            eta: 0.1 / 3.0,
            train_loss: loss,
            grad_norm: std::f64::consts::PI,
            update_norm: 1e-300,
            wall_ms: 0.0,
        }
    }

    #[test]
    fn three_records_make_four_lines() {
        let csv = records_to_csv(&[rec(1, 1.0), rec(2, 0.5), rec(3, 0.25)]);
        assert_eq!(csv.lines().count(), 4);
        assert_eq!(csv.lines().next().unwrap(), CSV_HEADER);
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let records = vec![
            rec(1, 0.1 + 0.2),
            rec(5, f64::MIN_POSITIVE),
            rec(9, 123456.789e100),
        ];
        let back = parse_csv(&records_to_csv(&records)).unwrap();
        for (a, b) in records.iter().zip(&back) {
            assert_eq!(a.train_loss.to_bits(), b.train_loss.to_bits());
            assert_eq!(a.eta.to_bits(), b.eta.to_bits());
        }
        assert_eq!(back, records);
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let bad = format!("{CSV_HEADER}\n1,2,3,4,5,6\n2,x,3,4,5,6\n");
        assert!(matches!(
            parse_csv(&bad),
            Err(HarnessError::Csv { line: 3, .. })
        ));
        assert!(matches!(
            parse_csv("a,b\n"),
            Err(HarnessError::Csv { line: 1, .. })
        ));
    }

    #[test]
    fn emit_refuses_empty_records() {
        let cfg = RunConfig::default();
        let summary = RunSummary {
            variant: Variant::Muon,
            steps: 0,
            initial_loss: 1.0,
            final_loss: 1.0,
            best_loss: 1.0,
            best_step: 0,
            threshold: None,
            steps_to_threshold: None,
            skipped_orthogonalizations: 0,
        };
        assert!(matches!(
            emit_metrics(&cfg, &[], &summary),
            Err(HarnessError::EmptyRecords)
        ));
    }
}
