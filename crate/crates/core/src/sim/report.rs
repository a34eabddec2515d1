use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use super::latency::LatencyTables;
use super::metrics::RunMetrics;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("no no_handler run to compare against")]
    NoReference,
    #[error("bad runs file: {0}")]
    Parse(String),
}

/// Fractional reduction of `full` incorrect states relative to `none`.
/// Zero when `none` is zero.
pub fn reduction(none: u64, full: u64) -> f64 {
    if none == 0 {
        0.0
    } else {
        (none as f64 - full as f64) / none as f64
    }
}

fn reference(runs: &[RunMetrics]) -> Option<&RunMetrics> {
    runs.iter().find(|r| r.mode == "no_handler")
}

/// One CSV row per run.
pub fn render_runs_csv(runs: &[RunMetrics]) -> String {
    let none = reference(runs).map(|r| r.incorrect_states);
    let mut out = String::from(
        "mode,scheme,incorrect_states,handler_caused,reduction,energy_mj,events,events_dispatched,\
         events_suppressed,actuations,restarts,rollbacks,checkpoints\n",
    );
    for r in runs {
        let red = match none {
            Some(n) if r.mode != "baseline" => format!("{:.4}", reduction(n, r.incorrect_states)),
            _ => String::new(),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:.3},{},{},{},{},{},{},{}",
            r.mode,
            r.scheme.as_deref().unwrap_or(""),
            r.incorrect_states,
            r.handler_caused_incorrect,
            red,
            r.energy_mj,
            r.events,
            r.events_dispatched,
            r.events_suppressed,
            r.actuations,
            r.restarts,
            r.rollbacks,
            r.checkpoints,
        );
    }
    out
}

/// Reads back a file written by [`render_runs_csv`].
pub fn parse_runs_csv(text: &str) -> Result<Vec<RunMetrics>, ReportError> {
    let bad = |e: &dyn std::fmt::Display| ReportError::Parse(e.to_string());
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| bad(&e))?;
        let field = |i: usize| row.get(i).ok_or_else(|| ReportError::Parse(format!("short row: {row:?}")));
        let int = |i: usize| -> Result<u64, ReportError> { field(i)?.parse().map_err(|e| bad(&e)) };
        out.push(RunMetrics {
            mode: field(0)?.to_string(),
            scheme: Some(field(1)?).filter(|s| !s.is_empty()).map(str::to_string),
            incorrect_states: int(2)?,
            handler_caused_incorrect: int(3)?,
            energy_mj: field(5)?.parse().map_err(|e| bad(&e))?,
            events: int(6)?,
            events_dispatched: int(7)?,
            events_suppressed: int(8)?,
            actuations: int(9)?,
            restarts: int(10)?,
            rollbacks: int(11)?,
            checkpoints: int(12)?,
            ..RunMetrics::default()
        });
    }
    Ok(out)
}

/// Short human-readable summary.
pub fn render_summary(runs: &[RunMetrics]) -> String {
    let mut out = String::new();
    let none = reference(runs).map(|r| r.incorrect_states);
    for r in runs {
        let name = match &r.scheme {
            Some(s) => format!("{}:{}", r.mode, s),
            None => r.mode.clone(),
        };
        let _ = write!(out, "{name:<32} incorrect={:>8} energy={:>12.1} mJ", r.incorrect_states, r.energy_mj);
        if let (Some(n), true) = (none, r.mode != "baseline" && r.mode != "no_handler") {
            let _ = write!(
                out,
                " reduction={:>6.2}% handler_caused={}",
                100.0 * reduction(n, r.incorrect_states),
                r.handler_caused_incorrect
            );
        }
        out.push('\n');
    }
    out
}

/// Writes `runs.csv`, `summary.txt` and, when given, `latency.csv` into `dir`.
pub fn emit_report(dir: &Path, runs: &[RunMetrics], latency: Option<&LatencyTables>) -> Result<(), ReportError> {
    reference(runs).ok_or(ReportError::NoReference)?;
    fs::create_dir_all(dir)?;
    fs::write(dir.join("runs.csv"), render_runs_csv(runs))?;
    fs::write(dir.join("summary.txt"), render_summary(runs))?;
    if let Some(l) = latency {
        fs::write(dir.join("latency.csv"), l.render_csv())?;
    }
    Ok(())
}
