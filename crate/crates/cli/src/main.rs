//! `hubmend` command-line front end.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use hubmend::apps::{builtin_apps, AppSpec};
use hubmend::config::{ConfigFile, SchemaError, Scheme};
use hubmend::device::{default_home, Registry};
use hubmend::faults::{
    generate_schedule, parse_fault_schedule, write_fault_schedule, FaultProfile, ScheduleError, ScheduleParams,
};
use hubmend::sim::{
    compute_latencies, emit_report, generate_trace, parse_runs_csv, render_summary, run_simulation,
    run_suite, score, CostModel, EnvironmentTrace, RunMetrics, RunMode, Scenario, TraceError,
};
use hubmend::Tick;

#[derive(Parser)]
#[command(name = "hubmend", version, about = "Fault handling for a simulated smart home hub")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an environment trace.
    GenTrace {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 50_000)]
        ticks: Tick,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a fault schedule for the default home.
    GenFaults {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value = "single")]
        profile: FaultProfile,
        #[arg(long, default_value_t = 50_000)]
        ticks: Tick,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one mode over a trace and schedule. The baseline and no-handler
    /// runs are always included so the report can score against them.
    Run {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        faults: PathBuf,
        /// a, b, c or d.
        #[arg(long, default_value = "d")]
        mode: RunMode,
        /// Scheme for mode d. Repeat to run several.
        #[arg(long)]
        scheme: Vec<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        cost_model: Option<PathBuf>,
        #[arg(long)]
        report_dir: PathBuf,
    },
    /// Combine the runs.csv files found in a directory and its subdirectories.
    Compare {
        #[arg(long)]
        runs: PathBuf,
    },
    /// Print the analytic latency tables as CSV.
    Latency {
        #[arg(long)]
        cost_model: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a trace and both benchmark schedules, then run every mode.
    Bench {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 50_000)]
        ticks: Tick,
        #[arg(long)]
        report_dir: PathBuf,
    },
}

/// Bad input, as opposed to a failure to read or write.
#[derive(Debug)]
struct Invalid(String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

fn invalid(e: impl std::fmt::Display) -> anyhow::Error {
    Invalid(e.to_string()).into()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.chain().any(|c| c.is::<Invalid>()) {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::GenTrace { seed, ticks, out } => {
            if ticks == 0 {
                return Err(invalid("--ticks must be positive"));
            }
            generate_trace(seed, ticks)
                .write(&out)
                .with_context(|| format!("writing {}", out.display()))
        }
        Command::GenFaults {
            seed,
            profile,
            ticks,
            out,
        } => {
            let params = ScheduleParams {
                seed,
                ticks,
                ..ScheduleParams::default()
            };
            let schedule = generate_schedule(&default_home(), profile, &params);
            write_fault_schedule(&out, &schedule).with_context(|| format!("writing {}", out.display()))
        }
        Command::Run {
            trace,
            faults,
            mode,
            scheme,
            config,
            cost_model,
            report_dir,
        } => {
            let scenario = load_scenario(&trace, &faults, config.as_deref(), cost_model.as_deref())?;
            let modes = requested_modes(&scenario.config, mode, scheme)?;
            run_modes(&scenario, &modes, &report_dir)
        }
        Command::Compare { runs } => {
            let mut all = Vec::new();
            collect_runs(&runs, &mut all)?;
            if all.is_empty() {
                return Err(invalid(format!("no runs.csv under {}", runs.display())));
            }
            for (path, metrics) in &all {
                println!("# {}", path.display());
                print!("{}", render_summary(metrics));
            }
            Ok(())
        }
        Command::Latency {
            cost_model,
            config,
            out,
        } => {
            let cost = load_cost(cost_model.as_deref())?;
            let registry = default_home();
            let apps = builtin_apps();
            let config = load_config(config.as_deref(), &registry, &apps)?;
            let schemes: Vec<Scheme> = config.schemes.keys().filter_map(|n| config.scheme(n)).collect();
            let csv = compute_latencies(&cost, &registry, &apps, &config, &schemes).render_csv();
            match out {
                Some(p) => fs::write(&p, csv).with_context(|| format!("writing {}", p.display())),
                None => {
                    print!("{csv}");
                    Ok(())
                }
            }
        }
        Command::Bench {
            seed,
            ticks,
            report_dir,
        } => {
            if ticks == 0 {
                return Err(invalid("--ticks must be positive"));
            }
            let trace = generate_trace(seed, ticks);
            let params = ScheduleParams {
                seed,
                ticks,
                ..ScheduleParams::default()
            };
            let registry = default_home();
            for (name, profile) in [("single", FaultProfile::Single), ("multiple", FaultProfile::Multiple)] {
                let faults = generate_schedule(&registry, profile, &params);
                let scenario = Scenario::default_home(trace.clone(), faults);
                let suite = run_suite(&scenario, &[]);
                let dir = report_dir.join(name);
                emit_report(&dir, &suite.metrics(), None)?;
                println!("# {name}");
                print!("{}", render_summary(&suite.metrics()));
            }
            Ok(())
        }
    }
}

fn load_cost(path: Option<&Path>) -> Result<CostModel> {
    match path {
        Some(p) => CostModel::load(p).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => anyhow::Error::new(e).context(format!("reading {}", p.display())),
            _ => invalid(format!("{}: {e}", p.display())),
        }),
        None => Ok(CostModel::default()),
    }
}

fn load_config(path: Option<&Path>, registry: &Registry, apps: &[AppSpec]) -> Result<ConfigFile> {
    let Some(p) = path else {
        return Ok(ConfigFile::default_home(registry, apps));
    };
    let config = ConfigFile::load(p).map_err(|e| match e {
        SchemaError::Io(io) => anyhow::Error::new(io).context(format!("reading {}", p.display())),
        other => invalid(format!("{}: {other}", p.display())),
    })?;
    config
        .validate()
        .and_then(|_| config.validate_against(registry))
        .map_err(|e| invalid(format!("{}: {e}", p.display())))?;
    Ok(config)
}

fn load_scenario(trace: &Path, faults: &Path, config: Option<&Path>, cost: Option<&Path>) -> Result<Scenario> {
    let trace = EnvironmentTrace::load(trace).map_err(|e| match e {
        TraceError::Io(io) => anyhow::Error::new(io).context(format!("reading {}", trace.display())),
        other => invalid(format!("{}: {other}", trace.display())),
    })?;
    let registry = default_home();
    let schedule = parse_fault_schedule(faults, &registry).map_err(|e| match e {
        ScheduleError::Io(io) => anyhow::Error::new(io).context(format!("reading {}", faults.display())),
        other => invalid(format!("{}: {other}", faults.display())),
    })?;
    let mut scenario = Scenario::default_home(trace, schedule);
    scenario.config = load_config(config, &scenario.registry, &scenario.apps)?;
    scenario.cost = load_cost(cost)?;
    Ok(scenario)
}

fn requested_modes(config: &ConfigFile, mode: RunMode, schemes: Vec<String>) -> Result<Vec<RunMode>> {
    let mut modes = vec![RunMode::Baseline, RunMode::NoHandler];
    match mode {
        RunMode::FullHandler(default) => {
            let schemes = if schemes.is_empty() { vec![default] } else { schemes };
            for s in schemes {
                if config.scheme(&s).is_none() {
                    return Err(invalid(format!("unknown scheme `{s}`")));
                }
                modes.push(RunMode::FullHandler(s));
            }
        }
        other => {
            if !schemes.is_empty() {
                return Err(invalid("--scheme only applies to mode d"));
            }
            if !modes.contains(&other) {
                modes.push(other);
            }
        }
    }
    Ok(modes)
}

fn run_modes(scenario: &Scenario, modes: &[RunMode], dir: &Path) -> Result<()> {
    let mut results: Vec<_> = modes.iter().map(|m| run_simulation(scenario, m)).collect();
    let base = results[0].history.clone();
    let unhandled = results[1].history.clone();
    for r in results.iter_mut() {
        let handled = !matches!(r.mode, RunMode::Baseline | RunMode::NoHandler);
        score(r, &base, handled.then_some(&unhandled));
    }
    let metrics: Vec<RunMetrics> = results.iter().map(|r| r.metrics.clone()).collect();
    emit_report(dir, &metrics, None)?;
    for r in &results {
        if let Some(s) = r.mode.scheme() {
            let path = dir.join(format!("notifications_{s}.csv"));
            r.notifications
                .write(&path)
                .with_context(|| format!("writing {}", path.display()))?;
        }
    }
    print!("{}", render_summary(&metrics));
    Ok(())
}

fn collect_runs(dir: &Path, out: &mut Vec<(PathBuf, Vec<RunMetrics>)>) -> Result<()> {
    let file = dir.join("runs.csv");
    if file.is_file() {
        let text = fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
        let metrics = parse_runs_csv(&text).map_err(|e| invalid(format!("{}: {e}", file.display())))?;
        out.push((file, metrics));
    }
    let mut subdirs: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();
    for d in subdirs {
        collect_runs(&d, out)?;
    }
    Ok(())
}
