//! Trace-driven simulation: environment traces, the hub loop in its four
//! modes, and the incorrect-state, energy and latency measurements.

mod cost;
mod hub;
mod latency;
mod metrics;
mod report;
mod trace;

use crate::apps::builtin_apps;
use crate::config::{ConfigFile, Scheme};
use crate::device::default_home;
use crate::faults::{FaultSpec, OracleConfig};

pub use cost::{millijoules, CostModel};
pub use hub::{run_simulation, RunMode, RunResult, Scenario, StateHistory, CASCADE_DEPTH};
pub use latency::{compute_latencies, FunctionLatency, LatencyTables, SchemeHandleTime};
pub use metrics::{
    compute_energy, count_handler_caused, count_incorrect_states, incorrect_by_device, EnergyInputs, RunMetrics,
    ShapeMismatch,
};
pub use report::{emit_report, parse_runs_csv, reduction, render_runs_csv, render_summary, ReportError};
pub use trace::{generate_trace, pearson, EnvironmentTrace, TraceError};

impl Scenario {
    /// The default home with its built-in apps and default configuration.
    pub fn default_home(trace: EnvironmentTrace, faults: Vec<FaultSpec>) -> Self {
        let registry = default_home();
        let apps = builtin_apps();
        let config = ConfigFile::default_home(&registry, &apps);
        Self {
            registry,
            apps,
            config,
            trace,
            faults,
            oracle: OracleConfig::default(),
            cost: CostModel::default(),
        }
    }
}

/// Every mode run over one scenario, scored against the baseline.
#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub baseline: RunResult,
    pub no_handler: RunResult,
    pub suppression_only: RunResult,
    pub full: Vec<RunResult>,
}

impl SuiteResult {
    pub fn runs(&self) -> impl Iterator<Item = &RunResult> {
        [&self.baseline, &self.no_handler, &self.suppression_only]
            .into_iter()
            .chain(self.full.iter())
    }

    pub fn metrics(&self) -> Vec<RunMetrics> {
        self.runs().map(|r| r.metrics.clone()).collect()
    }

    pub fn full_for(&self, scheme: &str) -> Option<&RunResult> {
        self.full.iter().find(|r| r.mode.scheme() == Some(scheme))
    }
}

/// Scores `run` against the baseline and, for handler runs, attributes
/// handler-caused states against the no-handler run.
pub fn score(run: &mut RunResult, baseline: &StateHistory, unhandled: Option<&StateHistory>) {
    run.metrics.incorrect_states = count_incorrect_states(&run.history, baseline).expect("same scenario");
    if let Some(u) = unhandled {
        run.metrics.handler_caused_incorrect =
            count_handler_caused(&run.history, u, baseline).expect("same scenario");
    }
}

/// Baseline, no handler, suppression only, and the full handler once per
/// scheme in `schemes` (all built-ins when empty).
pub fn run_suite(scenario: &Scenario, schemes: &[String]) -> SuiteResult {
    let schemes: Vec<String> = if schemes.is_empty() {
        Scheme::BUILTIN_NAMES.iter().map(|s| s.to_string()).collect()
    } else {
        schemes.to_vec()
    };
    let mut baseline = run_simulation(scenario, &RunMode::Baseline);
    let mut no_handler = run_simulation(scenario, &RunMode::NoHandler);
    let mut suppression_only = run_simulation(scenario, &RunMode::SuppressionOnly);
    let mut full: Vec<RunResult> = schemes
        .iter()
        .map(|s| run_simulation(scenario, &RunMode::FullHandler(s.clone())))
        .collect();
    let base = baseline.history.clone();
    score(&mut baseline, &base, None);
    score(&mut no_handler, &base, None);
    score(&mut suppression_only, &base, Some(&no_handler.history));
    for r in full.iter_mut() {
        score(r, &base, Some(&no_handler.history));
    }
    SuiteResult {
        baseline,
        no_handler,
        suppression_only,
        full,
    }
}
