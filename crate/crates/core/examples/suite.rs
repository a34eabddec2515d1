//! Runs both benchmark suites on a generated trace and prints the summaries.

use hubmend::device::default_home;
use hubmend::faults::{generate_schedule, FaultProfile, ScheduleParams};
use hubmend::sim::{generate_trace, render_summary, run_suite, Scenario};

fn main() {
    let ticks = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(50_000);
    let seed = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(7);
    let trace = generate_trace(seed, ticks);
    let params = ScheduleParams {
        seed,
        ticks,
        ..ScheduleParams::default()
    };
    for profile in [FaultProfile::Single, FaultProfile::Multiple] {
        let faults = generate_schedule(&default_home(), profile, &params);
        let suite = run_suite(&Scenario::default_home(trace.clone(), faults), &[]);
        println!("{profile:?}");
        print!("{}", render_summary(&suite.metrics()));
    }
}
