use proptest::prelude::*;

use hubmend::device::default_home;
use hubmend::faults::{generate_schedule, FaultProfile, ScheduleParams};
use hubmend::sim::{count_incorrect_states, generate_trace, render_runs_csv, run_simulation, RunMode, Scenario};

fn scenario(seed: u64, profile: FaultProfile) -> Scenario {
    let ticks = 1500;
    let params = ScheduleParams {
        seed,
        ticks,
        start_after: 100,
        long_ticks: (100, 400),
        extra_faults: 6,
        ..ScheduleParams::default()
    };
    let faults = generate_schedule(&default_home(), profile, &params);
    Scenario::default_home(generate_trace(seed, ticks), faults)
}

fn modes() -> impl Strategy<Value = RunMode> {
    prop::sample::select(vec![
        RunMode::NoHandler,
        RunMode::SuppressionOnly,
        RunMode::FullHandler("conservative".into()),
        RunMode::FullHandler("transient_resistant".into()),
        RunMode::FullHandler("long_restart".into()),
        RunMode::FullHandler("time_sensitive".into()),
    ])
}

fn profiles() -> impl Strategy<Value = FaultProfile> {
    prop::sample::select(vec![FaultProfile::Single, FaultProfile::Multiple])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn runs_are_deterministic_and_conserve_events(seed in 0u64..1000, mode in modes(), profile in profiles()) {
        let s = scenario(seed, profile);
        let a = run_simulation(&s, &mode);
        let b = run_simulation(&s, &mode);
        prop_assert_eq!(&a.metrics, &b.metrics);
        prop_assert_eq!(&a.history, &b.history);
        prop_assert_eq!(render_runs_csv(&[a.metrics.clone()]), render_runs_csv(&[b.metrics.clone()]));
        let m = &a.metrics;
        prop_assert_eq!(m.events, m.events_dispatched + m.events_suppressed);
        prop_assert_eq!(count_incorrect_states(&a.history, &a.history).unwrap(), 0);
        if mode == RunMode::NoHandler {
            prop_assert_eq!(m.events_suppressed, 0);
        }
    }

    #[test]
    fn baseline_ignores_the_schedule(seed in 0u64..1000) {
        let s = scenario(seed, FaultProfile::Multiple);
        let mut clean = s.clone();
        clean.faults.clear();
        let a = run_simulation(&s, &RunMode::Baseline);
        let b = run_simulation(&clean, &RunMode::Baseline);
        prop_assert_eq!(a.history, b.history);
        prop_assert_eq!(a.metrics, b.metrics);
    }
}
