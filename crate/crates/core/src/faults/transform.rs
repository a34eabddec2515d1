use serde::{Deserialize, Serialize};

use super::{ActiveFault, FaultKind};
use crate::value::{Tick, Value, ValueDomain};

/// What a poll of a faulty device yields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reading {
    Value(Value),
    Unresponsive,
}

/// Shape parameters for the non-fail-stop transforms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransformParams {
    /// Ticks a spike spends rising, and again falling.
    pub spike_rise_ticks: u64,
    /// Used when a spike fault carries a zero amplitude.
    pub spike_amplitude: f64,
    /// Used when a high-variance fault on a numeric device carries a zero amplitude.
    pub high_variance_amplitude: f64,
}

impl Default for TransformParams {
    fn default() -> Self {
        Self {
            spike_rise_ticks: 10,
            spike_amplitude: 20.0,
            high_variance_amplitude: 10.0,
        }
    }
}

/// Transforms a ground-truth value according to an active fault.
///
/// Pure in `(true_value, fault, tick - start)`, so replays are deterministic.
pub fn transform_reading(
    true_value: Value,
    fault: &ActiveFault,
    tick: Tick,
    domain: &ValueDomain,
    params: &TransformParams,
) -> Reading {
    let offset = fault.offset(tick);
    let spec = &fault.spec;
    match spec.kind {
        FaultKind::Power | FaultKind::Communication | FaultKind::CriticalError => {
            Reading::Unresponsive
        }
        FaultKind::StuckAt => Reading::Value(domain.clamp(spec.param.0)),
        FaultKind::Outlier => {
            if offset == 0 {
                Reading::Value(domain.clamp(spec.param.0))
            } else {
                Reading::Value(true_value)
            }
        }
        FaultKind::HighVariance => Reading::Value(high_variance(true_value, spec.param, offset, domain, params)),
        FaultKind::Spike => {
            if domain.is_binary() {
                return Reading::Value(high_variance(true_value, spec.param, offset, domain, params));
            }
            let amplitude = if spec.param.0 == 0.0 {
                params.spike_amplitude
            } else {
                spec.param.0
            };
            let rise = params.spike_rise_ticks.max(1);
            Reading::Value(domain.clamp(true_value.0 + amplitude * triangle(offset, rise)))
        }
    }
}

fn high_variance(
    true_value: Value,
    param: Value,
    offset: Tick,
    domain: &ValueDomain,
    params: &TransformParams,
) -> Value {
    let flipped = offset % 2 == 0;
    if domain.is_binary() {
        if flipped {
            Value::from(!true_value.is_on())
        } else {
            true_value
        }
    } else {
        let amplitude = if param.0 == 0.0 {
            params.high_variance_amplitude
        } else {
            param.0.abs()
        };
        let delta = if flipped { amplitude } else { -amplitude };
        domain.clamp(true_value.0 + delta)
    }
}

/// Periodic triangle wave: rises over `rise` ticks to 1, falls back over
/// `rise` ticks to 0, then repeats.
fn triangle(offset: Tick, rise: Tick) -> f64 {
    let phase = offset % (2 * rise);
    if phase < rise {
        (phase + 1) as f64 / rise as f64
    } else {
        (2 * rise - phase - 1) as f64 / rise as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::faults::{FaultSpec, Fixability};
    use crate::value::DeviceId;

    fn fault(kind: FaultKind, param: f64) -> ActiveFault {
        ActiveFault {
            index: 0,
            spec: FaultSpec {
                start_tick: 100,
                device: DeviceId(1),
                kind,
                fixability: Fixability::Unfixable,
                param: Value(param),
                end_tick: None,
            },
        }
    }

    fn read(kind: FaultKind, param: f64, truth: f64, offset: u64, domain: &ValueDomain) -> Reading {
        transform_reading(
            Value(truth),
            &fault(kind, param),
            100 + offset,
            domain,
            &TransformParams::default(),
        )
    }

    #[test]
    fn stuck_at_reports_param() {
        assert_eq!(
            read(FaultKind::StuckAt, 0.0, 1.0, 0, &ValueDomain::Binary),
            Reading::Value(Value::OFF)
        );
        assert_eq!(
            read(FaultKind::StuckAt, 0.0, 1.0, 57, &ValueDomain::Binary),
            Reading::Value(Value::OFF)
        );
    }

    #[test]
    fn outlier_only_first_tick() {
        let d = ValueDomain::temperature();
        let seq: Vec<_> = (0..3).map(|o| read(FaultKind::Outlier, 120.0, 72.0, o, &d)).collect();
        assert_eq!(
            seq,
            vec![
                Reading::Value(Value(120.0)),
                Reading::Value(Value(72.0)),
                Reading::Value(Value(72.0))
            ]
        );
    }

    #[test]
    fn high_variance_binary_toggles() {
        let seq: Vec<_> = (0..4)
            .map(|o| read(FaultKind::HighVariance, 0.0, 0.0, o, &ValueDomain::Binary))
            .collect();
        let expected: Vec<_> = [1.0, 0.0, 1.0, 0.0]
            .into_iter()
            .map(|v| Reading::Value(Value(v)))
            .collect();
        assert_eq!(seq, expected);
    }

    #[test]
    fn high_variance_numeric_alternates_and_clamps() {
        let d = ValueDomain::temperature();
        assert_eq!(read(FaultKind::HighVariance, 0.0, 70.0, 0, &d), Reading::Value(Value(80.0)));
        assert_eq!(read(FaultKind::HighVariance, 0.0, 70.0, 1, &d), Reading::Value(Value(60.0)));
        assert_eq!(read(FaultKind::HighVariance, 0.0, 115.0, 0, &d), Reading::Value(Value(120.0)));
    }

    #[test]
    fn spike_ramps_up_and_down() {
        let d = ValueDomain::temperature();
        let vals: Vec<f64> = (0..20)
            .map(|o| match read(FaultKind::Spike, 10.0, 50.0, o, &d) {
                Reading::Value(v) => v.0,
                Reading::Unresponsive => panic!(),
            })
            .collect();
        assert!((vals[0] - 51.0).abs() < 1e-9);
        assert!((vals[9] - 60.0).abs() < 1e-9);
        assert!((vals[19] - 50.0).abs() < 1e-9);
        assert!(vals.iter().all(|v| (50.0..=60.0).contains(v)));
    }

    #[test]
    fn fail_stop_kinds_unresponsive() {
        for k in [FaultKind::Power, FaultKind::Communication, FaultKind::CriticalError] {
            assert_eq!(read(k, 0.0, 1.0, 3, &ValueDomain::Binary), Reading::Unresponsive);
        }
    }
}
