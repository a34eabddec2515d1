use std::collections::BTreeMap;

use crate::config::{ConfigFile, RedundancyConfig};
use crate::device::Registry;
use crate::value::{DeviceId, Value};

/// Per-state change rates of a series: for each distinct value, the fraction
/// of ticks spent in it that were followed by a different value.
pub fn transition_rates(series: &[Value]) -> BTreeMap<u64, f64> {
    let mut counts: BTreeMap<u64, (u64, u64)> = BTreeMap::new();
    for w in series.windows(2) {
        let c = counts.entry(w[0].0.to_bits()).or_default();
        c.0 += 1;
        if w[0] != w[1] {
            c.1 += 1;
        }
    }
    counts
        .into_iter()
        .map(|(k, (n, changes))| (k, changes as f64 / n as f64))
        .collect()
}

fn changes(series: &[Value]) -> usize {
    series.windows(2).filter(|w| w[0] != w[1]).count()
}

fn rates_converge(a: &[Value], b: &[Value], tolerance: f64) -> bool {
    let (ra, rb) = (transition_rates(a), transition_rates(b));
    ra.keys()
        .chain(rb.keys())
        .all(|k| (ra.get(k).copied().unwrap_or(0.0) - rb.get(k).copied().unwrap_or(0.0)).abs() < tolerance)
}

/// Sensor pairs that look like replicas of each other over the last
/// `config.window` ticks of `history`.
///
/// Both directions of each pair are returned. Streams with no changes in the
/// window carry no evidence and are never paired.
pub fn detect_redundant_devices(
    history: &BTreeMap<DeviceId, Vec<Value>>,
    registry: &Registry,
    config: &RedundancyConfig,
) -> Vec<(DeviceId, DeviceId)> {
    let window = config.window as usize;
    let candidates: Vec<(DeviceId, &[Value])> = registry
        .specs()
        .filter(|s| s.is_sensor() && !s.is_virtual)
        .filter_map(|s| {
            let h = history.get(&s.id)?;
            (h.len() >= window && window > 1).then(|| (s.id, &h[h.len() - window..]))
        })
        .filter(|(_, w)| changes(w) > 0)
        .collect();
    let mut pairs = Vec::new();
    for (i, (a, sa)) in candidates.iter().enumerate() {
        for (b, sb) in &candidates[i + 1..] {
            if registry.spec(*a).map(|s| s.type_class) != registry.spec(*b).map(|s| s.type_class) {
                continue;
            }
            let agree = sa.iter().zip(sb.iter()).filter(|(x, y)| x == y).count() as f64 / window as f64;
            if agree >= config.agreement && rates_converge(sa, sb, config.transition_tolerance) {
                pairs.push((*a, *b));
                pairs.push((*b, *a));
            }
        }
    }
    pairs.sort();
    pairs
}

/// Adds detected pairs to the replica lists after any existing entries.
/// Returns how many were new.
pub fn apply_redundant_pairs(config: &mut ConfigFile, pairs: &[(DeviceId, DeviceId)]) -> usize {
    pairs.iter().filter(|(a, b)| config.add_replica(*a, *b)).count()
}
