use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use thiserror::Error;

use crate::device::home;
use crate::value::{DeviceId, Tick, Value, SECONDS_PER_DAY};

/// Ground-truth sensor values, one sequence per sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentTrace {
    pub seed: u64,
    pub ticks: Tick,
    pub sensors: BTreeMap<DeviceId, Vec<Value>>,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("reading trace: {0}")]
    Io(#[from] std::io::Error),
    #[error("trace line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl EnvironmentTrace {
    pub fn value(&self, device: DeviceId, tick: Tick) -> Option<Value> {
        self.sensors.get(&device)?.get(tick as usize).copied()
    }

    /// CSV with a `# seed=` comment, a `tick,<id>...` header and one row per tick.
    pub fn render(&self) -> String {
        let mut out = format!("# seed={}\ntick", self.seed);
        for id in self.sensors.keys() {
            let _ = write!(out, ",{id}");
        }
        out.push('\n');
        for t in 0..self.ticks as usize {
            let _ = write!(out, "{t}");
            for col in self.sensors.values() {
                let _ = write!(out, ",{}", col[t]);
            }
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        fs::write(path, self.render())
    }

    pub fn parse(text: &str) -> Result<Self, TraceError> {
        let err = |line: usize, message: String| TraceError::Parse { line, message };
        let mut seed = 0;
        let mut ids: Vec<DeviceId> = Vec::new();
        let mut cols: Vec<Vec<Value>> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let raw = raw.trim();
            if raw.is_empty() {
                continue;
            }
            if let Some(rest) = raw.strip_prefix('#') {
                if let Some(s) = rest.trim().strip_prefix("seed=") {
                    seed = s.trim().parse().map_err(|e| err(line, format!("bad seed: {e}")))?;
                }
                continue;
            }
            let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
            if ids.is_empty() {
                if fields.first() != Some(&"tick") {
                    return Err(err(line, "expected header starting with `tick`".into()));
                }
                for f in &fields[1..] {
                    ids.push(DeviceId(f.parse().map_err(|e| err(line, format!("bad device id `{f}`: {e}")))?));
                }
                cols = vec![Vec::new(); ids.len()];
                continue;
            }
            if fields.len() != ids.len() + 1 {
                return Err(err(line, format!("expected {} fields, found {}", ids.len() + 1, fields.len())));
            }
            let tick: usize = fields[0].parse().map_err(|e| err(line, format!("bad tick: {e}")))?;
            if tick != cols.first().map_or(0, Vec::len) {
                return Err(err(line, format!("tick {tick} out of sequence")));
            }
            for (c, f) in cols.iter_mut().zip(&fields[1..]) {
                c.push(Value(f.parse().map_err(|e| err(line, format!("bad value `{f}`: {e}")))?));
            }
        }
        if ids.is_empty() {
            return Err(err(0, "missing header".into()));
        }
        let ticks = cols.first().map_or(0, Vec::len) as Tick;
        Ok(Self {
            seed,
            ticks,
            sensors: ids.into_iter().zip(cols).collect(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TraceError> {
        Self::parse(&fs::read_to_string(path)?)
    }
}

/// Alternating on/off runs with exponential dwell times.
struct Dwell {
    on: bool,
    left: Tick,
}

impl Dwell {
    fn next(&mut self, rng: &mut ChaCha8Rng, on_mean: f64, off_mean: f64, min: Tick) -> bool {
        if self.left == 0 {
            self.on = !self.on;
            let mean = if self.on { on_mean } else { off_mean };
            self.left = (Exp::new(1.0 / mean).expect("positive mean").sample(rng) as Tick).max(min);
        }
        self.left -= 1;
        self.on
    }
}

/// Smooth daily temperature, coldest around 05:00 and warmest around 17:00.
fn diurnal(tick: Tick) -> f64 {
    let phase = (tick % SECONDS_PER_DAY) as f64 - 5.0 * 3600.0;
    75.0 - 8.0 * (std::f64::consts::TAU * phase / SECONDS_PER_DAY as f64).cos()
}

/// A seeded day-in-the-life trace for the default home's seven sensors.
///
/// Occupancy alternates between home and away. Motion only happens while
/// someone is home, and then most of the time; the contact sensor opens on
/// arrivals, departures and now and then while home. Temperature follows
/// the daily curve plus slow noise. Smoke and leaks are rare bursts; the
/// smoke replica sees the same smoke as the main detector.
pub fn generate_trace(seed: u64, ticks: Tick) -> EnvironmentTrace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = ticks as usize;
    let mut cols: BTreeMap<DeviceId, Vec<Value>> =
        home::SENSORS.iter().map(|id| (*id, Vec::with_capacity(n))).collect();

    let mut presence = Dwell {
        on: rng.random_bool(0.5),
        left: rng.random_range(600..3600),
    };
    let mut motion = Dwell { on: false, left: 0 };
    let mut contact_left: Tick = 0;
    let mut smoke_left: Tick = 0;
    let mut leak_left: Tick = 0;
    let mut noise = 0.0;
    let jitter = Normal::new(0.0, 0.03).expect("valid sigma");
    let mut was_home = presence.on;

    for t in 0..ticks {
        let home_now = presence.next(&mut rng, 5_400.0, 3_600.0, 600);
        if home_now != was_home {
            contact_left = rng.random_range(5..30);
        } else if home_now && contact_left == 0 && rng.random_bool(1.0 / 1_800.0) {
            contact_left = rng.random_range(5..60);
        }
        was_home = home_now;
        let moving = if home_now {
            motion.next(&mut rng, 300.0, 200.0, 5)
        } else {
            motion = Dwell { on: false, left: 0 };
            false
        };
        if smoke_left == 0 && rng.random_bool(1.0 / 20_000.0) {
            smoke_left = rng.random_range(30..120);
        }
        if leak_left == 0 && rng.random_bool(1.0 / 30_000.0) {
            leak_left = rng.random_range(60..300);
        }
        noise = 0.995 * noise + jitter.sample(&mut rng);
        let temp = ((diurnal(t) + noise) * 10.0).round() / 10.0;

        let push = |cols: &mut BTreeMap<DeviceId, Vec<Value>>, id, v: Value| cols.get_mut(&id).expect("sensor").push(v);
        push(&mut cols, home::MOTION, Value::from(moving));
        push(&mut cols, home::CONTACT, Value::from(contact_left > 0));
        push(&mut cols, home::TEMPERATURE, Value(temp.clamp(0.0, 120.0)));
        push(&mut cols, home::PRESENCE, Value::from(home_now));
        push(&mut cols, home::SMOKE, Value::from(smoke_left > 0));
        push(&mut cols, home::LEAK, Value::from(leak_left > 0));
        push(&mut cols, home::SMOKE_REPLICA, Value::from(smoke_left > 0));
        contact_left = contact_left.saturating_sub(1);
        smoke_left = smoke_left.saturating_sub(1);
        leak_left = leak_left.saturating_sub(1);
    }
    EnvironmentTrace {
        seed,
        ticks,
        sensors: cols,
    }
}

/// Pearson correlation of two equally long series.
pub fn pearson(a: &[Value], b: &[Value]) -> f64 {
    let n = a.len().min(b.len()) as f64;
    let mean = |s: &[Value]| s.iter().map(|v| v.0).sum::<f64>() / n;
    let (ma, mb) = (mean(a), mean(b));
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x.0 - ma, y.0 - mb);
        cov += dx * dy;
        va += dx * dx;
        vb += dy * dy;
    }
    cov / (va * vb).sqrt()
}
