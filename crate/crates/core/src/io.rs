//! Dataset files and synthetic data.
//!
//! A dataset is stored as two files:
//!
//! * `<name>.csv` with header `day_id,time_s,jump`, one row per spread change,
//!   times in seconds from the day origin printed with 9 decimals;
//! * `<name>.json`, the sidecar, holding per-day initial spread and horizon:
//!
//! ```json
//! {"version": 1, "asset": "", "days": [{"day_id": 0, "s0": 2, "horizon_s": 7200.0}]}
//! ```
//!
//! Days listed in the sidecar without rows are empty days.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{Dataset, DatasetMeta, Day};
use crate::model::{secs_to_nanos, EventType, ExcitationState, JumpEvent, ModelSpec, SpreadPath, NANOS_PER_SEC};
use crate::simulate::{path_rng, simulate_with_rng, SimOptions};
use crate::stats::{self, Averaging};

pub const SCHEMA_VERSION: u32 = 1;
pub const CSV_HEADER: &str = "day_id,time_s,jump";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
struct SidecarDay {
    day_id: u64,
    s0: u32,
    horizon_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
struct Sidecar {
    version: u32,
    #[serde(default)]
    asset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    slot: Option<(f64, f64)>,
    days: Vec<SidecarDay>,
}

/// Sidecar path for a dataset CSV.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// What to do with jumps larger than `K` in absolute value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpPolicy {
    #[default]
    Reject,
    /// Clip to `±K` and log a warning.
    Clip,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadOptions {
    /// Intraday slot `(start, end)` in seconds; times are rebased to `start`.
    pub slot: Option<(f64, f64)>,
    pub min_events: usize,
    /// Maximal jump size; `None` accepts any size.
    pub k: Option<usize>,
    pub jump_policy: JumpPolicy,
}

/// Parses a non-negative decimal seconds string exactly to nanoseconds.
pub fn parse_time_ns(s: &str) -> std::result::Result<i64, String> {
    let s = s.trim();
    let (int, frac) = match s.split_once('.') {
        Some((a, b)) => (a, b),
        None => (s, ""),
    };
    if int.is_empty() && frac.is_empty() {
        return Err("empty time".into());
    }
    if !int.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
        return Err(format!("invalid time {s:?}"));
    }
    if frac.len() > 9 && frac[9..].chars().any(|c| c != '0') {
        return Err(format!("time {s:?} has sub-nanosecond digits"));
    }
    let secs: i64 = if int.is_empty() { 0 } else { int.parse().map_err(|e| format!("{e}"))? };
    let mut digits: String = frac.chars().take(9).collect();
    while digits.len() < 9 {
        digits.push('0');
    }
    let nanos: i64 = digits.parse().map_err(|e| format!("{e}"))?;
    secs.checked_mul(NANOS_PER_SEC)
        .and_then(|v| v.checked_add(nanos))
        .ok_or_else(|| format!("time {s:?} overflows"))
}

/// Prints nanoseconds as seconds with exactly 9 decimals.
pub fn format_time_ns(ns: i64) -> String {
    format!("{}.{:09}", ns / NANOS_PER_SEC, ns % NANOS_PER_SEC)
}

/// Summary line printed on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n_days: usize,
    pub n_events: usize,
    pub days_dropped: usize,
    pub mean_event_spread: f64,
    pub mean_calendar_spread: f64,
}

impl DatasetSummary {
    pub fn of(data: &Dataset, days_dropped: usize) -> Self {
        let mean = |h: Result<stats::Histogram>| h.map(|h| h.mean()).unwrap_or(f64::NAN);
        DatasetSummary {
            n_days: data.days.len(),
            n_events: data.n_events(),
            days_dropped,
            mean_event_spread: mean(stats::event_distribution(data, Averaging::Daily)),
            mean_calendar_spread: mean(stats::calendar_distribution(data, Averaging::Daily)),
        }
    }
}

impl fmt::Display for DatasetSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "#days  #events  dropped  E_event[S]  E_cal[S]")?;
        write!(
            f,
            "{:<6} {:<8} {:<8} {:<11.2} {:.2}",
            self.n_days, self.n_events, self.days_dropped, self.mean_event_spread, self.mean_calendar_spread
        )
    }
}

fn read_sidecar(csv: &Path) -> Result<Sidecar> {
    let p = sidecar_path(csv);
    let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    let sc: Sidecar = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: p.clone(),
        line: e.line(),
        msg: e.to_string(),
    })?;
    if sc.version != SCHEMA_VERSION {
        return Err(Error::Parse {
            path: p,
            line: 1,
            msg: format!("unsupported schema version {}", sc.version),
        });
    }
    Ok(sc)
}

/// Loads a dataset, applies slot clipping and the `min_events` filter.
/// Returns the dataset and its summary.
pub fn load_dataset(path: &Path, opts: &LoadOptions) -> Result<(Dataset, DatasetSummary)> {
    let sc = read_sidecar(path)?;
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => return Err(parse_err(1, format!("expected header `{CSV_HEADER}`"))),
    }

    let mut rows: BTreeMap<u64, Vec<(i64, i32, usize)>> = BTreeMap::new();
    for (i, line) in lines {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(parse_err(lineno, format!("expected 3 fields, found {}", fields.len())));
        }
        let day: u64 = fields[0].trim().parse().map_err(|e| parse_err(lineno, format!("day_id: {e}")))?;
        let t = parse_time_ns(fields[1]).map_err(|m| parse_err(lineno, m))?;
        let mut jump: i32 = fields[2].trim().parse().map_err(|e| parse_err(lineno, format!("jump: {e}")))?;
        if jump == 0 {
            return Err(parse_err(lineno, "jump of size 0".into()));
        }
        if let Some(k) = opts.k {
            if jump.unsigned_abs() as usize > k {
                match opts.jump_policy {
                    JumpPolicy::Reject => {
                        return Err(parse_err(lineno, format!("jump {jump} exceeds K = {k}")));
                    }
                    JumpPolicy::Clip => {
                        log::warn!("line {lineno}: jump {jump} clipped to ±{k}");
                        jump = jump.signum() * k as i32;
                    }
                }
            }
        }
        rows.entry(day).or_default().push((t, jump, lineno));
    }

    let known: BTreeMap<u64, &SidecarDay> = sc.days.iter().map(|d| (d.day_id, d)).collect();
    if let Some(day) = rows.keys().find(|d| !known.contains_key(d)) {
        return Err(parse_err(0, format!("day {day} is missing from the sidecar")));
    }

    let days: Vec<Result<Day>> = sc
        .days
        .par_iter()
        .map(|meta| {
            let raw = rows.get(&meta.day_id).map(Vec::as_slice).unwrap_or(&[]);
            let mut events = Vec::with_capacity(raw.len());
            let mut prev: Option<i64> = None;
            for &(t, jump, lineno) in raw {
                let mut t = t;
                if let Some(p) = prev {
                    if t < p {
                        return Err(parse_err(lineno, format!("day {}: time goes backwards", meta.day_id)));
                    }
                    if t == p {
                        log::warn!("line {lineno}: duplicate timestamp shifted by 1 ns");
                        t = p + 1;
                    }
                }
                prev = Some(t);
                let size = jump.unsigned_abs() as usize;
                events.push(JumpEvent {
                    time_ns: t,
                    etype: EventType::new(jump, opts.k.unwrap_or(size).max(size))?,
                });
            }
            // event types are re-indexed by size alone, so K only bounds sizes
            let path = SpreadPath::new(meta.s0, secs_to_nanos(meta.horizon_s), events)
                .map_err(|e| Error::Invariant(format!("day {}: {e}", meta.day_id)))?;
            let path = match opts.slot {
                None => path,
                Some((a, b)) => {
                    let (a, b) = (secs_to_nanos(a), secs_to_nanos(b).min(path.horizon_ns()));
                    path.window(a, b)?
                }
            };
            Ok(Day {
                id: meta.day_id,
                path,
            })
        })
        .collect();
    let days = days.into_iter().collect::<Result<Vec<Day>>>()?;
    let mut data = Dataset {
        days,
        meta: DatasetMeta {
            asset: sc.asset.clone(),
            slot: opts.slot.or(sc.slot),
        },
    };
    let dropped = data.retain_min_events(opts.min_events);
    if dropped > 0 {
        log::info!("dropped {dropped} day(s) with fewer than {} events", opts.min_events);
    }
    let summary = DatasetSummary::of(&data, dropped);
    Ok((data, summary))
}

/// Writes the canonical CSV and its sidecar.
pub fn save_dataset(data: &Dataset, path: &Path) -> Result<()> {
    let mut csv = String::with_capacity(32 * data.n_events() + 32);
    csv.push_str(CSV_HEADER);
    csv.push('\n');
    let mut days: Vec<&Day> = data.days.iter().collect();
    days.sort_by_key(|d| d.id);
    for d in &days {
        for ev in d.path.events() {
            csv.push_str(&format!("{},{},{}\n", d.id, format_time_ns(ev.time_ns), ev.etype.size()));
        }
    }
    let sc = Sidecar {
        version: SCHEMA_VERSION,
        asset: data.meta.asset.clone(),
        slot: data.meta.slot,
        days: days
            .iter()
            .map(|d| SidecarDay {
                day_id: d.id,
                s0: d.path.s0(),
                horizon_s: d.path.horizon(),
            })
            .collect(),
    };
    std::fs::write(path, csv).map_err(|e| Error::io(path, e))?;
    let sp = sidecar_path(path);
    let mut json = serde_json::to_string_pretty(&sc)?;
    json.push('\n');
    std::fs::write(&sp, json).map_err(|e| Error::io(&sp, e))
}

/// `n_days` independent cold-start simulations of `day_horizon` seconds,
/// day `i` drawn from stream `i` of `seed`.
pub fn generate_synthetic(spec: &ModelSpec, n_days: usize, day_horizon: f64, s0: u32, seed: u64) -> Result<Dataset> {
    generate_days(spec, 0..n_days as u64, day_horizon, s0, seed)
}

/// Like [`generate_synthetic`] for an arbitrary id range. Day `i` is the same
/// path whichever range it is generated in, so splits of one run can be
/// produced as separate files.
pub fn generate_days(spec: &ModelSpec, ids: Range<u64>, day_horizon: f64, s0: u32, seed: u64) -> Result<Dataset> {
    let days: Vec<Result<Day>> = ids
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i);
            let state = ExcitationState::cold(spec, s0);
            let path = simulate_with_rng(spec, &state, None, day_horizon, &mut rng, SimOptions::default())?;
            Ok(Day { id: i, path })
        })
        .collect();
    Ok(Dataset {
        days: days.into_iter().collect::<Result<Vec<Day>>>()?,
        meta: DatasetMeta {
            asset: "synthetic".into(),
            slot: None,
        },
    })
}
