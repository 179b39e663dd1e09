//! Distributional and correlation diagnostics for spread paths.
//!
//! Daily statistics are computed per day and then averaged with equal weight
//! per day, unless [`Averaging::Pooled`] is requested. Every statistic can be
//! written as CSV through its `to_csv` method.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::Dataset;
use crate::model::{secs_to_nanos, EventType, ExcitationState, ModelSpec, SpreadPath};

/// How per-day distributions are combined.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// Mean of the daily pmfs.
    #[default]
    Daily,
    /// Pool time or events across days before normalizing.
    Pooled,
}

/// A probability mass function on integer support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub support: Vec<i64>,
    pub probs: Vec<f64>,
}

impl Histogram {
    fn from_weights(w: &BTreeMap<i64, f64>) -> Option<Self> {
        let total: f64 = w.values().sum();
        if !(total > 0.0) {
            return None;
        }
        Some(Histogram {
            support: w.keys().copied().collect(),
            probs: w.values().map(|v| v / total).collect(),
        })
    }

    fn average(parts: &[BTreeMap<i64, f64>]) -> Option<Self> {
        let mut acc: BTreeMap<i64, f64> = BTreeMap::new();
        for p in parts {
            for (k, v) in p {
                *acc.entry(*k).or_default() += v;
            }
        }
        if parts.is_empty() {
            return None;
        }
        Self::from_weights(&acc)
    }

    pub fn get(&self, value: i64) -> f64 {
        self.support
            .iter()
            .position(|s| *s == value)
            .map(|i| self.probs[i])
            .unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.support.iter().zip(&self.probs).map(|(s, p)| *s as f64 * p).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("value,probability\n");
        for (v, p) in self.support.iter().zip(&self.probs) {
            s.push_str(&format!("{v},{p:.12e}\n"));
        }
        s
    }
}

fn normalized(w: BTreeMap<i64, f64>) -> Option<BTreeMap<i64, f64>> {
    let total: f64 = w.values().sum();
    (total > 0.0).then(|| w.into_iter().map(|(k, v)| (k, v / total)).collect())
}

/// Time spent at each spread value, in seconds.
pub fn occupancy(path: &SpreadPath) -> BTreeMap<i64, f64> {
    let mut occ: BTreeMap<i64, f64> = BTreeMap::new();
    let mut s = path.s0() as i64;
    let mut prev = 0i64;
    for ev in path.events() {
        *occ.entry(s).or_default() += (ev.time_ns - prev) as f64 * 1e-9;
        prev = ev.time_ns;
        s += ev.etype.size() as i64;
    }
    *occ.entry(s).or_default() += (path.horizon_ns() - prev) as f64 * 1e-9;
    occ
}

fn combine(parts: Vec<Option<BTreeMap<i64, f64>>>, mode: Averaging, what: &str) -> Result<Histogram> {
    let skipped = parts.iter().filter(|p| p.is_none()).count();
    if skipped > 0 {
        log::warn!("{what}: {skipped} degenerate day(s) excluded");
    }
    let parts: Vec<BTreeMap<i64, f64>> = parts.into_iter().flatten().collect();
    let parts = match mode {
        Averaging::Daily => parts.into_iter().filter_map(normalized).collect(),
        Averaging::Pooled => parts,
    };
    Histogram::average(&parts).ok_or_else(|| Error::Argument(format!("{what}: no usable days")))
}

/// Calendar-time pmf `(1/T) ∫ 1{S_u = s} du`.
pub fn calendar_distribution(data: &Dataset, mode: Averaging) -> Result<Histogram> {
    let parts = data
        .days
        .iter()
        .map(|d| (d.path.horizon_ns() > 0).then(|| occupancy(&d.path)))
        .collect();
    combine(parts, mode, "calendar distribution")
}

/// Event-time pmf of pre-event spreads `S_{t_n-}`.
pub fn event_distribution(data: &Dataset, mode: Averaging) -> Result<Histogram> {
    let parts = data
        .days
        .iter()
        .map(|d| {
            (!d.path.is_empty()).then(|| {
                let mut w = BTreeMap::new();
                for s in d.path.pre_spreads() {
                    *w.entry(s as i64).or_insert(0.0) += 1.0;
                }
                w
            })
        })
        .collect();
    combine(parts, mode, "event distribution")
}

/// Pooled pmf of signed jump sizes.
pub fn jump_size_distribution(data: &Dataset) -> Result<Histogram> {
    let mut w: BTreeMap<i64, f64> = BTreeMap::new();
    for d in &data.days {
        for ev in d.path.events() {
            *w.entry(ev.etype.size() as i64).or_default() += 1.0;
        }
    }
    Histogram::from_weights(&w).ok_or_else(|| Error::Argument("no events".into()))
}

/// Smallest `k` such that jumps with `|dS| > k` carry less than `threshold` mass.
pub fn recommend_k(jumps: &Histogram, threshold: f64) -> usize {
    let max = jumps.support.iter().map(|s| s.unsigned_abs()).max().unwrap_or(1) as usize;
    (1..=max)
        .find(|&k| {
            let tail: f64 = jumps
                .support
                .iter()
                .zip(&jumps.probs)
                .filter(|(s, _)| s.unsigned_abs() as usize > k)
                .map(|(_, p)| p)
                .sum();
            tail < threshold
        })
        .unwrap_or(max)
}

/// Inter-event durations in seconds. With `condition = Some((s1, s2))`, keeps
/// only `t_{i+1} - t_i` where `S(t_i+) = s1` and `S(t_{i+1}+) = s2`.
pub fn inter_event_times(path: &SpreadPath, condition: Option<(u32, u32)>) -> Vec<f64> {
    let ev = path.events();
    let post = path.post_spreads();
    (1..ev.len())
        .filter(|&i| match condition {
            None => true,
            Some((s1, s2)) => post[i - 1] == s1 && post[i] == s2,
        })
        .map(|i| (ev[i].time_ns - ev[i - 1].time_ns) as f64 * 1e-9)
        .collect()
}

/// Durations grouped by every attained `(S(t_i+), S(t_{i+1}+))` pair.
pub fn conditional_inter_event_times(data: &Dataset) -> BTreeMap<(u32, u32), Vec<f64>> {
    let mut out: BTreeMap<(u32, u32), Vec<f64>> = BTreeMap::new();
    for d in &data.days {
        let ev = d.path.events();
        let post = d.path.post_spreads();
        for i in 1..ev.len() {
            out.entry((post[i - 1], post[i]))
                .or_default()
                .push((ev[i].time_ns - ev[i - 1].time_ns) as f64 * 1e-9);
        }
    }
    out
}

/// Type-7 empirical quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Matched quantiles at `n_quantiles` evenly spaced probabilities in `[0, 1]`.
pub fn qq_points(a: &[f64], b: &[f64], n_quantiles: usize) -> Result<Vec<(f64, f64)>> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Argument("qq_points needs two non-empty samples".into()));
    }
    if n_quantiles == 0 {
        return Err(Error::Argument("n_quantiles must be ≥ 1".into()));
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    Ok((0..n_quantiles)
        .map(|i| {
            let p = if n_quantiles == 1 { 0.5 } else { i as f64 / (n_quantiles - 1) as f64 };
            (quantile_sorted(&sa, p), quantile_sorted(&sb, p))
        })
        .collect())
}

/// Slot partition of each day: consecutive windows of `slot_length` seconds
/// (the last partial window is dropped unless it is the whole day).
fn slots(data: &Dataset, slot_length: Option<f64>) -> Result<Vec<SpreadPath>> {
    let mut out = Vec::new();
    for d in &data.days {
        let h = d.path.horizon_ns();
        match slot_length {
            None => out.push(d.path.clone()),
            Some(len) => {
                let step = secs_to_nanos(len);
                if step <= 0 {
                    return Err(Error::Argument("slot length must be positive".into()));
                }
                if step > h {
                    return Err(Error::Argument(format!(
                        "slot length {len} s exceeds the horizon of day {}",
                        d.id
                    )));
                }
                let mut start = 0;
                while start + step <= h {
                    out.push(d.path.window(start, start + step)?);
                    start += step;
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcfCurve {
    pub lags: Vec<f64>,
    pub values: Vec<f64>,
    pub n_slots: usize,
    /// Slots excluded because the sampled spread was constant.
    pub constant_slots: usize,
    pub diagnostic: Option<String>,
}

impl AcfCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("lag_s,acf\n");
        for (l, v) in self.lags.iter().zip(&self.values) {
            s.push_str(&format!("{l},{v:.12e}\n"));
        }
        s
    }
}

/// Spread autocorrelation sampled on a regular `grid` within each slot,
/// averaged over slots. Lags longer than the slot are omitted.
pub fn spread_autocorrelation(
    data: &Dataset,
    lags: &[f64],
    slot_length: Option<f64>,
    grid: f64,
) -> Result<AcfCurve> {
    if !(grid > 0.0) {
        return Err(Error::Argument("sampling grid must be positive".into()));
    }
    if let Some(min_lag) = lags.iter().copied().filter(|l| *l > 0.0).reduce(f64::min) {
        if grid > min_lag * (1.0 + 1e-9) {
            return Err(Error::Argument(format!(
                "sampling grid {grid} s is coarser than the smallest lag {min_lag} s"
            )));
        }
    }
    if lags.iter().any(|l| *l < 0.0) {
        return Err(Error::Argument("lags must be ≥ 0".into()));
    }
    let slot_paths = slots(data, slot_length)?;
    let slot_len = slot_length.unwrap_or_else(|| {
        slot_paths.iter().map(|p| p.horizon()).fold(f64::INFINITY, f64::min)
    });
    let kept: Vec<f64> = lags.iter().copied().filter(|l| *l <= slot_len).collect();
    let steps: Vec<usize> = kept.iter().map(|l| (l / grid).round() as usize).collect();
    let grid_ns = secs_to_nanos(grid);

    let per_slot: Vec<Option<Vec<f64>>> = slot_paths
        .par_iter()
        .map(|p| {
            let m = (p.horizon_ns() / grid_ns) as usize + 1;
            let idx = p.spread_index();
            let x: Vec<f64> = (0..m).map(|j| idx.at(j as i64 * grid_ns) as f64).collect();
            let mean = x.iter().sum::<f64>() / m as f64;
            let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m as f64;
            if !(var > 0.0) {
                return None;
            }
            Some(
                steps
                    .iter()
                    .map(|&h| {
                        if h >= m {
                            return f64::NAN;
                        }
                        let c: f64 = (0..m - h).map(|j| (x[j] - mean) * (x[j + h] - mean)).sum::<f64>()
                            / (m - h) as f64;
                        c / var
                    })
                    .collect(),
            )
        })
        .collect();

    let n_slots = per_slot.len();
    let usable: Vec<&Vec<f64>> = per_slot.iter().flatten().collect();
    let constant_slots = n_slots - usable.len();
    let values: Vec<f64> = (0..kept.len())
        .map(|i| {
            if usable.is_empty() {
                f64::NAN
            } else {
                usable.iter().map(|v| v[i]).sum::<f64>() / usable.len() as f64
            }
        })
        .collect();
    let diagnostic = usable
        .is_empty()
        .then(|| "spread is constant on every slot: variance undefined".to_string());
    Ok(AcfCurve {
        lags: kept,
        values,
        n_slots,
        constant_slots,
        diagnostic,
    })
}

/// Normalized increment autocovariance `ACV(δ, τ)` at each lag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcvCurve {
    pub delta: f64,
    pub taus: Vec<f64>,
    pub values: Vec<f64>,
    /// Increment pairs contributing at each lag, summed over slots.
    pub counts: Vec<u64>,
}

impl AcvCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("delta_s,tau_s,acv,pairs\n");
        for i in 0..self.taus.len() {
            s.push_str(&format!(
                "{},{},{:.12e},{}\n",
                self.delta, self.taus[i], self.values[i], self.counts[i]
            ));
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcvOptions {
    /// Smallest allowed `τ / δ`; values ≤ 1 are always rejected.
    pub min_ratio: f64,
    pub slot_length: Option<f64>,
}

impl Default for AcvOptions {
    fn default() -> Self {
        AcvOptions {
            min_ratio: 2.0,
            slot_length: None,
        }
    }
}

/// Sparse increments `d_j = S((j+1)δ) - S(jδ)` of one slot.
struct Increments {
    /// Number of grid increments.
    m: usize,
    /// Sorted `(j, d_j)` with `d_j ≠ 0`.
    nz: Vec<(usize, f64)>,
    lookup: HashMap<usize, f64>,
    /// Prefix sums over `nz`.
    prefix: Vec<f64>,
}

impl Increments {
    fn new(path: &SpreadPath, delta_ns: i64) -> Self {
        let m = (path.horizon_ns() / delta_ns) as usize;
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for ev in path.events() {
            if ev.time_ns == 0 {
                continue;
            }
            let j = ((ev.time_ns - 1) / delta_ns) as usize;
            if j < m {
                *acc.entry(j).or_default() += ev.etype.size() as f64;
            }
        }
        let nz: Vec<(usize, f64)> = acc.into_iter().filter(|(_, d)| *d != 0.0).collect();
        let mut prefix = Vec::with_capacity(nz.len() + 1);
        prefix.push(0.0);
        for (_, d) in &nz {
            prefix.push(prefix.last().unwrap() + d);
        }
        let lookup = nz.iter().copied().collect();
        Increments { m, nz, lookup, prefix }
    }

    /// `Σ_{lo ≤ j < hi} d_j`.
    fn range_sum(&self, lo: usize, hi: usize) -> f64 {
        let a = self.nz.partition_point(|(j, _)| *j < lo);
        let b = self.nz.partition_point(|(j, _)| *j < hi);
        self.prefix[b] - self.prefix[a]
    }

    /// `(Σ_j (d_j - d̄)(d_{j+h} - d̄), pair count)` over `0 ≤ j < m - h`.
    fn cross(&self, h: usize) -> Option<(f64, u64)> {
        if h >= self.m {
            return None;
        }
        let n = self.m - h;
        let dbar = self.prefix.last().unwrap() / self.m as f64;
        let prod: f64 = self
            .nz
            .iter()
            .take_while(|(j, _)| *j < n)
            .filter_map(|(j, d)| self.lookup.get(&(j + h)).map(|e| d * e))
            .sum();
        let s_head = self.range_sum(0, n);
        let s_tail = self.range_sum(h, self.m);
        Some((prod - dbar * (s_head + s_tail) + n as f64 * dbar * dbar, n as u64))
    }
}

/// Empirical `ACV(δ, τ) = Cov(S_{t+δ}-S_t, S_{t+τ+δ}-S_{t+τ}) / δ²` on a
/// stride-`δ` grid, computed per slot and averaged over slots. Lags are
/// rounded to multiples of `δ`.
pub fn acv(data: &Dataset, delta: f64, taus: &[f64], opts: AcvOptions) -> Result<AcvCurve> {
    if !(delta > 0.0) {
        return Err(Error::Argument("δ must be positive".into()));
    }
    let ratio = opts.min_ratio.max(1.0);
    for &tau in taus {
        if !(tau > delta) || tau < ratio * delta * (1.0 - 1e-9) {
            return Err(Error::Argument(format!(
                "τ = {tau} s is too short for δ = {delta} s (need τ ≥ {ratio}δ and τ > δ)"
            )));
        }
    }
    if taus.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Argument("taus must be strictly increasing".into()));
    }
    let delta_ns = secs_to_nanos(delta);
    let steps: Vec<usize> = taus
        .iter()
        .map(|t| (secs_to_nanos(*t) as f64 / delta_ns as f64).round() as usize)
        .collect();
    let slot_paths = slots(data, opts.slot_length)?;
    let per_slot: Vec<Vec<Option<(f64, u64)>>> = slot_paths
        .par_iter()
        .map(|p| {
            let inc = Increments::new(p, delta_ns);
            steps.iter().map(|&h| inc.cross(h)).collect()
        })
        .collect();

    let mut values = Vec::with_capacity(taus.len());
    let mut counts = Vec::with_capacity(taus.len());
    for i in 0..taus.len() {
        let mut sum = 0.0;
        let mut n_slots = 0usize;
        let mut pairs = 0u64;
        for s in &per_slot {
            if let Some((c, n)) = s[i] {
                sum += c / n as f64;
                n_slots += 1;
                pairs += n;
            }
        }
        values.push(if n_slots == 0 { f64::NAN } else { sum / n_slots as f64 / (delta * delta) });
        counts.push(pairs);
    }
    Ok(AcvCurve {
        delta,
        taus: steps.iter().map(|h| *h as f64 * delta).collect(),
        values,
        counts,
    })
}

/// One row of the normalized influence table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceRow {
    /// Pre-event spread, capped at `sbar`.
    pub spread: u32,
    pub etype: i32,
    pub n_events: usize,
    /// Indexed by source type (`+1..+K, -1..-K`); `None` for empty buckets.
    pub values: Vec<Option<f64>>,
}

/// Average per-source excitation at events in each `(spread, type)` bucket,
/// normalized so the largest source in a row equals 1.
pub fn kernel_influence(spec: &ModelSpec, data: &Dataset) -> Result<Vec<InfluenceRow>> {
    spec.validate()?;
    let k = spec.k;
    let n = spec.n_types();
    let sbar = spec.statefns.sbar;
    let per_day: Vec<Result<(Vec<Vec<f64>>, Vec<usize>)>> = data
        .days
        .par_iter()
        .map(|d| {
            let mut sums = vec![vec![0.0; n]; sbar as usize * n];
            let mut cnt = vec![0usize; sbar as usize * n];
            let mut st = ExcitationState::cold(spec, d.path.s0());
            let mut prev = 0i64;
            for ev in d.path.events() {
                st.advance(spec.betas(), (ev.time_ns - prev) as f64 * 1e-9)?;
                prev = ev.time_ns;
                let e = ev.etype.index(k);
                let b = (st.spread.min(sbar) - 1) as usize * n + e;
                for src in 0..n {
                    sums[b][src] += spec.kernels.alphas[e][src]
                        .iter()
                        .zip(&st.z[src])
                        .map(|(a, z)| a * z)
                        .sum::<f64>();
                }
                cnt[b] += 1;
                st.apply_jump(spec.betas(), ev.etype, k)?;
            }
            Ok((sums, cnt))
        })
        .collect();
    let mut sums = vec![vec![0.0; n]; sbar as usize * n];
    let mut cnt = vec![0usize; sbar as usize * n];
    for r in per_day {
        let (s, c) = r?;
        for b in 0..s.len() {
            cnt[b] += c[b];
            for src in 0..n {
                sums[b][src] += s[b][src];
            }
        }
    }
    let mut rows = Vec::new();
    for s in 1..=sbar {
        for e in 0..n {
            let b = (s - 1) as usize * n + e;
            let values = if cnt[b] == 0 {
                vec![None; n]
            } else {
                let max = sums[b].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                sums[b]
                    .iter()
                    .map(|v| (max > 0.0).then(|| v / max))
                    .collect()
            };
            rows.push(InfluenceRow {
                spread: s,
                etype: EventType::from_index(e, k).size(),
                n_events: cnt[b],
                values,
            });
        }
    }
    Ok(rows)
}

pub fn influence_csv(rows: &[InfluenceRow], k: usize) -> String {
    let mut s = String::from("spread,type,n_events");
    for e in EventType::all(k) {
        s.push_str(&format!(",src{e}"));
    }
    s.push('\n');
    for r in rows {
        s.push_str(&format!("{},{},{}", r.spread, r.etype, r.n_events));
        for v in &r.values {
            match v {
                Some(x) => s.push_str(&format!(",{x:.9}")),
                None => s.push(','),
            }
        }
        s.push('\n');
    }
    s
}

/// `n` points log-spaced on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// `φ^{e,e'}(t)` sampled at each `t` in `times`.
pub fn kernel_curve(spec: &ModelSpec, target: EventType, source: EventType, times: &[f64]) -> Vec<(f64, f64)> {
    let (i, j) = (target.index(spec.k), source.index(spec.k));
    times.iter().map(|&t| (t, spec.kernels.kernel(i, j, t))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{JumpEvent, NANOS_PER_SEC};

    fn ev(t: f64, size: i32) -> JumpEvent {
        JumpEvent {
            time_ns: secs_to_nanos(t),
            etype: EventType::new(size, 2).unwrap(),
        }
    }

    fn path(s0: u32, h: f64, evs: &[(f64, i32)]) -> SpreadPath {
        SpreadPath::new(s0, secs_to_nanos(h), evs.iter().map(|(t, s)| ev(*t, *s)).collect()).unwrap()
    }

    #[test]
    fn calendar_hand_cases() {
        let d = Dataset::from_paths(vec![path(2, 10.0, &[])]);
        let h = calendar_distribution(&d, Averaging::Daily).unwrap();
        assert_eq!(h.support, vec![2]);
        assert_eq!(h.probs, vec![1.0]);

        let d = Dataset::from_paths(vec![path(1, 10.0, &[(4.0, 1)])]);
        let h = calendar_distribution(&d, Averaging::Daily).unwrap();
        assert!((h.get(1) - 0.4).abs() < 1e-12 && (h.get(2) - 0.6).abs() < 1e-12);

        // daily average differs from pooled time when horizons differ
        let d = Dataset::from_paths(vec![path(1, 10.0, &[]), path(2, 30.0, &[])]);
        let daily = calendar_distribution(&d, Averaging::Daily).unwrap();
        assert!((daily.get(1) - 0.5).abs() < 1e-12);
        let pooled = calendar_distribution(&d, Averaging::Pooled).unwrap();
        assert!((pooled.get(1) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn occupancy_sums_to_horizon() {
        let p = path(3, 7.5, &[(1.0, -1), (2.5, 2), (2.6, -1), (7.0, -2)]);
        let total: f64 = occupancy(&p).values().sum();
        assert!((total - 7.5).abs() < 1e-12);
    }

    #[test]
    fn event_distribution_counts() {
        // pre-spreads 1, 2, 2, 3
        let p = path(1, 10.0, &[(1.0, 1), (2.0, 1), (3.0, -1), (4.0, 1)]);
        let d = Dataset::from_paths(vec![p, path(2, 5.0, &[])]);
        let h = event_distribution(&d, Averaging::Daily).unwrap();
        assert_eq!(h.support, vec![1, 2, 3]);
        assert!((h.get(1) - 0.25).abs() < 1e-12);
        assert!((h.get(2) - 0.5).abs() < 1e-12);
        assert!((h.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn jumps_and_recommended_k() {
        let evs: Vec<(f64, i32)> = (0..100)
            .map(|i| (1.0 + i as f64, if i % 2 == 0 { 1 } else { -1 }))
            .chain([(200.0, 2), (201.0, -2)])
            .collect();
        let d = Dataset::from_paths(vec![path(3, 300.0, &evs)]);
        let h = jump_size_distribution(&d).unwrap();
        assert_eq!(h.support, vec![-2, -1, 1, 2]);
        assert_eq!(recommend_k(&h, 0.01), 2);
        assert_eq!(recommend_k(&h, 0.05), 1);
    }

    #[test]
    fn inter_event_hand_cases() {
        let p = path(3, 10.0, &[(1.0, 1), (3.0, -1), (4.0, 1)]);
        assert_eq!(inter_event_times(&p, None), vec![2.0, 1.0]);
        let p = path(1, 10.0, &[(1.0, 2), (3.0, -1)]);
        assert_eq!(inter_event_times(&p, Some((3, 2))), vec![2.0]);
        assert!(inter_event_times(&p, Some((7, 8))).is_empty());
    }

    #[test]
    fn qq_scaling() {
        let a: Vec<f64> = (0..50).map(|i| (i * 7 % 50) as f64).collect();
        let b: Vec<f64> = a.iter().map(|x| 2.0 * x).collect();
        for (x, y) in qq_points(&a, &a, 11).unwrap() {
            assert_eq!(x, y);
        }
        for (x, y) in qq_points(&a, &b, 11).unwrap() {
            assert!((y - 2.0 * x).abs() < 1e-12);
        }
        assert!(qq_points(&[], &a, 3).is_err());
    }

    #[test]
    fn acf_square_wave() {
        let evs: Vec<(f64, i32)> = (1..100).map(|i| (i as f64, if i % 2 == 1 { 1 } else { -1 })).collect();
        let d = Dataset::from_paths(vec![path(1, 100.0, &evs)]);
        let c = spread_autocorrelation(&d, &[0.0, 1.0, 2.0], None, 0.1).unwrap();
        assert!((c.values[0] - 1.0).abs() < 1e-12);
        assert!((c.values[1] + 1.0).abs() < 0.05, "{:?}", c.values);
        assert!((c.values[2] - 1.0).abs() < 0.05);
        assert!(spread_autocorrelation(&d, &[0.05], None, 0.1).is_err());
    }

    #[test]
    fn acf_constant_is_nan() {
        let d = Dataset::from_paths(vec![path(2, 10.0, &[])]);
        let c = spread_autocorrelation(&d, &[1.0], None, 0.1).unwrap();
        assert!(c.values[0].is_nan());
        assert!(c.diagnostic.is_some());
    }

    #[test]
    fn acv_constant_and_guard() {
        let d = Dataset::from_paths(vec![path(2, 10.0, &[])]);
        let c = acv(&d, 0.1, &[0.2, 0.5], AcvOptions::default()).unwrap();
        assert!(c.values.iter().all(|v| *v == 0.0));
        assert!(acv(&d, 0.1, &[0.1], AcvOptions::default()).is_err());
        assert!(acv(&d, 0.1, &[0.15], AcvOptions::default()).is_err());
        assert!(acv(&d, 0.1, &[0.1], AcvOptions { min_ratio: 0.5, slot_length: None }).is_err());
    }

    #[test]
    fn acv_sparse_matches_dense() {
        let evs: Vec<(f64, i32)> = (1..400)
            .map(|i| (i as f64 * 0.237 + 0.01 * ((i * 13) % 7) as f64, if (i * 31) % 5 < 2 { 1 } else { -1 }))
            .collect();
        let p = path(500, 100.0, &evs);
        let delta = 0.5;
        let taus = [1.0, 1.5, 4.0];
        let c = acv(&Dataset::from_paths(vec![p.clone()]), delta, &taus, AcvOptions::default()).unwrap();
        let m = (100.0 / delta) as usize;
        let d: Vec<f64> = (0..m)
            .map(|j| {
                p.spread_at((j as i64 + 1) * NANOS_PER_SEC / 2) as f64 - p.spread_at(j as i64 * NANOS_PER_SEC / 2) as f64
            })
            .collect();
        let dbar = d.iter().sum::<f64>() / m as f64;
        for (i, tau) in taus.iter().enumerate() {
            let h = (tau / delta) as usize;
            let cov = (0..m - h).map(|j| (d[j] - dbar) * (d[j + h] - dbar)).sum::<f64>() / (m - h) as f64;
            assert!((c.values[i] - cov / (delta * delta)).abs() < 1e-12, "{} vs {}", c.values[i], cov);
        }
    }

    #[test]
    fn influence_single_source() {
        let mut spec = crate::catalog::demo();
        for t in 0..2 {
            spec.kernels.alphas[t][0][0] = 0.0;
            spec.kernels.alphas[t][1][0] = 0.4;
        }
        let p = crate::simulate::simulate(&spec, 500.0, 2, 3).unwrap();
        let rows = kernel_influence(&spec, &Dataset::from_paths(vec![p])).unwrap();
        let mut non_empty = 0;
        for r in &rows {
            if r.n_events > 0 {
                if let Some(v) = r.values[1] {
                    assert_eq!(v, 1.0);
                    assert_eq!(r.values[0], Some(0.0));
                    non_empty += 1;
                }
            }
        }
        assert!(non_empty > 0);
    }

    #[test]
    fn kernel_curve_values() {
        let spec = crate::catalog::recovery();
        let plus = EventType::new(1, 1).unwrap();
        let c = kernel_curve(&spec, plus, plus, &[0.0]);
        // weights are coefficient / β, so φ(0) is the coefficient sum
        assert!((c[0].1 - 6.0).abs() < 1e-12);
        let single = crate::catalog::demo();
        let mut single = single.clone();
        single.kernels.alphas[0][0][0] = 1.0;
        assert!((kernel_curve(&single, plus, plus, &[0.0])[0].1 - 1.0).abs() < 1e-15);
        let g = log_grid(1e-4, 10.0, 61);
        assert!((g[0] - 1e-4).abs() < 1e-18 && (g[60] - 10.0).abs() < 1e-12);
    }
}
