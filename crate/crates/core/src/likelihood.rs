//! Exact log-likelihood, its gradient, and compensators.
//!
//! ```text
//! 𝕃 = Σ_days Σ_e [ Σ_{k: e_k = e} ( log(μ^e + Σ α z(t_k-)) + log f^e(S_{t_k-}) )
//!                  − ∫_0^T f^e(S_t) (μ^e + Σ α z(t)) dt ]
//! ```
//!
//! On an inter-event interval of length `Δ` the spread is constant and
//! `∫ z dt = z(start) (1 - e^{-βΔ}) / β`. Summing these integrals per spread
//! bucket (spreads ≥ `sbar` share one bucket) gives statistics that depend on
//! the data and the decay grid only. Every evaluation for a fixed grid is
//! then linear in the number of events.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{nanos_to_secs, EventType, ModelSpec, SpreadPath};

/// One trading day, an independent realization.
#[derive(Debug, Clone, PartialEq)]
pub struct Day {
    pub id: u64,
    pub path: SpreadPath,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub asset: String,
    /// Intraday slot `(start, end)` in seconds from the day origin, when clipped.
    pub slot: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub days: Vec<Day>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn from_paths(paths: Vec<SpreadPath>) -> Self {
        Dataset {
            days: paths
                .into_iter()
                .enumerate()
                .map(|(i, path)| Day { id: i as u64, path })
                .collect(),
            meta: DatasetMeta::default(),
        }
    }

    pub fn n_events(&self) -> usize {
        self.days.iter().map(|d| d.path.len()).sum()
    }

    pub fn total_time(&self) -> f64 {
        self.days.iter().map(|d| d.path.horizon()).sum()
    }

    pub fn max_jump(&self) -> usize {
        self.days.iter().map(|d| d.path.max_jump()).max().unwrap_or(0)
    }

    /// Drops days with fewer than `min_events` events; returns how many were dropped.
    pub fn retain_min_events(&mut self, min_events: usize) -> usize {
        let before = self.days.len();
        self.days.retain(|d| d.path.len() >= min_events);
        before - self.days.len()
    }
}

/// Grid-dependent sufficient statistics of one path.
#[derive(Debug, Clone)]
pub(crate) struct PathStats {
    n_types: usize,
    n_decays: usize,
    sbar: usize,
    /// Per event: target type index.
    ev_type: Vec<u16>,
    /// Per event: pre-event spread bucket (0-based, capped at `sbar - 1`).
    ev_bucket: Vec<u16>,
    /// Per event: `z(t_k-)`, flattened `[source * L + l]`.
    ev_z: Vec<f64>,
    /// `[type * sbar + bucket]` event counts.
    counts: Vec<f64>,
    /// Time spent in each bucket.
    occupancy: Vec<f64>,
    /// `[bucket * (n_types * L) + source * L + l]` integrated excitation.
    zint: Vec<f64>,
}

impl PathStats {
    pub(crate) fn new(path: &SpreadPath, k: usize, betas: &[f64], sbar: u32) -> Result<Self> {
        if path.max_jump() > k {
            return Err(Error::Argument(format!(
                "path contains a jump of size {} but K = {k}",
                path.max_jump()
            )));
        }
        let n_types = 2 * k;
        let nl = betas.len();
        let sbar = sbar as usize;
        let width = n_types * nl;
        let mut st = PathStats {
            n_types,
            n_decays: nl,
            sbar,
            ev_type: Vec::with_capacity(path.len()),
            ev_bucket: Vec::with_capacity(path.len()),
            ev_z: Vec::with_capacity(path.len() * width),
            counts: vec![0.0; n_types * sbar],
            occupancy: vec![0.0; sbar],
            zint: vec![0.0; sbar * width],
        };
        let mut z = vec![0.0; width];
        let mut spread = path.s0() as i64;
        let mut last_ns = 0i64;
        let bucket_of = |s: i64| (s.max(1) as usize).min(sbar) - 1;

        let integrate = |z: &mut [f64], spread: i64, dt: f64, st: &mut PathStats| {
            let b = bucket_of(spread);
            st.occupancy[b] += dt;
            let zi = &mut st.zint[b * width..(b + 1) * width];
            for l in 0..nl {
                let beta = betas[l];
                let decay = (-beta * dt).exp();
                // (1 - e^{-βΔ}) / β, accurate for small βΔ
                let w = -(-beta * dt).exp_m1() / beta;
                for src in 0..n_types {
                    let j = src * nl + l;
                    zi[j] += z[j] * w;
                    z[j] *= decay;
                }
            }
        };

        for ev in path.events() {
            let dt = nanos_to_secs(ev.time_ns - last_ns);
            integrate(&mut z, spread, dt, &mut st);
            let e = ev.etype.index(k);
            let b = bucket_of(spread);
            st.ev_type.push(e as u16);
            st.ev_bucket.push(b as u16);
            st.ev_z.extend_from_slice(&z);
            st.counts[e * sbar + b] += 1.0;
            for l in 0..nl {
                z[e * nl + l] += betas[l];
            }
            spread += ev.etype.size() as i64;
            last_ns = ev.time_ns;
        }
        let dt = nanos_to_secs(path.horizon_ns() - last_ns);
        integrate(&mut z, spread, dt, &mut st);
        Ok(st)
    }

    fn n_events(&self) -> usize {
        self.ev_type.len()
    }

    /// Log-likelihood contribution; fills `grad` (spec-shaped) when given.
    pub(crate) fn eval(&self, spec: &ModelSpec, mut grad: Option<&mut Gradient>) -> Evaluation {
        let n = self.n_types;
        let nl = self.n_decays;
        let sbar = self.sbar;
        let width = n * nl;
        let f = &spec.statefns.values;
        let alphas = &spec.kernels.alphas;
        let mut out = Evaluation::default();

        // flattened α rows for the hot loop
        let arows: Vec<Vec<f64>> = (0..n)
            .map(|e| alphas[e].iter().flat_map(|c| c.iter().copied()).collect())
            .collect();

        // event terms
        let mut log_sum = 0.0;
        for k in 0..self.n_events() {
            let e = self.ev_type[k] as usize;
            let b = self.ev_bucket[k] as usize;
            let z = &self.ev_z[k * width..(k + 1) * width];
            let fv = f[e][b];
            if fv <= 0.0 {
                out.impossible_events += 1;
                continue;
            }
            let mut br = spec.mus[e];
            for (a, zz) in arows[e].iter().zip(z) {
                br += a * zz;
            }
            if br <= 0.0 {
                if spec.signed_alpha {
                    out.clamped_events += 1;
                    br = CLAMP_FLOOR;
                } else {
                    out.impossible_events += 1;
                    continue;
                }
            } else if let Some(g) = grad.as_deref_mut() {
                let inv = 1.0 / br;
                g.mu[e] += inv;
                for src in 0..n {
                    for l in 0..nl {
                        g.alpha[e][src][l] += z[src * nl + l] * inv;
                    }
                }
            }
            log_sum += br.ln();
        }
        // log f terms
        for e in 0..n {
            for b in 0..sbar {
                let c = self.counts[e * sbar + b];
                if c > 0.0 && f[e][b] > 0.0 {
                    log_sum += c * f[e][b].ln();
                    if let Some(g) = grad.as_deref_mut() {
                        g.f[e][b] += c / f[e][b];
                    }
                }
            }
        }
        // compensator
        let mut comp = 0.0;
        for e in 0..n {
            for b in 0..sbar {
                let occ = self.occupancy[b];
                if occ == 0.0 {
                    continue;
                }
                let zi = &self.zint[b * width..(b + 1) * width];
                let mut inner = spec.mus[e] * occ;
                for (a, zz) in arows[e].iter().zip(zi) {
                    inner += a * zz;
                }
                comp += f[e][b] * inner;
                if let Some(g) = grad.as_deref_mut() {
                    let fv = f[e][b];
                    g.mu[e] -= fv * occ;
                    for src in 0..n {
                        for l in 0..nl {
                            g.alpha[e][src][l] -= fv * zi[src * nl + l];
                        }
                    }
                    g.f[e][b] -= inner;
                }
            }
        }
        out.compensator = comp;
        out.value = if out.impossible_events > 0 {
            f64::NEG_INFINITY
        } else {
            log_sum - comp
        };
        out
    }
}

/// Floor applied to non-positive brackets in signed-weight mode.
pub const CLAMP_FLOOR: f64 = 1e-300;

/// Result of a likelihood evaluation with diagnostics.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub value: f64,
    /// `Σ_e Λ^e(T)` summed over days.
    pub compensator: f64,
    /// Events whose intensity is zero under the spec (makes `value = -∞`).
    pub impossible_events: usize,
    /// Events whose bracket was clamped (signed-weight mode only).
    pub clamped_events: usize,
}

impl Evaluation {
    fn merge(mut self, o: &Evaluation) -> Self {
        self.value += o.value;
        self.compensator += o.compensator;
        self.impossible_events += o.impossible_events;
        self.clamped_events += o.clamped_events;
        self
    }
}

/// Partial derivatives shaped like the spec's parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gradient {
    pub mu: Vec<f64>,
    pub alpha: Vec<Vec<Vec<f64>>>,
    /// `f[e][s - 1]`; entries that are structural zeros or normalization
    /// anchors are reported but are not free parameters.
    pub f: Vec<Vec<f64>>,
}

impl Gradient {
    pub fn zeros(spec: &ModelSpec) -> Self {
        let n = spec.n_types();
        Gradient {
            mu: vec![0.0; n],
            alpha: vec![vec![vec![0.0; spec.n_decays()]; n]; n],
            f: vec![vec![0.0; spec.statefns.sbar as usize]; n],
        }
    }

    fn add(&mut self, o: &Gradient) {
        for (a, b) in self.mu.iter_mut().zip(&o.mu) {
            *a += b;
        }
        for (ra, rb) in self.alpha.iter_mut().zip(&o.alpha) {
            for (ca, cb) in ra.iter_mut().zip(rb) {
                for (a, b) in ca.iter_mut().zip(cb) {
                    *a += b;
                }
            }
        }
        for (ra, rb) in self.f.iter_mut().zip(&o.f) {
            for (a, b) in ra.iter_mut().zip(rb) {
                *a += b;
            }
        }
    }
}

/// Sufficient statistics of a whole dataset for a fixed `(K, β grid, sbar)`.
#[derive(Debug, Clone)]
pub struct DatasetStats {
    days: Vec<PathStats>,
    k: usize,
    betas: Vec<f64>,
    sbar: u32,
}

impl DatasetStats {
    pub fn new(data: &Dataset, k: usize, betas: &[f64], sbar: u32) -> Result<Self> {
        let days = data
            .days
            .par_iter()
            .map(|d| PathStats::new(&d.path, k, betas, sbar))
            .collect::<Result<Vec<_>>>()?;
        Ok(DatasetStats {
            days,
            k,
            betas: betas.to_vec(),
            sbar,
        })
    }

    pub fn for_spec(data: &Dataset, spec: &ModelSpec) -> Result<Self> {
        Self::new(data, spec.k, spec.betas(), spec.statefns.sbar)
    }

    fn check(&self, spec: &ModelSpec) -> Result<()> {
        if spec.k != self.k || spec.betas() != self.betas.as_slice() || spec.statefns.sbar != self.sbar {
            return Err(Error::Argument(
                "spec dimensions differ from the precomputed statistics".into(),
            ));
        }
        Ok(())
    }

    pub fn n_events(&self) -> usize {
        self.days.iter().map(|d| d.n_events()).sum()
    }

    /// Event counts `[type][bucket]` summed over days.
    pub fn counts(&self) -> Vec<Vec<f64>> {
        let n = 2 * self.k;
        let sbar = self.sbar as usize;
        let mut out = vec![vec![0.0; sbar]; n];
        for d in &self.days {
            for e in 0..n {
                for b in 0..sbar {
                    out[e][b] += d.counts[e * sbar + b];
                }
            }
        }
        out
    }

    /// Time spent per spread bucket, summed over days.
    pub fn occupancy(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.sbar as usize];
        for d in &self.days {
            for (o, v) in out.iter_mut().zip(&d.occupancy) {
                *o += v;
            }
        }
        out
    }

    /// Per-day evaluations run in parallel and are reduced in day order.
    pub fn evaluate(&self, spec: &ModelSpec) -> Result<Evaluation> {
        self.check(spec)?;
        let parts: Vec<Evaluation> = self.days.par_iter().map(|d| d.eval(spec, None)).collect();
        Ok(parts.iter().fold(Evaluation::default(), |acc, p| acc.merge(p)))
    }

    pub fn evaluate_with_gradient(&self, spec: &ModelSpec) -> Result<(Evaluation, Gradient)> {
        self.check(spec)?;
        let parts: Vec<(Evaluation, Gradient)> = self
            .days
            .par_iter()
            .map(|d| {
                let mut g = Gradient::zeros(spec);
                let ev = d.eval(spec, Some(&mut g));
                (ev, g)
            })
            .collect();
        let mut grad = Gradient::zeros(spec);
        let mut eval = Evaluation::default();
        for (e, g) in &parts {
            eval = eval.merge(e);
            grad.add(g);
        }
        Ok((eval, grad))
    }
}

/// Log-likelihood of `data` under `spec`. Returns `-∞` (with a warning) when
/// an observed event has zero intensity.
pub fn log_likelihood(spec: &ModelSpec, data: &Dataset) -> Result<f64> {
    let ev = evaluate(spec, data)?;
    if ev.impossible_events > 0 {
        log::warn!(
            "{} event(s) occur where the spec gives zero intensity; log-likelihood is -inf",
            ev.impossible_events
        );
    }
    Ok(ev.value)
}

/// Log-likelihood with diagnostics.
pub fn evaluate(spec: &ModelSpec, data: &Dataset) -> Result<Evaluation> {
    spec.validate()?;
    DatasetStats::for_spec(data, spec)?.evaluate(spec)
}

/// Analytic gradient of [`log_likelihood`] with respect to every `μ`, `α` and `f` entry.
pub fn gradient(spec: &ModelSpec, data: &Dataset) -> Result<Gradient> {
    spec.validate()?;
    Ok(DatasetStats::for_spec(data, spec)?.evaluate_with_gradient(spec)?.1)
}

/// Per-type compensators `Λ^e` of one path.
#[derive(Debug, Clone, PartialEq)]
pub struct Compensator {
    /// `at_events[e][i]` is `Λ^e(t_i)` at the `i`-th event of the path (any type).
    pub at_events: Vec<Vec<f64>>,
    /// `Λ^e(T)`.
    pub at_horizon: Vec<f64>,
    etypes: Vec<usize>,
}

impl Compensator {
    /// Time-rescaled inter-arrival increments of type `e` events
    /// (`Λ^e(t^e_1)`, `Λ^e(t^e_2) - Λ^e(t^e_1)`, …); i.i.d. Exp(1) under the model.
    pub fn residuals(&self, etype_idx: usize) -> Vec<f64> {
        let mut prev = 0.0;
        let mut out = Vec::new();
        for (i, &e) in self.etypes.iter().enumerate() {
            if e == etype_idx {
                let v = self.at_events[etype_idx][i];
                out.push(v - prev);
                prev = v;
            }
        }
        out
    }

    pub fn total(&self) -> f64 {
        self.at_horizon.iter().sum()
    }
}

/// `Λ^e(t) = ∫_0^t λ^e(u) du`, evaluated at every event time and at the horizon.
pub fn compensator(spec: &ModelSpec, path: &SpreadPath) -> Result<Compensator> {
    spec.validate()?;
    let k = spec.k;
    if path.max_jump() > k {
        return Err(Error::Argument("path jump exceeds K".into()));
    }
    let n = spec.n_types();
    let nl = spec.n_decays();
    let betas = spec.betas();
    let mut z = vec![vec![0.0; nl]; n];
    let mut lam = vec![0.0; n];
    let mut at_events = vec![Vec::with_capacity(path.len()); n];
    let mut etypes = Vec::with_capacity(path.len());
    let mut spread = path.s0();
    let mut last_ns = 0i64;

    let step = |z: &mut Vec<Vec<f64>>, spread: u32, dt: f64, lam: &mut Vec<f64>| {
        let w: Vec<f64> = betas.iter().map(|b| -(-b * dt).exp_m1() / b).collect();
        for e in 0..n {
            let fv = spec.statefns.value(e, spread);
            if fv == 0.0 {
                continue;
            }
            let mut inner = spec.mus[e] * dt;
            for src in 0..n {
                for l in 0..nl {
                    inner += spec.kernels.alphas[e][src][l] * z[src][l] * w[l];
                }
            }
            lam[e] += fv * inner;
        }
        for l in 0..nl {
            let d = (-betas[l] * dt).exp();
            for row in z.iter_mut() {
                row[l] *= d;
            }
        }
    };

    for ev in path.events() {
        step(&mut z, spread, nanos_to_secs(ev.time_ns - last_ns), &mut lam);
        for e in 0..n {
            at_events[e].push(lam[e]);
        }
        let idx = ev.etype.index(k);
        etypes.push(idx);
        for l in 0..nl {
            z[idx][l] += betas[l];
        }
        spread = (spread as i64 + ev.etype.size() as i64) as u32;
        last_ns = ev.time_ns;
    }
    step(&mut z, spread, nanos_to_secs(path.horizon_ns() - last_ns), &mut lam);
    Ok(Compensator {
        at_events,
        at_horizon: lam,
        etypes,
    })
}

/// Number of free parameters for `(K, L, sbar)`: baselines, kernel weights,
/// and every state-function entry that is neither a structural zero nor the
/// normalization anchor.
pub fn free_parameter_count(k: usize, l: usize, sbar: u32) -> usize {
    let n = 2 * k;
    let f_free: usize = EventType::all(k)
        .map(|e| {
            (1..=sbar)
                .filter(|&s| {
                    !crate::model::StateFunctions::is_structural_zero(e, s)
                        && s != crate::model::StateFunctions::first_free_spread(e)
                })
                .count()
        })
        .sum();
    n + n * n * l + f_free
}
