//! Exact path simulation by Ogata thinning.
//!
//! Between events the state functions are frozen and every accumulator
//! decays, so the total intensity at the current time bounds the intensity
//! until the next accepted event. The bound is refreshed after every
//! candidate, accepted or not.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    EventType, ExcitationState, JumpEvent, KernelParams, ModelSpec, SpreadPath, StateFunctions,
};

/// Default cap on thinning candidates per simulation call.
pub const DEFAULT_MAX_CANDIDATES: u64 = 100_000_000;

/// Counter-based generator for path `stream` of a run seeded with `seed`.
///
/// ChaCha8 with the 64-bit stream id set to the path index: streams never
/// overlap, so batches are reproducible regardless of thread scheduling.
pub fn path_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    pub max_candidates: u64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            max_candidates: DEFAULT_MAX_CANDIDATES,
        }
    }
}

/// Time-varying baseline `μ̃^e(t) = μ^e + Σ_{e',l} α[e][e'][l] b[e'][l] e^{-β_l t}`.
///
/// `b` has the layout of [`ExcitationState::z`] but never receives new jumps.
/// It is how past events outside the simulated window keep exciting it.
#[derive(Debug, Clone, PartialEq)]
pub struct Baseline {
    pub mus: Vec<f64>,
    pub excitation: Vec<Vec<f64>>,
}

impl Baseline {
    pub fn constant(mus: Vec<f64>, spec: &ModelSpec) -> Self {
        Baseline {
            mus,
            excitation: vec![vec![0.0; spec.n_decays()]; spec.n_types()],
        }
    }

    /// Baseline at `t0_ns` seeded by past `events` (absolute times `≤ t0_ns`).
    pub fn from_events(spec: &ModelSpec, events: &[JumpEvent], t0_ns: i64) -> Result<Self> {
        let mut b = Self::constant(spec.mus.clone(), spec);
        for ev in events {
            if ev.time_ns > t0_ns {
                return Err(Error::Argument("baseline event after the conditioning time".into()));
            }
            let idx = ev.etype.index(spec.k);
            let age = crate::model::nanos_to_secs(t0_ns - ev.time_ns);
            for (l, beta) in spec.betas().iter().enumerate() {
                b.excitation[idx][l] += beta * (-beta * age).exp();
            }
        }
        Ok(b)
    }

    /// `μ̃^e` at `dt` seconds after the baseline's origin.
    pub fn value(&self, spec: &ModelSpec, target: usize, dt: f64) -> f64 {
        let mut acc = self.mus[target];
        for (src, row) in self.excitation.iter().enumerate() {
            for (l, b) in row.iter().enumerate() {
                let beta = spec.kernels.betas[l];
                acc += spec.kernels.alphas[target][src][l] * b * (-beta * dt).exp();
            }
        }
        acc
    }

    fn validate(&self, spec: &ModelSpec) -> Result<()> {
        if self.mus.len() != spec.n_types()
            || self.excitation.len() != spec.n_types()
            || self.excitation.iter().any(|r| r.len() != spec.n_decays())
        {
            return Err(Error::Argument("baseline shape does not match spec".into()));
        }
        if self.mus.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::Argument("baseline levels must be finite and ≥ 0".into()));
        }
        if self.excitation.iter().flatten().any(|b| !b.is_finite() || *b < 0.0) {
            return Err(Error::Argument("baseline excitation must be finite and ≥ 0".into()));
        }
        let has_excitation = self.excitation.iter().flatten().any(|b| *b > 0.0);
        let has_negative_alpha = spec.kernels.alphas.iter().flatten().flatten().any(|a| *a < 0.0);
        if has_excitation && has_negative_alpha {
            return Err(Error::Argument(
                "an excited baseline with negative kernel weights is not non-increasing".into(),
            ));
        }
        Ok(())
    }
}

/// Simulates a path on `[0, horizon]` from a cold start at spread `s0`.
pub fn simulate(spec: &ModelSpec, horizon: f64, s0: u32, seed: u64) -> Result<SpreadPath> {
    let state = ExcitationState::cold(spec, s0);
    let mut rng = path_rng(seed, 0);
    simulate_with_rng(spec, &state, None, horizon, &mut rng, SimOptions::default())
}

/// Conditional simulation from a warm state with an optional decaying baseline.
pub fn simulate_from_state(
    spec: &ModelSpec,
    state: &ExcitationState,
    baseline: Option<&Baseline>,
    horizon: f64,
    seed: u64,
) -> Result<SpreadPath> {
    let mut rng = path_rng(seed, 0);
    simulate_with_rng(spec, state, baseline, horizon, &mut rng, SimOptions::default())
}

/// Core thinning loop. Event times in the returned path are relative to the
/// start state.
pub fn simulate_with_rng<R: Rng + ?Sized>(
    spec: &ModelSpec,
    start: &ExcitationState,
    baseline: Option<&Baseline>,
    horizon: f64,
    rng: &mut R,
    opts: SimOptions,
) -> Result<SpreadPath> {
    spec.validate()?;
    if start.spread < 1 {
        return Err(Error::Argument("initial spread must be ≥ 1".into()));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::Argument(format!("horizon must be positive, got {horizon}")));
    }
    if start.z.len() != spec.n_types()
        || start.z.iter().any(|r| r.len() != spec.n_decays())
        || start.z.iter().flatten().any(|z| !(*z >= 0.0))
    {
        return Err(Error::Argument("start state does not match spec or is negative".into()));
    }
    if let Some(b) = baseline {
        b.validate(spec)?;
    }

    let k = spec.k;
    let n = spec.n_types();
    let nl = spec.n_decays();
    let betas = spec.betas();
    let alphas = &spec.kernels.alphas;
    let horizon_ns = crate::model::secs_to_nanos(horizon);

    // Decayed baseline excitation travels alongside the endogenous state.
    let mut z = start.z.clone();
    let mut zb = baseline.map(|b| b.excitation.clone());
    let mus: &[f64] = baseline.map_or(&spec.mus, |b| &b.mus);
    let mut spread = start.spread;
    let mut t = 0.0f64;
    let mut candidates: u64 = 0;
    let mut events = Vec::new();
    let mut last_ns = -1i64;
    let mut lam = vec![0.0f64; n];

    // Fills `lam` with per-type intensities; returns (total, dominating bound).
    let eval = |lam: &mut [f64], z: &[Vec<f64>], zb: Option<&Vec<Vec<f64>>>, spread: u32| {
        let mut total = 0.0;
        let mut bound = 0.0;
        for e in 0..n {
            let f = spec.statefns.value(e, spread);
            if f == 0.0 {
                lam[e] = 0.0;
                continue;
            }
            let mut br = mus[e];
            let mut br_pos = mus[e];
            for src in 0..n {
                let arow = &alphas[e][src];
                for l in 0..nl {
                    let mut zz = z[src][l];
                    if let Some(zb) = zb {
                        zz += zb[src][l];
                    }
                    let c = arow[l] * zz;
                    br += c;
                    if c > 0.0 {
                        br_pos += c;
                    }
                }
            }
            lam[e] = f * br.max(0.0);
            total += lam[e];
            bound += f * br_pos;
        }
        (total, bound)
    };

    let decay = |z: &mut Vec<Vec<f64>>, dt: f64| {
        for l in 0..nl {
            let d = (-betas[l] * dt).exp();
            for row in z.iter_mut() {
                row[l] *= d;
            }
        }
    };

    loop {
        let (_, bound) = eval(&mut lam, &z, zb.as_ref(), spread);
        if !(bound > 0.0) {
            break;
        }
        candidates += 1;
        if candidates > opts.max_candidates {
            return Err(Error::Explosive {
                cap: opts.max_candidates,
                time: t,
            });
        }
        let u: f64 = rng.random();
        let w = -(1.0 - u).ln() / bound;
        t += w;
        if t > horizon {
            break;
        }
        decay(&mut z, w);
        if let Some(zb) = zb.as_mut() {
            decay(zb, w);
        }
        let (total, _) = eval(&mut lam, &z, zb.as_ref(), spread);
        let v: f64 = rng.random::<f64>() * bound;
        if v >= total {
            continue;
        }
        let mut acc = 0.0;
        let mut chosen = n - 1;
        for (e, l) in lam.iter().enumerate() {
            acc += l;
            if v < acc {
                chosen = e;
                break;
            }
        }
        // guard against rounding landing on a zero-intensity tail entry
        while lam[chosen] == 0.0 && chosen > 0 {
            chosen -= 1;
        }
        let etype = EventType::from_index(chosen, k);
        let next = spread as i64 + etype.size() as i64;
        if next < 1 {
            return Err(Error::Invariant(format!(
                "selected {etype} at spread {spread}; f must vanish there"
            )));
        }
        spread = next as u32;
        for l in 0..nl {
            z[chosen][l] += betas[l];
        }
        let mut t_ns = crate::model::secs_to_nanos(t).min(horizon_ns);
        if t_ns <= last_ns {
            t_ns = last_ns + 1;
        }
        if t_ns > horizon_ns {
            break;
        }
        last_ns = t_ns;
        events.push(JumpEvent { time_ns: t_ns, etype });
    }

    SpreadPath::new(start.spread, horizon_ns, events)
}

/// Named reduced models expressible as special configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PresetName {
    /// Full 2×2 exponential kernel, downward jumps blocked at spread 1.
    Zheng,
    /// Self-exciting upward jumps only, constant downward rate above spread 1.
    Fosset,
}

impl std::str::FromStr for PresetName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zheng" => Ok(PresetName::Zheng),
            "fosset" => Ok(PresetName::Fosset),
            other => Err(Error::Config(format!("unknown preset '{other}'"))),
        }
    }
}

/// Scalars for [`preset`]. Zheng needs all four `alpha_*`; Fosset needs `alpha`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PresetParams {
    pub mu_plus: Option<f64>,
    pub mu_minus: Option<f64>,
    pub beta: Option<f64>,
    pub alpha: Option<f64>,
    pub alpha_pp: Option<f64>,
    pub alpha_pm: Option<f64>,
    pub alpha_mp: Option<f64>,
    pub alpha_mm: Option<f64>,
}

fn required(v: Option<f64>, name: &str) -> Result<f64> {
    v.ok_or_else(|| Error::Config(format!("preset parameter '{name}' is missing")))
}

/// Builds a K = 1, L = 1 spec with `f^+ ≡ 1` and `f^- = 1_{s ≥ 2}`.
pub fn preset(name: PresetName, p: &PresetParams) -> Result<ModelSpec> {
    let mu_plus = required(p.mu_plus, "mu_plus")?;
    let mu_minus = required(p.mu_minus, "mu_minus")?;
    let beta = required(p.beta, "beta")?;
    let alphas = match name {
        PresetName::Zheng => [
            [required(p.alpha_pp, "alpha_pp")?, required(p.alpha_pm, "alpha_pm")?],
            [required(p.alpha_mp, "alpha_mp")?, required(p.alpha_mm, "alpha_mm")?],
        ],
        PresetName::Fosset => [[required(p.alpha, "alpha")?, 0.0], [0.0, 0.0]],
    };
    ModelSpec::new(
        1,
        vec![mu_plus, mu_minus],
        KernelParams {
            betas: vec![beta],
            alphas: alphas
                .iter()
                .map(|row| row.iter().map(|a| vec![*a]).collect())
                .collect(),
        },
        StateFunctions {
            sbar: 2,
            values: vec![vec![1.0, 1.0], vec![0.0, 1.0]],
        },
        false,
    )
}

/// Critical self-excitation `1 - μ^+/μ^-` separating the stationary regime of
/// the Fosset configuration from linear spread growth.
pub fn fosset_critical_alpha(mu_plus: f64, mu_minus: f64) -> f64 {
    1.0 - mu_plus / mu_minus
}
