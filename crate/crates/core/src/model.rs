//! Model types and exact intensity evaluation.
//!
//! The intensity of a jump of signed size `e` is
//!
//! ```text
//! λ^e(t) = f^e(S_{t-}) · ( μ^e + Σ_{e'} Σ_l α[e][e'][l] · z[e'][l](t) )
//! z[e'][l](t) = β_l · Σ_{t_i < t, e_i = e'} exp(-β_l (t - t_i))
//! ```
//!
//! Because every kernel shares the same decay grid `β_1 < … < β_L`, the
//! excitation table `z` is indexed by source type only and is common to all
//! target types. Between events it decays exactly; at an event of type `e'`
//! every `z[e'][l]` jumps by `β_l`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NANOS_PER_SEC: i64 = 1_000_000_000;

/// Converts seconds to integer nanoseconds (round to nearest).
pub fn secs_to_nanos(secs: f64) -> i64 {
    (secs * NANOS_PER_SEC as f64).round() as i64
}

pub fn nanos_to_secs(nanos: i64) -> f64 {
    nanos as f64 * 1e-9
}

/// A signed spread jump size in ticks, `±1..=±K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EventType(i32);

impl EventType {
    pub fn new(size: i32, k: usize) -> Result<Self> {
        if size == 0 || size.unsigned_abs() as usize > k {
            return Err(Error::Argument(format!(
                "jump size {size} outside ±1..=±{k}"
            )));
        }
        Ok(EventType(size))
    }

    pub const fn size(self) -> i32 {
        self.0
    }

    /// Dense index in `0..2K`: `+1..+K` first, then `-1..-K`.
    pub fn index(self, k: usize) -> usize {
        if self.0 > 0 {
            self.0 as usize - 1
        } else {
            k + (-self.0) as usize - 1
        }
    }

    pub fn from_index(idx: usize, k: usize) -> Self {
        debug_assert!(idx < 2 * k);
        if idx < k {
            EventType(idx as i32 + 1)
        } else {
            EventType(-((idx - k) as i32 + 1))
        }
    }

    /// All `2K` types in index order.
    pub fn all(k: usize) -> impl Iterator<Item = EventType> {
        (0..2 * k).map(move |i| EventType::from_index(i, k))
    }
}

impl std::fmt::Display for EventType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:+}", self.0)
    }
}

/// One spread change.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JumpEvent {
    pub time_ns: i64,
    pub etype: EventType,
}

impl JumpEvent {
    pub fn time(&self) -> f64 {
        nanos_to_secs(self.time_ns)
    }
}

/// A single realization: initial spread plus strictly time-ordered jumps.
#[derive(Debug, Clone, PartialEq)]
pub struct SpreadPath {
    s0: u32,
    horizon_ns: i64,
    events: Vec<JumpEvent>,
}

impl SpreadPath {
    /// Validates ordering, horizon bounds and the spread ≥ 1 invariant.
    pub fn new(s0: u32, horizon_ns: i64, events: Vec<JumpEvent>) -> Result<Self> {
        if s0 < 1 {
            return Err(Error::Invariant("initial spread must be ≥ 1".into()));
        }
        if horizon_ns < 0 {
            return Err(Error::Argument("negative horizon".into()));
        }
        let mut spread = s0 as i64;
        let mut prev: Option<i64> = None;
        for (i, ev) in events.iter().enumerate() {
            if ev.time_ns < 0 || ev.time_ns > horizon_ns {
                return Err(Error::Invariant(format!(
                    "event {i} at {} s outside [0, {}] s",
                    ev.time(),
                    nanos_to_secs(horizon_ns)
                )));
            }
            if let Some(p) = prev {
                if ev.time_ns <= p {
                    return Err(Error::Invariant(format!(
                        "event {i} at {} s is not strictly after its predecessor",
                        ev.time()
                    )));
                }
            }
            prev = Some(ev.time_ns);
            spread += ev.etype.size() as i64;
            if spread < 1 {
                return Err(Error::Invariant(format!(
                    "event {i} at {} s drives the spread to {spread}",
                    ev.time()
                )));
            }
        }
        Ok(SpreadPath {
            s0,
            horizon_ns,
            events,
        })
    }

    pub fn empty(s0: u32, horizon_ns: i64) -> Result<Self> {
        Self::new(s0, horizon_ns, Vec::new())
    }

    pub fn s0(&self) -> u32 {
        self.s0
    }

    pub fn horizon_ns(&self) -> i64 {
        self.horizon_ns
    }

    pub fn horizon(&self) -> f64 {
        nanos_to_secs(self.horizon_ns)
    }

    pub fn events(&self) -> &[JumpEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Largest absolute jump size in the path (0 when empty).
    pub fn max_jump(&self) -> usize {
        self.events
            .iter()
            .map(|e| e.etype.size().unsigned_abs() as usize)
            .max()
            .unwrap_or(0)
    }

    /// Spread just before each event (`S_{t_k-}`).
    pub fn pre_spreads(&self) -> Vec<u32> {
        let mut s = self.s0 as i64;
        self.events
            .iter()
            .map(|e| {
                let pre = s as u32;
                s += e.etype.size() as i64;
                pre
            })
            .collect()
    }

    /// Spread just after each event (`S_{t_k+}`).
    pub fn post_spreads(&self) -> Vec<u32> {
        let mut s = self.s0 as i64;
        self.events
            .iter()
            .map(|e| {
                s += e.etype.size() as i64;
                s as u32
            })
            .collect()
    }

    pub fn final_spread(&self) -> u32 {
        (self.s0 as i64 + self.events.iter().map(|e| e.etype.size() as i64).sum::<i64>()) as u32
    }

    /// Right-continuous spread value at `t_ns`.
    pub fn spread_at(&self, t_ns: i64) -> u32 {
        let n = self.events.partition_point(|e| e.time_ns <= t_ns);
        (self.s0 as i64
            + self.events[..n]
                .iter()
                .map(|e| e.etype.size() as i64)
                .sum::<i64>()) as u32
    }

    /// Cumulative spread after each event; `cum[i]` is the spread after event `i`.
    /// Lets callers evaluate `spread_at` in O(log n) repeatedly.
    pub fn spread_index(&self) -> SpreadIndex<'_> {
        SpreadIndex {
            path: self,
            post: self.post_spreads(),
        }
    }

    /// Restricts the path to `[start_ns, end_ns]`, rebasing times so `start_ns`
    /// becomes 0. The new initial spread is the spread in force at `start_ns`
    /// (events exactly at `start_ns` are folded into it).
    pub fn window(&self, start_ns: i64, end_ns: i64) -> Result<SpreadPath> {
        if end_ns < start_ns {
            return Err(Error::Argument("window end precedes start".into()));
        }
        let s_start = self.spread_at(start_ns);
        let events = self
            .events
            .iter()
            .filter(|e| e.time_ns > start_ns && e.time_ns <= end_ns)
            .map(|e| JumpEvent {
                time_ns: e.time_ns - start_ns,
                etype: e.etype,
            })
            .collect();
        SpreadPath::new(s_start, end_ns - start_ns, events)
    }
}

/// Precomputed post-event spreads for repeated point evaluation.
pub struct SpreadIndex<'a> {
    path: &'a SpreadPath,
    post: Vec<u32>,
}

impl SpreadIndex<'_> {
    pub fn at(&self, t_ns: i64) -> u32 {
        let n = self.path.events.partition_point(|e| e.time_ns <= t_ns);
        if n == 0 {
            self.path.s0
        } else {
            self.post[n - 1]
        }
    }
}

/// Sum-of-exponentials kernels on a shared decay grid.
///
/// `alphas[e][e'][l]` weighs the influence of a past `e'` jump on future `e`
/// jumps through `α β_l exp(-β_l t)`; its integral over `[0, ∞)` is `α`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelParams {
    pub betas: Vec<f64>,
    pub alphas: Vec<Vec<Vec<f64>>>,
}

impl KernelParams {
    pub fn zeros(n_types: usize, betas: Vec<f64>) -> Self {
        let l = betas.len();
        KernelParams {
            betas,
            alphas: vec![vec![vec![0.0; l]; n_types]; n_types],
        }
    }

    pub fn n_decays(&self) -> usize {
        self.betas.len()
    }

    /// `φ^{e,e'}(t)`.
    pub fn kernel(&self, target: usize, source: usize, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        self.alphas[target][source]
            .iter()
            .zip(&self.betas)
            .map(|(a, b)| a * b * (-b * t).exp())
            .sum()
    }

    pub fn l1_norm(&self, target: usize, source: usize) -> f64 {
        self.alphas[target][source].iter().sum()
    }
}

/// State-dependence functions `f^e(s)`, dense up to `sbar` and constant beyond.
#[derive(Debug, Clone, PartialEq)]
pub struct StateFunctions {
    pub sbar: u32,
    /// `values[e][s - 1]` for `s = 1..=sbar`.
    pub values: Vec<Vec<f64>>,
}

impl StateFunctions {
    pub fn value(&self, etype_idx: usize, spread: u32) -> f64 {
        let s = spread.clamp(1, self.sbar) as usize;
        self.values[etype_idx][s - 1]
    }

    /// True for entries forced to zero: `f^{-k}(s) = 0` for `s ≤ k`.
    pub fn is_structural_zero(etype: EventType, spread: u32) -> bool {
        etype.size() < 0 && spread as i64 + etype.size() as i64 <= 0
    }

    /// First spread at which `f^e` is allowed to be non-zero.
    pub fn first_free_spread(etype: EventType) -> u32 {
        if etype.size() < 0 {
            (-etype.size()) as u32 + 1
        } else {
            1
        }
    }

    /// Checks that the first non-zero value of each `f^e` equals 1.
    pub fn is_normalized(&self, k: usize) -> bool {
        EventType::all(k).all(|e| {
            let row = &self.values[e.index(k)];
            match row.iter().find(|v| **v != 0.0) {
                Some(v) => (v - 1.0).abs() <= 1e-12,
                None => true,
            }
        })
    }

    fn validate(&self, k: usize) -> Result<()> {
        if (self.sbar as usize) < k + 1 {
            return Err(Error::Config(format!(
                "sbar = {} must be at least K + 1 = {}",
                self.sbar,
                k + 1
            )));
        }
        if self.values.len() != 2 * k {
            return Err(Error::Config(format!(
                "f has {} rows, expected 2K = {}",
                self.values.len(),
                2 * k
            )));
        }
        for e in EventType::all(k) {
            let row = &self.values[e.index(k)];
            if row.len() != self.sbar as usize {
                return Err(Error::Config(format!(
                    "f[{e}] has {} entries, expected sbar = {}",
                    row.len(),
                    self.sbar
                )));
            }
            for (i, &v) in row.iter().enumerate() {
                let s = i as u32 + 1;
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::Config(format!("f[{e}][{s}] = {v} must be finite and ≥ 0")));
                }
                if Self::is_structural_zero(e, s) && v != 0.0 {
                    return Err(Error::Config(format!(
                        "f[{e}][{s}] = {v} must be 0 (jump would drive the spread below 1)"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Full model parameterization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelSpecDoc", into = "ModelSpecDoc")]
pub struct ModelSpec {
    pub k: usize,
    pub mus: Vec<f64>,
    pub kernels: KernelParams,
    pub statefns: StateFunctions,
    /// Allows negative kernel weights; the bracket is then clamped at 0.
    pub signed_alpha: bool,
}

/// On-disk JSON layout of a [`ModelSpec`].
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelSpecDoc {
    #[serde(rename = "K")]
    k: usize,
    betas: Vec<f64>,
    mus: Vec<f64>,
    alphas: Vec<Vec<Vec<f64>>>,
    f: Vec<Vec<f64>>,
    sbar: u32,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    signed_alpha: bool,
}

impl TryFrom<ModelSpecDoc> for ModelSpec {
    type Error = Error;
    fn try_from(d: ModelSpecDoc) -> Result<Self> {
        ModelSpec::new(
            d.k,
            d.mus,
            KernelParams {
                betas: d.betas,
                alphas: d.alphas,
            },
            StateFunctions {
                sbar: d.sbar,
                values: d.f,
            },
            d.signed_alpha,
        )
    }
}

impl From<ModelSpec> for ModelSpecDoc {
    fn from(s: ModelSpec) -> Self {
        ModelSpecDoc {
            k: s.k,
            betas: s.kernels.betas,
            mus: s.mus,
            alphas: s.kernels.alphas,
            f: s.statefns.values,
            sbar: s.statefns.sbar,
            signed_alpha: s.signed_alpha,
        }
    }
}

impl ModelSpec {
    pub fn new(
        k: usize,
        mus: Vec<f64>,
        kernels: KernelParams,
        statefns: StateFunctions,
        signed_alpha: bool,
    ) -> Result<Self> {
        let spec = ModelSpec {
            k,
            mus,
            kernels,
            statefns,
            signed_alpha,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k;
        if k == 0 {
            return Err(Error::Config("K must be ≥ 1".into()));
        }
        let n = 2 * k;
        if self.mus.len() != n {
            return Err(Error::Config(format!("mus has {} entries, expected {n}", self.mus.len())));
        }
        if let Some(m) = self.mus.iter().find(|m| !m.is_finite() || **m < 0.0) {
            return Err(Error::Config(format!("baseline {m} must be finite and ≥ 0")));
        }
        let betas = &self.kernels.betas;
        if betas.is_empty() {
            return Err(Error::Config("at least one decay rate is required".into()));
        }
        if betas.iter().any(|b| !b.is_finite() || *b <= 0.0) {
            return Err(Error::Config("decay rates must be finite and > 0".into()));
        }
        if betas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("decay rates must be strictly increasing".into()));
        }
        let l = betas.len();
        if self.kernels.alphas.len() != n
            || self
                .kernels
                .alphas
                .iter()
                .any(|row| row.len() != n || row.iter().any(|c| c.len() != l))
        {
            return Err(Error::Config(format!("alphas must have shape [{n}][{n}][{l}]")));
        }
        for row in &self.kernels.alphas {
            for cell in row {
                for &a in cell {
                    if !a.is_finite() {
                        return Err(Error::Config("kernel weights must be finite".into()));
                    }
                    if a < 0.0 && !self.signed_alpha {
                        return Err(Error::Config(format!(
                            "negative kernel weight {a} requires signed_alpha"
                        )));
                    }
                }
            }
        }
        self.statefns.validate(k)
    }

    pub fn n_types(&self) -> usize {
        2 * self.k
    }

    pub fn n_decays(&self) -> usize {
        self.kernels.betas.len()
    }

    pub fn betas(&self) -> &[f64] {
        &self.kernels.betas
    }

    pub fn etype(&self, size: i32) -> Result<EventType> {
        EventType::new(size, self.k)
    }

    /// Decimal-exact JSON form.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// SHA-256 of the compact JSON form; identifies a spec in run manifests.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let s = serde_json::to_string(self).expect("spec serialization cannot fail");
        hex::encode(Sha256::digest(s.as_bytes()))
    }

    fn check_state(&self, state: &ExcitationState) -> Result<()> {
        if state.z.len() != self.n_types() || state.z.iter().any(|r| r.len() != self.n_decays()) {
            return Err(Error::Argument(format!(
                "excitation state shape does not match spec ({} types × {} decays)",
                self.n_types(),
                self.n_decays()
            )));
        }
        Ok(())
    }

    /// `μ^e + Σ α z`, without the state function and without clamping.
    pub(crate) fn bracket_raw(&self, state_z: &[Vec<f64>], target: usize) -> f64 {
        let mut acc = self.mus[target];
        for (src, zrow) in state_z.iter().enumerate() {
            for (a, z) in self.kernels.alphas[target][src].iter().zip(zrow) {
                acc += a * z;
            }
        }
        acc
    }

    /// Conditional intensity of `etype` in the given state (events/second).
    pub fn intensity(&self, state: &ExcitationState, etype: EventType) -> Result<f64> {
        self.check_state(state)?;
        if etype.size().unsigned_abs() as usize > self.k {
            return Err(Error::Argument(format!("{etype} exceeds K = {}", self.k)));
        }
        let idx = etype.index(self.k);
        let f = self.statefns.value(idx, state.spread);
        if f == 0.0 {
            return Ok(0.0);
        }
        Ok(f * self.bracket_raw(&state.z, idx).max(0.0))
    }

    /// Sum of intensities over all `2K` types.
    pub fn total_intensity(&self, state: &ExcitationState) -> Result<f64> {
        EventType::all(self.k)
            .map(|e| self.intensity(state, e))
            .sum()
    }
}

/// Markov state at a time point: spread and decayed accumulators `z[e'][l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcitationState {
    pub spread: u32,
    pub z: Vec<Vec<f64>>,
    pub last_time: f64,
}

impl ExcitationState {
    /// Zero excitation at time 0.
    pub fn cold(spec: &ModelSpec, spread: u32) -> Self {
        ExcitationState {
            spread,
            z: vec![vec![0.0; spec.n_decays()]; spec.n_types()],
            last_time: 0.0,
        }
    }

    /// Exact flow over `dt` seconds with no events.
    pub fn advance(&mut self, betas: &[f64], dt: f64) -> Result<()> {
        if !(dt >= 0.0) {
            return Err(Error::Argument(format!("cannot advance by dt = {dt}")));
        }
        if dt > 0.0 {
            let decay: Vec<f64> = betas.iter().map(|b| (-b * dt).exp()).collect();
            for row in &mut self.z {
                for (z, d) in row.iter_mut().zip(&decay) {
                    *z *= d;
                }
            }
        }
        self.last_time += dt;
        Ok(())
    }

    pub fn advanced(&self, betas: &[f64], dt: f64) -> Result<Self> {
        let mut s = self.clone();
        s.advance(betas, dt)?;
        Ok(s)
    }

    /// Registers a jump of type `etype` at the current time.
    pub fn apply_jump(&mut self, betas: &[f64], etype: EventType, k: usize) -> Result<()> {
        let next = self.spread as i64 + etype.size() as i64;
        if next < 1 {
            return Err(Error::Invariant(format!(
                "jump {etype} from spread {} would leave spread {next}",
                self.spread
            )));
        }
        let idx = etype.index(k);
        if idx >= self.z.len() {
            return Err(Error::Argument(format!("{etype} exceeds the state's K")));
        }
        for (z, b) in self.z[idx].iter_mut().zip(betas) {
            *z += b;
        }
        self.spread = next as u32;
        Ok(())
    }

    pub fn jumped(&self, betas: &[f64], etype: EventType, k: usize) -> Result<Self> {
        let mut s = self.clone();
        s.apply_jump(betas, etype, k)?;
        Ok(s)
    }

    /// State at the end of `path` (cold start at `path.s0()`), i.e. the
    /// excitation just after the last event, advanced to the horizon.
    pub fn replay(spec: &ModelSpec, path: &SpreadPath) -> Result<Self> {
        let mut st = Self::cold(spec, path.s0());
        let mut t_ns = 0i64;
        for ev in path.events() {
            st.advance(spec.betas(), nanos_to_secs(ev.time_ns - t_ns))?;
            st.apply_jump(spec.betas(), ev.etype, spec.k)?;
            t_ns = ev.time_ns;
        }
        st.advance(spec.betas(), nanos_to_secs(path.horizon_ns() - t_ns))?;
        Ok(st)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    fn state(spec: &ModelSpec, spread: u32) -> ExcitationState {
        ExcitationState::cold(spec, spread)
    }

    #[test]
    fn event_type_indexing_roundtrips() {
        for k in 1..5 {
            for (i, e) in EventType::all(k).enumerate() {
                assert_eq!(e.index(k), i);
                assert_eq!(EventType::from_index(i, k), e);
            }
        }
        assert!(EventType::new(0, 2).is_err());
        assert!(EventType::new(3, 2).is_err());
        assert!(EventType::new(-2, 2).is_ok());
    }

    #[test]
    fn advance_zero_is_identity() {
        let spec = catalog::demo();
        let mut st = state(&spec, 2);
        st.z[0][0] = 0.7;
        let before = st.clone();
        st.advance(spec.betas(), 0.0).unwrap();
        assert_eq!(st, before);
    }

    #[test]
    fn advance_halves_at_ln2() {
        let spec = catalog::demo();
        let mut st = state(&spec, 2);
        st.z[0][0] = 1.0;
        st.advance(&[1.0], std::f64::consts::LN_2).unwrap();
        assert!((st.z[0][0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn advance_rejects_negative_dt() {
        let spec = catalog::demo();
        let mut st = state(&spec, 2);
        assert!(matches!(st.advance(spec.betas(), -1e-3), Err(Error::Argument(_))));
    }

    #[test]
    fn jump_adds_betas() {
        let spec = catalog::recovery();
        let k = spec.k;
        let mut st = ExcitationState {
            spread: 1,
            z: vec![vec![0.0; 2]; 2],
            last_time: 0.0,
        };
        let betas = [10.0, 100.0];
        st.apply_jump(&betas, EventType::new(1, k).unwrap(), k).unwrap();
        assert_eq!(st.z[0], vec![10.0, 100.0]);
        assert_eq!(st.z[1], vec![0.0, 0.0]);
        st.apply_jump(&betas, EventType::new(1, k).unwrap(), k).unwrap();
        assert_eq!(st.z[0], vec![20.0, 200.0]);
        assert_eq!(st.spread, 3);
    }

    #[test]
    fn jump_below_one_is_rejected() {
        let spec = catalog::demo();
        let mut st = state(&spec, 1);
        let err = st.apply_jump(spec.betas(), spec.etype(-1).unwrap(), 1);
        assert!(matches!(err, Err(Error::Invariant(_))));
    }

    #[test]
    fn intensity_matches_hand_values() {
        let spec = catalog::demo();
        let plus = spec.etype(1).unwrap();
        let minus = spec.etype(-1).unwrap();
        let st = state(&spec, 2);
        assert!((spec.intensity(&st, plus).unwrap() - 0.21).abs() < 1e-15);
        assert!((spec.total_intensity(&st).unwrap() - 0.51).abs() < 1e-15);

        let mut at_one = state(&spec, 1);
        at_one.z[1][0] = 100.0;
        assert_eq!(spec.intensity(&at_one, minus).unwrap(), 0.0);

        // one +1 jump from spread 1: z[+1] = β = 1, spread now 2
        let mut st = state(&spec, 1);
        st.apply_jump(spec.betas(), plus, 1).unwrap();
        assert!((spec.intensity(&st, plus).unwrap() - 0.28).abs() < 1e-15);
    }

    #[test]
    fn zero_spec_has_zero_total_intensity() {
        let mut spec = catalog::demo();
        spec.mus = vec![0.0, 0.0];
        assert_eq!(spec.total_intensity(&state(&spec, 3)).unwrap(), 0.0);
    }

    #[test]
    fn intensity_rejects_mismatched_state() {
        let spec = catalog::demo();
        let st = ExcitationState {
            spread: 2,
            z: vec![vec![0.0; 3]; 2],
            last_time: 0.0,
        };
        assert!(spec.intensity(&st, spec.etype(1).unwrap()).is_err());
    }

    #[test]
    fn spec_json_roundtrip_is_lossless() {
        let mut spec = catalog::recovery();
        spec.mus[0] = 0.1 + 0.2; // not exactly representable in short decimal
        spec.kernels.alphas[0][1][1] = std::f64::consts::PI / 7.0;
        let json = spec.to_json().unwrap();
        let back = ModelSpec::from_json(&json).unwrap();
        assert_eq!(back, spec);
        assert!(json.contains("\"K\""));
        assert!(json.contains("\"sbar\""));
    }

    #[test]
    fn spec_validation_catches_bad_f() {
        let mut spec = catalog::demo();
        spec.statefns.values[1][0] = 0.5;
        assert!(matches!(spec.validate(), Err(Error::Config(_))));
        let mut spec = catalog::demo();
        spec.kernels.alphas[0][0][0] = -0.1;
        assert!(spec.validate().is_err());
        spec.signed_alpha = true;
        assert!(spec.validate().is_ok());
    }

    #[test]
    fn path_rejects_ties_and_negative_spread() {
        let p = EventType::new(1, 1).unwrap();
        let m = EventType::new(-1, 1).unwrap();
        let ev = |t, e| JumpEvent { time_ns: t, etype: e };
        assert!(SpreadPath::new(1, 10, vec![ev(1, p), ev(1, m)]).is_err());
        assert!(SpreadPath::new(1, 10, vec![ev(1, m)]).is_err());
        assert!(SpreadPath::new(1, 10, vec![ev(11, p)]).is_err());
        let path = SpreadPath::new(1, 10, vec![ev(1, p), ev(5, m)]).unwrap();
        assert_eq!(path.spread_at(0), 1);
        assert_eq!(path.spread_at(1), 2);
        assert_eq!(path.spread_at(4), 2);
        assert_eq!(path.spread_at(5), 1);
        assert_eq!(path.pre_spreads(), vec![1, 2]);
        assert_eq!(path.post_spreads(), vec![2, 1]);
    }

    #[test]
    fn window_rebases_and_carries_spread() {
        let p = EventType::new(1, 1).unwrap();
        let ev = |t, e| JumpEvent { time_ns: t, etype: e };
        let path = SpreadPath::new(1, 100, vec![ev(10, p), ev(20, p), ev(30, p)]).unwrap();
        let w = path.window(20, 50).unwrap();
        assert_eq!(w.s0(), 3);
        assert_eq!(w.events(), &[ev(10, p)]);
        assert_eq!(w.horizon_ns(), 30);
    }
}
