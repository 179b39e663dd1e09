//! Sufficient conditions for V-uniform ergodicity of `(S_t, X_t)`.
//!
//! K = 1, L = 1 conditions:
//!
//! ```text
//! (A1) f^-(1) = 0
//! (A2) f^-(S) ≥ γ S for some γ > 0, S ≥ 2
//! (A3) sup_S f^+(S) (α^{+,-} + α^{+,+}) < 1
//! ```
//!
//! For K ≤ 2 the drift argument needs positive weights `η_{e,e'}`, `η` with
//!
//! ```text
//! Σ_e η_{e,-k} α^{e,-k} < k η                       (each k)
//! Σ_e η_{e,+k} α^{e,+k} + k η < η_{+k,e'}            (each k, each e')
//! ```
//!
//! which [`check_general`] decides with a small linear program. Because
//! multiplying `f^e` by `c` and dividing `μ^e`, `α^{e,·}` by `c` leaves the
//! model unchanged, upward state functions are rescaled to `sup f^{+k} = 1`
//! before the kernel conditions are tested.

use std::collections::BTreeMap;

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EventType, ModelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Every condition holds, including unbounded growth of `f^-`.
    Pass,
    /// Every condition holds on `1..=sbar`, but the constant tail of `f^-`
    /// cannot dominate `γ S` as `S → ∞`.
    TailViolated,
    Fail,
}

impl Verdict {
    /// True unless some condition fails on the modelled range.
    pub fn holds_on_modelled_range(self) -> bool {
        self != Verdict::Fail
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub label: String,
    pub passed: bool,
    pub witnesses: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

impl Condition {
    fn new(label: &str, passed: bool) -> Self {
        Condition {
            label: label.to_string(),
            passed,
            witnesses: BTreeMap::new(),
            note: String::new(),
        }
    }

    fn with(mut self, key: &str, v: f64) -> Self {
        self.witnesses.insert(key.to_string(), v);
        self
    }

    fn note(mut self, s: impl Into<String>) -> Self {
        self.note = s.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub conditions: Vec<Condition>,
    /// Lyapunov weights: the explicit K = 1 vector, or the LP solution
    /// flattened as `eta[e][e']` followed by the scalar `η`.
    pub eta: Option<Vec<f64>>,
    /// Multi-exponential kernels were collapsed to their L1 norms.
    pub heuristic: bool,
    pub tail_violated: bool,
    pub verdict: Verdict,
}

impl StabilityReport {
    fn finish(conditions: Vec<Condition>, eta: Option<Vec<f64>>, heuristic: bool, tail_violated: bool) -> Self {
        let all = conditions.iter().all(|c| c.passed);
        let verdict = match (all, tail_violated) {
            (false, _) => Verdict::Fail,
            (true, true) => Verdict::TailViolated,
            (true, false) => Verdict::Pass,
        };
        StabilityReport {
            conditions,
            eta,
            heuristic,
            tail_violated,
            verdict,
        }
    }

    pub fn condition(&self, label: &str) -> Option<&Condition> {
        self.conditions.iter().find(|c| c.label == label)
    }

    /// Plain-text table of conditions and witnesses.
    pub fn to_table(&self) -> String {
        let mut s = String::from("condition  status  witnesses\n");
        for c in &self.conditions {
            let w: Vec<String> = c.witnesses.iter().map(|(k, v)| format!("{k}={v:.6}")).collect();
            s.push_str(&format!(
                "{:<10} {:<7} {}{}\n",
                c.label,
                if c.passed { "pass" } else { "FAIL" },
                w.join(" "),
                if c.note.is_empty() { String::new() } else { format!("  ({})", c.note) }
            ));
        }
        if let Some(eta) = &self.eta {
            let e: Vec<String> = eta.iter().map(|v| format!("{v:.6}")).collect();
            s.push_str(&format!("eta        {}\n", e.join(" ")));
        }
        if self.heuristic {
            s.push_str("note       kernels collapsed to L1 norms (L > 1): heuristic\n");
        }
        s.push_str(&format!("verdict    {:?}\n", self.verdict));
        s
    }
}

/// Kernel-norm matrix `ã[e][e'] = Σ_l α_l^{e,e'}`, with upward rows scaled
/// by `sup f^e`.
fn effective_alphas(spec: &ModelSpec) -> (Vec<Vec<f64>>, Vec<f64>) {
    let k = spec.k;
    let n = spec.n_types();
    let mut sup_f = vec![1.0; n];
    let mut a = vec![vec![0.0; n]; n];
    for e in EventType::all(k) {
        let i = e.index(k);
        if e.size() > 0 {
            sup_f[i] = spec.statefns.values[i].iter().cloned().fold(0.0, f64::max);
        }
        for j in 0..n {
            a[i][j] = spec.kernels.l1_norm(i, j) * if e.size() > 0 { sup_f[i] } else { 1.0 };
        }
    }
    (a, sup_f)
}

/// `γ = min_{K+1 ≤ s ≤ sbar} g(s) / s` where `g(s) = max_k f^{-k}(s)`.
fn downward_growth(spec: &ModelSpec) -> f64 {
    let k = spec.k;
    let sbar = spec.statefns.sbar;
    ((k as u32 + 1)..=sbar)
        .map(|s| {
            let g = (1..=k)
                .map(|j| spec.statefns.value(EventType::from_index(k + j - 1, k).index(k), s))
                .fold(0.0, f64::max);
            g / s as f64
        })
        .fold(f64::INFINITY, f64::min)
}

/// Checks (A1)–(A3) for a K = 1, L = 1 spec.
pub fn check_k1(spec: &ModelSpec) -> Result<StabilityReport> {
    spec.validate()?;
    if spec.k != 1 || spec.n_decays() != 1 {
        return Err(Error::Unsupported(format!(
            "check_k1 needs K = 1 and L = 1 (got K = {}, L = {}); use check_general",
            spec.k,
            spec.n_decays()
        )));
    }
    let f_minus_1 = spec.statefns.value(1, 1);
    let a1 = Condition::new("A1", f_minus_1 == 0.0).with("f-(1)", f_minus_1);

    let gamma = downward_growth(spec);
    let a2 = Condition::new("A2", gamma > 0.0)
        .with("gamma", gamma)
        .with("f-(sbar)", spec.statefns.value(1, spec.statefns.sbar))
        .note("evaluated on 2..=sbar");

    let sup_f_plus = spec.statefns.values[0].iter().cloned().fold(0.0, f64::max);
    let row_sum = spec.kernels.alphas[0][0][0] + spec.kernels.alphas[0][1][0];
    let a3_value = sup_f_plus * row_sum;
    let a3 = Condition::new("A3", a3_value < 1.0)
        .with("sup f+", sup_f_plus)
        .with("alpha++ + alpha+-", row_sum)
        .with("product", a3_value);

    let (a, _) = effective_alphas(spec);
    let eta = construct_eta([[a[0][0], a[0][1]], [a[1][0], a[1][1]]])
        .ok()
        .map(|e| e.to_vec());
    Ok(StabilityReport::finish(vec![a1, a2, a3], eta, false, true))
}

/// Explicit Lyapunov weights for K = 1 (index 1 = `+`, 2 = `-`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eta {
    pub eta11: f64,
    pub eta12: f64,
    pub eta21: f64,
    pub eta22: f64,
    pub eta: f64,
    /// `η − (η12 α12 + η22 α22)`
    pub h1_slack: f64,
    /// `η11 − (η11 α11 + η21 α21 + η)`
    pub h2_slack: f64,
    /// `η12 − (η11 α11 + η21 α21 + η)`
    pub h3_slack: f64,
}

impl Eta {
    pub fn satisfies_h(&self) -> bool {
        self.h1_slack > 0.0 && self.h2_slack > 0.0 && self.h3_slack > 0.0
    }

    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.eta11, self.eta12, self.eta21, self.eta22, self.eta]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("no explicit weights: {violated}")]
pub struct EtaInfeasible {
    pub violated: String,
}

/// Builds the explicit weight vector for `alpha = [[α11, α12], [α21, α22]]`
/// (row = target, column = source; 1 = `+`, 2 = `-`) and checks (H1)–(H3).
pub fn construct_eta(alpha: [[f64; 2]; 2]) -> std::result::Result<Eta, EtaInfeasible> {
    let [[a11, a12], [a21, a22]] = alpha;
    let fail = |s: &str| Err(EtaInfeasible { violated: s.to_string() });
    if !(a11 >= 0.0) {
        return fail("α11 ≥ 0");
    }
    if !(a12 > 0.0) {
        return fail("α12 > 0");
    }
    if !(a21 > 0.0) {
        return fail("α21 > 0");
    }
    if !(a22 > 0.0) {
        return fail("α22 > 0");
    }
    if !(a11 + a12 < 1.0) {
        return fail("α11 + α12 < 1");
    }
    let r = (1.0 - a11) / a12;
    let delta = 0.5 * (r - 1.0);
    let eta11 = 1.0;
    let eta12 = r - delta;
    let eta21 = delta * a12 / (4.0 * a21);
    let eta22 = delta * a12 / (4.0 * a22);
    let eta = 1.0 - a11 - 0.5 * delta * a12;
    let lhs23 = eta11 * a11 + eta21 * a21 + eta;
    let out = Eta {
        eta11,
        eta12,
        eta21,
        eta22,
        eta,
        h1_slack: eta - (eta12 * a12 + eta22 * a22),
        h2_slack: eta11 - lhs23,
        h3_slack: eta12 - lhs23,
    };
    if !(out.h1_slack > 0.0) {
        return fail("(H1) η12 α12 + η22 α22 < η");
    }
    if !(out.h2_slack > 0.0) {
        return fail("(H2) η11 α11 + η21 α21 + η < η11");
    }
    if !(out.h3_slack > 0.0) {
        return fail("(H3) η11 α11 + η21 α21 + η < η12");
    }
    Ok(out)
}

const ETA_MIN: f64 = 1e-6;
const ETA_MAX: f64 = 1e6;
/// Minimum LP margin counted as strict feasibility.
const LP_MARGIN_TOL: f64 = 1e-9;

/// Maximizes the smallest slack of the weight inequalities; returns the
/// margin and the weights (`η_{e,e'}` row-major, then `η`).
fn weight_lp(a: &[Vec<f64>], k: usize) -> Result<(f64, Vec<f64>)> {
    let n = 2 * k;
    let mut pb = Problem::new(OptimizationDirection::Maximize);
    let w: Vec<Vec<minilp::Variable>> = (0..n)
        .map(|_| (0..n).map(|_| pb.add_var(0.0, (ETA_MIN, ETA_MAX))).collect())
        .collect();
    let eta = pb.add_var(0.0, (ETA_MIN, ETA_MAX));
    let t = pb.add_var(1.0, (-ETA_MAX, ETA_MAX));
    for e in EventType::all(k) {
        let src = e.index(k);
        let size = e.size().unsigned_abs() as f64;
        if e.size() < 0 {
            // size·η − Σ_tgt η[tgt][src] α[tgt][src] − t ≥ 0
            let mut terms: Vec<(minilp::Variable, f64)> =
                (0..n).map(|tgt| (w[tgt][src], -a[tgt][src])).collect();
            terms.push((eta, size));
            terms.push((t, -1.0));
            pb.add_constraint(&terms, ComparisonOp::Ge, 0.0);
        } else {
            // η[src][e'] − Σ_tgt η[tgt][src] α[tgt][src] − size·η − t ≥ 0
            for other in 0..n {
                let mut coef: BTreeMap<usize, f64> = BTreeMap::new();
                for tgt in 0..n {
                    *coef.entry(tgt * n + src).or_default() -= a[tgt][src];
                }
                *coef.entry(src * n + other).or_default() += 1.0;
                let mut terms: Vec<(minilp::Variable, f64)> = coef
                    .into_iter()
                    .map(|(idx, c)| (w[idx / n][idx % n], c))
                    .collect();
                terms.push((eta, -size));
                terms.push((t, -1.0));
                pb.add_constraint(&terms, ComparisonOp::Ge, 0.0);
            }
        }
    }
    let sol = pb
        .solve()
        .map_err(|e| Error::Invariant(format!("weight LP failed: {e}")))?;
    let mut weights: Vec<f64> = w.iter().flatten().map(|v| sol[*v]).collect();
    weights.push(sol[eta]);
    Ok((sol[t], weights))
}

/// Checks the K ≤ 2 conditions: downward state functions vanish where
/// required and grow at least linearly on the modelled range, and positive
/// Lyapunov weights exist.
pub fn check_general(spec: &ModelSpec) -> Result<StabilityReport> {
    spec.validate()?;
    let k = spec.k;
    if k > 2 {
        return Err(Error::Unsupported(format!("check_general supports K ≤ 2, got K = {k}")));
    }
    let heuristic = spec.n_decays() > 1;

    // f^{-k}(s) = 0 for s ≤ k
    let zeros_ok = (1..=k).all(|j| {
        let idx = k + j - 1;
        (1..=j as u32).all(|s| spec.statefns.value(idx, s) == 0.0)
    });
    let c_zero = Condition::new("A1-zero", zeros_ok);
    let gamma = downward_growth(spec);
    let c_growth = Condition::new("A1-growth", gamma > 0.0)
        .with("gamma", gamma)
        .note(format!("evaluated on {}..=sbar", k + 1));
    let (a, sup_f) = effective_alphas(spec);
    let mut c_bound = Condition::new("A1-f+bound", true).note("upward f rescaled to sup 1");
    for j in 0..k {
        c_bound = c_bound.with(&format!("sup f+{}", j + 1), sup_f[j]);
    }

    let (margin, weights) = weight_lp(&a, k)?;
    let feasible = margin > LP_MARGIN_TOL;
    let c_h = Condition::new("H1", feasible).with("margin", margin);
    Ok(StabilityReport::finish(
        vec![c_zero, c_growth, c_bound, c_h],
        feasible.then_some(weights),
        heuristic,
        true,
    ))
}
