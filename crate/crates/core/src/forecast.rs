//! Short-horizon spread prediction.
//!
//! Three predictors are compared on a stride-`Δ` grid of forecast origins:
//!
//! * **SDSH**: Monte-Carlo mean of `S_{t0+Δ}` under conditional simulation.
//!   Events in the trailing window feed a decaying baseline
//!   `μ̃^e(t) = μ^e + Σ_{t_i ∈ window} φ^{e,e_i}(t - t_i)` while the simulated
//!   paths accumulate their own excitation from `t0` onwards.
//! * **ACDP**: autoregressive conditional Double-Poisson model on the
//!   subsampled series `S'_k = S_{kΔ} - 1`,
//!   `λ_k = Σ_{i=0}^{N} β^i (c + α S'_{k-1-i})`.
//! * **Last**: `Ŝ_{t0+Δ} = S_{t0}`.

use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::likelihood::Dataset;
use crate::model::{secs_to_nanos, ExcitationState, ModelSpec, SpreadPath};
use crate::optim;
use crate::simulate::{path_rng, simulate_with_rng, Baseline, SimOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastRequest {
    /// Forecast origin, seconds on the history's clock.
    pub t0: f64,
    /// Conditioning window length in seconds.
    pub window: f64,
    /// Forecast horizon `Δ` in seconds.
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
}

impl ForecastRequest {
    pub fn new(t0: f64, horizon: f64, seed: u64) -> Self {
        ForecastRequest {
            t0,
            window: 60.0,
            horizon,
            n_paths: 100,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.window > 0.0) {
            return Err(Error::Argument("forecast window must be positive".into()));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::Argument("forecast horizon must be positive".into()));
        }
        if self.n_paths == 0 {
            return Err(Error::Argument("n_paths must be ≥ 1".into()));
        }
        if !(self.t0 >= 0.0) {
            return Err(Error::Argument("forecast origin must be ≥ 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastResult {
    pub mean: f64,
    pub spread_t0: u32,
    pub window_events: usize,
    /// `S_{t0+Δ}` of each simulated path.
    pub samples: Vec<u32>,
}

/// Monte-Carlo estimate of `E[S_{t0+Δ} | window]`.
pub fn sdsh_forecast(spec: &ModelSpec, history: &SpreadPath, req: &ForecastRequest) -> Result<ForecastResult> {
    req.validate()?;
    let t0_ns = secs_to_nanos(req.t0);
    if t0_ns > history.horizon_ns() {
        return Err(Error::Argument(format!(
            "forecast origin {} s is beyond the history ({} s)",
            req.t0,
            history.horizon()
        )));
    }
    let start_ns = t0_ns - secs_to_nanos(req.window);
    let lo = history.events().partition_point(|e| e.time_ns <= start_ns);
    let hi = history.events().partition_point(|e| e.time_ns <= t0_ns);
    let window = &history.events()[lo..hi];
    if window.is_empty() {
        log::debug!("empty conditioning window at t0 = {} s: using μ", req.t0);
    }
    let baseline = Baseline::from_events(spec, window, t0_ns)?;
    let spread_t0 = history.spread_at(t0_ns);
    let state = ExcitationState::cold(spec, spread_t0);
    let samples: Vec<Result<u32>> = (0..req.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(req.seed, i);
            let p = simulate_with_rng(spec, &state, Some(&baseline), req.horizon, &mut rng, SimOptions::default())?;
            Ok(p.final_spread())
        })
        .collect();
    let samples = samples.into_iter().collect::<Result<Vec<u32>>>()?;
    let mean = samples.iter().map(|s| *s as f64).sum::<f64>() / samples.len() as f64;
    Ok(ForecastResult {
        mean,
        spread_t0,
        window_events: window.len(),
        samples,
    })
}

/// Last observed spread.
pub fn last_predict(history: &SpreadPath, t0: f64) -> u32 {
    history.spread_at(secs_to_nanos(t0))
}

pub const DEFAULT_TRUNCATION: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcdpParams {
    pub c: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Truncation order `N` of the geometric sum.
    pub n_trunc: usize,
}

impl AcdpParams {
    pub fn new(c: f64, alpha: f64, beta: f64, gamma: f64) -> Self {
        AcdpParams {
            c,
            alpha,
            beta,
            gamma,
            n_trunc: DEFAULT_TRUNCATION,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.alpha >= 0.0 && self.gamma > 0.0) {
            return Err(Error::Argument("ACDP needs c > 0, α ≥ 0, γ > 0".into()));
        }
        if !(self.beta >= 0.0 && self.beta < 1.0) {
            return Err(Error::Argument("ACDP needs 0 ≤ β < 1".into()));
        }
        Ok(())
    }

    /// Truncated `λ` predicting the element after `history` (values are `S'`).
    pub fn lambda_next(&self, history: &[f64]) -> f64 {
        let mut acc = 0.0;
        let mut w = 1.0;
        for i in 0..=self.n_trunc {
            let s = if i < history.len() { history[history.len() - 1 - i] } else { break };
            acc += w * (self.c + self.alpha * s);
            w *= self.beta;
        }
        acc
    }
}

/// `1 + λ` for the step after `history` (spread values in ticks).
pub fn acdp_predict(params: &AcdpParams, history: &[u32]) -> Result<f64> {
    if history.is_empty() {
        return Err(Error::Argument("ACDP prediction needs at least one observation".into()));
    }
    let tail = history.len().saturating_sub(params.n_trunc + 1);
    let s: Vec<f64> = history[tail..].iter().map(|v| *v as f64 - 1.0).collect();
    Ok(1.0 + params.lambda_next(&s))
}

/// Which Double-Poisson log-likelihood to maximize.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcdpObjective {
    /// Unnormalized log density without `log c(γ, λ)`.
    #[default]
    Unnormalized,
    /// Includes the numerically computed normalizing constant.
    Normalized,
}

/// Unnormalized Double-Poisson log weight of `n`.
fn dp_log_weight(n: f64, lambda: f64, gamma: f64) -> f64 {
    let (nlogn, nlog_ratio) = if n > 0.0 {
        (n * n.ln(), n * (lambda / n).ln())
    } else {
        (0.0, 0.0)
    };
    0.5 * gamma.ln() - gamma * lambda + nlogn - n - ln_factorial(n) + gamma * (n + nlog_ratio)
}

fn ln_factorial(n: f64) -> f64 {
    ln_gamma(n + 1.0)
}

fn dp_support_max(lambda: f64, gamma: f64) -> usize {
    let sd = (lambda.max(1.0) / gamma.min(1.0)).sqrt();
    (lambda + 15.0 * sd + 30.0).ceil() as usize
}

/// Normalized Double-Poisson pmf on `0..=n_max` with tail mass below `1e-12`.
pub fn dp_pmf(lambda: f64, gamma: f64) -> Vec<f64> {
    let mut n_max = dp_support_max(lambda, gamma);
    loop {
        let logw: Vec<f64> = (0..=n_max).map(|n| dp_log_weight(n as f64, lambda, gamma)).collect();
        let m = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logw.iter().map(|l| (l - m).exp()).collect();
        let total: f64 = w.iter().sum();
        let tail = w[w.len() - 5..].iter().sum::<f64>() / total;
        if tail < 1e-13 || n_max > 100_000 {
            return w.into_iter().map(|v| v / total).collect();
        }
        n_max *= 2;
    }
}

/// `log c(γ, λ)`, the log normalizing constant.
fn dp_log_norm(lambda: f64, gamma: f64) -> f64 {
    let n_max = dp_support_max(lambda, gamma);
    let logw: Vec<f64> = (0..=n_max).map(|n| dp_log_weight(n as f64, lambda, gamma)).collect();
    let m = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    -(m + logw.iter().map(|l| (l - m).exp()).sum::<f64>().ln())
}

/// Draws one value from the normalized Double-Poisson pmf.
pub fn dp_sample<R: Rng + ?Sized>(lambda: f64, gamma: f64, rng: &mut R) -> u32 {
    let pmf = dp_pmf(lambda, gamma);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (n, p) in pmf.iter().enumerate() {
        acc += p;
        if u < acc {
            return n as u32;
        }
    }
    (pmf.len() - 1) as u32
}

/// Simulates `len` spread values `S = 1 + S'` after a burn-in of `2N + 100`
/// steps started at the stationary mean.
pub fn simulate_acdp(params: &AcdpParams, len: usize, seed: u64) -> Result<Vec<u32>> {
    params.validate()?;
    if params.alpha + params.beta >= 1.0 {
        return Err(Error::Argument("ACDP simulation needs α + β < 1".into()));
    }
    let mut rng = path_rng(seed, 0);
    let burn = 2 * params.n_trunc + 100;
    let m = params.c / (1.0 - params.alpha - params.beta);
    let mut s: Vec<f64> = vec![m.round(); params.n_trunc + 1];
    let start = s.len();
    for _ in 0..burn + len {
        let lam = params.lambda_next(&s[s.len() - (params.n_trunc + 1)..]);
        s.push(dp_sample(lam, params.gamma, &mut rng) as f64);
    }
    Ok(s[start + burn..].iter().map(|v| *v as u32 + 1).collect())
}

/// Fitting options for [`acdp_fit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcdpFitOptions {
    pub n_trunc: usize,
    /// First index entering the likelihood; defaults to `n_trunc + 1`.
    pub start: Option<usize>,
    pub objective: AcdpObjective,
    pub max_iter: usize,
    /// Upper bound on `γ`, reached when the series is (nearly) constant.
    pub gamma_max: f64,
}

impl Default for AcdpFitOptions {
    fn default() -> Self {
        AcdpFitOptions {
            n_trunc: DEFAULT_TRUNCATION,
            start: None,
            objective: AcdpObjective::Unnormalized,
            max_iter: 300,
            gamma_max: 1e6,
        }
    }
}

/// Truncated `λ_k` for `k ≥ start`.
pub fn acdp_lambdas(p: &AcdpParams, s: &[f64], start: usize) -> Vec<f64> {
    (start..s.len()).map(|k| p.lambda_next(&s[k.saturating_sub(p.n_trunc + 1)..k])).collect()
}

/// ACDP log-likelihood of `series` (spread values) for `k ≥ start`.
pub fn acdp_log_likelihood(p: &AcdpParams, series: &[u32], start: usize, objective: AcdpObjective) -> f64 {
    let s: Vec<f64> = series.iter().map(|v| *v as f64 - 1.0).collect();
    acdp_ll_prime(p, &s, start, objective)
}

fn acdp_ll_prime(p: &AcdpParams, s: &[f64], start: usize, objective: AcdpObjective) -> f64 {
    let lam = acdp_lambdas(p, s, start);
    lam.iter()
        .zip(&s[start..])
        .map(|(l, n)| {
            let base = dp_log_weight(*n, *l, p.gamma);
            match objective {
                AcdpObjective::Unnormalized => base,
                AcdpObjective::Normalized => base + dp_log_norm(*l, p.gamma),
            }
        })
        .sum()
}

fn to_params(u: &[f64], n_trunc: usize) -> AcdpParams {
    AcdpParams {
        c: u[0].exp(),
        alpha: u[1].exp(),
        beta: 1.0 / (1.0 + (-u[2]).exp()),
        gamma: u[3].exp(),
        n_trunc,
    }
}

fn from_params(p: &AcdpParams) -> [f64; 4] {
    [p.c.ln(), p.alpha.max(1e-8).ln(), (p.beta / (1.0 - p.beta)).ln(), p.gamma.ln()]
}

/// Maximum-likelihood ACDP fit over `(log c, log α, logit β, log γ)`.
pub fn acdp_fit(series: &[u32], init: Option<&AcdpParams>, opts: &AcdpFitOptions) -> Result<AcdpParams> {
    let n = opts.n_trunc;
    let start = opts.start.unwrap_or(n + 1);
    if series.len() <= start || series.len() <= n {
        return Err(Error::Argument(format!(
            "ACDP series of length {} is too short for truncation {n}",
            series.len()
        )));
    }
    if series.iter().any(|v| *v < 1) {
        return Err(Error::Argument("spread samples must be ≥ 1".into()));
    }
    let s: Vec<f64> = series.iter().map(|v| *v as f64 - 1.0).collect();
    let m = s.iter().sum::<f64>() / s.len() as f64;
    let var = s.iter().map(|v| (v - m).powi(2)).sum::<f64>() / s.len() as f64;
    let x0 = match init {
        Some(p) => {
            p.validate()?;
            from_params(p)
        }
        None => {
            let gamma0 = if var > 0.0 { (m / var).clamp(1e-2, 1e3) } else { 1e3 };
            from_params(&AcdpParams::new((0.3 * m).max(1e-3), 0.2, 0.5, gamma0))
        }
    };
    let n_obs = (series.len() - start) as f64;
    let objective = |u: &[f64]| -> f64 {
        let p = to_params(u, n);
        let ll = acdp_ll_prime(&p, &s, start, opts.objective);
        if ll.is_finite() {
            -ll / n_obs
        } else {
            f64::INFINITY
        }
    };
    let lo = [-30.0, -30.0, -30.0, -30.0];
    let hi = [30.0, 30.0, 30.0, opts.gamma_max.ln()];
    let run = |x0: &[f64]| {
        optim::minimize(
            |u, g| {
                let f = objective(u);
                let mut v = u.to_vec();
                for i in 0..4 {
                    let h = 1e-6 * (1.0 + u[i].abs());
                    v[i] = u[i] + h;
                    let fp = objective(&v);
                    v[i] = u[i] - h;
                    let fm = objective(&v);
                    v[i] = u[i];
                    g[i] = (fp - fm) / (2.0 * h);
                }
                f
            },
            x0,
            &lo,
            &hi,
            optim::Options {
                max_iter: opts.max_iter,
                pg_tol: 1e-7,
                ..Default::default()
            },
        )
    };
    let mut out = run(&x0);
    if !out.fx.is_finite() {
        let mut rng = path_rng(0x5eed, 0);
        for _ in 0..5 {
            let jittered: Vec<f64> = x0.iter().map(|x| x + rng.random_range(-1.0..1.0)).collect();
            out = run(&jittered);
            if out.fx.is_finite() {
                break;
            }
        }
    }
    if !out.fx.is_finite() {
        return Err(Error::Init("ACDP likelihood is not finite at any start".into()));
    }
    Ok(to_params(&out.x, n))
}

/// Predictors available to [`evaluate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Predictor {
    Last,
    Acdp,
    Sdsh,
    /// Fed the realized value; a sanity row with zero error.
    Oracle,
}

impl std::fmt::Display for Predictor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Predictor::Last => "Last",
            Predictor::Acdp => "ACDP",
            Predictor::Sdsh => "SDSH",
            Predictor::Oracle => "Oracle",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub deltas: Vec<f64>,
    pub predictors: Vec<Predictor>,
    /// Daily evaluation window `[start, end)` in seconds.
    pub eval_start: f64,
    pub eval_end: f64,
    pub sdsh_window: f64,
    pub n_paths: usize,
    pub acdp_window: f64,
    pub acdp_refit: f64,
    pub acdp: AcdpFitOptions,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            deltas: vec![3.0, 6.0, 12.0, 30.0],
            predictors: vec![Predictor::Last, Predictor::Acdp, Predictor::Sdsh],
            eval_start: 3600.0,
            eval_end: 7200.0,
            sdsh_window: 60.0,
            n_paths: 100,
            acdp_window: 3600.0,
            acdp_refit: 600.0,
            acdp: AcdpFitOptions::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseRow {
    pub predictor: Predictor,
    pub mse: Vec<f64>,
    pub n_points: Vec<usize>,
    pub failures: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseTable {
    pub deltas: Vec<f64>,
    pub rows: Vec<MseRow>,
}

impl MseTable {
    pub fn row(&self, p: Predictor) -> Option<&MseRow> {
        self.rows.iter().find(|r| r.predictor == p)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("predictor,delta_s,mse,n_points,failures\n");
        for r in &self.rows {
            for (i, d) in self.deltas.iter().enumerate() {
                let _ = writeln!(s, "{},{},{:.9},{},{}", r.predictor, d, r.mse[i], r.n_points[i], r.failures[i]);
            }
        }
        s
    }

    /// Rows per predictor, one column per horizon.
    pub fn to_table(&self) -> String {
        let mut s = format!("{:<8}", "");
        for d in &self.deltas {
            let _ = write!(s, "{:>10}", format!("{d}s"));
        }
        s.push('\n');
        for r in &self.rows {
            let _ = write!(s, "{:<8}", r.predictor.to_string());
            for v in &r.mse {
                let _ = write!(s, "{v:>10.4}");
            }
            s.push('\n');
        }
        s
    }
}

/// Stream id for evaluation point `j` of day `day` at horizon index `di`.
fn point_seed(seed: u64, day: u64, di: usize, j: usize) -> u64 {
    let mut x = seed ^ day.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ ((di as u64) << 56) ^ (j as u64).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x ^= x >> 31;
    x = x.wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 29)
}

/// Squared errors and failure count of one predictor on one day.
#[derive(Default, Clone)]
struct Acc {
    sse: f64,
    n: usize,
    failures: usize,
}

fn evaluate_day(
    spec: Option<&ModelSpec>,
    path: &SpreadPath,
    day_id: u64,
    di: usize,
    delta: f64,
    cfg: &EvalConfig,
) -> Vec<Acc> {
    let mut acc = vec![Acc::default(); cfg.predictors.len()];
    let end = cfg.eval_end.min(path.horizon());
    let step_ns = secs_to_nanos(delta);
    let idx = path.spread_index();
    let sample = |t: f64| idx.at(secs_to_nanos(t));
    let mut acdp_params: Option<AcdpParams> = None;
    let mut next_refit = cfg.eval_start;
    let mut j = 0usize;
    loop {
        let t0 = cfg.eval_start + j as f64 * delta;
        if t0 + delta > end + 1e-9 {
            break;
        }
        let realized = idx.at(secs_to_nanos(t0) + step_ns) as f64;
        for (pi, pred) in cfg.predictors.iter().enumerate() {
            let forecast: Result<f64> = match pred {
                Predictor::Last => Ok(sample(t0) as f64),
                Predictor::Oracle => Ok(realized),
                Predictor::Sdsh => match spec {
                    None => Err(Error::Argument("SDSH predictor needs a spec".into())),
                    Some(spec) => {
                        let req = ForecastRequest {
                            t0,
                            window: cfg.sdsh_window,
                            horizon: delta,
                            n_paths: cfg.n_paths,
                            seed: point_seed(cfg.seed, day_id, di, j),
                        };
                        sdsh_forecast_serial(spec, path, &req)
                    }
                },
                Predictor::Acdp => {
                    if t0 >= next_refit - 1e-9 || acdp_params.is_none() {
                        let n = (cfg.acdp_window / delta).floor() as usize;
                        let series: Vec<u32> = (0..=n)
                            .filter_map(|i| {
                                let t = t0 - (n - i) as f64 * delta;
                                (t >= -1e-9).then(|| sample(t.max(0.0)))
                            })
                            .collect();
                        let init = acdp_params;
                        acdp_params = acdp_fit(&series, init.as_ref(), &cfg.acdp)
                            .or_else(|_| acdp_fit(&series, None, &cfg.acdp))
                            .ok();
                        while next_refit <= t0 + 1e-9 {
                            next_refit += cfg.acdp_refit;
                        }
                    }
                    match &acdp_params {
                        None => Err(Error::Init("ACDP fit failed".into())),
                        Some(p) => {
                            let hist: Vec<u32> = (0..=p.n_trunc)
                                .rev()
                                .filter_map(|i| {
                                    let t = t0 - i as f64 * delta;
                                    (t >= -1e-9).then(|| sample(t.max(0.0)))
                                })
                                .collect();
                            acdp_predict(p, &hist)
                        }
                    }
                }
            };
            match forecast {
                Ok(v) if v.is_finite() => {
                    acc[pi].sse += (v - realized).powi(2);
                    acc[pi].n += 1;
                }
                _ => acc[pi].failures += 1,
            }
        }
        j += 1;
    }
    acc
}

/// Single-threaded variant used inside the already parallel evaluation loop.
fn sdsh_forecast_serial(spec: &ModelSpec, history: &SpreadPath, req: &ForecastRequest) -> Result<f64> {
    let t0_ns = secs_to_nanos(req.t0);
    let start_ns = t0_ns - secs_to_nanos(req.window);
    let lo = history.events().partition_point(|e| e.time_ns <= start_ns);
    let hi = history.events().partition_point(|e| e.time_ns <= t0_ns);
    let baseline = Baseline::from_events(spec, &history.events()[lo..hi], t0_ns)?;
    let state = ExcitationState::cold(spec, history.spread_at(t0_ns));
    let mut sum = 0.0;
    for i in 0..req.n_paths as u64 {
        let mut rng = path_rng(req.seed, i);
        let p = simulate_with_rng(spec, &state, Some(&baseline), req.horizon, &mut rng, SimOptions::default())?;
        sum += p.final_spread() as f64;
    }
    Ok(sum / req.n_paths as f64)
}

/// MSE of each predictor at each horizon over the test days. `train_ids`
/// lists the days used to fit `spec`; overlap with `test` is an error.
pub fn evaluate(spec: Option<&ModelSpec>, train_ids: &[u64], test: &Dataset, cfg: &EvalConfig) -> Result<MseTable> {
    if let Some(d) = test.days.iter().find(|d| train_ids.contains(&d.id)) {
        return Err(Error::Argument(format!("test day {} is also a training day", d.id)));
    }
    if cfg.deltas.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::Argument("every Δ must be positive".into()));
    }
    if !(cfg.eval_end > cfg.eval_start) {
        return Err(Error::Argument("evaluation window is empty".into()));
    }
    if cfg.predictors.contains(&Predictor::Sdsh) && spec.is_none() {
        return Err(Error::Argument("SDSH predictor needs a spec".into()));
    }
    if let Some(s) = spec {
        s.validate()?;
    }
    let mut rows: Vec<MseRow> = cfg
        .predictors
        .iter()
        .map(|p| MseRow {
            predictor: *p,
            mse: Vec::new(),
            n_points: Vec::new(),
            failures: Vec::new(),
        })
        .collect();
    for (di, &delta) in cfg.deltas.iter().enumerate() {
        let per_day: Vec<Vec<Acc>> = test
            .days
            .par_iter()
            .map(|d| evaluate_day(spec, &d.path, d.id, di, delta, cfg))
            .collect();
        for (pi, row) in rows.iter_mut().enumerate() {
            let (mut sse, mut n, mut f) = (0.0, 0usize, 0usize);
            for day in &per_day {
                sse += day[pi].sse;
                n += day[pi].n;
                f += day[pi].failures;
            }
            row.mse.push(if n > 0 { sse / n as f64 } else { f64::NAN });
            row.n_points.push(n);
            row.failures.push(f);
        }
    }
    Ok(MseTable {
        deltas: cfg.deltas.clone(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{KernelParams, StateFunctions};

    fn flat_spec() -> ModelSpec {
        ModelSpec::new(
            1,
            vec![0.5, 0.5],
            KernelParams::zeros(2, vec![1.0]),
            StateFunctions {
                sbar: 2,
                values: vec![vec![1.0, 1.0], vec![0.0, 1.0]],
            },
            false,
        )
        .unwrap()
    }

    #[test]
    fn symmetric_walk_is_driftless_away_from_boundary() {
        let spec = flat_spec();
        let hist = SpreadPath::empty(5, secs_to_nanos(100.0)).unwrap();
        let mut req = ForecastRequest::new(100.0, 0.5, 7);
        req.n_paths = 20_000;
        let r = sdsh_forecast(&spec, &hist, &req).unwrap();
        // Var(S_Δ) = 2 μ Δ = 0.5 while the boundary is ~5σ away.
        let se = (0.5f64 / 20_000.0).sqrt();
        assert!((r.mean - 5.0).abs() < 4.0 * se, "{}", r.mean);
    }

    #[test]
    fn single_path_is_reproducible() {
        let spec = crate::catalog::demo();
        let hist = crate::simulate::simulate(&spec, 200.0, 2, 1).unwrap();
        let mut req = ForecastRequest::new(150.0, 10.0, 42);
        req.n_paths = 1;
        let a = sdsh_forecast(&spec, &hist, &req).unwrap();
        let b = sdsh_forecast(&spec, &hist, &req).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.samples, b.samples);
    }

    #[test]
    fn recent_downward_events_push_up_at_spread_one() {
        let spec = crate::catalog::demo();
        // spread 4 → 1 via three −1 jumps just before t0
        let evs = (0..3)
            .map(|i| crate::model::JumpEvent {
                time_ns: secs_to_nanos(57.0 + i as f64),
                etype: spec.etype(-1).unwrap(),
            })
            .collect();
        let hist = SpreadPath::new(4, secs_to_nanos(60.0), evs).unwrap();
        let mut req = ForecastRequest::new(60.0, 3.0, 5);
        req.n_paths = 2_000;
        let r = sdsh_forecast(&spec, &hist, &req).unwrap();
        assert_eq!(last_predict(&hist, 60.0), 1);
        assert!(r.mean > 1.0);
        assert!(r.window_events == 3);
    }

    #[test]
    fn acdp_predict_hand_cases() {
        let p = AcdpParams::new(0.7, 0.0, 0.0, 1.0);
        assert_eq!(acdp_predict(&p, &[3, 1, 9]).unwrap(), 1.7);
        let p = AcdpParams::new(0.5, 0.3, 0.0, 1.0);
        assert!((acdp_predict(&p, &[2, 4]).unwrap() - (1.0 + 0.5 + 0.3 * 3.0)).abs() < 1e-15);
        assert!(acdp_predict(&p, &[]).is_err());
    }

    #[test]
    fn truncated_matches_recursion_when_tail_negligible() {
        let p = AcdpParams::new(0.5, 0.3, 0.4, 1.0);
        assert!(p.beta.powi(p.n_trunc as i32) < 1e-12);
        let series: Vec<u32> = (0..500).map(|i| 1 + ((i * 7) % 5) as u32).collect();
        let mut lam = p.c / (1.0 - p.beta);
        for k in 1..=series.len() {
            lam = p.c + p.alpha * (series[k - 1] as f64 - 1.0) + p.beta * lam;
        }
        let pred = acdp_predict(&p, &series).unwrap();
        assert!((pred - 1.0 - lam).abs() < 1e-9);
    }

    #[test]
    fn dp_pmf_is_normalized_with_mean_near_lambda() {
        for (lam, g) in [(0.5, 1.0), (2.0, 0.5), (5.0, 3.0)] {
            let pmf = dp_pmf(lam, g);
            assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let mean: f64 = pmf.iter().enumerate().map(|(n, p)| n as f64 * p).sum();
            assert!((mean - lam).abs() < 0.15 * lam.max(1.0), "{lam} {g} {mean}");
        }
        // γ = 1 is exactly Poisson
        let pmf = dp_pmf(1.3, 1.0);
        let pois2 = (-1.3f64).exp() * 1.3 * 1.3 / 2.0;
        assert!((pmf[2] - pois2).abs() < 1e-12);
    }

    #[test]
    fn ln_gamma_matches_factorials() {
        let mut f = 1.0f64;
        for n in 1..20 {
            f *= n as f64;
            assert!((ln_factorial(n as f64) - f.ln()).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_series_fixed_point() {
        let series = vec![3u32; 300];
        let p = acdp_fit(&series, None, &AcdpFitOptions::default()).unwrap();
        let m = 2.0;
        let lam_star = (p.c + p.alpha * m) / (1.0 - p.beta);
        assert!((lam_star - m).abs() < 1e-2, "{p:?}");
        assert!((acdp_predict(&p, &series).unwrap() - 3.0).abs() < 1e-2);
    }

    #[test]
    fn short_series_rejected() {
        assert!(acdp_fit(&[2; 30], None, &AcdpFitOptions::default()).is_err());
    }

    #[test]
    fn oracle_has_zero_error_and_overlap_is_rejected() {
        let spec = crate::catalog::demo();
        let test = Dataset::from_paths(vec![crate::simulate::simulate(&spec, 400.0, 2, 9).unwrap()]);
        let cfg = EvalConfig {
            deltas: vec![5.0],
            predictors: vec![Predictor::Last, Predictor::Oracle],
            eval_start: 100.0,
            eval_end: 400.0,
            ..Default::default()
        };
        let t = evaluate(None, &[], &test, &cfg).unwrap();
        assert_eq!(t.row(Predictor::Oracle).unwrap().mse[0], 0.0);
        assert_eq!(t.row(Predictor::Last).unwrap().n_points[0], 60);
        assert!(evaluate(None, &[0], &test, &cfg).is_err());
    }

    #[test]
    fn constant_spread_last_is_exact() {
        let test = Dataset::from_paths(vec![SpreadPath::empty(2, secs_to_nanos(7200.0)).unwrap()]);
        let cfg = EvalConfig {
            deltas: vec![30.0],
            predictors: vec![Predictor::Last, Predictor::Acdp],
            ..Default::default()
        };
        let t = evaluate(None, &[], &test, &cfg).unwrap();
        assert_eq!(t.row(Predictor::Last).unwrap().mse[0], 0.0);
        assert!(t.row(Predictor::Acdp).unwrap().mse[0] < 1e-4);
    }
}
