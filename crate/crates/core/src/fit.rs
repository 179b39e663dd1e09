//! Maximum-likelihood estimation over a fixed decay grid.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{free_parameter_count, Dataset, DatasetStats};
use crate::model::{EventType, KernelParams, ModelSpec, StateFunctions};
use crate::optim;

/// Lower bound on every baseline.
pub const MU_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaMode {
    #[default]
    NonNegative,
    Signed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    #[serde(rename = "K")]
    pub k: usize,
    pub betas: Vec<f64>,
    pub sbar: u32,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_pg_tol")]
    pub pg_tol: f64,
    #[serde(default)]
    pub alpha_mode: AlphaMode,
    #[serde(default)]
    pub min_events: usize,
    /// Starting value for every kernel weight.
    #[serde(default = "default_alpha_init")]
    pub alpha_init: f64,
}

fn default_max_iter() -> usize {
    500
}
fn default_rel_tol() -> f64 {
    1e-9
}
fn default_pg_tol() -> f64 {
    1e-6
}
fn default_alpha_init() -> f64 {
    0.01
}

impl FitConfig {
    pub fn new(k: usize, betas: Vec<f64>, sbar: u32) -> Self {
        FitConfig {
            k,
            betas,
            sbar,
            max_iter: default_max_iter(),
            rel_tol: default_rel_tol(),
            pg_tol: default_pg_tol(),
            alpha_mode: AlphaMode::NonNegative,
            min_events: 0,
            alpha_init: default_alpha_init(),
        }
    }

    /// Log-spaced grid `β_l = β_1 10^{l-1}`.
    pub fn log_grid(beta1: f64, l: usize) -> Vec<f64> {
        (0..l).map(|i| beta1 * 10f64.powi(i as i32)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("K must be ≥ 1".into()));
        }
        if self.betas.is_empty() || self.betas.iter().any(|b| !(*b > 0.0)) {
            return Err(Error::Config("betas must be non-empty and positive".into()));
        }
        if self.betas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("betas must be strictly increasing".into()));
        }
        if self.sbar as usize <= self.k {
            return Err(Error::Config(format!("sbar = {} must exceed K = {}", self.sbar, self.k)));
        }
        Ok(())
    }

    pub fn free_parameters(&self) -> usize {
        free_parameter_count(self.k, self.betas.len(), self.sbar)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub config: FitConfig,
    pub spec: ModelSpec,
    pub loglik: f64,
    /// Log-likelihood after each accepted iterate.
    pub trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub n_free_params: usize,
    pub n_days: usize,
    pub n_events: usize,
    pub days_dropped: usize,
    pub clamp_count: usize,
    pub projected_gradient_norm: f64,
    pub elapsed_seconds: f64,
}

/// Where each optimizer coordinate lives in the spec.
#[derive(Debug, Clone)]
struct Layout {
    k: usize,
    nl: usize,
    sbar: usize,
    /// `(type, bucket)` of each free `f` entry.
    f_free: Vec<(usize, usize)>,
}

impl Layout {
    fn new(k: usize, nl: usize, sbar: u32) -> Self {
        let mut f_free = Vec::new();
        for e in EventType::all(k) {
            let first = StateFunctions::first_free_spread(e);
            for s in 1..=sbar {
                if !StateFunctions::is_structural_zero(e, s) && s != first {
                    f_free.push((e.index(k), s as usize - 1));
                }
            }
        }
        Layout {
            k,
            nl,
            sbar: sbar as usize,
            f_free,
        }
    }

    fn n(&self) -> usize {
        let nt = 2 * self.k;
        nt + nt * nt * self.nl + self.f_free.len()
    }

    fn pack(&self, spec: &ModelSpec) -> Vec<f64> {
        let mut x = spec.mus.clone();
        for row in &spec.kernels.alphas {
            for cell in row {
                x.extend_from_slice(cell);
            }
        }
        for &(e, b) in &self.f_free {
            x.push(spec.statefns.values[e][b]);
        }
        x
    }

    fn unpack_into(&self, x: &[f64], spec: &mut ModelSpec) {
        let nt = 2 * self.k;
        spec.mus.copy_from_slice(&x[..nt]);
        let mut i = nt;
        for row in spec.kernels.alphas.iter_mut() {
            for cell in row.iter_mut() {
                cell.copy_from_slice(&x[i..i + self.nl]);
                i += self.nl;
            }
        }
        for &(e, b) in &self.f_free {
            spec.statefns.values[e][b] = x[i];
            i += 1;
        }
    }

    fn pack_gradient(&self, g: &crate::likelihood::Gradient, out: &mut [f64]) {
        let nt = 2 * self.k;
        out[..nt].copy_from_slice(&g.mu);
        let mut i = nt;
        for row in &g.alpha {
            for cell in row {
                out[i..i + self.nl].copy_from_slice(cell);
                i += self.nl;
            }
        }
        for &(e, b) in &self.f_free {
            out[i] = g.f[e][b];
            i += 1;
        }
    }

    fn bounds(&self, mode: AlphaMode) -> (Vec<f64>, Vec<f64>) {
        let nt = 2 * self.k;
        let mut lo = vec![MU_FLOOR; nt];
        let a_lo = match mode {
            AlphaMode::NonNegative => 0.0,
            AlphaMode::Signed => f64::NEG_INFINITY,
        };
        lo.extend(std::iter::repeat(a_lo).take(nt * nt * self.nl));
        lo.extend(std::iter::repeat(0.0).take(self.f_free.len()));
        let hi = vec![f64::INFINITY; lo.len()];
        (lo, hi)
    }

    fn sbar(&self) -> usize {
        self.sbar
    }
}

/// Rescales each `f^e` so its first non-zero entry is 1, moving the factor
/// into `μ^e` and `α[e][·][·]`. Leaves the likelihood unchanged.
pub fn normalize(spec: &mut ModelSpec) {
    let k = spec.k;
    for e in EventType::all(k) {
        let i = e.index(k);
        let Some(&c) = spec.statefns.values[i].iter().find(|v| **v > 0.0) else {
            continue;
        };
        if c == 1.0 {
            continue;
        }
        for v in spec.statefns.values[i].iter_mut() {
            *v /= c;
        }
        spec.mus[i] *= c;
        for cell in spec.kernels.alphas[i].iter_mut() {
            for a in cell.iter_mut() {
                *a *= c;
            }
        }
    }
}

/// Starting point: per-type empirical rates for `μ`, uniform `α`, and `f`
/// from empirical per-spread event rates normalized at the anchor.
fn initial_spec(stats: &DatasetStats, data: &Dataset, cfg: &FitConfig) -> Result<ModelSpec> {
    let k = cfg.k;
    let nt = 2 * k;
    let sbar = cfg.sbar as usize;
    let counts = stats.counts();
    let occ = stats.occupancy();
    let total_time = data.total_time();
    if !(total_time > 0.0) {
        return Err(Error::Init("dataset has zero total duration".into()));
    }
    let mut mus = Vec::with_capacity(nt);
    let mut f = vec![vec![0.0; sbar]; nt];
    for e in EventType::all(k) {
        let i = e.index(k);
        let n_e: f64 = counts[i].iter().sum();
        mus.push((n_e / total_time).max(1e-6));
        let first = StateFunctions::first_free_spread(e) as usize - 1;
        let rates: Vec<f64> = (0..sbar)
            .map(|b| if occ[b] > 0.0 { counts[i][b] / occ[b] } else { f64::NAN })
            .collect();
        let anchor = rates[first];
        for b in first..sbar {
            let r = rates[b];
            f[i][b] = if b == first {
                1.0
            } else if r.is_finite() && anchor.is_finite() && anchor > 0.0 {
                // small floor keeps unobserved entries off the bound
                (r / anchor).max(1e-3)
            } else {
                1.0
            };
        }
    }
    let alphas = vec![vec![vec![cfg.alpha_init; cfg.betas.len()]; nt]; nt];
    ModelSpec::new(
        k,
        mus,
        KernelParams {
            betas: cfg.betas.clone(),
            alphas,
        },
        StateFunctions {
            sbar: cfg.sbar,
            values: f,
        },
        cfg.alpha_mode == AlphaMode::Signed,
    )
}

/// Maximizes the log-likelihood of `data` over `μ`, `α` and the free `f`
/// entries for the decay grid in `config`.
pub fn fit(data: &Dataset, config: &FitConfig, init: Option<&ModelSpec>) -> Result<FitReport> {
    config.validate()?;
    let started = Instant::now();
    let mut data = data.clone();
    let dropped = data.retain_min_events(config.min_events);
    if data.days.is_empty() {
        return Err(Error::Argument(format!(
            "no days left after requiring {} events per day",
            config.min_events
        )));
    }
    if data.max_jump() > config.k {
        return Err(Error::Argument(format!(
            "data has jumps of size {} but K = {}",
            data.max_jump(),
            config.k
        )));
    }
    let stats = DatasetStats::new(&data, config.k, &config.betas, config.sbar)?;
    let n_events = stats.n_events();
    let scale = 1.0 / (n_events.max(1) as f64);

    let mut spec = match init {
        Some(s) => {
            if s.k != config.k || s.betas() != config.betas.as_slice() || s.statefns.sbar != config.sbar {
                return Err(Error::Init("initial spec does not match the fit configuration".into()));
            }
            let mut s = s.clone();
            s.signed_alpha = config.alpha_mode == AlphaMode::Signed;
            normalize(&mut s);
            for m in s.mus.iter_mut() {
                *m = m.max(MU_FLOOR);
            }
            s
        }
        None => initial_spec(&stats, &data, config)?,
    };

    let layout = Layout::new(config.k, config.betas.len(), config.sbar);
    debug_assert_eq!(layout.n(), config.free_parameters());
    debug_assert_eq!(layout.sbar(), config.sbar as usize);
    let x0 = layout.pack(&spec);
    let (lo, hi) = layout.bounds(config.alpha_mode);

    let init_eval = stats.evaluate(&spec)?;
    if !init_eval.value.is_finite() {
        return Err(Error::Init(format!(
            "log-likelihood at the initial point is {} ({} impossible events)",
            init_eval.value, init_eval.impossible_events
        )));
    }

    let mut work = spec.clone();
    let objective = |x: &[f64], g: &mut [f64]| -> f64 {
        layout.unpack_into(x, &mut work);
        match stats.evaluate_with_gradient(&work) {
            Ok((ev, grad)) if ev.value.is_finite() => {
                layout.pack_gradient(&grad, g);
                for v in g.iter_mut() {
                    *v *= -scale;
                }
                -ev.value * scale
            }
            _ => f64::INFINITY,
        }
    };
    let out = optim::minimize(
        objective,
        &x0,
        &lo,
        &hi,
        optim::Options {
            max_iter: config.max_iter,
            rel_tol: config.rel_tol,
            pg_tol: config.pg_tol,
            ..Default::default()
        },
    );

    layout.unpack_into(&out.x, &mut spec);
    normalize(&mut spec);
    spec.validate()?;
    let final_eval = stats.evaluate(&spec)?;
    let trace = out.trace.iter().map(|v| -v / scale).collect();
    Ok(FitReport {
        config: config.clone(),
        spec,
        loglik: final_eval.value,
        trace,
        converged: out.converged,
        iterations: out.iterations,
        n_free_params: layout.n(),
        n_days: data.days.len(),
        n_events,
        days_dropped: dropped,
        clamp_count: final_eval.clamped_events,
        projected_gradient_norm: out.pg_norm,
        elapsed_seconds: started.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::likelihood::log_likelihood;
    use crate::simulate::simulate;

    #[test]
    fn layout_matches_parameter_formula() {
        for (k, l, s) in [(1, 3, 4), (2, 6, 5), (2, 6, 8), (1, 6, 2)] {
            assert_eq!(Layout::new(k, l, s).n(), free_parameter_count(k, l, s));
        }
    }

    #[test]
    fn normalize_preserves_likelihood() {
        let spec = catalog::recovery();
        let path = simulate(&spec, 300.0, 1, 4).unwrap();
        let data = Dataset::from_paths(vec![path]);
        let mut scaled = spec.clone();
        scaled.statefns.values[0].iter_mut().for_each(|v| *v *= 2.5);
        scaled.mus[0] /= 2.5;
        scaled.kernels.alphas[0].iter_mut().flatten().for_each(|a| *a /= 2.5);
        let l0 = log_likelihood(&spec, &data).unwrap();
        let l1 = log_likelihood(&scaled, &data).unwrap();
        assert!((l0 - l1).abs() < 1e-9);
        normalize(&mut scaled);
        assert!(scaled.statefns.is_normalized(1));
        assert!((scaled.mus[0] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn poisson_data_recovers_rates() {
        let spec = ModelSpec::new(
            1,
            vec![0.5, 0.5],
            KernelParams::zeros(2, vec![1.0]),
            StateFunctions {
                sbar: 2,
                values: vec![vec![1.0, 1.0], vec![0.0, 1.0]],
            },
            false,
        )
        .unwrap();
        let paths = (0..10).map(|i| simulate(&spec, 2000.0, 1, i).unwrap()).collect();
        let data = Dataset::from_paths(paths);
        let cfg = FitConfig::new(1, vec![1.0, 10.0], 2);
        let rep = fit(&data, &cfg, None).unwrap();
        assert!(rep.converged, "{rep:?}");
        // Poisson MLE: μ = N^e / (time where f^e > 0)
        let stats = DatasetStats::new(&data, 1, &[1.0, 10.0], 2).unwrap();
        let counts = stats.counts();
        let occ = stats.occupancy();
        let mu_plus = counts[0].iter().sum::<f64>() / (occ[0] + occ[1]);
        let se = (mu_plus / (occ[0] + occ[1])).sqrt();
        assert!((rep.spec.mus[0] - 0.5).abs() < 3.0 * se, "{} vs {mu_plus}", rep.spec.mus[0]);
        let total_alpha: f64 = rep.spec.kernels.alphas.iter().flatten().flatten().sum();
        assert!(total_alpha < 0.1, "α total {total_alpha}");
        // trace is non-decreasing
        assert!(rep.trace.windows(2).all(|w| w[1] >= w[0] - 1e-9 * w[0].abs()));
    }

    #[test]
    fn rejects_empty_after_filter() {
        let spec = catalog::demo();
        let data = Dataset::from_paths(vec![simulate(&spec, 10.0, 1, 1).unwrap()]);
        let mut cfg = FitConfig::new(1, vec![1.0], 3);
        cfg.min_events = 1_000_000;
        assert!(matches!(fit(&data, &cfg, None), Err(Error::Argument(_))));
    }

    #[test]
    fn config_validation() {
        assert!(FitConfig::new(1, vec![10.0, 1.0], 3).validate().is_err());
        assert!(FitConfig::new(2, vec![1.0], 2).validate().is_err());
        assert_eq!(FitConfig::log_grid(0.1, 3), vec![0.1, 1.0, 10.0]);
    }
}
