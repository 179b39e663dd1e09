//! Independent oracles shared by the integration tests.
//!
//! Nothing here reuses the crate's recursive excitation state: intensities
//! are evaluated from the defining sums over past events and integrated
//! numerically.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdsh::model::{EventType, KernelParams, ModelSpec, SpreadPath, StateFunctions};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `λ^e(t-)` from the defining sum: events strictly before `t` excite, the
/// state function is evaluated at the spread in force just before `t`.
pub fn brute_intensity(spec: &ModelSpec, path: &SpreadPath, t: f64, e: usize) -> f64 {
    let k = spec.k;
    let mut spread = path.s0() as i64;
    let mut acc = spec.mus[e];
    for ev in path.events() {
        let ti = ev.time_ns as f64 * 1e-9;
        if ti >= t {
            break;
        }
        spread += ev.etype.size() as i64;
        let src = ev.etype.index(k);
        for (l, beta) in spec.kernels.betas.iter().enumerate() {
            acc += spec.kernels.alphas[e][src][l] * beta * (-beta * (t - ti)).exp();
        }
    }
    spec.statefns.value(e, spread as u32) * acc
}

/// `z[src][l](t-) = Σ_{t_i < t, e_i = src} β_l e^{-β_l (t - t_i)}`.
pub fn brute_z(spec: &ModelSpec, path: &SpreadPath, t: f64) -> Vec<Vec<f64>> {
    let mut z = vec![vec![0.0; spec.n_decays()]; spec.n_types()];
    for ev in path.events() {
        let ti = ev.time_ns as f64 * 1e-9;
        if ti >= t {
            break;
        }
        let src = ev.etype.index(spec.k);
        for (l, beta) in spec.kernels.betas.iter().enumerate() {
            z[src][l] += beta * (-beta * (t - ti)).exp();
        }
    }
    z
}

const GK_X: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const GK_WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = GK_WK[7] * fc;
    let mut g = GK_WG[3] * fc;
    for i in 0..7 {
        let dx = h * GK_X[i];
        let s = f(c - dx) + f(c + dx);
        k += GK_WK[i] * s;
        if i % 2 == 1 {
            g += GK_WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss–Kronrod (7, 15) quadrature to relative tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (v, err) = gk15(f, a, b);
        if err <= tol * v.abs().max(1e-300) || depth > 40 || b - a < 1e-15 {
            return v;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, tol, depth + 1) + rec(f, m, b, tol, depth + 1)
    }
    if b <= a {
        return 0.0;
    }
    rec(f, a, b, tol, 0)
}

/// `(log-likelihood, total compensator)` by brute-force intensities and
/// quadrature on every inter-event interval.
pub fn quadrature_loglik(spec: &ModelSpec, path: &SpreadPath) -> (f64, f64) {
    let mut knots = vec![0.0];
    knots.extend(path.events().iter().map(|e| e.time_ns as f64 * 1e-9));
    knots.push(path.horizon());
    let mut comp = 0.0;
    for e in 0..spec.n_types() {
        for w in knots.windows(2) {
            // open interval: the left-limit convention only matters at knots
            comp += integrate(&|t| brute_intensity(spec, path, t, e), w[0], w[1], 1e-13);
        }
    }
    let mut ll = -comp;
    for ev in path.events() {
        ll += brute_intensity(spec, path, ev.time_ns as f64 * 1e-9, ev.etype.index(spec.k)).ln();
    }
    (ll, comp)
}

/// Asymptotic Kolmogorov survival `P(K > x)` where `K = sup |B_t|` of a Brownian bridge.
pub fn kolmogorov_survival(x: f64) -> f64 {
    if x < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// One-sample KS test against Exp(1): `(D, p-value)` with the usual
/// finite-sample correction `(√n + 0.12 + 0.11/√n) D`.
pub fn ks_exp1(samples: &[f64]) -> (f64, f64) {
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    for (i, v) in x.iter().enumerate() {
        let cdf = 1.0 - (-v).exp();
        d = d.max((i as f64 + 1.0) / n - cdf).max(cdf - i as f64 / n);
    }
    let sn = n.sqrt();
    (d, kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d))
}

/// Random spec with `K ∈ {1, 2}`, up to three decays and positive state functions.
pub fn random_spec<R: Rng>(rng: &mut R, k: usize, l: usize) -> ModelSpec {
    let n = 2 * k;
    let mut betas: Vec<f64> = (0..l).map(|_| 10f64.powf(rng.random_range(-0.3..1.7))).collect();
    betas.sort_by(f64::total_cmp);
    let alphas = (0..n)
        .map(|_| {
            (0..n)
                .map(|_| (0..l).map(|_| rng.random_range(0.0..0.4) / (n * l) as f64).collect())
                .collect()
        })
        .collect();
    let sbar = k as u32 + 2;
    let values = (0..n)
        .map(|i| {
            let e = EventType::from_index(i, k);
            (1..=sbar)
                .map(|s| {
                    if StateFunctions::is_structural_zero(e, s) {
                        0.0
                    } else {
                        rng.random_range(0.3..2.0)
                    }
                })
                .collect()
        })
        .collect();
    ModelSpec::new(
        k,
        (0..n).map(|_| rng.random_range(0.2..1.0)).collect(),
        KernelParams { betas, alphas },
        StateFunctions { sbar, values },
        false,
    )
    .expect("random spec is valid")
}

/// Simulated path truncated to at most `max_events` events.
pub fn small_path(spec: &ModelSpec, seed: u64, max_events: usize) -> SpreadPath {
    let p = sdsh::simulate::simulate(spec, 60.0, 2 + spec.k as u32, seed).expect("simulation");
    if p.len() <= max_events {
        return p;
    }
    let cut = p.events()[max_events - 1].time_ns;
    p.window(0, cut + 1_000_000).expect("window")
}

/// Trapezoid `∫|a - b| / ∫|b|` over a shared grid.
pub fn relative_l1(grid: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let (mut err, mut norm) = (0.0, 0.0);
    for i in 1..grid.len() {
        let dt = grid[i] - grid[i - 1];
        err += 0.5 * dt * ((a[i] - b[i]).abs() + (a[i - 1] - b[i - 1]).abs());
        norm += 0.5 * dt * (b[i].abs() + b[i - 1].abs());
    }
    err / norm
}

/// Mutable handles to every parameter that is free in the likelihood:
/// `(kind, e, j, l)` with kind 0 = μ, 1 = α, 2 = f.
pub fn parameter_slots(spec: &ModelSpec) -> Vec<(u8, usize, usize, usize)> {
    let n = spec.n_types();
    let mut out = Vec::new();
    for e in 0..n {
        out.push((0, e, 0, 0));
        for j in 0..n {
            for l in 0..spec.n_decays() {
                out.push((1, e, j, l));
            }
        }
        let et = EventType::from_index(e, spec.k);
        for s in 1..=spec.statefns.sbar {
            if !StateFunctions::is_structural_zero(et, s) {
                out.push((2, e, s as usize - 1, 0));
            }
        }
    }
    out
}

pub fn slot_mut(spec: &mut ModelSpec, slot: (u8, usize, usize, usize)) -> &mut f64 {
    match slot {
        (0, e, _, _) => &mut spec.mus[e],
        (1, e, j, l) => &mut spec.kernels.alphas[e][j][l],
        (_, e, s, _) => &mut spec.statefns.values[e][s],
    }
}

pub fn gradient_slot(g: &sdsh::likelihood::Gradient, slot: (u8, usize, usize, usize)) -> f64 {
    match slot {
        (0, e, _, _) => g.mu[e],
        (1, e, j, l) => g.alpha[e][j][l],
        (_, e, s, _) => g.f[e][s],
    }
}

/// Richardson-extrapolated central differences of the log-likelihood.
pub fn fd_gradient(spec: &ModelSpec, data: &sdsh::likelihood::Dataset) -> Vec<f64> {
    let ll = |s: &ModelSpec| sdsh::likelihood::log_likelihood(s, data).unwrap();
    parameter_slots(spec)
        .into_iter()
        .map(|slot| {
            let x = *slot_mut(&mut spec.clone(), slot);
            let h = 1e-4 * x.abs().max(1e-2);
            let d = |h: f64| {
                let mut p = spec.clone();
                *slot_mut(&mut p, slot) = x + h;
                let fp = ll(&p);
                *slot_mut(&mut p, slot) = x - h;
                let fm = ll(&p);
                (fp - fm) / (2.0 * h)
            };
            (4.0 * d(h / 2.0) - d(h)) / 3.0
        })
        .collect()
}

/// `max_i |analytic_i - fd_i| / max_i |fd_i|`.
pub fn gradient_relative_error(spec: &ModelSpec, data: &sdsh::likelihood::Dataset) -> f64 {
    let g = sdsh::likelihood::gradient(spec, data).unwrap();
    let fd = fd_gradient(spec, data);
    let slots = parameter_slots(spec);
    let scale = fd.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    slots
        .iter()
        .zip(&fd)
        .map(|(s, f)| (gradient_slot(&g, *s) - f).abs())
        .fold(0.0, f64::max)
        / scale
}

/// Rescales `f^e` by `c[e]` and divides `μ^e`, `α^{e,·}` by `c[e]`.
pub fn rescale(spec: &ModelSpec, c: &[f64]) -> ModelSpec {
    let mut s = spec.clone();
    for e in 0..s.n_types() {
        s.mus[e] /= c[e];
        for row in s.kernels.alphas[e].iter_mut() {
            for a in row.iter_mut() {
                *a /= c[e];
            }
        }
        for f in s.statefns.values[e].iter_mut() {
            *f *= c[e];
        }
    }
    s
}

/// Time-rescaled residuals per type, from the closed-form integral of the
/// defining sum on each inter-event interval (no recursion).
pub fn brute_residuals(spec: &ModelSpec, path: &SpreadPath) -> Vec<Vec<f64>> {
    let n = spec.n_types();
    let times: Vec<f64> = path.events().iter().map(|e| e.time_ns as f64 * 1e-9).collect();
    let types: Vec<usize> = path.events().iter().map(|e| e.etype.index(spec.k)).collect();
    let pre = path.pre_spreads();
    let mut out = vec![Vec::new(); n];
    let mut acc = vec![0.0; n];
    let mut a = 0.0;
    for (i, &b) in times.iter().enumerate() {
        for e in 0..n {
            let f = spec.statefns.value(e, pre[i]);
            if f == 0.0 {
                continue;
            }
            let mut v = spec.mus[e] * (b - a);
            for j in 0..i {
                for (l, beta) in spec.kernels.betas.iter().enumerate() {
                    let w = spec.kernels.alphas[e][types[j]][l];
                    v += w * ((-beta * (a - times[j])).exp() - (-beta * (b - times[j])).exp());
                }
            }
            acc[e] += f * v;
        }
        out[types[i]].push(acc[types[i]]);
        acc[types[i]] = 0.0;
        a = b;
    }
    out
}
