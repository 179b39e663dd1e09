//! Bound-constrained quasi-Newton minimization (projected L-BFGS).
//!
//! Variables sitting on a bound with the gradient pushing outward are frozen
//! for the iteration; the two-loop recursion runs on the remaining ones and
//! the step is projected back onto the box with an Armijo backtracking search
//! along the projected path.

use std::collections::VecDeque;

#[derive(Debug, Clone, Copy)]
pub struct Options {
    pub max_iter: usize,
    pub memory: usize,
    /// Stop when the relative objective improvement stays below this for
    /// `stall_window` consecutive iterations.
    pub rel_tol: f64,
    pub stall_window: usize,
    /// Stop when the projected gradient infinity norm falls below this.
    pub pg_tol: f64,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            max_iter: 500,
            memory: 10,
            rel_tol: 1e-9,
            stall_window: 5,
            pg_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub x: Vec<f64>,
    pub fx: f64,
    /// Objective after each accepted iterate, starting with the initial point.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub pg_norm: f64,
}

fn project(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lo[i], hi[i]);
    }
}

fn projected_gradient_norm(x: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..x.len() {
        let stepped = (x[i] - g[i]).clamp(lo[i], hi[i]);
        m = m.max((stepped - x[i]).abs());
    }
    m
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `f` over the box `[lo, hi]`. `f(x, g)` returns the value and
/// writes the gradient into `g`; it may return a non-finite value to reject
/// a trial point.
pub fn minimize<F>(mut f: F, x0: &[f64], lo: &[f64], hi: &[f64], opts: Options) -> Outcome
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    assert!(lo.len() == n && hi.len() == n);
    let mut x = x0.to_vec();
    project(&mut x, lo, hi);
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    let mut trace = vec![fx];
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut stall = 0usize;
    let mut converged = false;
    let mut iterations = 0;
    let mut pg = projected_gradient_norm(&x, &g, lo, hi);
    if !fx.is_finite() {
        return Outcome {
            x,
            fx,
            trace,
            iterations,
            converged,
            pg_norm: pg,
        };
    }

    let mut gtrial = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut xt = vec![0.0; n];
    while iterations < opts.max_iter {
        if pg < opts.pg_tol {
            converged = true;
            break;
        }
        iterations += 1;

        let eps_bound = |i: usize| 1e-12 * (1.0 + x[i].abs());
        let active: Vec<bool> = (0..n)
            .map(|i| {
                (x[i] <= lo[i] + eps_bound(i) && g[i] > 0.0)
                    || (x[i] >= hi[i] - eps_bound(i) && g[i] < 0.0)
            })
            .collect();

        // two-loop recursion on free coordinates
        let mut q: Vec<f64> = (0..n).map(|i| if active[i] { 0.0 } else { g[i] }).collect();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * (0..n).filter(|&i| !active[i]).map(|i| s[i] * q[i]).sum::<f64>();
            for i in 0..n {
                if !active[i] {
                    q[i] -= a * y[i];
                }
            }
            alphas.push(a);
        }
        let gamma = hist
            .back()
            .map(|(s, y, _)| dot(s, y) / dot(y, y))
            .filter(|v| v.is_finite() && *v > 0.0)
            .unwrap_or_else(|| {
                let gn = q.iter().map(|v| v * v).sum::<f64>().sqrt();
                if gn > 0.0 {
                    1e-2 / gn.max(1e-2)
                } else {
                    1.0
                }
            });
        for v in q.iter_mut() {
            *v *= gamma;
        }
        for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
            let b = rho * (0..n).filter(|&i| !active[i]).map(|i| y[i] * q[i]).sum::<f64>();
            for i in 0..n {
                if !active[i] {
                    q[i] += s[i] * (a - b);
                }
            }
        }
        for i in 0..n {
            d[i] = if active[i] { 0.0 } else { -q[i] };
        }
        if dot(&d, &g) >= 0.0 {
            hist.clear();
            for i in 0..n {
                d[i] = if active[i] { 0.0 } else { -g[i] };
            }
            let gn = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            if gn > 0.0 {
                let scale = 1e-2 / gn.max(1e-2);
                d.iter_mut().for_each(|v| *v *= scale);
            }
        }

        // backtracking along the projected path
        let mut step = 1.0;
        let mut accepted = false;
        let mut ft = f64::INFINITY;
        for _ in 0..60 {
            for i in 0..n {
                xt[i] = x[i] + step * d[i];
            }
            project(&mut xt, lo, hi);
            let decrease: f64 = (0..n).map(|i| g[i] * (xt[i] - x[i])).sum();
            ft = f(&xt, &mut gtrial);
            if ft.is_finite() && ft <= fx + 1e-4 * decrease.min(0.0) && decrease < 0.0 {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            if hist.is_empty() {
                // no progress possible along steepest descent either
                converged = pg < opts.pg_tol.max(1e-4);
                break;
            }
            hist.clear();
            continue;
        }

        let s: Vec<f64> = (0..n).map(|i| xt[i] - x[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| gtrial[i] - g[i]).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if hist.len() == opts.memory {
                hist.pop_front();
            }
            hist.push_back((s, y, 1.0 / sy));
        }

        let rel = (fx - ft).abs() / fx.abs().max(1e-300);
        x.copy_from_slice(&xt);
        g.copy_from_slice(&gtrial);
        fx = ft;
        trace.push(fx);
        pg = projected_gradient_norm(&x, &g, lo, hi);

        if rel < opts.rel_tol {
            stall += 1;
            if stall >= opts.stall_window {
                converged = true;
                break;
            }
        } else {
            stall = 0;
        }
    }
    if pg < opts.pg_tol {
        converged = true;
    }
    Outcome {
        x,
        fx,
        trace,
        iterations,
        converged,
        pg_norm: pg,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock_unconstrained() {
        let f = |x: &[f64], g: &mut [f64]| {
            let (a, b) = (x[0], x[1]);
            g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
            g[1] = 200.0 * (b - a * a);
            (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
        };
        let inf = f64::INFINITY;
        let out = minimize(f, &[-1.2, 1.0], &[-inf, -inf], &[inf, inf], Options {
            max_iter: 2000,
            pg_tol: 1e-10,
            ..Default::default()
        });
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-5 && (out.x[1] - 1.0).abs() < 1e-5, "{:?}", out.x);
        assert!(out.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn bound_is_respected_and_active() {
        // min (x-(-2))^2 + (y-3)^2 with x ≥ 0, y ≤ 1
        let f = |x: &[f64], g: &mut [f64]| {
            g[0] = 2.0 * (x[0] + 2.0);
            g[1] = 2.0 * (x[1] - 3.0);
            (x[0] + 2.0).powi(2) + (x[1] - 3.0).powi(2)
        };
        let out = minimize(f, &[5.0, -4.0], &[0.0, f64::NEG_INFINITY], &[f64::INFINITY, 1.0], Options::default());
        assert!(out.converged);
        assert_eq!(out.x[0], 0.0);
        assert_eq!(out.x[1], 1.0);
    }
}
