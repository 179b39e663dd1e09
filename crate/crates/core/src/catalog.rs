//! Ready-made model configurations used by the examples, tests and CLI.

use crate::model::{KernelParams, ModelSpec, StateFunctions};

/// Single-exponential K = 1 configuration with strong mean reversion above
/// spread 2: `β = 1`, self weights 0.1, cross weights 0.2, `μ^± = 0.3`,
/// `f^+ = (1, 0.7, 0.3…)`, `f^- = (0, 1, 5…)`.
pub fn demo() -> ModelSpec {
    ModelSpec::new(
        1,
        vec![0.3, 0.3],
        KernelParams {
            betas: vec![1.0],
            alphas: vec![vec![vec![0.1], vec![0.2]], vec![vec![0.2], vec![0.1]]],
        },
        StateFunctions {
            sbar: 3,
            values: vec![vec![1.0, 0.7, 0.3], vec![0.0, 1.0, 5.0]],
        },
        false,
    )
    .expect("demo spec is valid")
}

/// Two-exponential K = 1 configuration used for parameter-recovery runs.
///
/// Kernels (rows = target `+,-`, columns = source `+,-`):
///
/// ```text
/// φ(t) = [[2, 6], [10, 0]] e^{-20 t} + [[4, 20], [20, 4]] e^{-200 t}
/// ```
///
/// so each weight is the displayed coefficient divided by its decay rate.
pub fn recovery() -> ModelSpec {
    let betas = vec![20.0, 200.0];
    let coef1 = [[2.0, 6.0], [10.0, 0.0]];
    let coef2 = [[4.0, 20.0], [20.0, 4.0]];
    let alphas = (0..2)
        .map(|e| {
            (0..2)
                .map(|s| vec![coef1[e][s] / betas[0], coef2[e][s] / betas[1]])
                .collect()
        })
        .collect();
    ModelSpec::new(
        1,
        vec![0.3, 0.2],
        KernelParams { betas, alphas },
        StateFunctions {
            sbar: 4,
            values: vec![vec![1.0, 0.8, 0.5, 0.2], vec![0.0, 1.0, 2.0, 3.0]],
        },
        false,
    )
    .expect("recovery spec is valid")
}

/// Slow-memory K = 1 configuration with contrarian cross-excitation on three
/// time scales (0.1, 1 and 10 s⁻¹). The spread relaxes over tens of seconds,
/// which makes increment autocovariances measurable at multi-second lags.
pub fn slow_memory() -> ModelSpec {
    let betas = vec![0.1, 1.0, 10.0];
    let alphas = vec![
        vec![vec![0.02, 0.02, 0.02], vec![0.10, 0.15, 0.15]],
        vec![vec![0.10, 0.15, 0.15], vec![0.02, 0.02, 0.02]],
    ];
    ModelSpec::new(
        1,
        vec![0.08, 0.08],
        KernelParams { betas, alphas },
        StateFunctions {
            sbar: 5,
            values: vec![vec![1.0, 0.8, 0.6, 0.4, 0.2], vec![0.0, 1.0, 1.5, 2.0, 2.5]],
        },
        false,
    )
    .expect("slow-memory spec is valid")
}
