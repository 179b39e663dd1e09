//! Fits the autoregressive conditional double-Poisson benchmark to a
//! simulated count series and forecasts one step ahead.
//!
//! ```text
//! cargo run --release --example acdp_benchmark [len] [seed]
//! ```

use sdsh::forecast::{acdp_fit, acdp_predict, simulate_acdp, AcdpFitOptions, AcdpObjective, AcdpParams};

fn main() -> sdsh::Result<()> {
    let mut args = std::env::args().skip(1);
    let len: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(10_000);
    let seed: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(7);

    let truth = AcdpParams::new(0.6, 0.35, 0.45, 2.0);
    let series = simulate_acdp(&truth, len, seed)?;
    for objective in [AcdpObjective::Unnormalized, AcdpObjective::Normalized] {
        let p = acdp_fit(
            &series,
            None,
            &AcdpFitOptions {
                objective,
                ..Default::default()
            },
        )?;
        println!(
            "{objective:?}: c {:.3} α {:.3} β {:.3} γ {:.3}; next value {:.3}",
            p.c,
            p.alpha,
            p.beta,
            p.gamma,
            acdp_predict(&p, &series)?
        );
    }
    println!("truth: c 0.6 α 0.35 β 0.45 γ 2");
    Ok(())
}
