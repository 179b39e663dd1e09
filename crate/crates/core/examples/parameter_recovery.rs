//! Simulates 50 days of 5000 s from the two-exponential catalog spec and
//! refits it on a coarser decay grid.
//!
//! ```text
//! cargo run --release --example parameter_recovery [days] [horizon_s]
//! ```

use std::time::Instant;

use sdsh::catalog;
use sdsh::fit::{fit, FitConfig};
use sdsh::io::generate_synthetic;
use sdsh::model::EventType;
use sdsh::stats::{kernel_curve, log_grid};

fn main() -> sdsh::Result<()> {
    let mut args = std::env::args().skip(1);
    let days: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(50);
    let horizon: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(5000.0);

    let truth = catalog::recovery();
    let t = Instant::now();
    let data = generate_synthetic(&truth, days, horizon, 1, 2024)?;
    println!("simulated {} events in {:.1} s", data.n_events(), t.elapsed().as_secs_f64());

    let cfg = FitConfig::new(1, vec![10.0, 100.0, 1000.0], 4);
    let rep = fit(&data, &cfg, None)?;
    println!(
        "fit: loglik {:.3}, {} iterations, converged {}, {:.1} s",
        rep.loglik, rep.iterations, rep.converged, rep.elapsed_seconds
    );
    println!("mu+ {:.4} (true 0.3)  mu- {:.4} (true 0.2)", rep.spec.mus[0], rep.spec.mus[1]);
    for e in 0..2 {
        let est: Vec<String> = rep.spec.statefns.values[e].iter().map(|v| format!("{v:.3}")).collect();
        let tru: Vec<String> = truth.statefns.values[e].iter().map(|v| format!("{v:.3}")).collect();
        println!("f{}: {} (true {})", EventType::from_index(e, 1), est.join(" "), tru.join(" "));
    }
    let grid = log_grid(1e-3, 1.0, 200);
    for tgt in EventType::all(1) {
        for src in EventType::all(1) {
            let a = kernel_curve(&rep.spec, tgt, src, &grid);
            let b = kernel_curve(&truth, tgt, src, &grid);
            let (mut err, mut norm) = (0.0, 0.0);
            for i in 1..grid.len() {
                let dt = grid[i] - grid[i - 1];
                err += 0.5 * dt * ((a[i].1 - b[i].1).abs() + (a[i - 1].1 - b[i - 1].1).abs());
                norm += 0.5 * dt * (b[i].1.abs() + b[i - 1].1.abs());
            }
            println!("phi[{tgt},{src}] integrated relative error {:.3}", err / norm);
        }
    }
    Ok(())
}
