//! Distributional and correlation diagnostics on a synthetic dataset.
//!
//! ```text
//! cargo run --release --example statistics [days] [horizon_s]
//! ```

use sdsh::catalog;
use sdsh::io::{generate_synthetic, DatasetSummary};
use sdsh::stats::{
    acv, calendar_distribution, conditional_inter_event_times, event_distribution, jump_size_distribution,
    kernel_influence, recommend_k, spread_autocorrelation, AcvOptions, Averaging,
};

fn main() -> sdsh::Result<()> {
    let mut args = std::env::args().skip(1);
    let days: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(10);
    let horizon: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(7200.0);

    let spec = catalog::recovery();
    let data = generate_synthetic(&spec, days, horizon, 1, 5)?;
    println!("{}", DatasetSummary::of(&data, 0));

    let cal = calendar_distribution(&data, Averaging::Daily)?;
    let evt = event_distribution(&data, Averaging::Daily)?;
    println!("spread  calendar  event");
    for s in 1..=6 {
        println!("{s:>6}  {:.4}    {:.4}", cal.get(s), evt.get(s));
    }
    let jumps = jump_size_distribution(&data)?;
    println!("recommended K at 1%: {}", recommend_k(&jumps, 0.01));

    let groups = conditional_inter_event_times(&data);
    for ((a, b), v) in groups.iter().take(4) {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        println!("inter-event {a}->{b}: {} samples, mean {mean:.3} s", v.len());
    }

    let acf = spread_autocorrelation(&data, &[1.0, 10.0, 60.0], None, 0.1)?;
    println!("spread ACF at 1/10/60 s: {:?}", acf.values);

    let c = acv(&data, 0.1, &[0.5, 1.0, 2.0], AcvOptions::default())?;
    println!("increment ACV (δ = 0.1): {:?}", c.values);

    let rows = kernel_influence(&spec, &data)?;
    println!("kernel influence rows: {}", rows.len());
    Ok(())
}
