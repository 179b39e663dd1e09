//! Simulates one hour of the demo configuration and prints a few summary
//! statistics of the resulting spread path.
//!
//! ```text
//! cargo run --release --example simulate_path [horizon_s] [seed]
//! ```

use sdsh::catalog;
use sdsh::model::ExcitationState;
use sdsh::simulate::simulate;
use sdsh::stats::occupancy;

fn main() -> sdsh::Result<()> {
    let mut args = std::env::args().skip(1);
    let horizon: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(3600.0);
    let seed: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(1);

    let spec = catalog::demo();
    let path = simulate(&spec, horizon, 2, seed)?;
    println!("{} events over {horizon} s, final spread {}", path.len(), path.final_spread());

    let up = path.events().iter().filter(|e| e.etype.size() > 0).count();
    println!("up jumps {up}, down jumps {}", path.len() - up);

    println!("time share by spread:");
    for (s, secs) in occupancy(&path) {
        println!("  {s:>3}  {:.4}", secs / horizon);
    }

    let end = ExcitationState::replay(&spec, &path)?;
    for e in sdsh::EventType::all(spec.k) {
        println!("intensity of {e} at the horizon: {:.4}/s", spec.intensity(&end, e)?);
    }
    Ok(())
}
