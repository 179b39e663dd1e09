//! Increment autocovariance at several increment widths, accumulated over
//! many long simulated days.
//!
//! ```text
//! cargo run --release --example acv_scaling [n_days] [day_s]
//! ```

use std::time::Instant;

use sdsh::catalog;
use sdsh::io::generate_synthetic;
use sdsh::stats::{acv, AcvOptions};

fn main() -> sdsh::Result<()> {
    let mut args = std::env::args().skip(1);
    let n_days: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(20);
    let day: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(1e6);
    let spec = catalog::slow_memory();
    let deltas = [0.01, 0.1, 1.0];
    let taus = [10.0, 12.5, 15.0, 20.0, 30.0, 50.0];
    let opts = AcvOptions {
        min_ratio: 2.0,
        slot_length: Some(7200.0),
    };
    let t = Instant::now();
    let mut sums = vec![vec![0.0; taus.len()]; deltas.len()];
    let batch = 10;
    let mut done = 0;
    let mut events = 0;
    while done < n_days {
        let n = batch.min(n_days - done);
        let data = generate_synthetic(&spec, n, day, 1, 1000 + done as u64)?;
        events += data.n_events();
        for (di, d) in deltas.iter().enumerate() {
            let c = acv(&data, *d, &taus, opts)?;
            for (i, v) in c.values.iter().enumerate() {
                sums[di][i] += v * n as f64;
            }
        }
        done += n;
    }
    println!("{events} events over {} s ({:.1} s)", n_days as f64 * day, t.elapsed().as_secs_f64());
    print!("{:>8}", "tau");
    for d in deltas {
        print!("{:>14}", format!("-ACV d={d}"));
    }
    println!();
    for (i, tau) in taus.iter().enumerate() {
        print!("{tau:>8}");
        for s in &sums {
            print!("{:>14.6e}", -s[i] / n_days as f64);
        }
        println!();
    }
    Ok(())
}
