//! Monte-Carlo forecast of the spread Δ seconds ahead from one origin,
//! compared with the Last predictor and the realized value.
//!
//! ```text
//! cargo run --release --example single_forecast [t0] [horizon_s]
//! ```

use sdsh::catalog;
use sdsh::forecast::{last_predict, sdsh_forecast, ForecastRequest};
use sdsh::model::secs_to_nanos;
use sdsh::simulate::simulate;

fn main() -> sdsh::Result<()> {
    let mut args = std::env::args().skip(1);
    let t0: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(1800.0);
    let horizon: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(12.0);

    let spec = catalog::recovery();
    let day = simulate(&spec, t0 + horizon + 1.0, 1, 3)?;
    let req = ForecastRequest {
        n_paths: 1000,
        ..ForecastRequest::new(t0, horizon, 42)
    };
    let out = sdsh_forecast(&spec, &day, &req)?;
    let mut hist = vec![0usize; 8];
    for s in &out.samples {
        hist[(*s as usize).min(7)] += 1;
    }
    println!("spread at t0 {}, {} events in the window", out.spread_t0, out.window_events);
    println!("SDSH mean {:.3}, Last {}", out.mean, last_predict(&day, t0));
    println!("realized {}", day.spread_at(secs_to_nanos(t0 + horizon)));
    println!("sample distribution (7 = 7+): {:?}", &hist[1..]);
    Ok(())
}
