//! Trains on 30 synthetic two-hour days and compares the Last, ACDP and SDSH
//! predictors on 20 further days over the second hour.
//!
//! ```text
//! cargo run --release --example forecast_benchmark [train_days] [test_days]
//! ```

use std::time::Instant;

use sdsh::catalog;
use sdsh::fit::{fit, FitConfig};
use sdsh::forecast::{evaluate, EvalConfig};
use sdsh::io::generate_synthetic;

fn main() -> sdsh::Result<()> {
    let mut args = std::env::args().skip(1);
    let n_train: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(30);
    let n_test: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(20);
    let truth = catalog::recovery();
    let all = generate_synthetic(&truth, n_train + n_test, 7200.0, 1, 77)?;
    let (train_days, test_days) = all.days.split_at(n_train);
    let train = sdsh::likelihood::Dataset {
        days: train_days.to_vec(),
        meta: all.meta.clone(),
    };
    let test = sdsh::likelihood::Dataset {
        days: test_days.to_vec(),
        meta: all.meta.clone(),
    };

    let rep = fit(&train, &FitConfig::new(1, truth.betas().to_vec(), 4), None)?;
    println!("fitted on {} events, loglik {:.2}", rep.n_events, rep.loglik);

    let t = Instant::now();
    let train_ids: Vec<u64> = train.days.iter().map(|d| d.id).collect();
    let table = evaluate(Some(&rep.spec), &train_ids, &test, &EvalConfig::default())?;
    print!("{}", table.to_table());
    let points: usize = table.rows[0].n_points.iter().sum();
    println!("{points} evaluation points, {:.1} s", t.elapsed().as_secs_f64());
    Ok(())
}
