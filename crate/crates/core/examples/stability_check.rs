//! Runs the ergodicity checks on the catalog configurations and on an
//! explicit η construction.
//!
//! ```text
//! cargo run --release --example stability_check
//! ```

use sdsh::catalog;
use sdsh::stability::{check_general, check_k1, construct_eta};

fn main() -> sdsh::Result<()> {
    let demo = catalog::demo();
    println!("demo, closed-form K = 1 check:");
    print!("{}", check_k1(&demo)?.to_table());

    println!("\nrecovery (two decay rates), LP check:");
    print!("{}", check_general(&catalog::recovery())?.to_table());

    let alpha = [[0.3, 0.4], [0.8, 1.5]];
    match construct_eta(alpha) {
        Ok(eta) => println!(
            "\nη for α = {alpha:?}: {:?}, slacks ({:.3}, {:.3}, {:.3})",
            eta.to_vec(),
            eta.h1_slack,
            eta.h2_slack,
            eta.h3_slack
        ),
        Err(e) => println!("\nno η for α = {alpha:?}: {}", e.violated),
    }
    Ok(())
}
