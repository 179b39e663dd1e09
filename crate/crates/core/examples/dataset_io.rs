//! Writes a synthetic dataset to CSV plus sidecar, reloads it with an
//! intraday slot and a minimum event count, and fits a small model.
//!
//! ```text
//! cargo run --release --example dataset_io [dir]
//! ```

use std::path::PathBuf;

use sdsh::catalog;
use sdsh::fit::{fit, FitConfig};
use sdsh::io::{generate_synthetic, load_dataset, save_dataset, sidecar_path, LoadOptions};

fn main() -> sdsh::Result<()> {
    let dir: PathBuf = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(std::env::temp_dir);
    let file = dir.join("sdsh_example.csv");

    let data = generate_synthetic(&catalog::demo(), 5, 3600.0, 2, 11)?;
    save_dataset(&data, &file)?;
    println!("wrote {} and {}", file.display(), sidecar_path(&file).display());

    let opts = LoadOptions {
        slot: Some((600.0, 3000.0)),
        min_events: 100,
        k: Some(1),
        ..Default::default()
    };
    let (slotted, summary) = load_dataset(&file, &opts)?;
    println!("{summary}");

    let rep = fit(&slotted, &FitConfig::new(1, vec![1.0], 3), None)?;
    println!("fitted mu {:?}, loglik {:.2}", rep.spec.mus, rep.loglik);
    Ok(())
}
