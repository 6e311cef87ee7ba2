//! Bound and correlation checks over a seeded ensemble of random weighted
//! digraphs, the same run as `epibound batch-verify`.
//!
//!     cargo run --release --example batch_verify [seed]

use epibound::batch::{run_batch, BatchConfig};
use epibound::Tolerances;

fn main() -> epibound::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(42);
    let summary = run_batch(&BatchConfig { seed, ..Default::default() }, Tolerances::default())?;
    print!("{}", summary.to_text());
    Ok(())
}
