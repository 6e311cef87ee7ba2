//! Bifurcation diagram in tau: the product and geo_sqrt closures grow an
//! endemic branch at tau = gamma / Lambda, the min closure never does.
//!
//!     cargo run --release --example bifurcation

use epibound::steadystate::{bifurcation_sweep, SolveOptions, SweepMode};
use epibound::{Closure, Graph};

fn main() -> epibound::Result<()> {
    let g = Graph::complete(5)?;
    let curves = [Closure::product(), Closure::geo_sqrt(), Closure::min()]
        .iter()
        .map(|c| bifurcation_sweep(&g, 1.0, c, (0.1, 0.6), 51, SweepMode::WarmStart, SolveOptions::default()))
        .collect::<epibound::Result<Vec<_>>>()?;

    println!("{:>6} {:>12} {:>12} {:>12}", "tau", "product", "geo_sqrt", "min");
    for k in (0..51).step_by(5) {
        println!(
            "{:>6.2} {:>12.6} {:>12.6} {:>12.2e}",
            curves[0].tau_values[k], curves[0].steady_state_norms[k], curves[1].steady_state_norms[k], curves[2].steady_state_norms[k]
        );
    }
    for (name, c) in ["product", "geo_sqrt", "min"].iter().zip(&curves) {
        println!("{name:>8}: threshold estimate {:?} (gamma / Lambda = {})", c.threshold_estimate, c.predicted_threshold);
    }
    Ok(())
}
