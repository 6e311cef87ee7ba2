//! Pair correlations along the exact solution: sign preservation from an
//! uncorrelated start, the linear equation they satisfy, and what happens
//! from a negatively correlated start.
//!
//!     cargo run --release --example correlations

use epibound::correlation::{aij_residuals, nonneg_decomposition_check, verify_nonnegative_correlation};
use epibound::master::solve_master;
use epibound::residual::linspace;
use epibound::{EpidemicParams, Graph, InitialState, MasterDistribution, Tolerances};

fn main() -> epibound::Result<()> {
    let g = Graph::from_edges(4, &[(0, 1, 1.0), (1, 2, 0.6), (2, 3, 1.3), (3, 0, 0.8), (1, 3, 0.4)])?;
    let params = EpidemicParams::new(1.1, 0.7)?;
    let times = linspace(0.0, 3.0, 301);

    let product = InitialState::Product(vec![0.9, 0.1, 0.0, 0.5]);
    let report = verify_nonnegative_correlation(&g, &params, &product, &times, Tolerances::default())?;
    let c = &report.correlations;
    println!("product start: min A_ij = {:e}, identity error {:e}", c.min_value, c.identity_error);

    let traj = solve_master(&g, &params, &product.distribution()?, &times, Tolerances::default())?;
    let res = aij_residuals(&g, &params, &traj, 1e-6)?;
    println!("A_ij equation residual: max {:e}, passed = {}", res.max_residual, res.passed());
    let decomposition = nonneg_decomposition_check(&g, &params, &traj.dists[100]);
    println!("at t = 1: {decomposition:?}, passed = {}", decomposition.passed());

    let mut probs = vec![0.0; 16];
    probs[0b0001] = 0.5;
    probs[0b0010] = 0.5;
    let raw = InitialState::Raw(MasterDistribution::new(4, probs)?);
    let report = verify_nonnegative_correlation(&g, &params, &raw, &times, Tolerances::default())?;
    println!(
        "anti-correlated start: A(0) min = {:+.3}, hypothesis holds = {}, final min A = {:+.3e}",
        report.initial_min,
        report.hypothesis_holds,
        report.correlations.min_per_time().last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}
