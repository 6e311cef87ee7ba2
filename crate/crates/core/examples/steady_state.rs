//! Endemic steady states from the fixed-point map, below and above threshold,
//! compared with the long-time limit of the closed ODE.
//!
//!     cargo run --release --example steady_state

use epibound::steadystate::{multistart, random_starts, solve_steady_state, verify_no_endemic_above_alpha, SolveOptions};
use epibound::{ClosedModel, Closure, EpidemicParams, Graph, Tolerances};

fn main() -> epibound::Result<()> {
    let k5 = Graph::complete(5)?;
    let opts = SolveOptions::default();
    for tau in [0.2, 0.3] {
        let params = EpidemicParams::new(tau, 1.0)?;
        let r = solve_steady_state(&k5, &params, &Closure::product(), &[0.5; 5], opts)?;
        println!("K_5, tau = {tau}: {} / {}, x = {:.8?}", r.regime, r.classification, r.fixed_point);
    }

    let params = EpidemicParams::new(0.3, 1.0)?;
    let ode = ClosedModel::nimfa(k5.clone(), params).integrate(&[0.5; 5], &[0.0, 200.0], Tolerances::default())?;
    println!("NIMFA at t = 200: {:.8?}", ode.last().expect("two outputs"));

    let g = Graph::from_edges(4, &[(0, 1, 1.0), (1, 2, 2.0), (2, 3, 0.5), (3, 0, 1.5), (0, 2, 1.0)])?;
    let params = EpidemicParams::new(1.0, 0.5)?;
    for closure in [Closure::product(), Closure::geo_sqrt(), Closure::min()] {
        let found = multistart(&g, &params, &closure, &random_starts(4, 20, 3), opts)?;
        println!("{:>8}: {} distinct fixed point(s), first {:.6?}", closure.name(), found.distinct.len(), found.distinct[0]);
    }

    let report = verify_no_endemic_above_alpha(&Graph::complete(4)?, &EpidemicParams::new(0.2, 1.0)?, &Closure::product(), 50, 1, opts)?;
    println!("K_4 below threshold: {}/{} starts reach 0, refuted = {}", report.converged_to_zero, report.samples, report.refuted);
    Ok(())
}
