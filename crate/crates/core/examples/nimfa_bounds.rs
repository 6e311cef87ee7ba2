//! NIMFA bounds the exact infection probabilities from above and the min
//! closure from below, on a weighted directed network.
//!
//!     cargo run --release --example nimfa_bounds

use epibound::master::solve_master;
use epibound::meanfield::bounds_against;
use epibound::residual::linspace;
use epibound::{BoundDirection, Closure, EpidemicParams, Graph, MasterDistribution, Tolerances};

fn main() -> epibound::Result<()> {
    let g = Graph::from_edges(5, &[(0, 1, 1.2), (1, 2, 0.4), (2, 3, 1.0), (3, 4, 0.8), (4, 0, 1.5), (0, 3, 0.6), (2, 0, 0.9)])?;
    let params = EpidemicParams::new(1.1, 0.6)?;
    let init = [0.8, 0.1, 0.0, 0.3, 0.5];
    let tol = Tolerances::default();
    let master = solve_master(&g, &params, &MasterDistribution::product(&init)?, &linspace(0.0, 10.0, 51), tol)?;
    let upper = bounds_against(&master, &g, &params, &init, &Closure::product(), BoundDirection::Upper, tol)?;
    let lower = bounds_against(&master, &g, &params, &init, &Closure::min(), BoundDirection::Lower, tol)?;

    let exact = master.node_marginals();
    println!("node 1:  min-closure <= exact <= NIMFA");
    for k in (0..master.times.len()).step_by(5) {
        let e = exact[k][0];
        println!(
            "t = {:4.1}:  {:.6} <= {:.6} <= {:.6}",
            master.times[k],
            e - lower.margins[k][0],
            e,
            e + upper.margins[k][0]
        );
    }
    println!("worst NIMFA margin {:e}, worst min-closure margin {:e}", upper.worst_violation, lower.worst_violation);
    println!("both bounds hold: {}", upper.passed() && lower.passed());
    Ok(())
}
