//! Closed node-level models `dX_i/dt = tau sum_j g_ij (X_j - W(X_i, X_j)) - gamma X_i`
//! and their comparison against the exact master equation.

use serde::Serialize;

use crate::closure::Closure;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::master::{solve_master, MasterDistribution, MasterTrajectory};
use crate::ode::{integrate, IvpSpec, Tolerances, Trajectory};
use crate::params::EpidemicParams;

/// Allowed violation of a comparison bound.
pub const BOUND_SLACK: f64 = 1e-7;
/// Allowed excursion of closed trajectories outside the unit cube.
pub const CUBE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct ClosedModel {
    graph: Graph,
    params: EpidemicParams,
    closure: Closure,
}

impl ClosedModel {
    pub fn new(graph: Graph, params: EpidemicParams, closure: Closure) -> Self {
        Self { graph, params, closure }
    }

    /// The NIMFA model, i.e. the product closure.
    pub fn nimfa(graph: Graph, params: EpidemicParams) -> Self {
        Self::new(graph, params, Closure::product())
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn params(&self) -> &EpidemicParams {
        &self.params
    }

    pub fn closure(&self) -> &Closure {
        &self.closure
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    /// Right-hand side into `dx`. The state is clamped to `[0, 1]` before `W`
    /// sees it; `x` itself is left alone.
    pub fn rhs_into(&self, x: &[f64], dx: &mut [f64]) {
        let n = self.n();
        let (tau, gamma) = (self.params.tau(), self.params.gamma());
        for i in 0..n {
            let xi = x[i].clamp(0.0, 1.0);
            let row = self.graph.row(i);
            let mut infection = 0.0;
            for (j, &g) in row.iter().enumerate() {
                if g != 0.0 {
                    let xj = x[j].clamp(0.0, 1.0);
                    infection += g * (xj - self.closure.eval_clamped(xi, xj));
                }
            }
            dx[i] = tau * infection - gamma * x[i];
        }
    }

    pub fn rhs(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x.len())?;
        let mut dx = vec![0.0; x.len()];
        self.rhs_into(x, &mut dx);
        Ok(dx)
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len == self.n() {
            Ok(())
        } else {
            Err(Error::Validation(format!(
                "state has {len} entries but the graph has {} nodes",
                self.n()
            )))
        }
    }

    /// Integrates from `init` and samples at `output_times`.
    pub fn integrate(&self, init: &[f64], output_times: &[f64], tol: Tolerances) -> Result<Trajectory> {
        self.check_dim(init.len())?;
        if let Some((i, v)) = init.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && **v <= 1.0)) {
            return Err(Error::Validation(format!(
                "initial value of node {} is {v}, outside [0, 1]",
                i + 1
            )));
        }
        let rhs = |_t: f64, x: &[f64], dx: &mut [f64]| self.rhs_into(x, dx);
        Ok(integrate(IvpSpec::new(rhs, init.to_vec(), output_times.to_vec()).tolerances(tol))?)
    }
}

/// NIMFA right-hand side `tau sum_j g_ij (1 - y_i) y_j - gamma y_i`, written
/// out independently of the closure machinery.
pub fn rhs_nimfa(g: &Graph, params: &EpidemicParams, y: &[f64]) -> Result<Vec<f64>> {
    if y.len() != g.n() {
        return Err(Error::Validation(format!(
            "state has {} entries but the graph has {} nodes",
            y.len(),
            g.n()
        )));
    }
    let gy = g.mul_vec(&y.iter().map(|v| v.clamp(0.0, 1.0)).collect::<Vec<_>>());
    Ok(y.iter()
        .zip(gy)
        .map(|(&yi, s)| params.tau() * (1.0 - yi.clamp(0.0, 1.0)) * s - params.gamma() * yi)
        .collect())
}

/// Largest distance of any sampled state from the unit cube.
pub fn cube_excursion(traj: &Trajectory) -> f64 {
    traj.states()
        .flatten()
        .fold(0.0f64, |m, &v| m.max(-v).max(v - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundDirection {
    /// Closed model lies above the exact marginals.
    Upper,
    /// Closed model lies below the exact marginals.
    Lower,
}

impl std::fmt::Display for BoundDirection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Upper => "upper",
            Self::Lower => "lower",
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub direction: BoundDirection,
    pub closure: String,
    /// Smallest margin over all times and nodes; negative means violated.
    pub worst_violation: f64,
    pub violation_time: f64,
    /// Zero-based node index of the smallest margin.
    pub violation_node: usize,
    pub times: Vec<f64>,
    /// `margins[k][i]`: `X_i - <I_i>` (upper) or `<I_i> - X_i` (lower) at `times[k]`.
    pub margins: Vec<Vec<f64>>,
}

impl BoundReport {
    pub fn from_trajectories(
        direction: BoundDirection,
        closure: &Closure,
        exact: &[Vec<f64>],
        closed: &Trajectory,
    ) -> Result<Self> {
        if exact.len() != closed.len() {
            return Err(Error::Validation("exact and closed trajectories have different lengths".into()));
        }
        let mut worst = (f64::INFINITY, f64::NAN, 0);
        let margins: Vec<Vec<f64>> = exact
            .iter()
            .zip(closed.states())
            .zip(&closed.times)
            .map(|((e, c), &t)| {
                e.iter()
                    .zip(c)
                    .enumerate()
                    .map(|(i, (&e, &c))| {
                        let m = match direction {
                            BoundDirection::Upper => c - e,
                            BoundDirection::Lower => e - c,
                        };
                        if m < worst.0 {
                            worst = (m, t, i);
                        }
                        m
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            direction,
            closure: closure.name(),
            worst_violation: worst.0,
            violation_time: worst.1,
            violation_node: worst.2,
            times: closed.times.clone(),
            margins,
        })
    }

    pub fn passed(&self) -> bool {
        self.worst_violation >= -BOUND_SLACK
    }
}

/// Exact marginals and one closed model from the same initial marginals
/// (product initial measure for the master equation), compared on one grid.
pub fn verify_bounds(
    g: &Graph,
    params: &EpidemicParams,
    init: &[f64],
    output_times: &[f64],
    closure: &Closure,
    direction: BoundDirection,
    tol: Tolerances,
) -> Result<BoundReport> {
    let master = solve_master(g, params, &MasterDistribution::product(init)?, output_times, tol)?;
    bounds_against(&master, g, params, init, closure, direction, tol)
}

/// As [`verify_bounds`], reusing an already solved master trajectory.
pub fn bounds_against(
    master: &MasterTrajectory,
    g: &Graph,
    params: &EpidemicParams,
    init: &[f64],
    closure: &Closure,
    direction: BoundDirection,
    tol: Tolerances,
) -> Result<BoundReport> {
    let model = ClosedModel::new(g.clone(), *params, closure.clone());
    let closed = model.integrate(init, &master.times, tol)?;
    BoundReport::from_trajectories(direction, closure, &master.node_marginals(), &closed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::residual::linspace;

    fn params(tau: f64, gamma: f64) -> EpidemicParams {
        EpidemicParams::new(tau, gamma).unwrap()
    }

    #[test]
    fn rhs_examples() {
        let k2 = Graph::complete(2).unwrap();
        let nimfa = ClosedModel::nimfa(k2.clone(), params(1.0, 1.0));
        assert_eq!(nimfa.rhs(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(nimfa.rhs(&[1.0, 0.0]).unwrap(), vec![-1.0, 1.0]);
        assert!(nimfa.rhs(&[1.0]).is_err());

        let min = ClosedModel::new(Graph::complete(4).unwrap(), params(1.3, 0.7), Closure::min());
        assert_eq!(min.rhs(&[0.4; 4]).unwrap(), vec![-0.7 * 0.4; 4]);

        assert_eq!(rhs_nimfa(&k2, &params(1.0, 1.0), &[1.0, 1.0]).unwrap(), vec![-1.0, -1.0]);
        assert_eq!(rhs_nimfa(&k2, &params(1.0, 1.0), &[0.5, 0.5]).unwrap(), vec![-0.25, -0.25]);
    }

    #[test]
    fn single_node_and_zero_init() {
        let single = Graph::from_dense(1, vec![0.0]).unwrap();
        let m = ClosedModel::nimfa(single, params(1.0, 1.0));
        let traj = m.integrate(&[0.6], &[0.0, 1.0], Tolerances::default()).unwrap();
        assert!((traj.state(1)[0] - 0.6 * (-1.0f64).exp()).abs() < 1e-9);

        let m = ClosedModel::new(Graph::complete(3).unwrap(), params(2.0, 1.0), Closure::geo_sqrt());
        let traj = m.integrate(&[0.0; 3], &linspace(0.0, 5.0, 6), Tolerances::default()).unwrap();
        assert!(traj.states().flatten().all(|&v| v == 0.0));
        assert!(m.integrate(&[0.0, 1.5, 0.0], &[0.0, 1.0], Tolerances::default()).is_err());
    }

    #[test]
    fn min_closure_on_regular_graph_is_pure_decay() {
        let m = ClosedModel::new(Graph::directed_cycle(5).unwrap(), params(1.7, 0.9), Closure::min());
        let times = linspace(0.0, 4.0, 9);
        let traj = m.integrate(&[0.35; 5], &times, Tolerances::default()).unwrap();
        for (y, t) in traj.states().zip(&times) {
            for v in y {
                assert!((v - 0.35 * (-0.9 * t).exp()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_transmission_makes_all_models_agree() {
        let g = Graph::from_edges(3, &[(0, 1, 1.0), (1, 2, 2.0), (2, 0, 0.5)]).unwrap();
        let init = [0.9, 0.2, 0.5];
        let times = linspace(0.0, 3.0, 10);
        for (closure, dir) in [(Closure::product(), BoundDirection::Upper), (Closure::min(), BoundDirection::Lower)] {
            let r = verify_bounds(&g, &params(0.0, 1.2), &init, &times, &closure, dir, Tolerances::default()).unwrap();
            assert!(r.margins.iter().flatten().all(|m| m.abs() < 1e-8), "{r:?}");
        }
    }

    #[test]
    fn bounds_on_a_directed_instance() {
        let g = Graph::from_edges(4, &[(0, 1, 1.0), (1, 2, 0.7), (2, 3, 1.4), (3, 0, 0.9), (2, 0, 0.3)]).unwrap();
        let p = params(1.5, 0.8);
        let init = [0.7, 0.0, 0.2, 0.4];
        let times = linspace(0.0, 8.0, 41);
        let upper = verify_bounds(&g, &p, &init, &times, &Closure::product(), BoundDirection::Upper, Tolerances::default()).unwrap();
        let lower = verify_bounds(&g, &p, &init, &times, &Closure::min(), BoundDirection::Lower, Tolerances::default()).unwrap();
        assert!(upper.passed(), "{}", upper.worst_violation);
        assert!(lower.passed(), "{}", lower.worst_violation);
        assert_eq!(upper.margins.len(), 41);
        // NIMFA is strictly above somewhere, so swapping the direction must fail
        let swapped = verify_bounds(&g, &p, &init, &times, &Closure::product(), BoundDirection::Lower, Tolerances::default()).unwrap();
        assert!(!swapped.passed());
    }
}
