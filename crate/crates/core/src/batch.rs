//! Seeded random ensembles: bound and correlation checks on many random
//! strongly connected weighted digraphs.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::closure::Closure;
use crate::correlation::{nonnegative_from_trajectory, SIGN_TOL};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::master::{node_cap, solve_master, MasterDistribution};
use crate::meanfield::{bounds_against, BoundDirection, BOUND_SLACK};
use crate::ode::Tolerances;
use crate::params::EpidemicParams;
use crate::residual::linspace;

#[derive(Debug, Clone, Serialize)]
pub struct BatchConfig {
    pub count: usize,
    pub n_min: usize,
    pub n_max: usize,
    pub tau_range: (f64, f64),
    pub gamma_range: (f64, f64),
    pub edge_prob: f64,
    pub weight_range: (f64, f64),
    pub t_end: f64,
    pub points: usize,
    pub seed: u64,
}

impl Default for BatchConfig {
    fn default() -> Self {
        Self {
            count: 20,
            n_min: 3,
            n_max: 10,
            tau_range: (0.1, 2.0),
            gamma_range: (0.1, 2.0),
            edge_prob: 0.5,
            weight_range: (0.2, 1.5),
            t_end: 10.0,
            points: 50,
            seed: 42,
        }
    }
}

impl BatchConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Validation(msg));
        if self.count == 0 {
            return bad("batch count must be at least 1".into());
        }
        if self.n_min < 2 || self.n_min > self.n_max {
            return bad(format!("node range [{}, {}] is invalid (need 2 <= min <= max)", self.n_min, self.n_max));
        }
        let cap = node_cap();
        if self.n_max > cap {
            return Err(Error::Capacity { n: self.n_max, cap });
        }
        for (name, (lo, hi)) in [("tau", self.tau_range), ("gamma", self.gamma_range), ("weight", self.weight_range)] {
            if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                return bad(format!("{name} range [{lo}, {hi}] is invalid"));
            }
        }
        if !(self.edge_prob > 0.0 && self.edge_prob <= 1.0) {
            return bad(format!("edge probability {} is outside (0, 1]", self.edge_prob));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) || self.points < 5 {
            return bad("need t_end > 0 and at least 5 output points".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub index: usize,
    pub graph: Graph,
    pub params: EpidemicParams,
    pub init: Vec<f64>,
}

/// Instance `index` of the ensemble; each index draws from its own stream,
/// so instances do not depend on each other or on evaluation order.
pub fn instance(cfg: &BatchConfig, index: usize) -> Result<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let n = rng.gen_range(cfg.n_min..=cfg.n_max);
    let graph = Graph::random_strongly_connected(&mut rng, n, cfg.edge_prob, cfg.weight_range.0, cfg.weight_range.1)?;
    let tau = rng.gen_range(cfg.tau_range.0..=cfg.tau_range.1);
    let gamma = rng.gen_range(cfg.gamma_range.0..=cfg.gamma_range.1);
    let init = (0..n).map(|_| rng.gen::<f64>()).collect();
    Ok(Instance {
        index,
        graph,
        params: EpidemicParams::new(tau, gamma)?,
        init,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct InstanceResult {
    pub index: usize,
    pub n: usize,
    pub tau: f64,
    pub gamma: f64,
    /// `min (Y_i - <I_i>)` for NIMFA.
    pub nimfa_margin: f64,
    /// `min (<I_i> - X_i)` for the min closure.
    pub min_closure_margin: f64,
    /// `min A_ij`, `i != j`.
    pub min_correlation: f64,
    /// `min (<I_i I_j> - <I_i><I_j>)`.
    pub min_infected_excess: f64,
    pub max_mass_error: f64,
}

impl InstanceResult {
    pub fn passed(&self) -> bool {
        self.nimfa_margin >= -BOUND_SLACK
            && self.min_closure_margin >= -BOUND_SLACK
            && self.min_correlation >= -SIGN_TOL
            && self.min_infected_excess >= -SIGN_TOL
    }
}

pub fn run_instance(inst: &Instance, times: &[f64], tol: Tolerances) -> Result<InstanceResult> {
    let (g, p) = (&inst.graph, &inst.params);
    let master = solve_master(g, p, &MasterDistribution::product(&inst.init)?, times, tol)?;
    let upper = bounds_against(&master, g, p, &inst.init, &Closure::product(), BoundDirection::Upper, tol)?;
    let lower = bounds_against(&master, g, p, &inst.init, &Closure::min(), BoundDirection::Lower, tol)?;
    let corr = nonnegative_from_trajectory(&master)?.correlations;
    Ok(InstanceResult {
        index: inst.index,
        n: g.n(),
        tau: p.tau(),
        gamma: p.gamma(),
        nimfa_margin: upper.worst_violation,
        min_closure_margin: lower.worst_violation,
        min_correlation: corr.min_value,
        min_infected_excess: corr.min_infected_excess,
        max_mass_error: master.max_mass_error,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BatchSummary {
    pub config: BatchConfig,
    pub instances: Vec<InstanceResult>,
    pub worst_nimfa_margin: f64,
    pub worst_min_closure_margin: f64,
    pub worst_correlation: f64,
    pub worst_infected_excess: f64,
    pub max_mass_error: f64,
    pub violations: usize,
}

impl BatchSummary {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    /// Plain-text summary; identical inputs give identical bytes.
    pub fn to_text(&self) -> String {
        let c = &self.config;
        let mut s = String::new();
        let _ = writeln!(s, "# batch-verify seed={} count={} n=[{},{}]", c.seed, c.count, c.n_min, c.n_max);
        let _ = writeln!(
            s,
            "# tau=[{:e},{:e}] gamma=[{:e},{:e}] t_end={:e} points={}",
            c.tau_range.0, c.tau_range.1, c.gamma_range.0, c.gamma_range.1, c.t_end, c.points
        );
        let _ = writeln!(s, "index,n,tau,gamma,nimfa_margin,min_closure_margin,min_correlation,min_infected_excess,mass_error");
        for r in &self.instances {
            let _ = writeln!(
                s,
                "{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                r.index, r.n, r.tau, r.gamma, r.nimfa_margin, r.min_closure_margin, r.min_correlation, r.min_infected_excess, r.max_mass_error
            );
        }
        let _ = writeln!(s, "# worst nimfa margin: {:e}", self.worst_nimfa_margin);
        let _ = writeln!(s, "# worst min-closure margin: {:e}", self.worst_min_closure_margin);
        let _ = writeln!(s, "# worst correlation: {:e}", self.worst_correlation);
        let _ = writeln!(s, "# worst infected excess: {:e}", self.worst_infected_excess);
        let _ = writeln!(s, "# violations: {}", self.violations);
        s
    }
}

/// Runs the whole ensemble in parallel; results are ordered by index.
pub fn run_batch(cfg: &BatchConfig, tol: Tolerances) -> Result<BatchSummary> {
    cfg.validate()?;
    let times = linspace(0.0, cfg.t_end, cfg.points);
    let instances = (0..cfg.count)
        .into_par_iter()
        .map(|k| run_instance(&instance(cfg, k)?, &times, tol))
        .collect::<Result<Vec<_>>>()?;
    let fold = |f: fn(&InstanceResult) -> f64| instances.iter().map(f).fold(f64::INFINITY, f64::min);
    Ok(BatchSummary {
        config: cfg.clone(),
        worst_nimfa_margin: fold(|r| r.nimfa_margin),
        worst_min_closure_margin: fold(|r| r.min_closure_margin),
        worst_correlation: fold(|r| r.min_correlation),
        worst_infected_excess: fold(|r| r.min_infected_excess),
        max_mass_error: instances.iter().map(|r| r.max_mass_error).fold(0.0, f64::max),
        violations: instances.iter().filter(|r| !r.passed()).count(),
        instances,
    })
}
