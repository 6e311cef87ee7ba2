//! Pair correlations `A_ij = <S_i><I_j> - <S_i I_j>` of the exact model, their
//! conditional versions `A_ij^k`, and the linear evolution equation they obey.
//!
//! Note that `A_ij = <I_i I_j> - <I_i><I_j>`, so `A` is symmetric even on
//! directed graphs.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::master::{solve_master, MasterDistribution, MasterTrajectory, Moments};
use crate::ode::{Tolerances, Trajectory};
use crate::params::EpidemicParams;
use crate::residual::ResidualReport;

/// Below this `<S_k>` the conditional quantities given `S_k` are set to zero.
pub const CONDITIONING_FLOOR: f64 = 1e-12;
/// Tolerance for the two algebraic forms of `A_ij` to agree.
pub const IDENTITY_TOL: f64 = 1e-10;
/// Tolerance for sign checks.
pub const SIGN_TOL: f64 = 1e-8;

/// `A` as a row-major `n x n` matrix (zero diagonal), from the definition.
pub fn correlation_matrix(m: &Moments) -> Vec<f64> {
    let n = m.n();
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                a[i * n + j] = m.sus(i) * m.inf(j) - m.si(i, j);
            }
        }
    }
    a
}

/// `A` from the joint form `<I_i I_j><S_i S_j> - <S_i I_j><I_i S_j>`.
pub fn correlation_matrix_joint(m: &Moments) -> Vec<f64> {
    let n = m.n();
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                a[i * n + j] = m.ii(i, j) * m.ss(i, j) - m.si(i, j) * m.si(j, i);
            }
        }
    }
    a
}

/// `P(S_i | S_k)`, zero when `<S_k>` is below the floor.
pub fn conditional_susceptible(m: &Moments, i: usize, k: usize) -> f64 {
    let sk = m.sus(k);
    if sk < CONDITIONING_FLOOR {
        0.0
    } else {
        m.ss(i, k) / sk
    }
}

/// `<S_k> A_ij^k = <S_i S_k><I_j S_k> / <S_k> - <S_i I_j S_k>`; needs triples.
fn weighted_conditional(m: &Moments, i: usize, j: usize, k: usize) -> f64 {
    let sk = m.sus(k);
    if sk < CONDITIONING_FLOOR {
        return 0.0;
    }
    // <S_i I_j S_k> = <I_j> - <I_i I_j> - <I_j I_k> + <I_i I_j I_k>
    let sis = m.inf(j) - m.ii(i, j) - m.ii(j, k) + m.triple_inf(i, j, k);
    m.ss(i, k) * m.si(k, j) / sk - sis
}

/// `A_ij^k = P(S_i|S_k) P(I_j|S_k) - P(S_i I_j|S_k)` for distinct `i, j, k`.
pub fn conditional_correlation(m: &Moments, i: usize, j: usize, k: usize) -> f64 {
    let sk = m.sus(k);
    if sk < CONDITIONING_FLOOR {
        0.0
    } else {
        weighted_conditional(m, i, j, k) / sk
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CorrelationReport {
    pub n: usize,
    pub times: Vec<f64>,
    /// Row-major `A` per time.
    pub a: Vec<Vec<f64>>,
    /// `A_ij^k` per time at index `(i * n + j) * n + k`; empty unless requested.
    pub conditional: Vec<Vec<f64>>,
    /// Largest disagreement between the two forms of `A`.
    pub identity_error: f64,
    /// Most negative `A_ij` over all times and `i != j`.
    pub min_value: f64,
    /// `(time, i, j)` of `min_value`, zero-based nodes.
    pub min_location: (f64, usize, usize),
    /// Most negative `<I_i I_j> - <I_i><I_j>`.
    pub min_infected_excess: f64,
    /// Most negative conditional correlation; `+inf` if not computed.
    pub min_conditional: f64,
}

impl CorrelationReport {
    /// Per-time minimum of `A_ij` over `i != j`.
    pub fn min_per_time(&self) -> Vec<f64> {
        let n = self.n;
        self.a
            .iter()
            .map(|a| {
                (0..n * n)
                    .filter(|x| x / n != x % n)
                    .map(|x| a[x])
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }
}

pub fn compute_correlations(traj: &MasterTrajectory, with_conditional: bool) -> Result<CorrelationReport> {
    let n = traj.n();
    if n < 2 {
        return Err(Error::Validation("correlations need at least 2 nodes".into()));
    }
    let mut report = CorrelationReport {
        n,
        times: traj.times.clone(),
        a: Vec::with_capacity(traj.times.len()),
        conditional: Vec::new(),
        identity_error: 0.0,
        min_value: f64::INFINITY,
        min_location: (f64::NAN, 0, 0),
        min_infected_excess: f64::INFINITY,
        min_conditional: f64::INFINITY,
    };
    for (d, &t) in traj.dists.iter().zip(&traj.times) {
        let m = d.moments(with_conditional);
        let a = correlation_matrix(&m);
        let joint = correlation_matrix_joint(&m);
        for i in 0..n {
            for j in (0..n).filter(|&j| j != i) {
                let v = a[i * n + j];
                report.identity_error = report.identity_error.max((v - joint[i * n + j]).abs());
                if v < report.min_value {
                    report.min_value = v;
                    report.min_location = (t, i, j);
                }
                let excess = m.ii(i, j) - m.inf(i) * m.inf(j);
                report.min_infected_excess = report.min_infected_excess.min(excess);
            }
        }
        if with_conditional {
            let mut c = vec![0.0; n * n * n];
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        if i != j && j != k && i != k {
                            let v = conditional_correlation(&m, i, j, k);
                            c[(i * n + j) * n + k] = v;
                            report.min_conditional = report.min_conditional.min(v);
                        }
                    }
                }
            }
            report.conditional.push(c);
        }
        report.a.push(a);
    }
    Ok(report)
}

/// How the master equation is started.
#[derive(Debug, Clone)]
pub enum InitialState {
    /// Independent nodes with these infection probabilities.
    Product(Vec<f64>),
    /// An arbitrary distribution over configurations.
    Raw(MasterDistribution),
}

impl InitialState {
    pub fn distribution(&self) -> Result<MasterDistribution> {
        match self {
            Self::Product(p) => MasterDistribution::product(p),
            Self::Raw(d) => Ok(d.clone()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NonnegativeReport {
    pub correlations: CorrelationReport,
    /// Whether the start is non-negatively correlated (`min A_ij(0) >= -1e-8`).
    pub hypothesis_holds: bool,
    pub initial_min: f64,
}

impl NonnegativeReport {
    /// Sign preservation held, or the starting correlations already void the claim.
    pub fn passed(&self) -> bool {
        !self.hypothesis_holds || self.sign_preserved()
    }

    pub fn sign_preserved(&self) -> bool {
        self.correlations.min_value >= -SIGN_TOL && self.correlations.min_infected_excess >= -SIGN_TOL
    }
}

pub fn verify_nonnegative_correlation(
    g: &Graph,
    params: &EpidemicParams,
    init: &InitialState,
    output_times: &[f64],
    tol: Tolerances,
) -> Result<NonnegativeReport> {
    if g.n() < 2 {
        return Err(Error::Validation("correlations need at least 2 nodes".into()));
    }
    let traj = solve_master(g, params, &init.distribution()?, output_times, tol)?;
    nonnegative_from_trajectory(&traj)
}

pub fn nonnegative_from_trajectory(traj: &MasterTrajectory) -> Result<NonnegativeReport> {
    let correlations = compute_correlations(traj, false)?;
    let initial_min = correlations.min_per_time().first().copied().unwrap_or(f64::INFINITY);
    Ok(NonnegativeReport {
        hypothesis_holds: initial_min >= -SIGN_TOL,
        initial_min,
        correlations,
    })
}

/// Right-hand side of the linear equation for every `A_ij`, row-major with a
/// zero diagonal. Needs triple moments.
pub fn rhs_aij(g: &Graph, params: &EpidemicParams, m: &Moments) -> Vec<f64> {
    let n = g.n();
    let (tau, gamma) = (params.tau(), params.gamma());
    let a = correlation_matrix(m);
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            let (gij, gji) = (g.weight(i, j), g.weight(j, i));
            let mut decay = 2.0 * gamma + tau * (gij + gji);
            let mut coupling = 0.0;
            let mut inhom = tau * m.ss(i, j) * (gij * m.inf(j) + gji * m.inf(i));
            for k in (0..n).filter(|&k| k != i && k != j) {
                let (gjk, gik) = (g.weight(j, k), g.weight(i, k));
                if gjk == 0.0 && gik == 0.0 {
                    continue;
                }
                decay += tau * (gjk + gik);
                coupling += gjk * conditional_susceptible(m, j, k) * a[k * n + i]
                    + gik * conditional_susceptible(m, i, k) * a[k * n + j];
                inhom += tau * (gjk * weighted_conditional(m, j, i, k) + gik * weighted_conditional(m, i, j, k));
            }
            out[i * n + j] = -decay * a[i * n + j] + tau * coupling + inhom;
        }
    }
    out
}

/// Sign structure of the `A` equation at one distribution.
#[derive(Debug, Clone, Serialize)]
pub struct DecompositionReport {
    /// Smallest off-diagonal coupling `tau g P(S|S_k)`.
    pub min_coupling: f64,
    /// Smallest inhomogeneous term `R_ij`.
    pub min_inhomogeneity: f64,
    /// Smallest `A_ij^k`.
    pub min_conditional: f64,
}

impl DecompositionReport {
    pub fn passed(&self) -> bool {
        self.min_coupling >= 0.0 && (self.min_conditional < -1e-9 || self.min_inhomogeneity >= -1e-9)
    }
}

pub fn nonneg_decomposition_check(g: &Graph, params: &EpidemicParams, d: &MasterDistribution) -> DecompositionReport {
    let n = g.n();
    let m = d.moments(true);
    let tau = params.tau();
    let mut report = DecompositionReport {
        min_coupling: f64::INFINITY,
        min_inhomogeneity: f64::INFINITY,
        min_conditional: f64::INFINITY,
    };
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            let (gij, gji) = (g.weight(i, j), g.weight(j, i));
            let mut inhom = tau * m.ss(i, j) * (gij * m.inf(j) + gji * m.inf(i));
            for k in (0..n).filter(|&k| k != i && k != j) {
                let (gjk, gik) = (g.weight(j, k), g.weight(i, k));
                report.min_coupling = report
                    .min_coupling
                    .min(tau * gjk * conditional_susceptible(&m, j, k))
                    .min(tau * gik * conditional_susceptible(&m, i, k));
                report.min_conditional = report.min_conditional.min(conditional_correlation(&m, i, j, k));
                inhom += tau * (gjk * weighted_conditional(&m, j, i, k) + gik * weighted_conditional(&m, i, j, k));
            }
            report.min_inhomogeneity = report.min_inhomogeneity.min(inhom);
        }
    }
    report
}

/// Finite-difference check of the `A` equation along a master trajectory.
pub fn aij_residuals(
    g: &Graph,
    params: &EpidemicParams,
    traj: &MasterTrajectory,
    base_tol: f64,
) -> Result<ResidualReport> {
    let n = g.n();
    let moments: Vec<Moments> = traj.dists.iter().map(|d| d.moments(true)).collect();
    let a: Vec<Vec<f64>> = moments.iter().map(correlation_matrix).collect();
    let rhs: Vec<Vec<f64>> = moments.iter().map(|m| rhs_aij(g, params, m)).collect();
    let mut report = ResidualReport::new(base_tol);
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            let values: Vec<f64> = a.iter().map(|a| a[i * n + j]).collect();
            let r: Vec<f64> = rhs.iter().map(|r| r[i * n + j]).collect();
            report.check_series(&format!("dA_{}{}/dt", i + 1, j + 1), &traj.times, &values, &r)?;
        }
    }
    Ok(report)
}

/// `A(t) = <II><SS> - <SI><IS>` from the two-node system and the right-hand
/// side `-2(tau + gamma) A + tau <SS>(<SI> + <IS> + 2<II>)`.
pub fn two_node_correlation(params: &EpidemicParams, traj: &Trajectory) -> (Vec<f64>, Vec<f64>) {
    let (tau, gamma) = (params.tau(), params.gamma());
    traj.states()
        .map(|y| {
            let (si, is, ii, ss) = (y[2], y[3], y[4], y[5]);
            let a = ii * ss - si * is;
            let b = tau * (si * ss + is * ss + 2.0 * ii * ss);
            (a, -2.0 * (tau + gamma) * a + b)
        })
        .unzip()
}

pub fn two_node_correlation_residual(
    params: &EpidemicParams,
    traj: &Trajectory,
    base_tol: f64,
) -> Result<ResidualReport> {
    let (a, rhs) = two_node_correlation(params, traj);
    let mut report = ResidualReport::new(base_tol);
    report.check_series("dA/dt", &traj.times, &a, &rhs)?;
    Ok(report)
}
