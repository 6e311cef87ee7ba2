//! Steady states of closed models via the fixed-point map
//! `T_i(x) = ((Gx)_i - F_i(x)) / (alpha + (Gx)_i)` with
//! `F_i(x) = sum_j g_ij (W(x_i, x_j) - x_i x_j)` and `alpha = gamma / tau`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::closure::Closure;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::params::EpidemicParams;

/// Negative `F_i` beyond this means `W < xy` somewhere.
pub const CONTRACT_TOL: f64 = 1e-12;
/// Mean steady-state value above which a sweep point counts as endemic.
pub const DETECTION_FLOOR: f64 = 1e-4;
/// Relative gap between `gamma` and `tau * Lambda` treated as critical.
pub const CRITICAL_RTOL: f64 = 1e-9;
/// Iterations without residual decrease before damping switches on.
const STALL_LIMIT: usize = 10;
const DAMPING: f64 = 0.5;
/// Smallest relaxation step reached by repeated damping.
const MIN_STEP: f64 = 1.0 / 1024.0;
/// Cap on the factor turning a residual into an error estimate.
const MAX_ERROR_FACTOR: f64 = 20.0;
/// Residuals kept for a non-convergence error.
const HISTORY_LEN: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `gamma > tau * Lambda`
    BelowThreshold,
    /// `gamma < tau * Lambda`
    AboveThreshold,
    /// `gamma == tau * Lambda` up to rounding; neither the extinction nor the endemic argument applies.
    Critical,
}

impl Regime {
    pub fn classify(params: &EpidemicParams, lambda_max: f64) -> Self {
        let (gamma, spread) = (params.gamma(), params.tau() * lambda_max);
        if (gamma - spread).abs() <= CRITICAL_RTOL * gamma.max(spread) {
            Self::Critical
        } else if gamma > spread {
            Self::BelowThreshold
        } else {
            Self::AboveThreshold
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::BelowThreshold => "below_threshold",
            Self::AboveThreshold => "above_threshold",
            Self::Critical => "critical",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    DiseaseFree,
    Endemic,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::DiseaseFree => "disease_free",
            Self::Endemic => "endemic",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SteadyStateResult {
    pub regime: Regime,
    pub lambda_max: f64,
    pub alpha: f64,
    pub fixed_point: Vec<f64>,
    /// `max_i |x_i - T_i(x)|` at the returned point.
    pub residual: f64,
    pub classification: Classification,
    pub iterations: usize,
    /// Whether the iteration had to be damped.
    pub damped: bool,
}

impl SteadyStateResult {
    pub fn mean(&self) -> f64 {
        self.fixed_point.iter().sum::<f64>() / self.fixed_point.len() as f64
    }

    pub fn max_norm(&self) -> f64 {
        self.fixed_point.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Precomputed pieces shared by repeated evaluations of `T`.
#[derive(Debug, Clone)]
pub struct FixedPointProblem<'a> {
    graph: &'a Graph,
    closure: &'a Closure,
    params: EpidemicParams,
    alpha: f64,
}

impl<'a> FixedPointProblem<'a> {
    pub fn new(graph: &'a Graph, params: &EpidemicParams, closure: &'a Closure) -> Result<Self> {
        params.require_positive()?;
        Ok(Self {
            graph,
            closure,
            params: *params,
            alpha: params.alpha(),
        })
    }

    /// `T(x)` into `out`.
    pub fn map_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        for i in 0..self.graph.n() {
            let xi = x[i];
            let (mut gx, mut f) = (0.0, 0.0);
            for (j, &g) in self.graph.row(i).iter().enumerate() {
                if g != 0.0 {
                    let xj = x[j];
                    gx += g * xj;
                    f += g * (self.closure.eval_clamped(xi, xj) - xi * xj);
                }
            }
            if f < -CONTRACT_TOL {
                return Err(Error::ClosureContract { node: i + 1, value: f });
            }
            out[i] = if gx == 0.0 { 0.0 } else { ((gx - f) / (self.alpha + gx)).clamp(0.0, 1.0) };
        }
        Ok(())
    }

    pub fn map(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_point(self.graph.n(), x)?;
        let x: Vec<f64> = x.iter().map(|v| v.clamp(0.0, 1.0)).collect();
        let mut out = vec![0.0; x.len()];
        self.map_into(&x, &mut out)?;
        Ok(out)
    }

    /// Right-hand side of the closed model, whose zeros are the fixed points.
    fn closed_rhs(&self, x: &[f64]) -> Vec<f64> {
        let (tau, gamma) = (self.params.tau(), self.params.gamma());
        (0..self.graph.n())
            .map(|i| {
                let inf: f64 = self
                    .graph
                    .row(i)
                    .iter()
                    .zip(x)
                    .map(|(&g, &xj)| if g == 0.0 { 0.0 } else { g * (xj - self.closure.eval_clamped(x[i], xj)) })
                    .sum();
                tau * inf - gamma * x[i]
            })
            .collect()
    }
}

fn check_point(n: usize, x: &[f64]) -> Result<()> {
    if x.len() != n {
        return Err(Error::Validation(format!("point has {} entries, graph has {n} nodes", x.len())));
    }
    if let Some((i, v)) = x.iter().enumerate().find(|(_, v)| !(**v >= -1e-12 && **v <= 1.0 + 1e-12)) {
        return Err(Error::Validation(format!("coordinate {} is {v}, outside [0, 1]", i + 1)));
    }
    Ok(())
}

/// One application of `T`.
pub fn fixed_point_map(g: &Graph, params: &EpidemicParams, closure: &Closure, x: &[f64]) -> Result<Vec<f64>> {
    FixedPointProblem::new(g, params, closure)?.map(x)
}

/// Picard iteration `x <- T(x)` from `init`. Each time the residual fails to
/// decrease ten times in a row the relaxation step is halved.
pub fn solve_steady_state(
    g: &Graph,
    params: &EpidemicParams,
    closure: &Closure,
    init: &[f64],
    opts: SolveOptions,
) -> Result<SteadyStateResult> {
    let lambda_max = g.perron()?.lambda_max;
    solve_with_lambda(g, params, closure, init, opts, lambda_max)
}

fn solve_with_lambda(
    g: &Graph,
    params: &EpidemicParams,
    closure: &Closure,
    init: &[f64],
    opts: SolveOptions,
    lambda_max: f64,
) -> Result<SteadyStateResult> {
    if !(opts.tol > 0.0) {
        return Err(Error::Validation(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let problem = FixedPointProblem::new(g, params, closure)?;
    check_point(g.n(), init)?;
    let mut x: Vec<f64> = init.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    let mut tx = vec![0.0; x.len()];
    let mut history = std::collections::VecDeque::with_capacity(HISTORY_LEN);
    let (mut best, mut stalled, mut step) = (f64::INFINITY, 0usize, 1.0f64);
    for iter in 0..=opts.max_iter {
        problem.map_into(&x, &mut tx)?;
        let residual = x.iter().zip(&tx).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if history.len() == HISTORY_LEN {
            history.pop_front();
        }
        history.push_back(residual);
        if residual <= opts.tol && residual * error_factor(&history) <= opts.tol {
            let classification = if x.iter().fold(0.0f64, |m, v| m.max(*v)) > 10.0 * opts.tol {
                Classification::Endemic
            } else {
                Classification::DiseaseFree
            };
            return Ok(SteadyStateResult {
                regime: Regime::classify(params, lambda_max),
                lambda_max,
                alpha: params.alpha(),
                fixed_point: x,
                residual,
                classification,
                iterations: iter,
                damped: step < 1.0,
            });
        }
        if residual < best {
            best = residual;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= STALL_LIMIT && step > MIN_STEP {
                step *= DAMPING;
                stalled = 0;
                best = residual;
            }
        }
        if step < 1.0 {
            x.iter_mut().zip(&tx).for_each(|(a, b)| *a += step * (b - *a));
        } else {
            x.copy_from_slice(&tx);
        }
    }
    Err(Error::SteadyStateNoConvergence {
        iterations: opts.max_iter,
        residual_history: history.into(),
    })
}

/// `q / (1 - q)` for the observed contraction ratio `q` over the last ten
/// iterations, so that a slowly contracting iteration is not stopped while
/// still far from its limit.
fn error_factor(history: &std::collections::VecDeque<f64>) -> f64 {
    let len = history.len();
    if len < STALL_LIMIT + 1 {
        return 1.0;
    }
    let (first, last) = (history[len - 1 - STALL_LIMIT], history[len - 1]);
    if first <= 0.0 || last <= 0.0 {
        return 1.0;
    }
    let q = (last / first).powf(1.0 / STALL_LIMIT as f64);
    if q >= 1.0 {
        MAX_ERROR_FACTOR
    } else {
        (q / (1.0 - q)).min(MAX_ERROR_FACTOR)
    }
}

/// Uniformly random starting points in the unit cube.
pub fn random_starts(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| (0..n).map(|_| rng.gen::<f64>()).collect()).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct MultiStartResult {
    pub runs: Vec<SteadyStateResult>,
    /// Distinct fixed points found, in order of discovery.
    pub distinct: Vec<Vec<f64>>,
}

/// Solves from every start and keeps all fixed points that differ by more
/// than `1e-6` in max-norm.
pub fn multistart(
    g: &Graph,
    params: &EpidemicParams,
    closure: &Closure,
    starts: &[Vec<f64>],
    opts: SolveOptions,
) -> Result<MultiStartResult> {
    let lambda_max = g.perron()?.lambda_max;
    let runs = starts
        .par_iter()
        .map(|s| solve_with_lambda(g, params, closure, s, opts, lambda_max))
        .collect::<Result<Vec<_>>>()?;
    let mut distinct: Vec<Vec<f64>> = Vec::new();
    for r in &runs {
        let seen = distinct
            .iter()
            .any(|d| d.iter().zip(&r.fixed_point).all(|(a, b)| (a - b).abs() <= 1e-6));
        if !seen {
            distinct.push(r.fixed_point.clone());
        }
    }
    Ok(MultiStartResult { runs, distinct })
}

#[derive(Debug, Clone, Serialize)]
pub struct NoEndemicReport {
    pub regime: Regime,
    pub lambda_max: f64,
    pub samples: usize,
    /// Starts whose iteration ended at the disease-free state.
    pub converged_to_zero: usize,
    pub max_final_norm: f64,
    /// Every sampled nonzero point `x` has `<v, f(x)> <= (tau Lambda - gamma) <v, x> < 0`,
    /// with `v` the left Perron vector and `f` the closed right-hand side, so
    /// none of them can be a steady state.
    pub refuted: bool,
    /// Largest `<v, f(x)> - (tau Lambda - gamma) <v, x>` seen; nonpositive when refuted.
    pub max_refutation_gap: f64,
    pub note: Option<String>,
}

impl NoEndemicReport {
    pub fn passed(&self) -> bool {
        self.regime == Regime::BelowThreshold && self.converged_to_zero == self.samples && self.refuted
    }
}

/// Samples random starts below threshold and checks that the iteration
/// always reaches zero and that no sampled point can be a nonzero steady state.
pub fn verify_no_endemic_above_alpha(
    g: &Graph,
    params: &EpidemicParams,
    closure: &Closure,
    samples: usize,
    seed: u64,
    opts: SolveOptions,
) -> Result<NoEndemicReport> {
    let right = g.perron()?;
    let left = g.transpose().perron()?;
    let lambda_max = right.lambda_max;
    let regime = Regime::classify(params, lambda_max);
    let problem = FixedPointProblem::new(g, params, closure)?;
    let starts = random_starts(g.n(), samples, seed);
    let runs = multistart(g, params, closure, &starts, opts)?.runs;
    let zero_tol = 10.0 * opts.tol;
    let converged_to_zero = runs.iter().filter(|r| r.max_norm() <= zero_tol).count();
    let max_final_norm = runs.iter().map(SteadyStateResult::max_norm).fold(0.0, f64::max);

    let slope = params.tau() * lambda_max - params.gamma();
    let v = &left.eigvec;
    let mut refuted = true;
    let mut max_gap = f64::NEG_INFINITY;
    for x in starts.iter().chain(runs.iter().map(|r| &r.fixed_point)) {
        let vx: f64 = v.iter().zip(x).map(|(a, b)| a * b).sum();
        let vf: f64 = v.iter().zip(problem.closed_rhs(x)).map(|(a, b)| a * b).sum();
        let gap = vf - slope * vx;
        max_gap = max_gap.max(gap);
        let scale = 1e-12 * (1.0 + params.tau() * lambda_max + params.gamma());
        if vx > 0.0 && (gap > scale || vf >= 0.0) {
            refuted = false;
        }
    }
    let note = match regime {
        Regime::BelowThreshold => None,
        Regime::Critical => Some("gamma equals tau * Lambda: classification is indeterminate".into()),
        Regime::AboveThreshold => Some("gamma < tau * Lambda: the no-endemic claim does not apply".into()),
    };
    Ok(NoEndemicReport {
        regime,
        lambda_max,
        samples,
        converged_to_zero,
        max_final_norm,
        refuted: refuted && regime == Regime::BelowThreshold,
        max_refutation_gap: max_gap,
        note,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    /// Each tau starts from the previous solution.
    WarmStart,
    /// Every tau starts from `0.5` and runs in parallel.
    ColdParallel,
}

#[derive(Debug, Clone, Serialize)]
pub struct BifurcationCurve {
    pub gamma: f64,
    pub lambda_max: f64,
    pub tau_values: Vec<f64>,
    /// `||x*||_1 / n` per tau.
    pub steady_state_norms: Vec<f64>,
    pub regimes: Vec<Regime>,
    pub fixed_points: Vec<Vec<f64>>,
    /// First tau whose mean exceeds the detection floor.
    pub threshold_estimate: Option<f64>,
    /// `gamma / Lambda`.
    pub predicted_threshold: f64,
}

impl BifurcationCurve {
    pub fn step(&self) -> f64 {
        match self.tau_values.as_slice() {
            [a, b, ..] => b - a,
            _ => 0.0,
        }
    }
}

pub fn bifurcation_sweep(
    g: &Graph,
    gamma: f64,
    closure: &Closure,
    tau_range: (f64, f64),
    steps: usize,
    mode: SweepMode,
    opts: SolveOptions,
) -> Result<BifurcationCurve> {
    let (lo, hi) = tau_range;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::Validation(format!("tau range must satisfy 0 < min < max, got [{lo}, {hi}]")));
    }
    if steps < 2 {
        return Err(Error::Validation(format!("a sweep needs at least 2 steps, got {steps}")));
    }
    let lambda_max = g.perron()?.lambda_max;
    let tau_values = crate::residual::linspace(lo, hi, steps);
    let n = g.n();
    let solve = |tau: f64, init: &[f64]| {
        let params = EpidemicParams::new(tau, gamma)?;
        solve_with_lambda(g, &params, closure, init, opts, lambda_max)
    };
    let results: Vec<SteadyStateResult> = match mode {
        SweepMode::WarmStart => {
            let mut out: Vec<SteadyStateResult> = Vec::with_capacity(steps);
            for &tau in &tau_values {
                // zero is always a fixed point, so never warm-start from (near) it
                let init = match out.last() {
                    Some(prev) if prev.mean() > DETECTION_FLOOR => prev.fixed_point.clone(),
                    _ => vec![0.5; n],
                };
                out.push(solve(tau, &init)?);
            }
            out
        }
        SweepMode::ColdParallel => tau_values
            .par_iter()
            .map(|&tau| solve(tau, &vec![0.5; n]))
            .collect::<Result<_>>()?,
    };
    let steady_state_norms: Vec<f64> = results.iter().map(SteadyStateResult::mean).collect();
    let threshold_estimate = tau_values
        .iter()
        .zip(&steady_state_norms)
        .find(|(_, &m)| m > DETECTION_FLOOR)
        .map(|(&t, _)| t);
    Ok(BifurcationCurve {
        gamma,
        lambda_max,
        regimes: results.iter().map(|r| r.regime).collect(),
        fixed_points: results.into_iter().map(|r| r.fixed_point).collect(),
        tau_values,
        steady_state_norms,
        threshold_estimate,
        predicted_threshold: gamma / lambda_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(n: usize) -> Graph {
        Graph::complete(n).unwrap()
    }

    fn params(tau: f64, gamma: f64) -> EpidemicParams {
        EpidemicParams::new(tau, gamma).unwrap()
    }

    #[test]
    fn map_examples() {
        let p = params(1.0, 1.0);
        assert_eq!(fixed_point_map(&k(3), &p, &Closure::geo_sqrt(), &[0.0; 3]).unwrap(), vec![0.0; 3]);
        let t = fixed_point_map(&k(2), &p, &Closure::product(), &[0.5, 0.5]).unwrap();
        assert!(t.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));

        for n in [3usize, 5, 8] {
            let p = params(1.0, 1.1);
            let x = 1.0 - p.alpha() / (n - 1) as f64;
            let t = fixed_point_map(&k(n), &p, &Closure::product(), &vec![x; n]).unwrap();
            assert!(t.iter().all(|v| (v - x).abs() < 1e-14));
        }
        assert!(fixed_point_map(&k(2), &p, &Closure::product(), &[0.5]).is_err());
        assert!(fixed_point_map(&k(2), &params(0.0, 1.0), &Closure::product(), &[0.5, 0.5]).is_err());
    }

    #[test]
    fn closure_below_product_breaks_the_contract() {
        let sub = Closure::custom_unvalidated("x*y*x*y", None).unwrap();
        let err = fixed_point_map(&k(2), &params(1.0, 1.0), &sub, &[0.5, 0.5]).unwrap_err();
        assert!(matches!(err, Error::ClosureContract { .. }));
    }

    #[test]
    fn complete_graph_threshold() {
        let endemic = solve_steady_state(&k(5), &params(0.3, 1.0), &Closure::product(), &[0.5; 5], SolveOptions::default()).unwrap();
        assert_eq!(endemic.regime, Regime::AboveThreshold);
        assert_eq!(endemic.classification, Classification::Endemic);
        assert!(endemic.fixed_point.iter().all(|v| (v - 1.0 / 6.0).abs() < 1e-6));

        let free = solve_steady_state(&k(5), &params(0.2, 1.0), &Closure::product(), &[0.9; 5], SolveOptions::default()).unwrap();
        assert_eq!(free.regime, Regime::BelowThreshold);
        assert_eq!(free.classification, Classification::DiseaseFree);
        assert!(free.max_norm() < 1e-8);
    }

    #[test]
    fn min_closure_has_no_endemic_state() {
        let g = Graph::from_edges(4, &[(0, 1, 1.0), (1, 2, 2.0), (2, 3, 0.5), (3, 0, 1.5), (0, 2, 1.0)]).unwrap();
        for tau in [0.1, 1.0, 10.0] {
            let r = solve_steady_state(&g, &params(tau, 0.5), &Closure::min(), &[0.9, 0.2, 0.6, 1.0], SolveOptions::default()).unwrap();
            assert_eq!(r.classification, Classification::DiseaseFree, "tau = {tau}");
        }
    }

    #[test]
    fn requires_strong_connectivity() {
        let path = Graph::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        assert!(matches!(
            solve_steady_state(&path, &params(1.0, 1.0), &Closure::product(), &[0.5, 0.5], SolveOptions::default()),
            Err(Error::NotStronglyConnected)
        ));
    }

    #[test]
    fn non_convergence_reports_history() {
        let err = solve_steady_state(&k(5), &params(0.3, 1.0), &Closure::product(), &[0.5; 5], SolveOptions { tol: 1e-10, max_iter: 3 }).unwrap_err();
        match err {
            Error::SteadyStateNoConvergence { iterations, residual_history } => {
                assert_eq!(iterations, 3);
                assert_eq!(residual_history.len(), 4);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn no_endemic_reports() {
        let r = verify_no_endemic_above_alpha(&k(4), &params(0.2, 1.0), &Closure::product(), 50, 7, SolveOptions::default()).unwrap();
        assert!(r.passed(), "{r:?}");
        assert_eq!(r.converged_to_zero, 50);

        let cycle = Graph::directed_cycle(3).unwrap();
        let r = verify_no_endemic_above_alpha(&cycle, &params(0.5, 1.0), &Closure::geo_sqrt(), 20, 1, SolveOptions::default()).unwrap();
        assert!(r.passed(), "{r:?}");

        let r = verify_no_endemic_above_alpha(&k(4), &params(1.0 / 3.0, 1.0), &Closure::product(), 3, 1, SolveOptions { tol: 1e-6, max_iter: 1_000_000 }).unwrap();
        assert_eq!(r.regime, Regime::Critical);
        assert!(r.note.is_some());
        assert!(!r.passed());
    }

    #[test]
    fn sweep_modes_agree() {
        let warm = bifurcation_sweep(&k(5), 1.0, &Closure::product(), (0.1, 0.6), 51, SweepMode::WarmStart, SolveOptions::default()).unwrap();
        let cold = bifurcation_sweep(&k(5), 1.0, &Closure::product(), (0.1, 0.6), 51, SweepMode::ColdParallel, SolveOptions::default()).unwrap();
        let threshold = warm.threshold_estimate.unwrap();
        assert!((threshold - 0.25).abs() <= warm.step() + 1e-12);
        for (a, b) in warm.fixed_points.iter().zip(&cold.fixed_points) {
            assert!(a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-6));
        }
        let min = bifurcation_sweep(&k(5), 1.0, &Closure::min(), (0.1, 0.6), 51, SweepMode::WarmStart, SolveOptions::default()).unwrap();
        assert!(min.steady_state_norms.iter().all(|&m| m <= DETECTION_FLOOR));
        assert_eq!(min.threshold_estimate, None);
        assert!(bifurcation_sweep(&k(5), 1.0, &Closure::min(), (0.6, 0.1), 51, SweepMode::WarmStart, SolveOptions::default()).is_err());
    }
}
