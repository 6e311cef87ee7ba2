//! Exact SIS dynamics as a continuous-time Markov chain on `2^n` configurations.
//!
//! Configuration `s` is a bitmask: bit `i` set means node `i` is infected.
//! Every node, pair and triple probability is a linear functional of the
//! distribution over configurations.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::ode::{integrate, IvpSpec, Tolerances, Trajectory};
use crate::params::EpidemicParams;
use crate::residual::ResidualReport;

/// Default node cap for the master equation.
pub const DEFAULT_NODE_CAP: usize = 20;
/// Environment variable overriding [`DEFAULT_NODE_CAP`].
pub const NODE_CAP_ENV: &str = "EPIBOUND_MAX_N";
/// Negative probabilities down to this magnitude are treated as solver noise.
pub const CLAMP_TOL: f64 = 1e-12;
/// Allowed deviation of the total probability from one.
pub const MASS_TOL: f64 = 1e-10;

/// Node cap in effect: `EPIBOUND_MAX_N` if set and valid, else 20.
pub fn node_cap() -> usize {
    std::env::var(NODE_CAP_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&n: &usize| n >= 1 && n < usize::BITS as usize)
        .unwrap_or(DEFAULT_NODE_CAP)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeState {
    S,
    I,
}

/// Probability distribution over all `2^n` configurations.
#[derive(Debug, Clone, PartialEq)]
pub struct MasterDistribution {
    n: usize,
    probs: Vec<f64>,
}

/// The four joint probabilities of an ordered pair `(i, j)` and its marginals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairState {
    /// `<I_i I_j>`
    pub a: f64,
    /// `<S_i I_j>`
    pub b: f64,
    /// `<I_i S_j>`
    pub c: f64,
    /// `<S_i S_j>`
    pub d: f64,
    /// `<I_i>`
    pub p: f64,
    /// `<I_j>`
    pub q: f64,
}

impl PairState {
    pub fn from_joint(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self {
            a,
            b,
            c,
            d,
            p: a + c,
            q: a + b,
        }
    }

    /// Largest violation of `a+b+c+d = 1` and the marginal identities.
    pub fn consistency_error(&self) -> f64 {
        let Self { a, b, c, d, p, q } = *self;
        [
            a + b + c + d - 1.0,
            a + b - q,
            a + c - p,
            c + d - (1.0 - q),
            b + d - (1.0 - p),
        ]
        .into_iter()
        .fold(0.0f64, |m, e| m.max(e.abs()))
    }

    /// `<S_i><I_j> - <S_i I_j>`.
    pub fn correlation(&self) -> f64 {
        (1.0 - self.p) * self.q - self.b
    }
}

impl MasterDistribution {
    /// Validates length `2^n`, entries `>= -1e-12` and total mass `1 ± 1e-10`.
    /// Small negative entries are clamped to zero.
    pub fn new(n: usize, mut probs: Vec<f64>) -> Result<Self> {
        if n == 0 || n >= usize::BITS as usize {
            return Err(Error::Validation(format!("invalid node count {n}")));
        }
        if probs.len() != 1usize << n {
            return Err(Error::Validation(format!(
                "distribution over {n} nodes needs {} entries, got {}",
                1usize << n,
                probs.len()
            )));
        }
        if let Some((s, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < -CLAMP_TOL)
        {
            return Err(Error::Validation(format!("probability of configuration {s} is {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::Validation(format!("probabilities sum to {total}, not 1")));
        }
        probs.iter_mut().for_each(|p| *p = p.max(0.0));
        Ok(Self { n, probs })
    }

    /// Independent nodes with `P(node i infected) = marginals[i]`.
    pub fn product(marginals: &[f64]) -> Result<Self> {
        let n = marginals.len();
        if n == 0 {
            return Err(Error::Validation("need at least one node".into()));
        }
        if n >= usize::BITS as usize {
            return Err(Error::Validation(format!("{n} nodes cannot be enumerated")));
        }
        if let Some((i, p)) = marginals
            .iter()
            .enumerate()
            .find(|(_, p)| !(**p >= 0.0 && **p <= 1.0))
        {
            return Err(Error::Validation(format!(
                "marginal of node {} is {p}, outside [0, 1]",
                i + 1
            )));
        }
        let mut probs = vec![1.0; 1 << n];
        for (s, prob) in probs.iter_mut().enumerate() {
            for (i, &m) in marginals.iter().enumerate() {
                *prob *= if s >> i & 1 == 1 { m } else { 1.0 - m };
            }
        }
        Ok(Self { n, probs })
    }

    /// All mass on one configuration.
    pub fn point_mass(n: usize, config: usize) -> Result<Self> {
        let mut probs = vec![0.0; 1usize << n];
        *probs
            .get_mut(config)
            .ok_or_else(|| Error::Validation(format!("configuration {config} out of range")))? = 1.0;
        Self::new(n, probs)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    fn check_node(&self, i: usize) -> Result<()> {
        if i < self.n {
            Ok(())
        } else {
            Err(Error::Validation(format!("node index {i} out of range for {} nodes", self.n)))
        }
    }

    /// `(<I_i>, <S_i>)`.
    pub fn node(&self, i: usize) -> Result<(f64, f64)> {
        self.check_node(i)?;
        let inf: f64 = self
            .probs
            .iter()
            .enumerate()
            .filter(|(s, _)| s >> i & 1 == 1)
            .map(|(_, p)| p)
            .sum();
        Ok((inf, 1.0 - inf))
    }

    pub fn pair(&self, i: usize, j: usize) -> Result<PairState> {
        self.check_node(i)?;
        self.check_node(j)?;
        if i == j {
            return Err(Error::Validation(format!("pair needs two distinct nodes, got ({i}, {i})")));
        }
        let mut joint = [0.0; 4];
        for (s, p) in self.probs.iter().enumerate() {
            joint[(s >> i & 1) << 1 | (s >> j & 1)] += p;
        }
        // index = 2 * I_i + I_j
        let [ss, si, is, ii] = joint;
        Ok(PairState::from_joint(ii, si, is, ss))
    }

    /// Probability that `(i, j, k)` is in the given pattern, e.g. `S I S`.
    pub fn triple(&self, i: usize, j: usize, k: usize, pattern: TriplePattern) -> Result<f64> {
        for v in [i, j, k] {
            self.check_node(v)?;
        }
        if i == j || j == k || i == k {
            return Err(Error::Validation(format!(
                "triple needs three distinct nodes, got ({i}, {j}, {k})"
            )));
        }
        let want = |s: usize, v: usize, st: NodeState| (s >> v & 1 == 1) == (st == NodeState::I);
        let [a, b, c] = pattern.0;
        Ok(self
            .probs
            .iter()
            .enumerate()
            .filter(|(s, _)| want(*s, i, a) && want(*s, j, b) && want(*s, k, c))
            .map(|(_, p)| p)
            .sum())
    }

    /// Node, pair and (optionally) triple infection moments in one pass.
    pub fn moments(&self, with_triples: bool) -> Moments {
        let n = self.n;
        let mut m = Moments {
            n,
            i1: vec![0.0; n],
            i2: vec![0.0; n * n],
            i3: if with_triples { vec![0.0; n * n * n] } else { Vec::new() },
        };
        let mut bits = Vec::with_capacity(n);
        for (s, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            bits.clear();
            bits.extend((0..n).filter(|i| s >> i & 1 == 1));
            for (x, &i) in bits.iter().enumerate() {
                m.i1[i] += p;
                for (y, &j) in bits.iter().enumerate().skip(x + 1) {
                    m.i2[i * n + j] += p;
                    if with_triples {
                        for &k in &bits[y + 1..] {
                            m.i3[(i * n + j) * n + k] += p;
                        }
                    }
                }
            }
        }
        // symmetrize
        for i in 0..n {
            m.i2[i * n + i] = m.i1[i];
            for j in i + 1..n {
                m.i2[j * n + i] = m.i2[i * n + j];
            }
        }
        if with_triples {
            for i in 0..n {
                for j in i + 1..n {
                    for k in j + 1..n {
                        let v = m.i3[(i * n + j) * n + k];
                        for (a, b, c) in [(i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)] {
                            m.i3[(a * n + b) * n + c] = v;
                        }
                    }
                }
            }
        }
        m
    }
}

/// States of an ordered node triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TriplePattern(pub [NodeState; 3]);

impl FromStr for TriplePattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let states: Vec<NodeState> = s
            .chars()
            .map(|c| match c {
                'S' | 's' => Ok(NodeState::S),
                'I' | 'i' => Ok(NodeState::I),
                other => Err(Error::Validation(format!("pattern letter `{other}` is not S or I"))),
            })
            .collect::<Result<_>>()?;
        let arr: [NodeState; 3] = states
            .try_into()
            .map_err(|_| Error::Validation(format!("pattern `{s}` must have three letters")))?;
        Ok(Self(arr))
    }
}

impl fmt::Display for TriplePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in self.0 {
            f.write_str(if s == NodeState::S { "S" } else { "I" })?;
        }
        Ok(())
    }
}

/// Infection moments `<I_i>`, `<I_i I_j>`, `<I_i I_j I_k>`; any S/I pattern
/// follows by inclusion–exclusion with `S = 1 - I`.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    n: usize,
    i1: Vec<f64>,
    i2: Vec<f64>,
    i3: Vec<f64>,
}

impl Moments {
    pub fn n(&self) -> usize {
        self.n
    }

    /// `<I_i>`
    #[inline]
    pub fn inf(&self, i: usize) -> f64 {
        self.i1[i]
    }

    /// `<S_i>`
    #[inline]
    pub fn sus(&self, i: usize) -> f64 {
        1.0 - self.i1[i]
    }

    /// `<I_i I_j>`, `i != j`.
    #[inline]
    pub fn ii(&self, i: usize, j: usize) -> f64 {
        self.i2[i * self.n + j]
    }

    /// `<S_i I_j>`
    #[inline]
    pub fn si(&self, i: usize, j: usize) -> f64 {
        self.i1[j] - self.ii(i, j)
    }

    /// `<S_i S_j>`
    #[inline]
    pub fn ss(&self, i: usize, j: usize) -> f64 {
        1.0 - self.i1[i] - self.i1[j] + self.ii(i, j)
    }

    pub fn pair(&self, i: usize, j: usize) -> PairState {
        let a = self.ii(i, j);
        PairState::from_joint(a, self.si(i, j), self.si(j, i), self.ss(i, j))
    }

    /// Triple probability for distinct `i, j, k`; needs triples.
    pub fn triple(&self, i: usize, j: usize, k: usize, pattern: TriplePattern) -> f64 {
        let nodes = [i, j, k];
        let infected: Vec<usize> = (0..3).filter(|&x| pattern.0[x] == NodeState::I).collect();
        let susceptible: Vec<usize> = (0..3).filter(|&x| pattern.0[x] == NodeState::S).collect();
        let mut total = 0.0;
        for mask in 0..(1usize << susceptible.len()) {
            let mut set: Vec<usize> = infected.iter().map(|&x| nodes[x]).collect();
            for (b, &x) in susceptible.iter().enumerate() {
                if mask >> b & 1 == 1 {
                    set.push(nodes[x]);
                }
            }
            let sign = if mask.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            total += sign * self.joint_inf(&set);
        }
        total
    }

    /// `<I_i I_j I_k>` for distinct nodes; needs triples.
    #[inline]
    pub fn triple_inf(&self, i: usize, j: usize, k: usize) -> f64 {
        self.i3[(i * self.n + j) * self.n + k]
    }

    fn joint_inf(&self, set: &[usize]) -> f64 {
        let n = self.n;
        match *set {
            [] => 1.0,
            [i] => self.i1[i],
            [i, j] => self.i2[i * n + j],
            [i, j, k] => self.i3[(i * n + j) * n + k],
            _ => unreachable!("at most three nodes"),
        }
    }
}

/// Transition rates of the chain: flipping node `i` in configuration `s`
/// happens at `rate(s, i)` (recovery `gamma` if infected, `tau sum_{j in s} g_ij`
/// otherwise).
#[derive(Debug, Clone)]
pub struct Generator {
    n: usize,
    rates: Vec<f64>,
    exit: Vec<f64>,
}

impl Generator {
    pub fn new(g: &Graph, params: &EpidemicParams) -> Result<Self> {
        Self::with_cap(g, params, node_cap())
    }

    pub fn with_cap(g: &Graph, params: &EpidemicParams, cap: usize) -> Result<Self> {
        let n = g.n();
        if n > cap {
            return Err(Error::Capacity { n, cap });
        }
        let size = 1usize << n;
        let tau = params.tau();
        let mut rates = vec![0.0; n * size];
        // infection pressure on every node, built from s with its lowest bit cleared
        for s in 1..size {
            let low = s.trailing_zeros() as usize;
            let prev = (s & (s - 1)) * n;
            for i in 0..n {
                rates[s * n + i] = rates[prev + i] + tau * g.weight(i, low);
            }
        }
        let mut exit = vec![0.0; size];
        for s in 0..size {
            let mut total = 0.0;
            for i in 0..n {
                let r = &mut rates[s * n + i];
                if s >> i & 1 == 1 {
                    *r = params.gamma();
                }
                total += *r;
            }
            exit[s] = total;
        }
        Ok(Self { n, rates, exit })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn states(&self) -> usize {
        self.exit.len()
    }

    #[inline]
    pub fn flip_rate(&self, s: usize, i: usize) -> f64 {
        self.rates[s * self.n + i]
    }

    pub fn exit_rate(&self, s: usize) -> f64 {
        self.exit[s]
    }

    /// Outgoing transitions `(target, rate)` of configuration `s` with nonzero rate.
    pub fn transitions(&self, s: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.n)
            .map(move |i| (s ^ (1 << i), self.flip_rate(s, i)))
            .filter(|&(_, r)| r != 0.0)
    }

    /// `dp = Q p`.
    pub fn apply(&self, p: &[f64], dp: &mut [f64]) {
        for (d, (&e, &x)) in dp.iter_mut().zip(self.exit.iter().zip(p)) {
            *d = -e * x;
        }
        for (s, &ps) in p.iter().enumerate() {
            if ps == 0.0 {
                continue;
            }
            let row = &self.rates[s * self.n..(s + 1) * self.n];
            for (i, &r) in row.iter().enumerate() {
                if r != 0.0 {
                    dp[s ^ (1 << i)] += r * ps;
                }
            }
        }
    }

    /// Dense generator, `Q[target][source]`. Intended for small `n`.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let size = self.states();
        let mut q = vec![vec![0.0; size]; size];
        for s in 0..size {
            q[s][s] = -self.exit[s];
            for (t, r) in self.transitions(s) {
                q[t][s] += r;
            }
        }
        q
    }
}

/// Master-equation solution sampled at the requested times.
#[derive(Debug, Clone)]
pub struct MasterTrajectory {
    pub times: Vec<f64>,
    pub dists: Vec<MasterDistribution>,
    /// Largest negative entry clamped to zero on output.
    pub max_clamp: f64,
    /// Largest `|sum p - 1|` before clamping.
    pub max_mass_error: f64,
}

impl MasterTrajectory {
    pub fn n(&self) -> usize {
        self.dists.first().map_or(0, MasterDistribution::n)
    }

    /// `<I_i>(t_k)` for every output time and node, one row per time.
    pub fn node_marginals(&self) -> Vec<Vec<f64>> {
        self.dists
            .iter()
            .map(|d| d.moments(false).i1.clone())
            .collect()
    }
}

/// Integrates `dP/dt = Q P` from `init`.
pub fn solve_master(
    g: &Graph,
    params: &EpidemicParams,
    init: &MasterDistribution,
    output_times: &[f64],
    tol: Tolerances,
) -> Result<MasterTrajectory> {
    let gen = Generator::new(g, params)?;
    solve_with_generator(&gen, init, output_times, tol)
}

pub fn solve_with_generator(
    gen: &Generator,
    init: &MasterDistribution,
    output_times: &[f64],
    tol: Tolerances,
) -> Result<MasterTrajectory> {
    if init.n() != gen.n() {
        return Err(Error::Validation(format!(
            "initial distribution has {} nodes, graph has {}",
            init.n(),
            gen.n()
        )));
    }
    let traj = integrate(
        IvpSpec::new(|_t, p: &[f64], dp: &mut [f64]| gen.apply(p, dp), init.probs.clone(), output_times.to_vec())
            .tolerances(tol),
    )?;
    let mut max_clamp = 0.0f64;
    let mut max_mass_error = 0.0f64;
    let dists = traj
        .states()
        .map(|row| {
            max_mass_error = max_mass_error.max((row.iter().sum::<f64>() - 1.0).abs());
            let probs = row
                .iter()
                .map(|&p| {
                    if p < 0.0 {
                        max_clamp = max_clamp.max(-p);
                    }
                    p.max(0.0)
                })
                .collect();
            MasterDistribution { n: gen.n(), probs }
        })
        .collect();
    Ok(MasterTrajectory {
        times: traj.times,
        dists,
        max_clamp,
        max_mass_error,
    })
}

/// Explicit six-equation system for two nodes joined in both directions with
/// unit weight. Components: `<I_1>, <I_2>, <SI>, <IS>, <II>, <SS>`.
pub fn two_node_pair_system(
    params: &EpidemicParams,
    init: &PairState,
    output_times: &[f64],
    tol: Tolerances,
) -> Result<Trajectory> {
    let err = init.consistency_error();
    if err > MASS_TOL {
        return Err(Error::Validation(format!("inconsistent initial pair state (error {err:e})")));
    }
    let (tau, gamma) = (params.tau(), params.gamma());
    let y0 = vec![init.p, init.q, init.b, init.c, init.a, init.d];
    let rhs = move |_t: f64, y: &[f64], dy: &mut [f64]| {
        let (i1, i2, si, is, ii) = (y[0], y[1], y[2], y[3], y[4]);
        dy[0] = tau * si - gamma * i1;
        dy[1] = tau * is - gamma * i2;
        dy[2] = -tau * si - gamma * si + gamma * ii;
        dy[3] = -tau * is - gamma * is + gamma * ii;
        dy[4] = -2.0 * gamma * ii + tau * si + tau * is;
        dy[5] = gamma * si + gamma * is;
    };
    Ok(integrate(IvpSpec::new(rhs, y0, output_times.to_vec()).tolerances(tol))?)
}

/// Right-hand side of the exact (unclosed) node equation
/// `d<I_i>/dt = tau sum_j g_ij <S_i I_j> - gamma <I_i>`.
pub fn node_equation_rhs(g: &Graph, params: &EpidemicParams, m: &Moments, i: usize) -> f64 {
    let infection: f64 = (0..g.n())
        .filter(|&j| j != i)
        .map(|j| g.weight(i, j) * m.si(i, j))
        .sum();
    params.tau() * infection - params.gamma() * m.inf(i)
}

/// Right-hand sides of the exact pair equations for `(i, j)`, in the order
/// `<S_i I_j>, <I_i S_j>, <I_i I_j>, <S_i S_j>`. Needs triple moments.
pub fn pair_equation_rhs(g: &Graph, params: &EpidemicParams, m: &Moments, i: usize, j: usize) -> [f64; 4] {
    use NodeState::{I, S};
    let (tau, gamma) = (params.tau(), params.gamma());
    let t = |a, b, c, k| m.triple(i, j, k, TriplePattern([a, b, c]));
    let (mut ssi_j, mut isi_i, mut isi_j, mut ssi_i) = (0.0, 0.0, 0.0, 0.0);
    for k in (0..g.n()).filter(|&k| k != i && k != j) {
        let (gjk, gik) = (g.weight(j, k), g.weight(i, k));
        // j infected by k while i, j susceptible / i infected
        ssi_j += gjk * t(S, S, I, k);
        isi_j += gjk * t(I, S, I, k);
        // i infected by k while j infected / susceptible
        isi_i += gik * t(S, I, I, k);
        ssi_i += gik * t(S, S, I, k);
    }
    let (si, is, ii) = (m.si(i, j), m.si(j, i), m.ii(i, j));
    let (gij, gji) = (g.weight(i, j), g.weight(j, i));
    [
        tau * ssi_j - tau * isi_i - tau * gij * si - gamma * si + gamma * ii,
        tau * ssi_i - tau * isi_j - tau * gji * is - gamma * is + gamma * ii,
        tau * isi_j + tau * isi_i - 2.0 * gamma * ii + tau * gij * si + tau * gji * is,
        -tau * ssi_i - tau * ssi_j + gamma * si + gamma * is,
    ]
}

/// Finite-difference check of the exact node equations along a solved
/// trajectory on a uniform grid.
pub fn node_equation_residuals(
    g: &Graph,
    params: &EpidemicParams,
    traj: &MasterTrajectory,
    base_tol: f64,
) -> Result<ResidualReport> {
    let moments: Vec<Moments> = traj.dists.iter().map(|d| d.moments(false)).collect();
    let mut report = ResidualReport::new(base_tol);
    for i in 0..g.n() {
        let values: Vec<f64> = moments.iter().map(|m| m.inf(i)).collect();
        let rhs: Vec<f64> = moments.iter().map(|m| node_equation_rhs(g, params, m, i)).collect();
        report.check_series(&format!("d<I_{}>/dt", i + 1), &traj.times, &values, &rhs)?;
    }
    Ok(report)
}

/// Finite-difference check of the four exact pair equations for every `i < j`.
pub fn pair_equation_residuals(
    g: &Graph,
    params: &EpidemicParams,
    traj: &MasterTrajectory,
    base_tol: f64,
) -> Result<ResidualReport> {
    let moments: Vec<Moments> = traj.dists.iter().map(|d| d.moments(true)).collect();
    let mut report = ResidualReport::new(base_tol);
    let names = ["SI", "IS", "II", "SS"];
    for i in 0..g.n() {
        for j in i + 1..g.n() {
            let rhs: Vec<[f64; 4]> = moments
                .iter()
                .map(|m| pair_equation_rhs(g, params, m, i, j))
                .collect();
            for (e, name) in names.iter().enumerate() {
                let values: Vec<f64> = moments
                    .iter()
                    .map(|m| {
                        let p = m.pair(i, j);
                        [p.b, p.c, p.a, p.d][e]
                    })
                    .collect();
                let r: Vec<f64> = rhs.iter().map(|v| v[e]).collect();
                report.check_series(&format!("d<{name}>_{}{}/dt", i + 1, j + 1), &traj.times, &values, &r)?;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::residual::linspace;

    fn k2() -> Graph {
        Graph::complete(2).unwrap()
    }

    #[test]
    fn product_distributions() {
        assert_eq!(MasterDistribution::product(&[1.0]).unwrap().probs(), &[0.0, 1.0]);
        assert_eq!(
            MasterDistribution::product(&[0.5, 0.5]).unwrap().probs(),
            &[0.25, 0.25, 0.25, 0.25]
        );
        let d = MasterDistribution::product(&[0.2, 0.7]).unwrap();
        let expected = [0.24, 0.06, 0.56, 0.14];
        for (p, e) in d.probs().iter().zip(expected) {
            assert!((p - e).abs() < 1e-15);
        }
        assert!(MasterDistribution::product(&[0.2, 1.2]).is_err());
        assert!(MasterDistribution::product(&[f64::NAN]).is_err());
    }

    #[test]
    fn distribution_validation() {
        assert!(MasterDistribution::new(2, vec![0.5, 0.5, 0.0]).is_err());
        assert!(MasterDistribution::new(1, vec![0.6, 0.6]).is_err());
        assert!(MasterDistribution::new(1, vec![1.0 + 1e-12, -1e-12]).is_ok());
        assert!(MasterDistribution::new(1, vec![1.0 + 1e-9, -1e-9]).is_err());
        let d = MasterDistribution::new(1, vec![1.0 + 5e-13, -5e-13]).unwrap();
        assert_eq!(d.probs()[1], 0.0);
    }

    #[test]
    fn node_marginals() {
        let uniform = MasterDistribution::new(2, vec![0.25; 4]).unwrap();
        assert_eq!(uniform.node(0).unwrap(), (0.5, 0.5));
        let full = MasterDistribution::point_mass(2, 0b11).unwrap();
        assert_eq!(full.node(0).unwrap().0, 1.0);
        let d = MasterDistribution::product(&[0.2, 0.7]).unwrap();
        assert!((d.node(1).unwrap().0 - 0.7).abs() < 1e-15);
        assert!(d.node(2).is_err());
    }

    #[test]
    fn pair_marginals() {
        let d = MasterDistribution::product(&[0.2, 0.7]).unwrap();
        let p = d.pair(0, 1).unwrap();
        assert!((p.b - 0.56).abs() < 1e-15);
        assert!(p.consistency_error() < 1e-15);

        let only_second = MasterDistribution::point_mass(2, 0b10).unwrap();
        let p = only_second.pair(0, 1).unwrap();
        assert_eq!((p.a, p.b, p.c, p.d), (0.0, 1.0, 0.0, 0.0));
        assert!(d.pair(1, 1).is_err());
    }

    #[test]
    fn triple_marginals() {
        let d = MasterDistribution::product(&[0.5, 0.5, 0.5]).unwrap();
        let ssi: TriplePattern = "SSI".parse().unwrap();
        assert_eq!(d.triple(0, 1, 2, ssi).unwrap(), 0.125);
        let d = MasterDistribution::point_mass(3, 0b101).unwrap();
        assert_eq!(d.triple(0, 1, 2, "ISI".parse().unwrap()).unwrap(), 1.0);
        assert!(d.triple(0, 0, 2, ssi).is_err());
        assert!("SSX".parse::<TriplePattern>().is_err());
        assert!("SS".parse::<TriplePattern>().is_err());
    }

    #[test]
    fn moments_match_direct_sums() {
        let probs: Vec<f64> = (0..16).map(|s| (s as f64 + 1.0) / 136.0).collect();
        let d = MasterDistribution::new(4, probs).unwrap();
        let m = d.moments(true);
        let mut all_patterns_total = 0.0;
        for code in 0..8 {
            let pat = TriplePattern([0, 1, 2].map(|b| if code >> b & 1 == 1 { NodeState::I } else { NodeState::S }));
            let direct = d.triple(3, 0, 2, pat).unwrap();
            assert!((direct - m.triple(3, 0, 2, pat)).abs() < 1e-15, "{pat}");
            all_patterns_total += direct;
        }
        assert!((all_patterns_total - 1.0).abs() < 1e-14);
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    let direct = d.pair(i, j).unwrap();
                    let fast = m.pair(i, j);
                    assert!((direct.b - fast.b).abs() < 1e-15);
                    assert!((direct.d - fast.d).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn generator_rates() {
        let single = Graph::from_dense(1, vec![0.0]).unwrap();
        let params = EpidemicParams::new(0.8, 1.5).unwrap();
        let gen = Generator::new(&single, &params).unwrap();
        assert_eq!(gen.transitions(1).collect::<Vec<_>>(), vec![(0, 1.5)]);
        assert_eq!(gen.transitions(0).count(), 0);

        let gen = Generator::new(&k2(), &params).unwrap();
        // {2} = 0b10 -> {1,2} at tau, -> {} at gamma
        let mut t: Vec<_> = gen.transitions(0b10).collect();
        t.sort_by_key(|x| x.0);
        assert_eq!(t, vec![(0b00, 1.5), (0b11, 0.8)]);

        let q = gen.to_dense();
        for s in 0..4 {
            let off: f64 = (0..4).filter(|&t| t != s).map(|t| q[t][s]).sum();
            assert_eq!(off + q[s][s], 0.0);
        }
    }

    #[test]
    fn capacity_is_enforced() {
        let g = Graph::complete(5).unwrap();
        let params = EpidemicParams::new(1.0, 1.0).unwrap();
        assert!(matches!(
            Generator::with_cap(&g, &params, 4),
            Err(Error::Capacity { n: 5, cap: 4 })
        ));
        assert!(Generator::with_cap(&g, &params, 5).is_ok());
    }

    #[test]
    fn single_node_decay() {
        let g = Graph::from_dense(1, vec![0.0]).unwrap();
        let params = EpidemicParams::new(1.0, 1.0).unwrap();
        let init = MasterDistribution::product(&[1.0]).unwrap();
        let traj = solve_master(&g, &params, &init, &[0.0, 1.0], Tolerances::default()).unwrap();
        assert!((traj.dists[1].node(0).unwrap().0 - (-1.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn no_transmission_means_independent_decay() {
        let g = Graph::complete(4).unwrap();
        let params = EpidemicParams::new(0.0, 0.7).unwrap();
        let p0 = [0.9, 0.1, 0.5, 0.3];
        let init = MasterDistribution::product(&p0).unwrap();
        let times = linspace(0.0, 3.0, 7);
        let traj = solve_master(&g, &params, &init, &times, Tolerances::default()).unwrap();
        for (d, t) in traj.dists.iter().zip(&times) {
            for (i, p) in p0.iter().enumerate() {
                let expected = p * (-0.7 * t).exp();
                assert!((d.node(i).unwrap().0 - expected).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn two_node_system_edge_cases() {
        let times = linspace(0.0, 2.0, 5);
        let all_infected = PairState::from_joint(1.0, 0.0, 0.0, 0.0);
        let traj = two_node_pair_system(&EpidemicParams::new(1.0, 0.0).unwrap(), &all_infected, &times, Tolerances::default()).unwrap();
        assert!(traj.states().all(|y| y[4] == 1.0));

        let healthy = PairState::from_joint(0.0, 0.0, 0.0, 1.0);
        let traj = two_node_pair_system(&EpidemicParams::new(2.0, 0.5).unwrap(), &healthy, &times, Tolerances::default()).unwrap();
        assert!(traj.states().all(|y| y[0] == 0.0 && y[1] == 0.0 && y[4] == 0.0 && y[5] == 1.0));

        let bad = PairState::from_joint(0.5, 0.5, 0.5, 0.0);
        assert!(two_node_pair_system(&EpidemicParams::new(1.0, 1.0).unwrap(), &bad, &times, Tolerances::default()).is_err());
    }

    #[test]
    fn exact_equations_hold_along_solution() {
        let g = Graph::from_edges(3, &[(0, 1, 1.0), (1, 2, 0.5), (2, 0, 1.2), (0, 2, 0.3)]).unwrap();
        let params = EpidemicParams::new(0.9, 0.6).unwrap();
        let init = MasterDistribution::product(&[0.8, 0.1, 0.3]).unwrap();
        let times = linspace(0.0, 2.0, 201);
        let traj = solve_master(&g, &params, &init, &times, Tolerances::default()).unwrap();
        assert!(traj.max_mass_error < MASS_TOL);
        let node = node_equation_residuals(&g, &params, &traj, 1e-6).unwrap();
        assert!(node.passed(), "{node:?}");
        let pair = pair_equation_residuals(&g, &params, &traj, 1e-6).unwrap();
        assert!(pair.passed(), "{pair:?}");

        // a wrong rate constant must be caught
        let wrong = EpidemicParams::new(0.95, 0.6).unwrap();
        assert!(!node_equation_residuals(&g, &wrong, &traj, 1e-6).unwrap().passed());
        assert!(!pair_equation_residuals(&g, &wrong, &traj, 1e-6).unwrap().passed());
    }

    #[test]
    fn matches_dense_matrix_exponential() {
        use nalgebra::{DMatrix, DVector};
        let params = EpidemicParams::new(1.0, 1.0).unwrap();
        let gen = Generator::new(&k2(), &params).unwrap();
        let dense = gen.to_dense();
        let q = DMatrix::from_fn(4, 4, |r, c| dense[r][c]);
        let init = MasterDistribution::product(&[1.0, 0.0]).unwrap();
        let traj = solve_with_generator(&gen, &init, &[0.0, 1.0], Tolerances::default()).unwrap();
        let expected = q.exp() * DVector::from_column_slice(init.probs());
        for (p, e) in traj.dists[1].probs().iter().zip(expected.iter()) {
            assert!((p - e).abs() < 1e-8, "{p} vs {e}");
        }
        let (i1, _) = traj.dists[1].node(0).unwrap();
        assert!((i1 - (expected[1] + expected[3])).abs() < 1e-8);
    }

    #[test]
    fn two_node_system_agrees_with_master() {
        let params = EpidemicParams::new(2.0, 1.0).unwrap();
        let times = linspace(0.0, 0.5, 11);
        let init = MasterDistribution::point_mass(2, 0b10).unwrap();
        let master = solve_master(&k2(), &params, &init, &times, Tolerances::default()).unwrap();
        let pair = two_node_pair_system(&params, &init.pair(0, 1).unwrap(), &times, Tolerances::default()).unwrap();
        for (d, y) in master.dists.iter().zip(pair.states()) {
            let p = d.pair(0, 1).unwrap();
            let exact = [p.p, p.q, p.b, p.c, p.a, p.d];
            for (a, b) in exact.iter().zip(y) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
