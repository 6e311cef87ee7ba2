//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//!     cargo test --release --test acceptance

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use epibound::batch::{run_batch, BatchConfig, BatchSummary};
use epibound::correlation::{aij_residuals, two_node_correlation_residual};
use epibound::master::{node_equation_residuals, pair_equation_residuals, solve_master, two_node_pair_system, MASS_TOL};
use epibound::residual::linspace;
use epibound::steadystate::{bifurcation_sweep, multistart, random_starts, solve_steady_state, SolveOptions, SweepMode};
use epibound::{ClosedModel, Closure, EpidemicParams, Graph, MasterDistribution, Tolerances};

type Outcome = (bool, String);
type Criterion = (&'static str, fn() -> Outcome);

/// The shared ensemble and the wall time it took.
fn ensemble() -> &'static (BatchSummary, f64) {
    use std::sync::OnceLock;
    static SUMMARY: OnceLock<(BatchSummary, f64)> = OnceLock::new();
    SUMMARY.get_or_init(|| {
        let start = Instant::now();
        let s = run_batch(&BatchConfig::default(), Tolerances::default()).expect("ensemble runs");
        (s, start.elapsed().as_secs_f64())
    })
}

fn nimfa_upper_bound() -> Outcome {
    let (s, secs) = ensemble();
    let worst = s.worst_nimfa_margin;
    let ns: Vec<usize> = s.instances.iter().map(|r| r.n).collect();
    let sizes_ok = ns.iter().all(|n| (3..=10).contains(n));
    (
        worst >= -1e-7 && *secs < 60.0 && s.instances.len() == 20 && sizes_ok,
        format!("20 instances, worst min(Y - <I>) = {worst:e}, {secs:.1} s"),
    )
}

fn min_closure_lower_bound() -> Outcome {
    let worst = ensemble().0.worst_min_closure_margin;
    (worst >= -1e-7, format!("worst min(<I> - X) = {worst:e}"))
}

fn nonnegative_correlation() -> Outcome {
    let s = &ensemble().0;
    let (a, ii) = (s.worst_correlation, s.worst_infected_excess);
    (
        a >= -1e-8 && ii >= -1e-8,
        format!("min A_ij = {a:e}, min <I_i I_j> - <I_i><I_j> = {ii:e}"),
    )
}

fn two_node_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let g = Graph::complete(2).unwrap();
    let times = linspace(0.0, 5.0, 100);
    let (mut worst_diff, mut worst_res, mut residual_ok) = (0.0f64, 0.0f64, true);
    for _ in 0..10 {
        let params = EpidemicParams::new(rng.gen_range(0.1..2.0), rng.gen_range(0.1..2.0)).unwrap();
        let raw: Vec<f64> = (0..4).map(|_| rng.gen::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        let init = MasterDistribution::new(2, raw.iter().map(|p| p / total).collect()).unwrap();
        let master = solve_master(&g, &params, &init, &times, Tolerances::default()).unwrap();
        let pair = two_node_pair_system(&params, &init.pair(0, 1).unwrap(), &times, Tolerances::default()).unwrap();
        for (d, y) in master.dists.iter().zip(pair.states()) {
            let p = d.pair(0, 1).unwrap();
            for (a, b) in [p.p, p.q, p.b, p.c, p.a, p.d].iter().zip(y) {
                worst_diff = worst_diff.max((a - b).abs());
            }
        }
        let res = two_node_correlation_residual(&params, &pair, 1e-6).unwrap();
        residual_ok &= res.passed();
        worst_res = worst_res.max(res.max_residual);
    }
    (
        worst_diff <= 1e-9 && residual_ok,
        format!("max |pair system - master| = {worst_diff:e}; dA/dt residual max {worst_res:e} within 1e-6 + O(h^2)"),
    )
}

fn random_instance(rng: &mut ChaCha8Rng, n: usize) -> (Graph, EpidemicParams, MasterDistribution) {
    let g = Graph::random_strongly_connected(rng, n, 0.5, 0.2, 1.5).unwrap();
    let params = EpidemicParams::new(rng.gen_range(0.1..2.0), rng.gen_range(0.1..2.0)).unwrap();
    let init: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
    (g, params, MasterDistribution::product(&init).unwrap())
}

fn aij_equation_residual() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let times = linspace(0.0, 2.0, 201);
    let mut ok = true;
    let mut worst = 0.0f64;
    let mut checked = 0;
    for n in [3, 4, 5] {
        let (g, params, init) = random_instance(&mut rng, n);
        let traj = solve_master(&g, &params, &init, &times, Tolerances::default()).unwrap();
        let r = aij_residuals(&g, &params, &traj, 1e-6).unwrap();
        ok &= r.passed();
        worst = worst.max(r.max_residual);
        checked += r.checked;
    }
    (ok, format!("n = 3, 4, 5, h = 0.01: {checked} points, max residual {worst:e} within 1e-6 + O(h^2)"))
}

fn threshold() -> Outcome {
    let g = Graph::complete(5).unwrap();
    let opts = SolveOptions::default();
    let below = EpidemicParams::new(0.2, 1.0).unwrap();
    let mut starts = random_starts(5, 20, 6);
    starts.push(vec![1.0; 5]);
    starts.push(vec![0.5; 5]);
    let runs = multistart(&g, &below, &Closure::product(), &starts, opts).unwrap().runs;
    let below_max = runs.iter().map(|r| r.max_norm()).fold(0.0, f64::max);

    let above = EpidemicParams::new(0.3, 1.0).unwrap();
    let r = solve_steady_state(&g, &above, &Closure::product(), &[0.5; 5], opts).unwrap();
    let fp_err = r.fixed_point.iter().map(|x| (x - 1.0 / 6.0).abs()).fold(0.0, f64::max);
    let ode = ClosedModel::nimfa(g, above).integrate(&[0.5; 5], &[0.0, 200.0], Tolerances::default()).unwrap();
    let ode_err = r.fixed_point.iter().zip(ode.last().unwrap()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    (
        below_max < 1e-8 && fp_err <= 1e-6 && ode_err <= 1e-5,
        format!("tau = 0.2: max ||x|| = {below_max:e} over {} starts; tau = 0.3: |x - 1/6| = {fp_err:e}, |x - X(200)| = {ode_err:e}", starts.len()),
    )
}

fn bifurcation() -> Outcome {
    let g = Graph::complete(5).unwrap();
    let sweep = |c: Closure| bifurcation_sweep(&g, 1.0, &c, (0.1, 0.6), 51, SweepMode::WarmStart, SolveOptions::default()).unwrap();
    let product = sweep(Closure::product());
    let geo = sweep(Closure::geo_sqrt());
    let min = sweep(Closure::min());
    let within = |t: Option<f64>, step: f64| t.is_some_and(|t| (t - 0.25).abs() <= step + 1e-12);
    let min_max = min.steady_state_norms.iter().copied().fold(0.0, f64::max);
    (
        within(product.threshold_estimate, product.step()) && within(geo.threshold_estimate, geo.step()) && min_max <= 1e-4,
        format!(
            "threshold estimates: product {:?}, geo_sqrt {:?} (gamma/Lambda = 0.25); min closure max mean {min_max:e}",
            product.threshold_estimate, geo.threshold_estimate
        ),
    )
}

fn closure_validity() -> Outcome {
    let builtins = [Closure::product(), Closure::min(), Closure::geo_sqrt()];
    let valid = builtins.iter().all(|c| c.validate(200).passed());
    let product = Closure::product().check_wcond(200);
    let geo = Closure::geo_sqrt().check_wcond(200);
    let min = Closure::min().check_wcond(200);
    let witness = min.diagonal_witness.iter().all(|&(d, v)| (v - (1.0 - d)).abs() < 1e-9);
    let near_one = min.diagonal_witness.last().is_some_and(|&(_, v)| v > 0.99);
    (
        valid && product.passed() && geo.passed() && !min.passed() && !min.origin_ok() && witness && near_one,
        format!(
            "grid checks clean; envelope condition: product {}, geo_sqrt {}, min {} (V(d, d) = 1 - d -> {:.6})",
            product.passed(),
            geo.passed(),
            min.passed(),
            min.diagonal_witness.last().map_or(f64::NAN, |w| w.1)
        ),
    )
}

fn conservation_and_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let times = linspace(0.0, 2.0, 201);
    let (mut ok, mut mass, mut node_max, mut pair_max) = (true, 0.0f64, 0.0f64, 0.0f64);
    let mut instances: Vec<_> = [3, 4, 5, 6].into_iter().map(|n| random_instance(&mut rng, n)).collect();
    instances.push((
        Graph::complete(2).unwrap(),
        EpidemicParams::new(1.0, 1.0).unwrap(),
        MasterDistribution::product(&[1.0, 0.0]).unwrap(),
    ));
    for (g, params, init) in &instances {
        let traj = solve_master(g, params, init, &times, Tolerances::default()).unwrap();
        mass = mass.max(traj.max_mass_error);
        let node = node_equation_residuals(g, params, &traj, 1e-6).unwrap();
        let pair = pair_equation_residuals(g, params, &traj, 1e-6).unwrap();
        ok &= traj.max_mass_error <= MASS_TOL && node.passed() && pair.passed();
        node_max = node_max.max(node.max_residual);
        pair_max = pair_max.max(pair.max_residual);
    }
    (
        ok,
        format!("{} instances: max |sum p - 1| = {mass:e}; node residual max {node_max:e}, pair residual max {pair_max:e} within 1e-6 + O(h^2)", instances.len()),
    )
}

fn determinism() -> Outcome {
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_epibound"))
            .args(["batch-verify", "--seed", "42"])
            .output()
            .expect("binary runs")
    };
    let (a, b) = (run(), run());
    let ok = a.status.success() && b.status.success() && a.stdout == b.stdout && !a.stdout.is_empty();
    (ok, format!("two runs, {} bytes each, identical = {}", a.stdout.len(), a.stdout == b.stdout))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("NIMFA upper bound on random digraphs", nimfa_upper_bound),
        ("min-closure lower bound on random digraphs", min_closure_lower_bound),
        ("non-negative pair correlations", nonnegative_correlation),
        ("two-node explicit system vs master equation", two_node_oracle),
        ("A_ij evolution equation residual", aij_equation_residual),
        ("epidemic threshold on K_5", threshold),
        ("bifurcation dichotomy", bifurcation),
        ("closure validity and envelope condition", closure_validity),
        ("conservation and exact-equation residuals", conservation_and_exactness),
        ("batch-verify determinism", determinism),
    ];
    let mut failures = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        });
        if !ok {
            failures += 1;
        }
        println!(
            "criterion {:>2} {}: {name} | {detail} ({:.1} s)",
            k + 1,
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
