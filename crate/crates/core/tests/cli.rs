use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use epibound::cli::read_table;
use epibound::master::solve_master;
use epibound::residual::linspace;
use epibound::{EpidemicParams, Graph, MasterDistribution, Tolerances};

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name).display().to_string()
}

fn epibound(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_epibound")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn meta(text: &str, key: &str) -> Option<String> {
    let prefix = format!("# {key}: ");
    text.lines().find_map(|l| l.strip_prefix(&prefix).map(str::to_string))
}

fn column(header: &[String], rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let k = header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows.iter().map(|r| r[k].parse().unwrap()).collect()
}

#[test]
fn bounds_csv_round_trips_exactly() {
    let two = data("two_node.json");
    let o = epibound(&["bounds", "--graph", &two, "--tau", "0.7", "--gamma", "0.4", "--init", "0.3", "--t-end", "3", "--points", "31"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(meta(&text, "verdict").as_deref(), Some("pass"));
    let (header, rows) = read_table(&text).unwrap();
    assert_eq!(rows.len(), 31);

    let g = Graph::complete(2).unwrap();
    let params = EpidemicParams::new(0.7, 0.4).unwrap();
    let init = MasterDistribution::product(&[0.3, 0.3]).unwrap();
    let traj = solve_master(&g, &params, &init, &linspace(0.0, 3.0, 31), Tolerances::new(1e-10, 1e-10)).unwrap();
    let marg = traj.node_marginals();
    for (i, name) in ["exact_I1", "exact_I2"].iter().enumerate() {
        let col = column(&header, &rows, name);
        for (k, v) in col.iter().enumerate() {
            assert_eq!(*v, marg[k][i], "{name} row {k}");
        }
    }
    let (exact, nimfa, min) = (column(&header, &rows, "exact_I1"), column(&header, &rows, "nimfa_I1"), column(&header, &rows, "min_I1"));
    for k in 0..rows.len() {
        assert!(min[k] <= exact[k] + 1e-7 && exact[k] <= nimfa[k] + 1e-7);
    }
}

#[test]
fn zero_infection_rate_collapses_bounds() {
    let o = epibound(&["bounds", "--graph", &data("directed4.json"), "--tau", "0", "--gamma", "0.8", "--init", "0.6", "--t-end", "4"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, rows) = read_table(&stdout(&o)).unwrap();
    let times = column(&header, &rows, "t");
    for i in 1..=4 {
        let cols: Vec<Vec<f64>> = ["exact", "nimfa", "min"].iter().map(|p| column(&header, &rows, &format!("{p}_I{i}"))).collect();
        for (k, t) in times.iter().enumerate() {
            let expected = 0.6 * (-0.8 * t).exp();
            for c in &cols {
                assert!((c[k] - expected).abs() < 1e-8, "node {i} t {t}: {} vs {expected}", c[k]);
            }
        }
    }
}

#[test]
fn json_output_parses() {
    let o = epibound(&["steady", "--graph", &data("k5.json"), "--tau", "0.3", "--gamma", "1", "--json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["meta"]["regime"], "above_threshold");
    let rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 5);
    for r in rows {
        assert!((r[1].as_f64().unwrap() - 1.0 / 6.0).abs() < 1e-6);
    }
}

#[test]
fn scenario_file_and_overrides() {
    let o = epibound(&["correlations", "--scenario", &data("two_node_scenario.json")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(meta(&text, "verdict").as_deref(), Some("pass"));
    assert_eq!(meta(&text, "closure").as_deref(), Some("geo_sqrt"));
    assert_eq!(read_table(&text).unwrap().1.len(), 51);

    let o = epibound(&["correlations", "--scenario", &data("two_node_scenario.json"), "--points", "11"]);
    assert_eq!(read_table(&stdout(&o)).unwrap().1.len(), 11);
}

#[test]
fn out_file_is_not_overwritten_without_force() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("table.csv");
    let p = path.to_str().unwrap();
    let args = ["bounds", "--graph", &data("two_node.json"), "--tau", "1", "--gamma", "1", "--out", p];
    let first = epibound(&args);
    assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
    assert!(first.stdout.is_empty());
    let written = fs::read_to_string(&path).unwrap();
    assert!(written.starts_with("# tool: epibound"));

    fs::write(&path, "keep me").unwrap();
    let second = epibound(&args);
    assert_eq!(second.status.code(), Some(2));
    assert_eq!(fs::read_to_string(&path).unwrap(), "keep me");

    let mut forced = args.to_vec();
    forced.push("--force");
    assert_eq!(epibound(&forced).status.code(), Some(0));
    assert_eq!(fs::read_to_string(&path).unwrap(), written);
}

#[test]
fn validation_failures_exit_2() {
    let two = data("two_node.json");
    let cases: Vec<Vec<&str>> = vec![
        vec!["bounds", "--graph", &two, "--tau", "1"],
        vec!["bounds", "--graph", &two, "--tau", "-1", "--gamma", "1"],
        vec!["bounds", "--graph", &two, "--tau", "1", "--gamma", "1", "--closure", "custom:x+"],
        vec!["bounds", "--graph", "/nonexistent/graph.json", "--tau", "1", "--gamma", "1"],
        vec!["steady", "--graph", &two, "--tau", "nan", "--gamma", "1"],
        vec!["batch-verify", "--count", "0"],
        vec!["no-such-command"],
    ];
    for args in cases {
        let o = epibound(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn steady_state_rejects_non_strongly_connected() {
    let o = epibound(&["steady", "--graph", &data("path.json"), "--tau", "1", "--gamma", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).to_lowercase().contains("strongly connected"), "{}", stderr(&o));
}

#[test]
fn correlations_need_two_nodes() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("single.json");
    fs::write(&g, r#"{"n": 1, "edges": []}"#).unwrap();
    let o = epibound(&["correlations", "--graph", g.to_str().unwrap(), "--tau", "1", "--gamma", "1"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn negatively_correlated_start_is_flagged() {
    let o = epibound(&["correlations", "--graph", &data("two_node.json"), "--tau", "1", "--gamma", "1", "--raw-init", &data("correlated_init.json")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(meta(&text, "verdict").as_deref(), Some("hypothesis_not_met"));
    assert!(meta(&text, "warning").is_some());
    assert!(stderr(&o).contains("warning"));
    let initial: f64 = meta(&text, "initial_min_A").unwrap().parse().unwrap();
    assert!((initial + 0.25).abs() < 1e-12);
}

#[test]
fn too_many_nodes_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("ring25.json");
    let edges: Vec<String> = (1..=25).map(|i| format!(r#"{{"from": {i}, "to": {}, "weight": 1.0}}"#, i % 25 + 1)).collect();
    fs::write(&g, format!(r#"{{"n": 25, "edges": [{}]}}"#, edges.join(","))).unwrap();
    let o = epibound(&["bounds", "--graph", g.to_str().unwrap(), "--tau", "1", "--gamma", "1"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
}

#[test]
fn sweep_brackets_threshold() {
    let o = epibound(&["sweep", "--graph", &data("k5.json"), "--gamma", "1", "--tau-min", "0.1", "--tau-max", "0.6", "--steps", "51"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let estimate: f64 = meta(&text, "threshold_estimate").unwrap().parse().unwrap();
    assert!((estimate - 0.25).abs() <= 0.01 + 1e-12, "{estimate}");
    let (header, rows) = read_table(&text).unwrap();
    let taus = column(&header, &rows, "tau");
    let norms = column(&header, &rows, "mean");
    for (t, x) in taus.iter().zip(&norms) {
        if *t < 0.245 {
            assert!(*x < 1e-8, "tau {t}: {x}");
        } else if *t > 0.255 {
            assert!(*x > 1e-3, "tau {t}: {x}");
        }
    }
}

#[test]
fn batch_verify_is_reproducible() {
    let args = ["batch-verify", "--count", "4", "--n-max", "6", "--seed", "7"];
    let (a, b) = (epibound(&args), epibound(&args));
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, epibound(&["batch-verify", "--count", "4", "--n-max", "6", "--seed", "8"]).stdout);
}
