//! Drives the command-line interface in-process with the bundled two-node
//! scenario and prints the resulting table.
//!
//!     cargo run --example cli_scenario

fn main() {
    let scenario = concat!(env!("CARGO_MANIFEST_DIR"), "/data/two_node_scenario.json");
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = epibound::cli::run(["epibound", "bounds", "--scenario", scenario, "--points", "11"], &mut out, &mut err);
    print!("{}", String::from_utf8_lossy(&out));
    eprint!("{}", String::from_utf8_lossy(&err));
    println!("exit code {code}");
}
