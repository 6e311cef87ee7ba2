//! Perron value, connectivity and the epidemic threshold `gamma / Lambda`.
//!
//!     cargo run --example spectral_threshold

use epibound::Graph;

fn main() -> epibound::Result<()> {
    let graphs = [
        ("K_5", Graph::complete(5)?),
        ("star, 3 leaves", Graph::star(3)?),
        ("directed 3-cycle", Graph::directed_cycle(3)?),
        ("2-node path", Graph::from_edges(2, &[(1, 0, 1.0)])?),
    ];
    let gamma = 1.0;
    for (name, g) in &graphs {
        if !g.is_strongly_connected() {
            println!("{name:>18}: not strongly connected, components {:?}", g.strongly_connected_components());
            continue;
        }
        let info = g.perron()?;
        println!(
            "{name:>18}: Lambda = {:.7}, u = {:.4?}, threshold tau* = {:.4}",
            info.lambda_max,
            info.eigvec,
            gamma / info.lambda_max
        );
    }
    Ok(())
}
