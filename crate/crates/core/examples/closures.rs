//! Closure relations: bounds checks, the envelope condition, monotonicity,
//! and a custom closure given as an expression.
//!
//!     cargo run --release --example closures

use epibound::Closure;

fn main() -> epibound::Result<()> {
    let closures = [
        Closure::product(),
        Closure::min(),
        Closure::geo_sqrt(),
        Closure::custom("(x*y + min(x, y)) / 2", None)?,
    ];
    for c in &closures {
        println!("== {}", c.name());
        println!("W(0.5, 0.4) = {}", c.eval(0.5, 0.4)?);
        println!("{}", c.validate(200));
        let wcond = c.check_wcond(200);
        println!("envelope condition passed: {}", wcond.passed());
        println!("{wcond}");
        let mono = c.check_monotone(200);
        println!("y - W(x, y) nondecreasing: {} (largest decrease {:e})\n", mono.passed(), mono.max_decrease);
    }

    let broken = Closure::custom_unvalidated("x + y", None)?;
    println!("== x + y\n{}", broken.validate(100));
    Ok(())
}
