//! Witness lower bound versus certified upper bound for the third-derivative
//! norm on the cosine surrogate basis.
//!
//! Usage: `cargo run --release --example tightness_probe -- [p]`

use laplace_cert::certification::{gamma0_star, tightness_probe};
use laplace_cert::operators::CosineBasis;

fn main() -> laplace_cert::Result<()> {
    let p = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(64usize);
    let basis = CosineBasis::new(p, 1.0);
    println!("{:>8} {:>7} {:>5} {:>11} {:>11} {:>7}", "n", "m0", "m0bar", "witness", "certified", "ratio");
    for e in 10..=18 {
        let n = 1usize << e;
        let g = gamma0_star(n, 1.0, 2.0)?;
        let t = tightness_probe(&basis, n, p, 1.0, g.gamma0)?;
        println!("{:>8} {:>7.3} {:>5} {:>11.4e} {:>11.4e} {:>7.4}", n, t.m0, t.m0_bar, t.lower, t.upper, t.ratio);
    }
    Ok(())
}
