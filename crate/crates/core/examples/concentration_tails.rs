//! Gaussian and posterior tail bounds on the ellipsoids `‖D(θ−θ̂)‖ ≤ r`
//! against empirical exceedance fractions.
//!
//! Usage: `cargo run --release --example concentration_tails -- [n] [p] [seed]`

use std::sync::Arc;

use laplace_cert::certification::{gamma0_star, scaled_matrix, WeightChoice, effdim_of};
use laplace_cert::concentration::empirical_outside_mass_grid;
use laplace_cert::eigensolver::eigensystem;
use laplace_cert::model::{generate, ExpFamily, TruthSpec};
use laplace_cert::operators::CoefficientPair;
use laplace_cert::posterior::{map_solve, Problem, SharedBasis};

fn main() -> laplace_cert::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let n = args.first().copied().unwrap_or(2000);
    let p = args.get(1).copied().unwrap_or(4);
    let seed = args.get(2).copied().unwrap_or(2) as u64;

    let basis: SharedBasis = Arc::new(eigensystem(&CoefficientPair::volterra(), 20, 4096)?);
    let data = generate(basis.as_ref(), ExpFamily::Poisson, &TruthSpec::default(), n, seed)?;
    let prob = Problem::new(basis, &data, 2.0, p)?;
    let fit = map_solve(&prob, None)?;
    let g = gamma0_star(n, 1.0, 2.0)?;
    let (d2, _) = scaled_matrix(&fit, &prob, WeightChoice::Gamma0 { gamma0: g.gamma0 })?;
    let dim = effdim_of(&d2, &fit.dg2)?;
    let radii: Vec<f64> = (1..=16).map(|i| dim.sqrt() * 0.5 * i as f64).collect();
    let tails = empirical_outside_mass_grid(&fit, &prob, &d2, dim, &radii, 20_000, seed)?;

    println!("D(γ₀*) with γ₀* = {:.4}, dim_A = {dim:.3}", g.gamma0);
    println!("{:>7} {:>11} {:>11} {:>11} {:>11} {:>5}", "r", "gauss bd", "LA frac", "post bd", "post frac", "ok");
    for t in &tails {
        let post_bd = if t.posterior_applicable { format!("{:.3e}", t.posterior_bound) } else { "-".into() };
        println!(
            "{:>7.3} {:>11.3e} {:>11.3e} {:>11} {:>11.3e} {:>5}",
            t.radius,
            t.gaussian_bound,
            t.gaussian_fraction,
            post_bd,
            t.posterior_fraction,
            t.gaussian_ok() && t.posterior_ok()
        );
    }
    Ok(())
}
