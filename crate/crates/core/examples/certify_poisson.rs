//! Certificates for the three weight choices on a Poisson instance with the
//! Volterra operator.
//!
//! Usage: `cargo run --release --example certify_poisson -- [n] [p] [seed]`

use std::sync::Arc;

use laplace_cert::certification::compare_choices;
use laplace_cert::eigensolver::eigensystem;
use laplace_cert::model::{generate, ExpFamily, TruthSpec};
use laplace_cert::operators::CoefficientPair;
use laplace_cert::posterior::{map_solve, Problem, SharedBasis};

fn main() -> laplace_cert::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let n = args.first().copied().unwrap_or(2000);
    let p = args.get(1).copied().unwrap_or(6);
    let seed = args.get(2).copied().unwrap_or(1) as u64;

    let basis: SharedBasis = Arc::new(eigensystem(&CoefficientPair::volterra(), p.max(20), 4096.max(n))?);
    let data = generate(basis.as_ref(), ExpFamily::Poisson, &TruthSpec::default(), n, seed)?;
    let prob = Problem::new(basis, &data, 2.0, p)?;
    let fit = map_solve(&prob, None)?;
    println!("n = {n}, p = {p}, seed = {seed}: Newton iterations {}, ‖Rq‖∞ = {:.4}", fit.newton_iters, fit.rq_sup);

    let cmp = compare_choices(&fit, &prob)?;
    println!(
        "γ₀* = {:.4}, m = {:.3}, m₀* = {:.3}",
        cmp.gamma0star.gamma0, cmp.gamma0star.m, cmp.gamma0star.m0
    );
    println!("{:<18} {:>8} {:>10} {:>8} {:>10} {:>10} {:>7} {:>9}", "choice", "dim_A", "tau3", "r", "local", "tv_bound", "r*tau", "feasible");
    for c in [&cmp.dg, &cmp.identity, &cmp.star] {
        println!(
            "{:<18} {:>8.3} {:>10.3e} {:>8.2} {:>10.3e} {:>10.3e} {:>7.3} {:>9}",
            c.label, c.effdim, c.tau3_sup, c.radius, c.local_term, c.tv_bound, c.r_tau, c.feasible
        );
    }
    println!("UB(D_G)/UB(D*) = {:.3}, UB(I)/UB(D*) = {:.3}", cmp.ratio_dg, cmp.ratio_identity);
    Ok(())
}
