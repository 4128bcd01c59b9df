//! Simulate Poisson counts through the Volterra operator, fit the MAP by
//! Newton's method and report the Laplace approximation.
//!
//! Usage: `cargo run --release --example simulate_fit -- [n] [p] [seed]`

use std::sync::Arc;

use laplace_cert::eigensolver::eigensystem;
use laplace_cert::model::{generate, ExpFamily, TruthSpec};
use laplace_cert::operators::CoefficientPair;
use laplace_cert::posterior::{map_solve, Problem, SharedBasis};
use laplace_cert::validation::laplace_sd;

fn main() -> laplace_cert::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let n = args.first().copied().unwrap_or(1000);
    let p = args.get(1).copied().unwrap_or(4);
    let seed = args.get(2).copied().unwrap_or(3) as u64;

    let truth = TruthSpec::default();
    let basis: SharedBasis = Arc::new(eigensystem(&CoefficientPair::volterra(), truth.dimension.max(p), 4096)?);
    let data = generate(basis.as_ref(), ExpFamily::Poisson, &truth, n, seed)?;
    let total: f64 = data.y.iter().sum();
    println!("n = {n}, seed = {seed}: {total} counts, ‖s*‖∞ = {:.4}", data.truth_sup_norm);

    let prob = Problem::new(basis, &data, 2.0, p)?;
    let fit = map_solve(&prob, None)?;
    for step in &fit.trace {
        println!("  {step:?}");
    }
    let sd = laplace_sd(&fit.dg2)?;
    let star = truth.theta_star();
    println!("{:>3} {:>10} {:>10} {:>10}", "k", "θ*", "θ̂", "sd");
    for k in 0..p {
        println!("{:>3} {:>10.5} {:>10.5} {:>10.5}", k + 1, star[k], fit.theta_hat[k], sd[k]);
    }
    println!("f(θ̂) = {:.6}, ‖∇f‖ = {:.2e}, ‖Rq‖∞ = {:.4}", fit.f_hat, fit.grad_norm, fit.rq_sup);
    Ok(())
}
