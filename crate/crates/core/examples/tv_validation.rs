//! Empirical TV between the posterior and its Laplace approximation, by
//! quadrature and importance sampling, against the certified bounds.
//!
//! Usage: `cargo run --release --example tv_validation -- [n] [p] [seed]`

use std::sync::Arc;

use laplace_cert::certification::compare_choices;
use laplace_cert::eigensolver::eigensystem;
use laplace_cert::model::{generate, ExpFamily, TruthSpec};
use laplace_cert::operators::CoefficientPair;
use laplace_cert::posterior::{map_solve, Problem, SharedBasis};
use laplace_cert::validation::{tv_importance, tv_quadrature};

fn main() -> laplace_cert::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let n = args.first().copied().unwrap_or(3000);
    let p = args.get(1).copied().unwrap_or(2);
    let seed = args.get(2).copied().unwrap_or(1) as u64;

    let basis: SharedBasis = Arc::new(eigensystem(&CoefficientPair::volterra(), 20, 4096.max(n))?);
    for family in [ExpFamily::Gaussian, ExpFamily::Poisson, ExpFamily::Bernoulli] {
        let data = generate(basis.as_ref(), family, &TruthSpec::default(), n, seed)?;
        let prob = Problem::new(basis.clone(), &data, 2.0, p)?;
        let fit = map_solve(&prob, None)?;
        let cmp = compare_choices(&fit, &prob)?;
        println!("{} (n = {n}, p = {p}):", family.name());
        if p <= 3 {
            let q = tv_quadrature(&fit, &prob, 96)?;
            println!("  quadrature  {:.4e}  [{:.4e}, {:.4e}]  {}", q.value, q.ci_low, q.ci_high, q.grid_spec.unwrap_or_default());
        }
        let is = tv_importance(&fit, &prob, 20_000, seed)?;
        println!("  importance  {:.4e}  [{:.4e}, {:.4e}]  ESS {:.0}", is.value, is.ci_low, is.ci_high, is.ess.unwrap_or(0.0));
        for c in [&cmp.dg, &cmp.identity, &cmp.star] {
            println!("  bound {:<18} {:.4e}  feasible {}", c.label, c.tv_bound, c.feasible);
        }
    }
    Ok(())
}
