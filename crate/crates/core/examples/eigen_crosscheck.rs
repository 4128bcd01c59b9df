//! Shooting eigenpairs against the SVD of the discretized operator.
//!
//! Usage: `cargo run --release --example eigen_crosscheck -- [N] [K]`

use std::time::Instant;

use laplace_cert::eigensolver::{eigensystem, svd_oracle};
use laplace_cert::operators::CoefficientPair;

fn main() -> laplace_cert::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let n = args.first().copied().unwrap_or(2048);
    let count = args.get(1).copied().unwrap_or(20);

    let specs = [
        ("a=1, b=0", CoefficientPair::volterra()),
        ("a=1+x/2, b=0.1", CoefficientPair::new(vec![1.0, 0.5], vec![0.1])?),
        ("a=1+x², b=x", CoefficientPair::new(vec![1.0, 0.0, 1.0], vec![0.0, 1.0])?),
    ];
    for (name, spec) in &specs {
        let t = Instant::now();
        let shoot = eigensystem(spec, count, n)?;
        let t_shoot = t.elapsed().as_secs_f64();
        let t = Instant::now();
        let svd = svd_oracle(spec, n, count)?;
        let t_svd = t.elapsed().as_secs_f64();

        let mut worst_rel = 0.0f64;
        let mut worst_align = 1.0f64;
        for k in 0..count {
            worst_rel = worst_rel.max((shoot.lambdas[k] - svd.lambdas[k]).abs() / svd.lambdas[k]);
            worst_align = worst_align.min(shoot.psi[k].inner(&svd.psi[k]).abs());
        }
        println!(
            "{name:<16} N={n} K={count}: max |Δλ|/λ = {worst_rel:.2e}, min |⟨ψ,ψ⟩| = {worst_align:.6}  (shooting {t_shoot:.2}s, svd {t_svd:.2}s)"
        );
    }
    Ok(())
}
