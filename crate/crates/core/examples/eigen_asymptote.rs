//! Weyl-type asymptote `k²λ_k → (∫1/a)²/π²` and eigenfunction sup-norm
//! regularity over three operators.
//!
//! Usage: `cargo run --release --example eigen_asymptote`

use laplace_cert::eigensolver::{eig_diagnostics, eigensystem};
use laplace_cert::operators::CoefficientPair;

fn main() -> laplace_cert::Result<()> {
    let spec = CoefficientPair::new(vec![1.0, 0.5], vec![0.1])?;
    let eig = eigensystem(&spec, 50, 4096)?;
    let limit = (2.0 * 1.5f64.ln()).powi(2) / std::f64::consts::PI.powi(2);
    println!("a = 1 + x/2, b = 0.1: limit (2 ln 1.5)²/π² = {limit:.6}");
    for k in [1usize, 5, 10, 20, 30, 40, 45, 50] {
        let v = (k * k) as f64 * eig.lambdas[k - 1];
        println!("  k = {k:>2}: k²λ_k = {v:.6}  ({:+.3}%)", 100.0 * (v / limit - 1.0));
    }

    println!();
    let corpus = [
        ("a=1, b=0", CoefficientPair::volterra()),
        ("a=1+x/2, b=0.1", spec.clone()),
        ("a=1+x², b=x", CoefficientPair::new(vec![1.0, 0.0, 1.0], vec![0.0, 1.0])?),
    ];
    for (name, spec) in &corpus {
        let diag = eig_diagnostics(&eigensystem(spec, 50, 4096)?);
        let slope = diag.psi_sup_slope(10, 50).unwrap_or(f64::NAN);
        let d10 = diag.modes[9].dpsi_sup_over_k;
        let dmax = diag.modes[9..].iter().map(|m| m.dpsi_sup_over_k).fold(0.0, f64::max);
        println!(
            "{name:<16} sup-norm slope over k∈[10,50] = {slope:+.4}, max ‖ψ′‖∞/k = {dmax:.4} ({:.3}× k=10), k* = {:?}, violations {}",
            dmax / d10,
            diag.k_star,
            diag.violations.len()
        );
    }
    Ok(())
}
