//! Leading eigenpairs of R Rᵀ for the Volterra operator, checked against the
//! closed form λ_k = ((k − ½)π)⁻², ψ_k = √2 sin((k − ½)πx).

use std::f64::consts::PI;
use std::time::Instant;

use laplace_cert::eigensolver::{eig_diagnostics, eigensystem};
use laplace_cert::grid::FunctionGrid;
use laplace_cert::operators::CoefficientPair;

fn main() -> laplace_cert::Result<()> {
    let spec = CoefficientPair::volterra();
    let start = Instant::now();
    let eig = eigensystem(&spec, 50, 4096)?;
    let elapsed = start.elapsed();

    let mut worst_lambda = 0.0f64;
    let mut worst_psi = 0.0f64;
    for k in 1..=eig.len() {
        let w = (k as f64 - 0.5) * PI;
        let exact = w.powi(-2);
        worst_lambda = worst_lambda.max((eig.lambdas[k - 1] - exact).abs() / exact);
        let reference = FunctionGrid::sample(4096, |x| 2f64.sqrt() * (w * x).sin())?;
        let diff: Vec<f64> = eig.psi[k - 1]
            .values()
            .iter()
            .zip(reference.values())
            .map(|(a, b)| a - b)
            .collect();
        worst_psi = worst_psi.max(FunctionGrid::new(diff)?.l2_norm());
    }
    println!("modes: {}  solve time: {:.2?}", eig.len(), elapsed);
    println!("max relative eigenvalue error: {worst_lambda:.3e}");
    println!("max L2 eigenfunction error:    {worst_psi:.3e}");

    let diag = eig_diagnostics(&eig);
    println!("k*: {:?}, c estimate: {:?}", diag.k_star, diag.c_estimate);
    println!("sup-norm slope over k in [10, 50]: {:?}", diag.psi_sup_slope(10, 50));
    println!("v_k bound violations: {}", diag.violations.len());
    Ok(())
}
