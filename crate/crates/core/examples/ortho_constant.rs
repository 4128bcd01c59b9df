//! Near-orthogonality of the discretized Volterra eigenbasis.
//!
//! Usage: `cargo run --release --example ortho_constant -- [lambda_exp]`

use laplace_cert::certification::ortho_constant;
use laplace_cert::eigensolver::eigensystem;
use laplace_cert::operators::CoefficientPair;

fn main() -> laplace_cert::Result<()> {
    let lambda_exp = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(3.5);
    let ps = [8usize, 16, 24, 32, 50];
    let ns = [200usize, 400, 800, 1600, 3200];
    let eig = eigensystem(&CoefficientPair::volterra(), 50, 4096)?;
    print!("{:>6}", "n \\ p");
    for p in ps {
        print!(" {p:>9}");
    }
    println!();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for n in ns {
        print!("{n:>6}");
        for p in ps {
            let c = ortho_constant(&eig, n, p, lambda_exp)?;
            lo = lo.min(c);
            hi = hi.max(c);
            print!(" {c:>9.5}");
        }
        println!();
    }
    println!("λ = {lambda_exp}: range [{lo:.5}, {hi:.5}], max/min = {:.3}", hi / lo);
    Ok(())
}
