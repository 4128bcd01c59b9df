//! `S_dim` and `S_tau` at `γ₀*` against their explicit brackets.
//!
//! Usage: `cargo run --release --example s_sum_brackets -- [gamma]`

use laplace_cert::certification::{gamma0_star, s_brackets, s_sums};

fn main() -> laplace_cert::Result<()> {
    let gamma = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(2.0);
    let beta = 1.0;
    println!("{:>8} {:>5} {:>7} {:>7} {:>24} {:>30}", "n", "p", "m", "m0*", "S_dim (lo ≤ S ≤ hi)", "n·S_tau² (lo ≤ S ≤ hi)");
    for e in (8..=20).step_by(3) {
        let n = 1usize << e;
        let g = gamma0_star(n, beta, gamma)?;
        for p in [4usize, 32, 512] {
            let s = s_sums(n, p, beta, gamma, g.gamma0);
            let ((dl, dh), (tl, th)) = s_brackets(n, p, beta, gamma)?;
            let nf = n as f64;
            println!(
                "{n:>8} {p:>5} {:>7.3} {:>7.3} {:>6.2} ≤ {:>6.3} ≤ {:>6.2} {:>8.3} ≤ {:>8.4} ≤ {:>8.3}",
                g.m,
                g.m0,
                dl,
                s.s_dim,
                dh,
                tl * nf,
                s.s_tau * s.s_tau * nf,
                th * nf
            );
        }
    }
    Ok(())
}
