//! p-sweep at fixed n exposing the three regimes of the optimized weighting.
//!
//! Usage: `cargo run --release --example regime_sweep -- [n]`

use laplace_cert::experiment::{summarize_sweep, sweep_rows, ExperimentConfig};

fn main() -> laplace_cert::Result<()> {
    let n = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(16384usize);
    let cfg = ExperimentConfig::from_json(
        &format!(
            r#"{{"n": {n}, "eigensolver": {{"k": 64, "grid": {}}},
                "sweep": {{"axis": "p", "values": [1, 2, 3, 4, 6, 8, 12, 16, 24, 32, 48, 64]}}}}"#,
            n.max(4096)
        ),
        "regime_sweep",
    )?;
    let dir = std::env::temp_dir().join("lapcert-regime-sweep");
    let rows = sweep_rows(&cfg, &dir)?;
    println!("{:>4} {:>10} {:<18} {:>8} {:>10} {:>10} {:>9}", "p", "regime", "choice", "dim_A", "tv_bound", "UB/UB*", "feasible");
    for r in &rows {
        let ratio = match r.choice.as_str() {
            "DG" => r.ratio_dg,
            "identity" => r.ratio_identity,
            _ => 1.0,
        };
        println!(
            "{:>4} {:>10} {:<18} {:>8.3} {:>10.3e} {:>10.3} {:>9}",
            r.p, r.regime, r.choice, r.effdim, r.tv_bound, ratio, r.feasible
        );
    }
    if let Some(s) = summarize_sweep(&rows) {
        println!("{s:#?}");
    }
    Ok(())
}
