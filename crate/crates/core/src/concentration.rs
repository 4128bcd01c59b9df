//! Tail bounds for the Laplace approximation and the posterior on the
//! ellipsoids `U(D₀, r) = {θ : ‖D₀(θ − θ̂)‖ ≤ r}`, with empirical checks.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::posterior::{LaplaceFit, Problem};
use crate::stats::{quantile, wilson_interval};
use crate::validation::{bootstrap, laplace_draws, ordered_sum};

const ESS_WARNING: f64 = 50.0;

/// `P(γᵀBγ > (√dim + t)²) ≤ e^{−t²/2}`.
pub fn gaussian_tail(_effdim: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    (-0.5 * t * t).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailBound {
    /// Clamped to `[0, 1]`.
    pub value: f64,
    /// Natural log of the unclamped bound.
    pub log_raw: f64,
    /// `r ≥ 3 + 3√dim`.
    pub applicable: bool,
}

/// `(1/3) exp(−(r − 3√dim)²/3)`, valid for `r ≥ 3 + 3√dim`.
pub fn posterior_tail_bound(effdim: f64, r: f64) -> TailBound {
    let c = 3.0 * effdim.sqrt();
    let log_raw = -(3f64).ln() - (r - c).powi(2) / 3.0;
    TailBound {
        value: log_raw.exp().min(1.0),
        log_raw,
        applicable: r >= 3.0 + c,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub radius: f64,
    pub effdim: f64,
    /// `e^{−(r−√dim)²/2}` (1 for `r < √dim`).
    pub gaussian_bound: f64,
    pub posterior_bound: f64,
    pub posterior_applicable: bool,
    pub gaussian_fraction: f64,
    pub gaussian_ci: (f64, f64),
    /// Wilson interval at three standard errors.
    pub gaussian_ci3: (f64, f64),
    pub posterior_fraction: f64,
    pub posterior_ci: (f64, f64),
    pub posterior_se: f64,
    pub ess: f64,
    pub warning: Option<String>,
}

impl TailReport {
    pub fn gaussian_ok(&self) -> bool {
        self.gaussian_ci3.0 <= self.gaussian_bound
    }

    pub fn posterior_ok(&self) -> bool {
        !self.posterior_applicable || self.posterior_fraction - 3.0 * self.posterior_se <= self.posterior_bound
    }
}

/// Empirical LA and importance-weighted posterior mass outside `U(D₀, r)` for
/// every radius in `radii`, sharing one set of `m` draws.
pub fn empirical_outside_mass_grid(
    fit: &LaplaceFit,
    prob: &Problem,
    d0: &DMatrix<f64>,
    effdim: f64,
    radii: &[f64],
    m: usize,
    seed: u64,
) -> Result<Vec<TailReport>> {
    if m < 1000 {
        return Err(Error::param("concentration", format!("need at least 1000 draws, got {m}")));
    }
    let l0t = d0
        .clone()
        .cholesky()
        .ok_or_else(|| Error::not_pd("concentration", "D₀² Cholesky failed"))?
        .l()
        .transpose();
    let draws = laplace_draws(fit, prob, m, seed)?;
    let norms: Vec<f64> = draws.offsets.iter().map(|u| (&l0t * u).norm()).collect();
    let w = draws.normalized_weights();
    let ess = draws.ess();
    let warning = (ess < ESS_WARNING).then(|| format!("effective sample size {ess:.1} below {ESS_WARNING}"));

    let mut out = Vec::with_capacity(radii.len());
    for &r in radii {
        let outside: Vec<bool> = norms.iter().map(|&v| v > r).collect();
        let count = outside.iter().filter(|&&o| o).count();
        let frac = count as f64 / m as f64;
        let post = ordered_sum(
            &w.iter().zip(&outside).map(|(wi, &o)| if o { *wi } else { 0.0 }).collect::<Vec<_>>(),
        );
        let boot = bootstrap(m, seed ^ r.to_bits(), |idx| {
            let num: f64 = idx.iter().filter(|&&i| outside[i]).map(|&i| w[i]).sum();
            let den: f64 = idx.iter().map(|&i| w[i]).sum();
            if den > 0.0 { num / den } else { 0.0 }
        });
        let mean_b = boot.iter().sum::<f64>() / boot.len() as f64;
        let se = (boot.iter().map(|b| (b - mean_b).powi(2)).sum::<f64>() / (boot.len() - 1) as f64).sqrt();
        let t = r - effdim.sqrt();
        let pb = posterior_tail_bound(effdim, r);
        out.push(TailReport {
            radius: r,
            effdim,
            gaussian_bound: gaussian_tail(effdim, t),
            posterior_bound: pb.value,
            posterior_applicable: pb.applicable,
            gaussian_fraction: frac,
            gaussian_ci: wilson_interval(count, m, 1.96),
            gaussian_ci3: wilson_interval(count, m, 3.0),
            posterior_fraction: post,
            posterior_ci: (quantile(&boot, 0.025).min(post), quantile(&boot, 0.975).max(post)),
            posterior_se: se,
            ess,
            warning: warning.clone(),
        });
    }
    Ok(out)
}

pub fn empirical_outside_mass(
    fit: &LaplaceFit,
    prob: &Problem,
    d0: &DMatrix<f64>,
    effdim: f64,
    r: f64,
    m: usize,
    seed: u64,
) -> Result<TailReport> {
    Ok(empirical_outside_mass_grid(fit, prob, d0, effdim, &[r], m, seed)?.remove(0))
}
