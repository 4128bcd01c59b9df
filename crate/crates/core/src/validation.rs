//! Empirical total-variation distance between the posterior and its Laplace
//! approximation.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::posterior::{LaplaceFit, Problem};
use crate::rng::{self, purpose};
use crate::stats::quantile;

pub const BOOTSTRAP_RESAMPLES: usize = 500;
pub const MAX_IMPORTANCE_DIM: usize = 30;
const ESS_WARNING: f64 = 100.0;
const QUADRATURE_BOX_SD: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TvMethod {
    Quadrature,
    Importance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TVEstimate {
    pub method: TvMethod,
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub ess: Option<f64>,
    pub grid_spec: Option<String>,
    pub warning: Option<String>,
}

/// Draws from the Laplace approximation `N(θ̂, D_G⁻²)`.
pub struct LaplaceDraws {
    /// `θ_i − θ̂`.
    pub offsets: Vec<DVector<f64>>,
    /// Unnormalized log importance weights `−f(θ_i) + f(θ̂) + ½‖D_G(θ_i − θ̂)‖²`.
    pub log_w: Vec<f64>,
}

impl LaplaceDraws {
    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// Self-normalized weights summing to one.
    pub fn normalized_weights(&self) -> Vec<f64> {
        let mx = self.log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = self.log_w.iter().map(|l| (l - mx).exp()).collect();
        let total = ordered_sum(&w);
        w.into_iter().map(|x| x / total).collect()
    }

    pub fn ess(&self) -> f64 {
        let w = self.normalized_weights();
        1.0 / ordered_sum(&w.iter().map(|x| x * x).collect::<Vec<_>>())
    }
}

/// Sequential sum; keeps reductions independent of the thread count.
pub(crate) fn ordered_sum(v: &[f64]) -> f64 {
    v.iter().sum()
}

pub fn laplace_draws(fit: &LaplaceFit, prob: &Problem, m: usize, seed: u64) -> Result<LaplaceDraws> {
    let lt = fit
        .dg2
        .clone()
        .cholesky()
        .ok_or_else(|| Error::not_pd("validation", "D_G² Cholesky failed"))?
        .l()
        .transpose();
    let p = fit.p();
    let s_hat = prob.signal(&fit.theta_hat);
    let pairs: Vec<(DVector<f64>, f64)> = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::substream(seed, purpose::LAPLACE_DRAWS + i as u64);
            let z = DVector::from_fn(p, |_, _| r.sample::<f64, _>(StandardNormal));
            let u = lt.solve_upper_triangular(&z).expect("triangular factor");
            let df = prob.f_increment(&fit.theta_hat, &s_hat, &u);
            let lw = -df + 0.5 * z.norm_squared();
            (u, if lw.is_finite() { lw } else { f64::NEG_INFINITY })
        })
        .collect();
    let (offsets, log_w) = pairs.into_iter().unzip();
    Ok(LaplaceDraws { offsets, log_w })
}

/// Percentile bootstrap of a statistic of the normalized weights, resampling
/// draw indices.
pub(crate) fn bootstrap<F>(n: usize, seed: u64, stat: F) -> Vec<f64>
where
    F: Fn(&[usize]) -> f64 + Sync,
{
    let mut out: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .into_par_iter()
        .map(|b| {
            let mut r = rng::substream(seed, purpose::BOOTSTRAP + b as u64);
            let idx: Vec<usize> = (0..n).map(|_| r.gen_range(0..n)).collect();
            stat(&idx)
        })
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

fn importance_tv(log_w: &[f64], idx: &[usize]) -> f64 {
    let mx = idx.iter().map(|&i| log_w[i]).fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = idx.iter().map(|&i| (log_w[i] - mx).exp()).collect();
    let mean = ordered_sum(&w) / w.len() as f64;
    let dev: Vec<f64> = w.iter().map(|x| (x / mean - 1.0).abs()).collect();
    (0.5 * ordered_sum(&dev) / w.len() as f64).min(1.0)
}

/// `TV ≈ ½ E_γ |w/E_γ w − 1|` with self-normalized weights from LA draws.
pub fn tv_importance(fit: &LaplaceFit, prob: &Problem, m: usize, seed: u64) -> Result<TVEstimate> {
    if fit.p() > MAX_IMPORTANCE_DIM {
        return Err(Error::capacity(
            "validation",
            format!("importance TV refused for p = {} > {MAX_IMPORTANCE_DIM}", fit.p()),
        ));
    }
    if m < 2 {
        return Err(Error::param("validation", "need at least two draws"));
    }
    let draws = laplace_draws(fit, prob, m, seed)?;
    let all: Vec<usize> = (0..m).collect();
    let value = importance_tv(&draws.log_w, &all);
    let boot = bootstrap(m, seed, |idx| importance_tv(&draws.log_w, idx));
    let ess = draws.ess();
    Ok(TVEstimate {
        method: TvMethod::Importance,
        value,
        ci_low: quantile(&boot, 0.025).min(value).max(0.0),
        ci_high: quantile(&boot, 0.975).max(value).min(1.0),
        ess: Some(ess),
        grid_spec: None,
        warning: (ess < ESS_WARNING).then(|| format!("effective sample size {ess:.1} below {ESS_WARNING}")),
    })
}

fn quadrature_tv(fit: &LaplaceFit, prob: &Problem, per_axis: usize) -> f64 {
    let p = fit.p();
    let cov = fit.dg2.clone().cholesky().expect("checked by caller").inverse();
    let half: Vec<f64> = (0..p).map(|k| QUADRATURE_BOX_SD * cov[(k, k)].sqrt()).collect();
    let h: Vec<f64> = half.iter().map(|w| 2.0 * w / (per_axis - 1) as f64).collect();
    let node = |k: usize, i: usize| -half[k] + i as f64 * h[k];
    let weight = |i: usize| if i == 0 || i + 1 == per_axis { 0.5 } else { 1.0 };
    let total = per_axis.pow(p as u32);
    let s_hat = prob.signal(&fit.theta_hat);

    // log densities relative to the mode, evaluated in fixed-size chunks
    let chunk = 4096;
    let starts: Vec<usize> = (0..total).step_by(chunk).collect();
    let evals: Vec<Vec<(f64, f64, f64)>> = starts
        .par_iter()
        .map(|&start| {
            (start..(start + chunk).min(total))
                .map(|flat| {
                    let mut rem = flat;
                    let mut u = DVector::zeros(p);
                    let mut w = 1.0;
                    for k in 0..p {
                        let i = rem % per_axis;
                        rem /= per_axis;
                        u[k] = node(k, i);
                        w *= weight(i);
                    }
                    let lp = -prob.f_increment(&fit.theta_hat, &s_hat, &u);
                    let lq = -0.5 * (u.transpose() * &fit.dg2 * &u)[(0, 0)];
                    (w, lp, lq)
                })
                .collect()
        })
        .collect();
    let flat: Vec<(f64, f64, f64)> = evals.into_iter().flatten().collect();
    let zp = ordered_sum(&flat.iter().map(|(w, lp, _)| w * lp.exp()).collect::<Vec<_>>());
    let zq = ordered_sum(&flat.iter().map(|(w, _, lq)| w * lq.exp()).collect::<Vec<_>>());
    let diff: Vec<f64> = flat
        .iter()
        .map(|(w, lp, lq)| w * (lp.exp() / zp - lq.exp() / zq).abs())
        .collect();
    (0.5 * ordered_sum(&diff)).min(1.0)
}

/// Tensor-product trapezoid over `θ̂ ± 10` posterior standard deviations;
/// the spread between `per_axis` and `2·per_axis` sets the interval.
pub fn tv_quadrature(fit: &LaplaceFit, prob: &Problem, per_axis: usize) -> Result<TVEstimate> {
    let p = fit.p();
    if p > 3 {
        return Err(Error::capacity("validation", format!("quadrature TV needs p ≤ 3, got {p}")));
    }
    if per_axis < 64 {
        return Err(Error::param("validation", "per_axis must be at least 64"));
    }
    fit.dg2
        .clone()
        .cholesky()
        .ok_or_else(|| Error::not_pd("validation", "D_G² Cholesky failed"))?;
    let coarse = quadrature_tv(fit, prob, per_axis);
    let fine = quadrature_tv(fit, prob, 2 * per_axis);
    let spread = (fine - coarse).abs();
    Ok(TVEstimate {
        method: TvMethod::Quadrature,
        value: fine,
        ci_low: (fine - spread).max(0.0),
        ci_high: (fine + spread).min(1.0),
        ess: None,
        grid_spec: Some(format!(
            "{}^{p} and {}^{p} nodes, box ±{QUADRATURE_BOX_SD} sd",
            per_axis,
            2 * per_axis
        )),
        warning: None,
    })
}

/// Marginal posterior standard deviations from `D_G⁻²`.
pub fn laplace_sd(dg2: &DMatrix<f64>) -> Result<Vec<f64>> {
    let cov = dg2
        .clone()
        .cholesky()
        .ok_or_else(|| Error::not_pd("validation", "D_G² Cholesky failed"))?
        .inverse();
    Ok((0..cov.nrows()).map(|k| cov[(k, k)].sqrt()).collect())
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::model::{generate, ExpFamily, TruthSpec};
    use crate::operators::CosineBasis;
    use crate::posterior::{map_solve, SharedBasis};

    fn fitted(fam: ExpFamily, n: usize, p: usize) -> (Problem, LaplaceFit) {
        let basis: SharedBasis = Arc::new(CosineBasis::new(8, 1.0));
        let truth = TruthSpec { dimension: p, ..TruthSpec::default() };
        let data = generate(basis.as_ref(), fam, &truth, n, 4).unwrap();
        let prob = Problem::new(basis, &data, 2.0, p).unwrap();
        let fit = map_solve(&prob, None).unwrap();
        (prob, fit)
    }

    #[test]
    fn gaussian_weights_are_flat() {
        let (prob, fit) = fitted(ExpFamily::Gaussian, 200, 2);
        let est = tv_importance(&fit, &prob, 2000, 1).unwrap();
        assert!(est.value < 1e-8, "{est:?}");
        let q = tv_quadrature(&fit, &prob, 64).unwrap();
        assert!(q.ci_high < 1e-8, "{q:?}");
    }

    #[test]
    fn importance_is_deterministic_and_ordered() {
        let (prob, fit) = fitted(ExpFamily::Poisson, 150, 2);
        let a = tv_importance(&fit, &prob, 3000, 8).unwrap();
        let b = tv_importance(&fit, &prob, 3000, 8).unwrap();
        assert_eq!(a, b);
        assert!(a.ci_low <= a.value && a.value <= a.ci_high);
    }

    #[test]
    fn quadrature_rejects_large_p() {
        let (prob, fit) = fitted(ExpFamily::Poisson, 100, 4);
        assert!(tv_quadrature(&fit, &prob, 64).is_err());
    }
}
