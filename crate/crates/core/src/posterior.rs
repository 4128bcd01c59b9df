//! Negative log posterior `f(θ) = Σ_j [h(R_jᵀθ) − y_j R_jᵀθ] + ½ Σ_k k^{2γ} θ_k²`
//! and its Laplace approximation.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{signal_sup_norm, Dataset, ExpFamily};
use crate::operators::{assemble_design, DesignMatrix, SpectralBasis};

pub const MAX_NEWTON_ITERS: usize = 200;
const DECREMENT_TOL: f64 = 1e-18;
const GRAD_TOL: f64 = 1e-9;
const ARMIJO: f64 = 1e-4;
/// Below `POLISH_TOL·(1+|f|)` the decrement is under the resolution of `f`;
/// one undamped step finishes.
const POLISH_TOL: f64 = 1e-12;

pub type SharedBasis = Arc<dyn SpectralBasis + Send + Sync>;

pub struct Problem {
    design: DesignMatrix,
    y: DVector<f64>,
    family: ExpFamily,
    gamma: f64,
    prior: DVector<f64>,
    basis: SharedBasis,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("n", &self.n())
            .field("p", &self.p())
            .field("family", &self.family)
            .field("gamma", &self.gamma)
            .finish()
    }
}

/// `k^{2γ}` for `k = 1..=p`.
pub fn prior_diagonal(p: usize, gamma: f64) -> DVector<f64> {
    DVector::from_fn(p, |i, _| ((i + 1) as f64).powf(2.0 * gamma))
}

impl Problem {
    pub fn new(basis: SharedBasis, data: &Dataset, gamma: f64, p: usize) -> Result<Self> {
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::param("posterior", format!("prior exponent {gamma} invalid")));
        }
        if p == 0 {
            return Err(Error::param("posterior", "dimension p must be positive"));
        }
        let design = assemble_design(basis.as_ref(), data.n(), p)?;
        Ok(Self {
            design,
            y: DVector::from_vec(data.y.clone()),
            family: data.family,
            gamma,
            prior: prior_diagonal(p, gamma),
            basis,
        })
    }

    pub fn n(&self) -> usize {
        self.design.n()
    }

    pub fn p(&self) -> usize {
        self.design.p()
    }

    pub fn family(&self) -> ExpFamily {
        self.family
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn design(&self) -> &DesignMatrix {
        &self.design
    }

    pub fn basis(&self) -> &SharedBasis {
        &self.basis
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn prior(&self) -> &DVector<f64> {
        &self.prior
    }

    fn check_len(&self, theta: &DVector<f64>) -> Result<()> {
        if theta.len() != self.p() {
            return Err(Error::param(
                "posterior",
                format!("θ has length {}, expected {}", theta.len(), self.p()),
            ));
        }
        Ok(())
    }

    pub fn signal(&self, theta: &DVector<f64>) -> DVector<f64> {
        self.design.matrix() * theta
    }

    pub fn f_value(&self, theta: &DVector<f64>) -> Result<f64> {
        self.check_len(theta)?;
        let s = self.signal(theta);
        let lik: f64 = s
            .iter()
            .zip(self.y.iter())
            .map(|(&s, &y)| self.family.h(s) - y * s)
            .sum();
        let prior: f64 = 0.5 * theta.iter().zip(self.prior.iter()).map(|(t, g)| g * t * t).sum::<f64>();
        let f = lik + prior;
        if !f.is_finite() {
            return Err(Error::Evaluation("non-finite objective".into()));
        }
        Ok(f)
    }

    pub fn grad(&self, theta: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(theta)?;
        let s = self.signal(theta);
        let resid = DVector::from_iterator(
            s.len(),
            s.iter().zip(self.y.iter()).map(|(&s, &y)| self.family.h1(s) - y),
        );
        let g = self.design.matrix().tr_mul(&resid) + self.prior.component_mul(theta);
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Evaluation("non-finite gradient".into()));
        }
        Ok(g)
    }

    /// `∇²L(θ) = Rᵀ diag(h″(Rθ)) R`.
    pub fn hess_l(&self, theta: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_len(theta)?;
        let s = self.signal(theta);
        let r = self.design.matrix();
        let mut scaled = r.clone();
        for (j, &sj) in s.iter().enumerate() {
            let w = self.family.h2(sj);
            if !w.is_finite() {
                return Err(Error::Evaluation("non-finite curvature".into()));
            }
            scaled.row_mut(j).scale_mut(w);
        }
        let mut h = r.tr_mul(&scaled);
        symmetrize(&mut h);
        Ok(h)
    }

    pub fn hessian(&self, theta: &DVector<f64>) -> Result<DMatrix<f64>> {
        let mut h = self.hess_l(theta)?;
        for k in 0..self.p() {
            h[(k, k)] += self.prior[k];
        }
        Ok(h)
    }

    /// `f(θ̂ + δ) − f(θ̂)` evaluated from increments to limit cancellation.
    pub fn f_increment(&self, theta_hat: &DVector<f64>, s_hat: &DVector<f64>, delta: &DVector<f64>) -> f64 {
        let ds = self.design.matrix() * delta;
        let lik: f64 = s_hat
            .iter()
            .zip(ds.iter())
            .zip(self.y.iter())
            .map(|((&s, &d), &y)| h_increment(self.family, s, d) - y * d)
            .sum();
        let prior: f64 = theta_hat
            .iter()
            .zip(delta.iter())
            .zip(self.prior.iter())
            .map(|((&t, &d), &g)| g * d * (t + 0.5 * d))
            .sum();
        lik + prior
    }
}

fn h_increment(fam: ExpFamily, s: f64, ds: f64) -> f64 {
    match fam {
        ExpFamily::Poisson => s.exp() * ds.exp_m1(),
        ExpFamily::Gaussian => ds * (s + 0.5 * ds),
        ExpFamily::Bernoulli => fam.h(s + ds) - fam.h(s),
    }
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let p = m.nrows();
    for i in 0..p {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// `⟨∇³f(θ), v⊗v⊗v⟩ = Σ_j h‴(R_jᵀθ) (R_jᵀv)³`.
pub fn third_directional(prob: &Problem, theta: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
    prob.check_len(theta)?;
    prob.check_len(v)?;
    let s = prob.signal(theta);
    let rv = prob.signal(v);
    Ok(s.iter().zip(rv.iter()).map(|(&s, &d)| prob.family.h3(s) * d * d * d).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonStep {
    pub iter: usize,
    pub f: f64,
    pub grad_norm: f64,
    pub decrement2: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceFit {
    pub theta_hat: DVector<f64>,
    pub f_hat: f64,
    pub hess_l: DMatrix<f64>,
    pub dg2: DMatrix<f64>,
    pub grad_norm: f64,
    pub newton_iters: usize,
    pub rq_sup: f64,
    pub trace: Vec<NewtonStep>,
}

#[derive(Serialize, Deserialize)]
struct FitRecord {
    theta_hat: Vec<f64>,
    f_hat: f64,
    grad_norm: f64,
    newton_iters: usize,
    rq_sup: f64,
    hess_l: Vec<Vec<f64>>,
    dg2: Vec<Vec<f64>>,
    trace: Vec<NewtonStep>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn from_rows(r: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let p = r.len();
    if r.iter().any(|row| row.len() != p) {
        return Err(Error::param("posterior", "stored matrix is not square"));
    }
    Ok(DMatrix::from_fn(p, p, |i, j| r[i][j]))
}

impl LaplaceFit {
    pub fn p(&self) -> usize {
        self.theta_hat.len()
    }

    pub fn to_json(&self) -> Result<String> {
        let rec = FitRecord {
            theta_hat: self.theta_hat.iter().copied().collect(),
            f_hat: self.f_hat,
            grad_norm: self.grad_norm,
            newton_iters: self.newton_iters,
            rq_sup: self.rq_sup,
            hess_l: rows(&self.hess_l),
            dg2: rows(&self.dg2),
            trace: self.trace.clone(),
        };
        Ok(serde_json::to_string_pretty(&rec)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let rec: FitRecord = serde_json::from_str(s)?;
        Ok(Self {
            theta_hat: DVector::from_vec(rec.theta_hat),
            f_hat: rec.f_hat,
            hess_l: from_rows(&rec.hess_l)?,
            dg2: from_rows(&rec.dg2)?,
            grad_norm: rec.grad_norm,
            newton_iters: rec.newton_iters,
            rq_sup: rec.rq_sup,
            trace: rec.trace,
        })
    }
}

/// Damped Newton from `θ0` (default 0) with Armijo backtracking.
pub fn map_solve(prob: &Problem, theta0: Option<&DVector<f64>>) -> Result<LaplaceFit> {
    let mut theta = theta0.cloned().unwrap_or_else(|| DVector::zeros(prob.p()));
    let mut f = prob.f_value(&theta)?;
    let mut trace = Vec::new();
    let mut polished = false;
    for iter in 0..=MAX_NEWTON_ITERS {
        let g = prob.grad(&theta)?;
        let h = prob.hessian(&theta)?;
        let chol = h
            .clone()
            .cholesky()
            .ok_or_else(|| Error::not_pd("posterior", "Hessian Cholesky failed"))?;
        let step = -chol.solve(&g);
        let decrement2 = -g.dot(&step);
        let grad_norm = g.norm();
        let converged = polished || grad_norm <= GRAD_TOL * (1.0 + f.abs()) || decrement2 <= DECREMENT_TOL;
        if converged {
            trace.push(NewtonStep { iter, f, grad_norm, decrement2, step: 0.0 });
            let hess_l = prob.hess_l(&theta)?;
            let rq_sup = signal_sup_norm(prob.basis.as_ref(), theta.as_slice(), prob.n());
            return Ok(LaplaceFit {
                theta_hat: theta,
                f_hat: f,
                hess_l,
                dg2: h,
                grad_norm,
                newton_iters: iter,
                rq_sup,
                trace,
            });
        }
        if iter == MAX_NEWTON_ITERS {
            break;
        }
        if decrement2 <= POLISH_TOL * (1.0 + f.abs()) {
            trace.push(NewtonStep { iter, f, grad_norm, decrement2, step: 1.0 });
            theta += step;
            f = prob.f_value(&theta)?;
            polished = true;
            continue;
        }
        let slope = g.dot(&step);
        let mut t = 1.0;
        let (next, f_next) = loop {
            let cand = &theta + t * &step;
            match prob.f_value(&cand) {
                Ok(fc) if fc <= f + ARMIJO * t * slope => break (cand, fc),
                _ => {}
            }
            t *= 0.5;
            if t < 1e-12 {
                return Err(Error::Optimization {
                    iters: iter,
                    detail: format!(
                        "line search stalled at f = {f:.6e}, ‖∇f‖ = {grad_norm:.3e}; trace {trace:?}"
                    ),
                });
            }
        };
        trace.push(NewtonStep { iter, f, grad_norm, decrement2, step: t });
        theta = next;
        f = f_next;
    }
    Err(Error::Optimization {
        iters: MAX_NEWTON_ITERS,
        detail: format!("iteration cap reached; trace {trace:?}"),
    })
}
