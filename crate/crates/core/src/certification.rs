//! Certified total-variation bounds for the Laplace approximation.
//!
//! For a weight matrix `D` scaled so that `α(D) = ‖D_G⁻¹ D‖ = 1`, the bound is
//!
//! ```text
//! TV ≤ τ₃ · dim_A(D) + 2 exp(−(r − 3√dim_A)² / 3),
//!      r ≥ 3√dim_A + 3,   r · τ₃ ≤ 1/2,
//! ```
//!
//! where `τ₃` bounds `sup_{‖Du‖≤r} ‖∇³f(θ̂+u)‖_D`. It is certified as
//! `D₃(K) · A · B` with `A = sup_x ‖D⁻¹ r(x)‖`, `B = ‖D⁻¹ RᵀR D⁻¹‖`,
//! `r(x)_k = √λ_k ψ_k(x)` and `K = ‖Rq_θ̂‖∞ + r A`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{assemble_design, CosineBasis, SpectralBasis};
use crate::posterior::{prior_diagonal, LaplaceFit, Problem};
use crate::rng::{self, purpose};

const ALPHA_TOL: f64 = 1e-8;
const REFINE_CHUNK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightChoice {
    /// `D = D_G`.
    Dg,
    /// `D = I / α(I)`.
    IdentityScaled,
    /// `D² = ∇²L(θ̂) + diag(k^{2γ₀})`.
    Gamma0 { gamma0: f64 },
}

impl WeightChoice {
    pub fn label(&self) -> String {
        match self {
            WeightChoice::Dg => "DG".into(),
            WeightChoice::IdentityScaled => "identity".into(),
            WeightChoice::Gamma0 { gamma0 } => format!("gamma0={gamma0:.6}"),
        }
    }

    /// Unscaled `D²`.
    pub fn matrix(&self, fit: &LaplaceFit, prob: &Problem) -> Result<DMatrix<f64>> {
        let p = fit.p();
        match *self {
            WeightChoice::Dg => Ok(fit.dg2.clone()),
            WeightChoice::IdentityScaled => Ok(DMatrix::identity(p, p)),
            WeightChoice::Gamma0 { gamma0 } => {
                if gamma0 > prob.gamma() {
                    return Err(Error::param(
                        "certification",
                        format!("γ₀ = {gamma0} exceeds γ = {}", prob.gamma()),
                    ));
                }
                Ok(&fit.hess_l + DMatrix::from_diagonal(&prior_diagonal(p, gamma0)))
            }
        }
    }

    /// Whether `∇²f(θ) ⪰ D_G² − D²` holds for every `θ` by construction.
    pub fn hessian_bound_by_construction(&self) -> bool {
        !matches!(self, WeightChoice::IdentityScaled)
    }
}

fn cholesky(m: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    m.clone()
        .cholesky()
        .ok_or_else(|| Error::not_pd("certification", format!("{what} is not positive definite")))
}

/// `L⁻¹ M L⁻ᵀ` for `L` lower triangular.
fn whiten(l: &DMatrix<f64>, m: &DMatrix<f64>) -> DMatrix<f64> {
    let x = l.solve_lower_triangular(m).expect("triangular factor");
    let mut w = l.solve_lower_triangular(&x.transpose()).expect("triangular factor");
    crate::posterior::symmetrize(&mut w);
    w
}

fn lambda_max(m: DMatrix<f64>) -> f64 {
    m.symmetric_eigen().eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn spectral_norm_sym(m: DMatrix<f64>) -> f64 {
    m.symmetric_eigen().eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

/// `α(D) = ‖D_G⁻¹ D‖ = √λ_max(L⁻¹ D² L⁻ᵀ)` with `D_G² = L Lᵀ`.
pub fn alpha_of(d2: &DMatrix<f64>, dg2: &DMatrix<f64>) -> Result<f64> {
    cholesky(d2, "D²")?;
    let l = cholesky(dg2, "D_G²")?.l();
    Ok(lambda_max(whiten(&l, d2)).sqrt())
}

/// `dim_A(D) = tr(D_G⁻² D²) / α(D)²`.
pub fn effdim_of(d2: &DMatrix<f64>, dg2: &DMatrix<f64>) -> Result<f64> {
    cholesky(d2, "D²")?;
    let l = cholesky(dg2, "D_G²")?.l();
    let w = whiten(&l, d2);
    let tr = w.trace();
    Ok(tr / lambda_max(w))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertOptions {
    /// Decay exponent of `λ_k` used for the S-sum diagnostics.
    #[serde(default = "CertOptions::default_beta")]
    pub beta: f64,
    #[serde(default = "CertOptions::default_r_points")]
    pub r_points: usize,
    /// Upper end of the radius grid in units of `√dim_A`.
    #[serde(default = "CertOptions::default_r_max_factor")]
    pub r_max_factor: f64,
    /// Refinement of the `x`-grid relative to `j/n` for the supremum `A`.
    #[serde(default = "CertOptions::default_refine")]
    pub refine: usize,
}

impl Default for CertOptions {
    fn default() -> Self {
        Self {
            beta: Self::default_beta(),
            r_points: Self::default_r_points(),
            r_max_factor: Self::default_r_max_factor(),
            refine: Self::default_refine(),
        }
    }
}

impl CertOptions {
    fn default_beta() -> f64 {
        1.0
    }
    fn default_r_points() -> usize {
        60
    }
    fn default_r_max_factor() -> f64 {
        50.0
    }
    fn default_refine() -> usize {
        4
    }
}

/// The `r`-independent pieces of the certified third-derivative bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tau3Parts {
    /// `sup_x ‖D⁻¹ r(x)‖` on the refined grid.
    pub a_sup: f64,
    /// Same supremum over the points `j/n` only.
    pub a_sup_coarse: f64,
    /// `‖D⁻¹ RᵀR D⁻¹‖`.
    pub b_norm: f64,
    pub rq_sup: f64,
    pub n: usize,
    /// Route `D₃ · n · A³` instead of `D₃ · A · B`.
    pub coarse_route: bool,
}

impl Tau3Parts {
    pub fn k_loc(&self, r: f64) -> f64 {
        self.rq_sup + r * self.a_sup
    }

    pub fn value(&self, family: crate::model::ExpFamily, r: f64) -> f64 {
        let d3 = family.d3_envelope(self.k_loc(r));
        if d3 == 0.0 {
            return 0.0;
        }
        if self.coarse_route {
            d3 * self.n as f64 * self.a_sup.powi(3)
        } else {
            d3 * self.a_sup * self.b_norm
        }
    }

    /// Relative change of `A` between the `j/n` grid and the refined grid.
    pub fn grid_gap(&self) -> f64 {
        (self.a_sup - self.a_sup_coarse) / self.a_sup
    }
}

/// `sup_x ‖L⁻¹ r(x)‖` over `x = i/m`, `i = 0..=m`, and over the subset
/// `x = j/n`.
fn sup_whitened_rows(
    basis: &dyn SpectralBasis,
    l: &DMatrix<f64>,
    p: usize,
    n: usize,
    refine: usize,
) -> (f64, f64) {
    let m = n * refine;
    let sqrt_l: Vec<f64> = (1..=p).map(|k| basis.lambda(k).sqrt()).collect();
    let chunks: Vec<usize> = (0..=m).step_by(REFINE_CHUNK).collect();
    chunks
        .par_iter()
        .map(|&start| {
            let end = (start + REFINE_CHUNK).min(m + 1);
            let mut block = DMatrix::zeros(p, end - start);
            for (c, i) in (start..end).enumerate() {
                let x = i as f64 / m as f64;
                for k in 0..p {
                    block[(k, c)] = sqrt_l[k] * basis.psi(k + 1, x);
                }
            }
            let w = l.solve_lower_triangular(&block).expect("triangular factor");
            let mut fine = 0.0f64;
            let mut coarse = 0.0f64;
            for (c, i) in (start..end).enumerate() {
                let v = w.column(c).norm();
                fine = fine.max(v);
                if i % refine == 0 && i > 0 {
                    coarse = coarse.max(v);
                }
            }
            (fine, coarse)
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)))
}

pub fn gram(prob: &Problem) -> DMatrix<f64> {
    let r = prob.design().matrix();
    let mut g = r.tr_mul(r);
    crate::posterior::symmetrize(&mut g);
    g
}

/// `r`-independent parts of the certified bound for the (already scaled) `D²`.
pub fn tau3_parts(
    fit: &LaplaceFit,
    prob: &Problem,
    d2: &DMatrix<f64>,
    gram: &DMatrix<f64>,
    coarse_route: bool,
    refine: usize,
) -> Result<Tau3Parts> {
    let l = cholesky(d2, "D²")?.l();
    let (a_sup, a_sup_coarse) =
        sup_whitened_rows(prob.basis().as_ref(), &l, prob.p(), prob.n(), refine.max(1));
    let b_norm = lambda_max(whiten(&l, gram));
    Ok(Tau3Parts {
        a_sup,
        a_sup_coarse,
        b_norm,
        rq_sup: fit.rq_sup,
        n: prob.n(),
        coarse_route,
    })
}

/// Certified upper bound on `sup_{‖Du‖≤r} ‖∇³f(θ̂+u)‖_D` for the choice,
/// after scaling to `α(D) = 1`.
pub fn tau3_certified(fit: &LaplaceFit, prob: &Problem, choice: WeightChoice, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::param("certification", "radius must be positive"));
    }
    let d2 = scaled_matrix(fit, prob, choice)?.0;
    let parts = tau3_parts(
        fit,
        prob,
        &d2,
        &gram(prob),
        choice == WeightChoice::IdentityScaled,
        CertOptions::default().refine,
    )?;
    Ok(parts.value(prob.family(), r))
}

/// `D²/α²` together with the raw `α`.
pub fn scaled_matrix(fit: &LaplaceFit, prob: &Problem, choice: WeightChoice) -> Result<(DMatrix<f64>, f64)> {
    let raw = choice.matrix(fit, prob)?;
    let alpha = alpha_of(&raw, &fit.dg2)?;
    Ok((raw / (alpha * alpha), alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SSums {
    pub s_dim: f64,
    /// `S_tau = (Σ_k 1/(n + k^{2γ₀+2β}))^{1/2}`.
    pub s_tau: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct DoubleDouble {
    hi: f64,
    lo: f64,
}

impl DoubleDouble {
    fn add(self, x: f64) -> Self {
        let s = self.hi + x;
        let bb = s - self.hi;
        let err = (self.hi - (s - bb)) + (x - bb);
        let lo = self.lo + err;
        let hi = s + lo;
        Self { hi, lo: lo - (hi - s) }
    }

    fn value(self) -> f64 {
        self.hi + self.lo
    }
}

/// `(n + k^a)/(n + k^b)` for `a ≤ b` without overflowing the powers.
fn ratio_term(n: f64, k: f64, a: f64, b: f64) -> f64 {
    let lb = b * k.ln();
    if lb < 600.0 {
        let (ka, kb) = (k.powf(a), k.powf(b));
        (n + ka) / (n + kb)
    } else {
        let ln_n = n.ln();
        let x = (ln_n - lb).exp();
        let y = ((a - b) * k.ln()).exp();
        (x + y) / (x + 1.0)
    }
}

/// `S_dim = Σ_k (n + k^{2γ₀+2β})/(n + k^{2γ+2β})` and `S_tau`, summed in
/// double-double arithmetic.
pub fn s_sums(n: usize, p: usize, beta: f64, gamma: f64, gamma0: f64) -> SSums {
    let nf = n as f64;
    let e0 = 2.0 * gamma0 + 2.0 * beta;
    let e = 2.0 * gamma + 2.0 * beta;
    let mut dim = DoubleDouble::default();
    let mut tau = DoubleDouble::default();
    for k in 1..=p {
        let kf = k as f64;
        dim = dim.add(if gamma0 == gamma { 1.0 } else { ratio_term(nf, kf, e0, e) });
        let le0 = e0 * kf.ln();
        tau = tau.add(if le0 < 700.0 { 1.0 / (nf + kf.powf(e0)) } else { (-le0).exp() });
    }
    SSums {
        s_dim: dim.value(),
        s_tau: tau.value().sqrt(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gamma0Star {
    pub gamma0: f64,
    pub m: f64,
    pub m0: f64,
    /// `n > (β+γ−1)^{−2β−2γ}`, the range where the S-sum brackets are proven.
    pub above_threshold: bool,
}

/// `γ₀* = γ − 1/2 − 1/(2m)`, `m = n^{1/(2β+2γ)}`, `m₀* = n^{1/(2β+2γ₀*)}`.
pub fn gamma0_star(n: usize, beta: f64, gamma: f64) -> Result<Gamma0Star> {
    let s = 2.0 * beta + 2.0 * gamma;
    if !(s > 2.0) {
        return Err(Error::param("certification", format!("2β+2γ = {s} must exceed 2")));
    }
    let nf = n as f64;
    let m = nf.powf(1.0 / s);
    let gamma0 = gamma - 0.5 - 0.5 / m;
    let m0 = nf.powf(1.0 / (2.0 * beta + 2.0 * gamma0));
    let above_threshold = nf > (beta + gamma - 1.0).powf(-s);
    Ok(Gamma0Star { gamma0, m, m0, above_threshold })
}

/// S-bracket constants `(lower, upper)` for `S_dim` and for `S_tau²`.
pub fn s_brackets(n: usize, p: usize, beta: f64, gamma: f64) -> Result<((f64, f64), (f64, f64))> {
    let g = gamma0_star(n, beta, gamma)?;
    let pf = p as f64;
    let nf = n as f64;
    let mp = g.m.min(pf);
    let m0p = g.m0.min(pf);
    let dim = (0.5 * mp, (2.0 + 1.0 / (2.0 * beta + 2.0 * gamma - 1.0)) * mp);
    let tau2 = (0.5 * m0p / nf, (1.0 + 1.0 / (beta + gamma - 1.0)) * m0p / nf);
    Ok((dim, tau2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SumDiagnostics {
    pub s_dim: f64,
    pub s_tau: f64,
    pub m: f64,
    pub m0star: f64,
    pub gamma0star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub choice: WeightChoice,
    pub label: String,
    /// `α(D)` after scaling; 1 up to rounding.
    pub alpha: f64,
    /// `α` of the unscaled matrix.
    pub alpha_raw: f64,
    pub effdim: f64,
    pub tau3_sup: f64,
    pub radius: f64,
    pub local_term: f64,
    pub tail_term: f64,
    pub tv_bound: f64,
    pub r_tau: f64,
    pub feasible: bool,
    pub hessian_bound_by_construction: bool,
    /// Feasible and the Hessian lower bound holds by construction.
    pub certified: bool,
    pub parts: Tau3Parts,
    pub k_loc: f64,
    pub d3: f64,
    pub diagnostics: Option<SumDiagnostics>,
}

fn tail_term(r: f64, dim: f64) -> f64 {
    2.0 * (-(r - 3.0 * dim.sqrt()).powi(2) / 3.0).exp()
}

/// Candidate radii: log grid on `[3√dim+3, c√dim]` plus an optional extra.
pub fn radius_grid(dim: f64, opts: &CertOptions, extra: Option<f64>) -> Vec<f64> {
    let lo = 3.0 * dim.sqrt() + 3.0;
    let hi = (opts.r_max_factor * dim.sqrt()).max(lo);
    let k = opts.r_points.max(2);
    let mut rs: Vec<f64> = (0..k)
        .map(|i| lo * (hi / lo).powf(i as f64 / (k - 1) as f64))
        .collect();
    if let Some(r) = extra {
        if r.is_finite() && r >= lo {
            rs.push(r);
        }
    }
    rs
}

pub fn certify(fit: &LaplaceFit, prob: &Problem, choice: WeightChoice) -> Result<Certificate> {
    certify_with(fit, prob, choice, &CertOptions::default(), &gram(prob))
}

pub fn certify_with(
    fit: &LaplaceFit,
    prob: &Problem,
    choice: WeightChoice,
    opts: &CertOptions,
    gram: &DMatrix<f64>,
) -> Result<Certificate> {
    let (d2, alpha_raw) = scaled_matrix(fit, prob, choice)?;
    let alpha = alpha_of(&d2, &fit.dg2)?;
    let effdim = effdim_of(&d2, &fit.dg2)?;
    let coarse = choice == WeightChoice::IdentityScaled;
    let parts = tau3_parts(fit, prob, &d2, gram, coarse, opts.refine)?;

    let diagnostics = match choice {
        WeightChoice::Gamma0 { gamma0 } => {
            let star = gamma0_star(prob.n(), opts.beta, prob.gamma()).ok();
            let s = s_sums(prob.n(), prob.p(), opts.beta, prob.gamma(), gamma0);
            star.map(|g| SumDiagnostics {
                s_dim: s.s_dim,
                s_tau: s.s_tau,
                m: g.m,
                m0star: g.m0,
                gamma0star: g.gamma0,
            })
        }
        _ => None,
    };
    let canonical = diagnostics.as_ref().map(|d| 1.0 / d.s_tau);
    let family = prob.family();

    let mut best_feasible: Option<(f64, f64, f64)> = None;
    let mut least_infeasible: Option<(f64, f64, f64)> = None;
    for r in radius_grid(effdim, opts, canonical) {
        let tau = parts.value(family, r);
        let total = tau * effdim + tail_term(r, effdim);
        let rt = r * tau;
        if rt <= 0.5 {
            if best_feasible.map_or(true, |b| total < b.1) {
                best_feasible = Some((r, total, tau));
            }
        } else if least_infeasible.map_or(true, |b| rt < b.1) {
            least_infeasible = Some((r, rt, tau));
        }
    }
    let (radius, tau3_sup) = match (best_feasible, least_infeasible) {
        (Some((r, _, t)), _) => (r, t),
        (None, Some((r, _, t))) => (r, t),
        (None, None) => unreachable!("radius grid is never empty"),
    };
    let local_term = tau3_sup * effdim;
    let tail = tail_term(radius, effdim);
    let r_tau = radius * tau3_sup;
    let feasible = r_tau <= 0.5
        && radius >= 3.0 * effdim.sqrt() + 3.0
        && (alpha - 1.0).abs() <= ALPHA_TOL;
    let by_construction = choice.hessian_bound_by_construction();
    Ok(Certificate {
        choice,
        label: choice.label(),
        alpha,
        alpha_raw,
        effdim,
        tau3_sup,
        radius,
        local_term,
        tail_term: tail,
        tv_bound: local_term + tail,
        r_tau,
        feasible,
        hessian_bound_by_construction: by_construction,
        certified: feasible && by_construction,
        parts,
        k_loc: parts.k_loc(radius),
        d3: family.d3_envelope(parts.k_loc(radius)),
        diagnostics,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub dg: Certificate,
    pub identity: Certificate,
    pub star: Certificate,
    pub gamma0star: Gamma0Star,
    /// `UB(D_G)/UB(D(γ₀*))`.
    pub ratio_dg: f64,
    /// `UB(I/α(I))/UB(D(γ₀*))`.
    pub ratio_identity: f64,
}

pub fn compare_choices(fit: &LaplaceFit, prob: &Problem) -> Result<Comparison> {
    compare_choices_with(fit, prob, &CertOptions::default())
}

pub fn compare_choices_with(fit: &LaplaceFit, prob: &Problem, opts: &CertOptions) -> Result<Comparison> {
    let star = gamma0_star(prob.n(), opts.beta, prob.gamma())?;
    let g = gram(prob);
    let choices = [
        WeightChoice::Dg,
        WeightChoice::IdentityScaled,
        WeightChoice::Gamma0 { gamma0: star.gamma0 },
    ];
    let mut certs: Vec<Certificate> = choices
        .par_iter()
        .map(|&c| certify_with(fit, prob, c, opts, &g))
        .collect::<Result<_>>()?;
    let star_cert = certs.pop().expect("three certificates");
    let identity = certs.pop().expect("three certificates");
    let dg = certs.pop().expect("three certificates");
    Ok(Comparison {
        ratio_dg: dg.tv_bound / star_cert.tv_bound,
        ratio_identity: identity.tv_bound / star_cert.tv_bound,
        dg,
        identity,
        star: star_cert,
        gamma0star: star,
    })
}

/// Smallest `C` with `|uᵀ(Ψ − nI)u| ≤ C uᵀ diag(k^λ) u`, where
/// `Ψ_{kl} = Σ_j ψ_k(j/n) ψ_l(j/n)`.
pub fn ortho_constant(basis: &dyn SpectralBasis, n: usize, p: usize, lambda_exp: f64) -> Result<f64> {
    if p > basis.len() {
        return Err(Error::capacity("certification", format!("p = {p} exceeds basis size")));
    }
    let psi = DMatrix::from_fn(n, p, |j, k| basis.psi(k + 1, (j + 1) as f64 / n as f64));
    let mut m = psi.tr_mul(&psi);
    for k in 0..p {
        m[(k, k)] -= n as f64;
    }
    let w: Vec<f64> = (1..=p).map(|k| (k as f64).powf(-0.5 * lambda_exp)).collect();
    for i in 0..p {
        for j in 0..p {
            m[(i, j)] *= w[i] * w[j];
        }
    }
    crate::posterior::symmetrize(&mut m);
    Ok(spectral_norm_sym(m))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TightnessReport {
    pub n: usize,
    pub p: usize,
    pub m0: f64,
    pub m0_bar: usize,
    /// `C` making `‖D(γ₀) v‖ = 1`.
    pub c_norm: f64,
    /// `‖D(γ₀) v‖` for `C = 1`.
    pub unit_norm: f64,
    /// `Σ_j |R_jᵀ v|³` at the witness.
    pub lower: f64,
    /// `A · B`, the certified bound with `D₃ = 1`.
    pub upper: f64,
    pub ratio: f64,
    /// `Σ_j |R_jᵀ e₁|³ / n`.
    pub identity_cubic_per_n: f64,
}

/// Witness-versus-certificate comparison on the cosine surrogate with
/// `D(γ₀)² = RᵀR + diag(k^{2γ₀})` (unit curvature at `θ̂ = 0`).
pub fn tightness_probe(
    basis: &CosineBasis,
    n: usize,
    p: usize,
    beta: f64,
    gamma0: f64,
) -> Result<TightnessReport> {
    let design = assemble_design(basis, n, p)?;
    let r = design.matrix();
    let mut d2 = r.tr_mul(r);
    crate::posterior::symmetrize(&mut d2);
    let g = d2.clone();
    for k in 0..p {
        d2[(k, k)] += ((k + 1) as f64).powf(2.0 * gamma0);
    }
    let m0 = (n as f64).powf(1.0 / (2.0 * beta + 2.0 * gamma0));
    let m0_bar = (m0.min(p as f64).floor() as usize).max(1);
    let scale = 1.0 / ((m0_bar * n) as f64).sqrt();
    let mut v = DVector::zeros(p);
    for k in 0..m0_bar {
        v[k] = ((k + 1) as f64).powf(beta) * scale;
    }
    let unit_norm = (v.transpose() * &d2 * &v)[(0, 0)].sqrt();
    let c_norm = 1.0 / unit_norm;
    v *= c_norm;
    let rv = r * &v;
    let lower: f64 = rv.iter().map(|x| x.abs().powi(3)).sum();

    let l = cholesky(&d2, "D(γ₀)²")?.l();
    let (a_sup, _) = sup_whitened_rows(basis, &l, p, n, 4);
    let b_norm = lambda_max(whiten(&l, &g));
    let upper = a_sup * b_norm;
    let identity_cubic_per_n = r.column(0).iter().map(|x| x.abs().powi(3)).sum::<f64>() / n as f64;
    Ok(TightnessReport {
        n,
        p,
        m0,
        m0_bar,
        c_norm,
        unit_norm,
        lower,
        upper,
        ratio: lower / upper,
        identity_cubic_per_n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaReport {
    pub samples: usize,
    pub radius: f64,
    pub omega_est: f64,
    pub omega3_est: f64,
    pub tau3_est: f64,
    pub tau3_cert: f64,
    pub chain_holds: bool,
}

/// Sampled lower estimates of `ω`, `ω₃`, `τ₃` on `{‖D(θ−θ̂)‖ ≤ r}` for the
/// scaled `D²`, checked against the certified `τ₃`.
pub fn omega_diagnostics(
    fit: &LaplaceFit,
    prob: &Problem,
    d2: &DMatrix<f64>,
    r: f64,
    tau3_cert: f64,
    samples: usize,
    seed: u64,
) -> Result<OmegaReport> {
    let samples = samples.max(1);
    let l = cholesky(d2, "D²")?.l();
    let p = fit.p();
    let s_hat = prob.signal(&fit.theta_hat);
    let lt = l.transpose();
    let results: Vec<(f64, f64, f64)> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::substream(seed, purpose::SEARCH + i as u64);
            let z = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
            // alternate boundary and interior radii
            let rho = if i % 2 == 0 { r } else { r * rng.gen::<f64>().powf(1.0 / p as f64) };
            let w = z.normalize() * rho;
            let u = lt.solve_upper_triangular(&w).expect("triangular factor");
            let theta = &fit.theta_hat + &u;
            let df = prob.f_increment(&fit.theta_hat, &s_hat, &u);
            let q = (u.transpose() * &fit.dg2 * &u)[(0, 0)];
            let omega = if rho > 0.0 { (df - 0.5 * q).abs() / (0.5 * rho * rho) } else { 0.0 };
            let (omega3, tau3) = match prob.hessian(&theta) {
                Ok(h) => {
                    let diff = h - &fit.dg2;
                    let o3 = spectral_norm_sym(whiten(&l, &diff));
                    (o3, if rho > 0.0 { o3 / rho } else { 0.0 })
                }
                Err(_) => (f64::INFINITY, f64::INFINITY),
            };
            (omega, omega3, tau3)
        })
        .collect();
    let omega_est = results.iter().map(|x| x.0).fold(0.0, f64::max);
    let omega3_est = results.iter().map(|x| x.1).fold(0.0, f64::max);
    let tau3_est = results.iter().map(|x| x.2).fold(0.0, f64::max);
    let slack = 1e-12;
    let chain_holds = omega_est <= r / 3.0 * tau3_cert + slack
        && omega3_est <= r * tau3_cert + slack
        && tau3_est <= tau3_cert + slack;
    Ok(OmegaReport {
        samples,
        radius: r,
        omega_est,
        omega3_est,
        tau3_est,
        tau3_cert,
        chain_holds,
    })
}

/// Multistart projected ascent for `max_{‖Dv‖=1} |Σ_j h‴(R_jᵀθ̂)(R_jᵀv)³|`;
/// a lower estimate of the third-derivative norm at `θ̂`.
pub fn third_derivative_search(
    fit: &LaplaceFit,
    prob: &Problem,
    d2: &DMatrix<f64>,
    restarts: usize,
    seed: u64,
) -> Result<f64> {
    let l = cholesky(d2, "D²")?.l();
    let lt = l.transpose();
    let p = fit.p();
    let s_hat = prob.signal(&fit.theta_hat);
    let h3: DVector<f64> = s_hat.map(|s| prob.family().h3(s));
    // work in w = Lᵀ v so that the constraint is ‖w‖ = 1
    let rw = {
        let r = prob.design().matrix();
        let x = lt.solve_upper_triangular(&r.transpose()).expect("triangular factor");
        x.transpose()
    };
    let objective = |w: &DVector<f64>| -> (f64, DVector<f64>) {
        let s = &rw * w;
        let val: f64 = s.iter().zip(h3.iter()).map(|(a, h)| h * a * a * a).sum();
        let g_inner = DVector::from_iterator(s.len(), s.iter().zip(h3.iter()).map(|(a, h)| 3.0 * h * a * a));
        (val, rw.tr_mul(&g_inner))
    };
    let best = (0..restarts.max(1))
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::substream(seed, purpose::SEARCH + (1 << 30) + i as u64);
            let mut w = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal)).normalize();
            let mut best = 0.0f64;
            for _ in 0..200 {
                let (val, grad) = objective(&w);
                best = best.max(val.abs());
                let dir = if val >= 0.0 { grad } else { -grad };
                let next = dir.normalize();
                if !next.iter().all(|x| x.is_finite()) || (&next - &w).norm() < 1e-13 {
                    break;
                }
                w = next;
            }
            best.max(objective(&w).0.abs())
        })
        .reduce(|| 0.0, f64::max);
    Ok(best)
}
