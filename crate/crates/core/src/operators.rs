//! The smoothing operator `R f = g` where `a g' + b g = f`, `g(0) = 0`, its
//! adjoint, and the design matrix linking coefficient space to observations.
//!
//! With `C' = b / a`, `C(0) = 0`:
//!
//! ```text
//! (R f)(x)   = e^{-C(x)} ∫_0^x e^{C(t)} f(t) / a(t) dt
//! (R^T h)(x) = e^{C(x)} / a(x) ∫_x^1 e^{-C(t)} h(t) dt
//! ```
//!
//! All integrals are composite trapezoid on the uniform grid of the input.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{
    cumulative_trapezoid, reverse_cumulative_trapezoid, FunctionGrid,
};
use crate::poly::Polynomial;

pub const MAX_DEGREE: usize = 16;
const POSITIVITY_SAMPLES: usize = 4096;

/// Polynomial coefficient functions `a`, `b` on `[0, 1]`, serialized as
/// `{"a": [c0, c1, ...], "b": [c0, c1, ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPair", into = "RawPair")]
pub struct CoefficientPair {
    a: Polynomial,
    b: Polynomial,
    a_prime: Polynomial,
    a_second: Polynomial,
    b_prime: Polynomial,
    a_min: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPair {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl TryFrom<RawPair> for CoefficientPair {
    type Error = Error;

    fn try_from(raw: RawPair) -> Result<Self> {
        CoefficientPair::new(raw.a, raw.b)
    }
}

impl From<CoefficientPair> for RawPair {
    fn from(c: CoefficientPair) -> Self {
        RawPair {
            a: c.a.coeffs().to_vec(),
            b: c.b.coeffs().to_vec(),
        }
    }
}

impl CoefficientPair {
    pub fn new(a_coeffs: Vec<f64>, b_coeffs: Vec<f64>) -> Result<Self> {
        let a = Polynomial::new(a_coeffs);
        let b = Polynomial::new(b_coeffs);
        if a.coeffs().is_empty() || b.coeffs().is_empty() {
            return Err(Error::OperatorSpec("empty coefficient list".into()));
        }
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::OperatorSpec("non-finite coefficient".into()));
        }
        if a.degree() > MAX_DEGREE || b.degree() > MAX_DEGREE {
            return Err(Error::OperatorSpec(format!(
                "polynomial degree exceeds {MAX_DEGREE}"
            )));
        }
        let a_min = (0..=POSITIVITY_SAMPLES)
            .map(|i| a.eval(i as f64 / POSITIVITY_SAMPLES as f64))
            .fold(f64::INFINITY, f64::min);
        if !(a_min > 0.0) {
            return Err(Error::OperatorSpec(format!(
                "a must be positive on [0,1]; sampled minimum is {a_min}"
            )));
        }
        let a_prime = a.derivative();
        let a_second = a_prime.derivative();
        let b_prime = b.derivative();
        Ok(Self {
            a,
            b,
            a_prime,
            a_second,
            b_prime,
            a_min,
        })
    }

    /// The Volterra operator `a ≡ 1, b ≡ 0`.
    pub fn volterra() -> Self {
        Self::new(vec![1.0], vec![0.0]).expect("constant pair is valid")
    }

    pub fn a(&self) -> &Polynomial {
        &self.a
    }

    pub fn b(&self) -> &Polynomial {
        &self.b
    }

    pub fn a_prime(&self) -> &Polynomial {
        &self.a_prime
    }

    pub fn a_second(&self) -> &Polynomial {
        &self.a_second
    }

    pub fn b_prime(&self) -> &Polynomial {
        &self.b_prime
    }

    /// Sampled minimum of `a` on `[0, 1]`.
    pub fn a_min(&self) -> f64 {
        self.a_min
    }

    /// Potential of the Liouville normal form, before composition with `x(t)`:
    /// `b² − (ab)′ + (a′)²/4 + a a″/2`.
    pub fn liouville_potential(&self, x: f64) -> f64 {
        let (a, a1, a2) = (self.a.eval(x), self.a_prime.eval(x), self.a_second.eval(x));
        let (b, b1) = (self.b.eval(x), self.b_prime.eval(x));
        b * b - (a1 * b + a * b1) + 0.25 * a1 * a1 + 0.5 * a * a2
    }

    /// `q = b² − (ab)′` of the Sturm–Liouville form of `R Rᵀ`.
    pub fn sl_q(&self, x: f64) -> f64 {
        let (a, a1) = (self.a.eval(x), self.a_prime.eval(x));
        let (b, b1) = (self.b.eval(x), self.b_prime.eval(x));
        b * b - (a1 * b + a * b1)
    }

    /// Stable content key used for eigensystem caching.
    pub fn cache_tag(&self) -> String {
        let fmt = |p: &Polynomial| {
            p.coeffs()
                .iter()
                .map(|c| format!("{:016x}", c.to_bits()))
                .collect::<Vec<_>>()
                .join(",")
        };
        format!("a[{}]b[{}]", fmt(&self.a), fmt(&self.b))
    }
}

/// `C(x) = ∫_0^x b/a` on the uniform grid with `n` intervals.
pub fn cumulative_antiderivative(spec: &CoefficientPair, n: usize) -> Result<FunctionGrid> {
    if n < 64 {
        return Err(Error::param("operators", format!("grid size {n} below 64")));
    }
    let h = 1.0 / n as f64;
    let ratio: Vec<f64> = (0..=n)
        .map(|i| {
            let x = i as f64 * h;
            spec.b.eval(x) / spec.a.eval(x)
        })
        .collect();
    Ok(FunctionGrid::from_parts_unchecked(
        cumulative_trapezoid(&ratio, h),
        1.0,
    ))
}

fn unit_interval(f: &FunctionGrid) -> Result<()> {
    if (f.length() - 1.0).abs() > 0.0 {
        return Err(Error::param("operators", "operator inputs live on [0,1]"));
    }
    Ok(())
}

fn antiderivative_on(spec: &CoefficientPair, f: &FunctionGrid) -> Result<Vec<f64>> {
    unit_interval(f)?;
    let n = f.intervals();
    let h = f.step();
    let ratio: Vec<f64> = (0..=n)
        .map(|i| {
            let x = i as f64 * h;
            spec.b.eval(x) / spec.a.eval(x)
        })
        .collect();
    Ok(cumulative_trapezoid(&ratio, h))
}

pub fn apply_r(spec: &CoefficientPair, f: &FunctionGrid) -> Result<FunctionGrid> {
    let c = antiderivative_on(spec, f)?;
    let h = f.step();
    let integrand: Vec<f64> = f
        .values()
        .iter()
        .enumerate()
        .map(|(i, &v)| c[i].exp() * v / spec.a.eval(i as f64 * h))
        .collect();
    let acc = cumulative_trapezoid(&integrand, h);
    let g = acc
        .iter()
        .zip(&c)
        .map(|(s, ci)| (-ci).exp() * s)
        .collect();
    Ok(FunctionGrid::from_parts_unchecked(g, 1.0))
}

pub fn apply_rt(spec: &CoefficientPair, h_in: &FunctionGrid) -> Result<FunctionGrid> {
    let c = antiderivative_on(spec, h_in)?;
    let h = h_in.step();
    let integrand: Vec<f64> = h_in
        .values()
        .iter()
        .zip(&c)
        .map(|(&v, ci)| (-ci).exp() * v)
        .collect();
    let acc = reverse_cumulative_trapezoid(&integrand, h);
    let g = acc
        .iter()
        .enumerate()
        .map(|(i, s)| c[i].exp() / spec.a.eval(i as f64 * h) * s)
        .collect();
    Ok(FunctionGrid::from_parts_unchecked(g, 1.0))
}

/// Dense matrix `M` with `M f = apply_r(f)` on a grid of `n` intervals.
/// Row `i` only touches columns `0..=i`.
pub fn discretize_r(spec: &CoefficientPair, n: usize) -> Result<DMatrix<f64>> {
    if n > 4096 {
        return Err(Error::capacity("operators", format!("dense grid {n} > 4096")));
    }
    let c = cumulative_antiderivative(spec, n)?.into_values();
    let h = 1.0 / n as f64;
    let col: Vec<f64> = (0..=n)
        .map(|j| c[j].exp() / spec.a.eval(j as f64 * h))
        .collect();
    let mut m = DMatrix::zeros(n + 1, n + 1);
    for i in 1..=n {
        let scale = (-c[i]).exp();
        for j in 0..=i {
            let w = if j == 0 || j == i { 0.5 * h } else { h };
            m[(i, j)] = scale * w * col[j];
        }
    }
    Ok(m)
}

/// A discretizable basis `x ↦ √λ_k ψ_k(x)` feeding the design matrix.
pub trait SpectralBasis: Sync {
    fn len(&self) -> usize;
    /// `λ_k` for 1-based `k`.
    fn lambda(&self, k: usize) -> f64;
    /// `ψ_k(x)` for 1-based `k`.
    fn psi(&self, k: usize, x: f64) -> f64;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Bound `sup_x |ψ_k(x)|` used by triangle-inequality checks.
    fn psi_sup(&self, k: usize) -> f64;
}

/// Exact cosine surrogate `ψ_k = √2 cos(πkx)`, `λ_k = k^{-2β}`.
#[derive(Debug, Clone)]
pub struct CosineBasis {
    pub size: usize,
    pub beta: f64,
}

impl CosineBasis {
    pub fn new(size: usize, beta: f64) -> Self {
        Self { size, beta }
    }
}

impl SpectralBasis for CosineBasis {
    fn len(&self) -> usize {
        self.size
    }

    fn lambda(&self, k: usize) -> f64 {
        (k as f64).powf(-2.0 * self.beta)
    }

    fn psi(&self, k: usize, x: f64) -> f64 {
        std::f64::consts::SQRT_2 * (std::f64::consts::PI * k as f64 * x).cos()
    }

    fn psi_sup(&self, _k: usize) -> f64 {
        std::f64::consts::SQRT_2
    }
}

/// `n × p` matrix with `R_{jk} = √λ_k ψ_k(j/n)`, `j = 1..=n`.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    matrix: DMatrix<f64>,
    sqrt_lambdas: Vec<f64>,
}

impl DesignMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn p(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn sqrt_lambdas(&self) -> &[f64] {
        &self.sqrt_lambdas
    }

    /// Row `r(x)` evaluated at an arbitrary point with the same basis.
    pub fn row_at(basis: &dyn SpectralBasis, p: usize, x: f64) -> Vec<f64> {
        (1..=p).map(|k| basis.lambda(k).sqrt() * basis.psi(k, x)).collect()
    }
}

pub fn assemble_design(basis: &dyn SpectralBasis, n: usize, p: usize) -> Result<DesignMatrix> {
    if p > basis.len() {
        return Err(Error::capacity(
            "operators",
            format!("p = {p} exceeds the {} available eigenpairs", basis.len()),
        ));
    }
    if n == 0 || p == 0 {
        return Err(Error::param("operators", "n and p must be positive"));
    }
    let sqrt_lambdas: Vec<f64> = (1..=p).map(|k| basis.lambda(k).sqrt()).collect();
    let matrix = DMatrix::from_fn(n, p, |j, k| {
        sqrt_lambdas[k] * basis.psi(k + 1, (j + 1) as f64 / n as f64)
    });
    Ok(DesignMatrix {
        matrix,
        sqrt_lambdas,
    })
}
