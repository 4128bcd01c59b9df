//! Shared oracles for the integration tests.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, ToPrimitive, Zero};

/// Widening applied after every rounded floating-point operation.
const ULPS: usize = 4;

fn down(mut x: f64) -> f64 {
    for _ in 0..ULPS {
        x = x.next_down();
    }
    x
}

fn up(mut x: f64) -> f64 {
    for _ in 0..ULPS {
        x = x.next_up();
    }
    x
}

/// Closed interval with exact rational endpoints.
#[derive(Debug, Clone)]
pub struct Enclosure {
    pub lo: BigRational,
    pub hi: BigRational,
}

impl Enclosure {
    fn zero() -> Self {
        Self { lo: BigRational::zero(), hi: BigRational::zero() }
    }

    fn add(&mut self, lo: f64, hi: f64) {
        self.lo += BigRational::from_f64(lo).expect("finite");
        self.hi += BigRational::from_f64(hi).expect("finite");
    }

    pub fn lo_f64(&self) -> f64 {
        self.lo.to_f64().unwrap()
    }

    pub fn hi_f64(&self) -> f64 {
        self.hi.to_f64().unwrap()
    }

    /// Whether every point of the interval is `≥ x`.
    pub fn above(&self, x: f64) -> bool {
        self.lo >= BigRational::from_f64(x).expect("finite")
    }

    /// Whether every point of the interval is `≤ x`.
    pub fn below(&self, x: f64) -> bool {
        self.hi <= BigRational::from_f64(x).expect("finite")
    }
}

/// `k^e` enclosed.
fn pow_enclosed(k: f64, e: f64) -> (f64, f64) {
    let v = k.powf(e);
    (down(v), up(v))
}

/// Enclosures of `S_dim = Σ (n + k^{e₀})/(n + k^e)` and
/// `S_tau² = Σ 1/(n + k^{e₀})`, `e₀ = 2γ₀+2β`, `e = 2γ+2β`. Each term is
/// bounded outward in floating point, then the dyadic endpoints are summed
/// exactly.
pub fn s_sum_enclosure(n: u64, p: u64, beta: f64, gamma: f64, gamma0: f64) -> (Enclosure, Enclosure) {
    let nf = n as f64;
    let e0 = 2.0 * gamma0 + 2.0 * beta;
    let e = 2.0 * gamma + 2.0 * beta;
    let mut dim = Enclosure::zero();
    let mut tau2 = Enclosure::zero();
    for k in 1..=p {
        let kf = k as f64;
        let (a_lo, a_hi) = pow_enclosed(kf, e0);
        let (b_lo, b_hi) = pow_enclosed(kf, e);
        let (na_lo, na_hi) = (down(nf + a_lo), up(nf + a_hi));
        let (nb_lo, nb_hi) = (down(nf + b_lo), up(nf + b_hi));
        dim.add(down(na_lo / nb_hi), up(na_hi / nb_lo));
        tau2.add(down(1.0 / na_hi), up(1.0 / na_lo));
    }
    (dim, tau2)
}

/// `n^{1/s}` enclosed.
pub fn root_enclosed(n: u64, s: f64) -> (f64, f64) {
    pow_enclosed(n as f64, 1.0 / s)
}

/// Exact `Σ_{k=lo}^{hi} k^α` for integer `α`.
pub fn power_sum(lo: u64, hi: u64, alpha: i32) -> BigRational {
    (lo..=hi).map(|k| int_pow(k, alpha)).fold(BigRational::zero(), |a, b| a + b)
}

/// Exact `k^α` for integer `α`.
pub fn int_pow(k: u64, alpha: i32) -> BigRational {
    let base = BigInt::from(k).pow(alpha.unsigned_abs());
    if alpha >= 0 {
        BigRational::from_integer(base)
    } else {
        BigRational::new(BigInt::from(1), base)
    }
}

pub fn rat(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

use std::sync::Arc;

use laplace_cert::eigensolver::{eigensystem, EigenSystem};
use laplace_cert::model::{generate, ExpFamily, TruthSpec};
use laplace_cert::operators::CoefficientPair;
use laplace_cert::posterior::{map_solve, LaplaceFit, Problem, SharedBasis};

pub fn volterra(k: usize, grid: usize) -> Arc<EigenSystem> {
    Arc::new(eigensystem(&CoefficientPair::volterra(), k, grid).unwrap())
}

/// Seeded instance with the default truth and `γ = 2`.
pub fn instance(eig: &Arc<EigenSystem>, family: ExpFamily, n: usize, p: usize, seed: u64) -> (Problem, LaplaceFit) {
    let data = generate(eig.as_ref(), family, &TruthSpec::default(), n, seed).unwrap();
    let basis: SharedBasis = eig.clone();
    let prob = Problem::new(basis, &data, 2.0, p).unwrap();
    let fit = map_solve(&prob, None).unwrap();
    (prob, fit)
}
