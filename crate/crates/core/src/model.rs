//! One-parameter exponential families and synthetic observations.

use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::SpectralBasis;
use crate::rng::{self, purpose};

/// Natural parameters above this make Poisson rates lose integer resolution.
const MAX_POISSON_S: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpFamily {
    Poisson,
    Gaussian,
    Bernoulli,
}

fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// Location of the maximum of `|σ(1−σ)(1−2σ)|` on `t ≥ 0`.
pub fn bernoulli_h3_peak() -> f64 {
    (2.0 + 3f64.sqrt()).ln()
}

impl ExpFamily {
    pub fn name(self) -> &'static str {
        match self {
            ExpFamily::Poisson => "poisson",
            ExpFamily::Gaussian => "gaussian",
            ExpFamily::Bernoulli => "bernoulli",
        }
    }

    /// Cumulant function.
    pub fn h(self, s: f64) -> f64 {
        match self {
            ExpFamily::Poisson => s.exp(),
            ExpFamily::Gaussian => 0.5 * s * s,
            // log(1 + e^s) without overflow
            ExpFamily::Bernoulli => s.max(0.0) + (-s.abs()).exp().ln_1p(),
        }
    }

    pub fn h1(self, s: f64) -> f64 {
        match self {
            ExpFamily::Poisson => s.exp(),
            ExpFamily::Gaussian => s,
            ExpFamily::Bernoulli => sigmoid(s),
        }
    }

    pub fn h2(self, s: f64) -> f64 {
        match self {
            ExpFamily::Poisson => s.exp(),
            ExpFamily::Gaussian => 1.0,
            ExpFamily::Bernoulli => {
                let p = sigmoid(s);
                p * (1.0 - p)
            }
        }
    }

    pub fn h3(self, s: f64) -> f64 {
        match self {
            ExpFamily::Poisson => s.exp(),
            ExpFamily::Gaussian => 0.0,
            ExpFamily::Bernoulli => {
                let p = sigmoid(s);
                p * (1.0 - p) * (1.0 - 2.0 * p)
            }
        }
    }

    /// `sup_{|t| ≤ K} |h‴(t)|`.
    pub fn d3_envelope(self, k: f64) -> f64 {
        let k = k.abs();
        match self {
            ExpFamily::Poisson => k.exp(),
            ExpFamily::Gaussian => 0.0,
            ExpFamily::Bernoulli => self.h3(k.min(bernoulli_h3_peak())).abs(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(self, s: f64, rng: &mut R) -> f64 {
        match self {
            ExpFamily::Poisson => rng::poisson(rng, s.exp()) as f64,
            ExpFamily::Gaussian => s + rng.sample::<f64, _>(StandardNormal),
            ExpFamily::Bernoulli => {
                if rng.gen::<f64>() < sigmoid(s) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Coefficients `θ*` of the true parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthSpec {
    #[serde(default = "TruthSpec::default_amplitude")]
    pub amplitude: f64,
    #[serde(default = "TruthSpec::default_decay")]
    pub decay: f64,
    #[serde(default = "TruthSpec::default_alternating")]
    pub alternating: bool,
    #[serde(default = "TruthSpec::default_dimension")]
    pub dimension: usize,
    /// Explicit coefficients; overrides the decay preset when present.
    #[serde(default)]
    pub theta: Option<Vec<f64>>,
}

impl Default for TruthSpec {
    fn default() -> Self {
        Self {
            amplitude: Self::default_amplitude(),
            decay: Self::default_decay(),
            alternating: Self::default_alternating(),
            dimension: Self::default_dimension(),
            theta: None,
        }
    }
}

impl TruthSpec {
    fn default_amplitude() -> f64 {
        0.5
    }
    fn default_decay() -> f64 {
        2.0
    }
    fn default_alternating() -> bool {
        true
    }
    fn default_dimension() -> usize {
        20
    }

    pub fn explicit(theta: Vec<f64>) -> Self {
        Self {
            dimension: theta.len(),
            theta: Some(theta),
            ..Self::default()
        }
    }

    pub fn zero(dimension: usize) -> Self {
        Self::explicit(vec![0.0; dimension])
    }

    pub fn theta_star(&self) -> Vec<f64> {
        if let Some(t) = &self.theta {
            return t.clone();
        }
        (1..=self.dimension)
            .map(|k| {
                let sign = if self.alternating && k % 2 == 0 { -1.0 } else { 1.0 };
                sign * self.amplitude * (k as f64).powf(-self.decay)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub y: Vec<f64>,
    pub s_true: Vec<f64>,
    pub seed: u64,
    pub family: ExpFamily,
    pub truth: TruthSpec,
    /// `‖R q*‖∞` on the refined grid.
    pub truth_sup_norm: f64,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    seed: u64,
    family: ExpFamily,
    n: usize,
    truth: TruthSpec,
    truth_sup_norm: f64,
}

#[derive(Serialize, Deserialize)]
struct Row {
    j: usize,
    s_true: f64,
    y: f64,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        let mut w = csv::Writer::from_path(dir.join(format!("{stem}.csv")))?;
        for (i, (&s, &y)) in self.s_true.iter().zip(&self.y).enumerate() {
            w.serialize(Row { j: i + 1, s_true: s, y })?;
        }
        w.flush()?;
        let side = Sidecar {
            seed: self.seed,
            family: self.family,
            n: self.n(),
            truth: self.truth.clone(),
            truth_sup_norm: self.truth_sup_norm,
        };
        std::fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&side)?)?;
        Ok(())
    }

    pub fn load(dir: &Path, stem: &str) -> Result<Self> {
        let side: Sidecar =
            serde_json::from_str(&std::fs::read_to_string(dir.join(format!("{stem}.json")))?)?;
        let mut r = csv::Reader::from_path(dir.join(format!("{stem}.csv")))?;
        let mut y = Vec::with_capacity(side.n);
        let mut s_true = Vec::with_capacity(side.n);
        for (i, row) in r.deserialize::<Row>().enumerate() {
            let row = row?;
            if row.j != i + 1 {
                return Err(Error::Model(format!("dataset row {} out of order", row.j)));
            }
            y.push(row.y);
            s_true.push(row.s_true);
        }
        if y.len() != side.n {
            return Err(Error::Model(format!("expected {} rows, found {}", side.n, y.len())));
        }
        Ok(Self {
            y,
            s_true,
            seed: side.seed,
            family: side.family,
            truth: side.truth,
            truth_sup_norm: side.truth_sup_norm,
        })
    }
}

/// `Σ_k θ_k √λ_k ψ_k(x)`.
pub fn signal_at(eig: &dyn SpectralBasis, theta: &[f64], x: f64) -> f64 {
    theta
        .iter()
        .enumerate()
        .map(|(i, &t)| if t == 0.0 { 0.0 } else { t * eig.lambda(i + 1).sqrt() * eig.psi(i + 1, x) })
        .sum()
}

/// Supremum of `|Σ_k θ_k √λ_k ψ_k|` over the `4n`-interval grid of `[0, 1]`.
pub fn signal_sup_norm(eig: &dyn SpectralBasis, theta: &[f64], n: usize) -> f64 {
    let m = 4 * n.max(1);
    (0..=m)
        .into_par_iter()
        .map(|i| signal_at(eig, theta, i as f64 / m as f64).abs())
        .reduce(|| 0.0, f64::max)
}

pub fn generate(
    eig: &dyn SpectralBasis,
    family: ExpFamily,
    truth: &TruthSpec,
    n: usize,
    seed: u64,
) -> Result<Dataset> {
    let theta = truth.theta_star();
    if theta.len() > eig.len() {
        return Err(Error::capacity(
            "model",
            format!("truth has {} coefficients but only {} eigenpairs", theta.len(), eig.len()),
        ));
    }
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::Model("non-finite truth coefficient".into()));
    }
    let s_true: Vec<f64> = (1..=n)
        .into_par_iter()
        .map(|j| signal_at(eig, &theta, j as f64 / n as f64))
        .collect();
    if family == ExpFamily::Poisson {
        if let Some(s) = s_true.iter().copied().find(|&s| s > MAX_POISSON_S) {
            return Err(Error::Model(format!(
                "Poisson rate e^{s:.1} overflows; reduce the truth amplitude"
            )));
        }
    }
    let y: Vec<f64> = s_true
        .par_iter()
        .enumerate()
        .map(|(j, &s)| {
            let mut r = rng::substream(seed, purpose::OBSERVATIONS + j as u64);
            family.sample(s, &mut r)
        })
        .collect();
    Ok(Dataset {
        y,
        s_true,
        seed,
        family,
        truth: truth.clone(),
        truth_sup_norm: signal_sup_norm(eig, &theta, n),
    })
}
