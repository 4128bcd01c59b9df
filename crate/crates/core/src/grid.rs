//! Uniform-grid function samples and the trapezoid machinery built on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Samples of a function at `x_i = i * length / N`, `i = 0..=N`.
///
/// Most grids live on `[0, 1]`; the Liouville-transformed quantities live on
/// `[0, T]`, which is why the domain length is carried along.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionGrid {
    values: Vec<f64>,
    length: f64,
}

impl FunctionGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        Self::on_interval(values, 1.0)
    }

    pub fn on_interval(values: Vec<f64>, length: f64) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::param("grid", "a grid needs at least two points"));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::param("grid", format!("bad domain length {length}")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::param("grid", format!("non-finite sample at index {i}")));
        }
        Ok(Self { values, length })
    }

    /// Samples `f` on the uniform grid of `[0, 1]` with `n` intervals.
    pub fn sample(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new((0..=n).map(|i| f(i as f64 / n as f64)).collect())
    }

    pub(crate) fn from_parts_unchecked(values: Vec<f64>, length: f64) -> Self {
        Self { values, length }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Number of intervals `N`.
    pub fn intervals(&self) -> usize {
        self.values.len() - 1
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn step(&self) -> f64 {
        self.length / self.intervals() as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.step()
    }

    /// Linear interpolation; arguments outside the domain are clamped.
    pub fn interp(&self, x: f64) -> f64 {
        let n = self.intervals();
        let s = (x / self.step()).clamp(0.0, n as f64);
        let i = (s.floor() as usize).min(n - 1);
        let w = s - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn integral(&self) -> f64 {
        trapezoid(&self.values, self.step())
    }

    pub fn inner(&self, other: &FunctionGrid) -> f64 {
        debug_assert_eq!(self.values.len(), other.values.len());
        let prod: Vec<f64> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .collect();
        trapezoid(&prod, self.step())
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> FunctionGrid {
        Self::from_parts_unchecked(self.values.iter().map(|&v| f(v)).collect(), self.length)
    }

    pub fn scaled(&self, s: f64) -> FunctionGrid {
        self.map(|v| v * s)
    }
}

pub fn trapezoid(values: &[f64], step: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..n - 1].iter().sum();
    step * (inner + 0.5 * (values[0] + values[n - 1]))
}

/// Running trapezoid integral from the left end; `out[0] = 0`.
pub fn cumulative_trapezoid(values: &[f64], step: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in values.windows(2) {
        acc += 0.5 * step * (w[0] + w[1]);
        out.push(acc);
    }
    out
}

/// Running trapezoid integral from the right end; `out[N] = 0`.
pub fn reverse_cumulative_trapezoid(values: &[f64], step: f64) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; n];
    let mut acc = 0.0;
    for i in (0..n.saturating_sub(1)).rev() {
        acc += 0.5 * step * (values[i] + values[i + 1]);
        out[i] = acc;
    }
    out
}

/// Composite trapezoid weights for `n + 1` points with spacing `step`.
pub fn trapezoid_weights(n: usize, step: f64) -> Vec<f64> {
    let mut w = vec![step; n + 1];
    w[0] = 0.5 * step;
    w[n] = 0.5 * step;
    w
}
