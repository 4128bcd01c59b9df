//! Eigenpairs of `R Rᵀ` from its Sturm–Liouville form
//!
//! ```text
//! −(a² h′)′ + (b² − (ab)′) h = μ h,   h(0) = 0,   a(1) h′(1) + b(1) h(1) = 0,
//! ```
//!
//! with `μ = 1/λ`. The problem is mapped to the Liouville normal form
//! `−u″ + Q u = μ u` on `[0, T]` via `t(x) = ∫_0^x 1/a`, `u = a^{1/2} ψ`. The
//! right boundary condition becomes `u′(T) + (b(1) − a′(1)/2) u(T) = 0`.
//!
//! Eigenvalues are located by shooting `u(0) = 0, u′(0) = 1` with a fixed-step
//! RK4 integrator. The phase `θ(T; μ) = atan2(u, u′)`, unwrapped by the count of
//! interior zeros, is increasing in `μ`, and the `k`-th eigenvalue is the unique
//! root of `θ(T; μ) = θ_b + (k − 1)π`. Brackets come from a scan in `√μ` and are
//! refined by bisection; the zero count of each converged eigenfunction is then
//! checked against `k − 1`.
//!
//! [`svd_oracle`] is an independent route through the dense discretization of
//! `R`.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{trapezoid, trapezoid_weights, FunctionGrid};
use crate::operators::{discretize_r, CoefficientPair, SpectralBasis};

const BISECTION_REL_TOL: f64 = 1e-10;
const FINE_FACTOR: usize = 8;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LiouvilleForm {
    /// `T = ∫_0^1 1/a`.
    pub total_length: f64,
    /// `t(x)` on the `[0, 1]` grid with `N` intervals.
    pub t_of_x: FunctionGrid,
    /// `x(t)` on the uniform `[0, T]` grid with `2N` intervals (RK4 half steps).
    pub x_of_t: FunctionGrid,
    /// `Q(t)` on the same `2N`-interval grid.
    pub potential: FunctionGrid,
    pub c1: f64,
    pub c2: f64,
}

impl LiouvilleForm {
    /// Number of RK4 steps across `[0, T]`.
    pub fn steps(&self) -> usize {
        self.t_of_x.intervals()
    }

    pub fn potential_sup(&self) -> f64 {
        self.potential.sup_norm()
    }

    fn boundary_phase(&self) -> f64 {
        // c1 u' + c2 u = 0 with (u, u') ∝ (sin θ, cos θ)
        f64::atan2(self.c1, -self.c2)
    }
}

pub fn liouville_transform(spec: &CoefficientPair, n: usize) -> Result<LiouvilleForm> {
    if n < 64 {
        return Err(Error::param("eigensolver", format!("grid size {n} below 64")));
    }
    let fine = n * FINE_FACTOR;
    let hf = 1.0 / fine as f64;
    let inv_a: Vec<f64> = (0..=fine).map(|i| 1.0 / spec.a().eval(i as f64 * hf)).collect();
    let t_fine = crate::grid::cumulative_trapezoid(&inv_a, hf);
    let total_length = t_fine[fine];
    let t_of_x: Vec<f64> = (0..=n).map(|i| t_fine[i * FINE_FACTOR]).collect();

    // invert the monotone fine table onto a uniform t-grid
    let m = 2 * n;
    let ht = total_length / m as f64;
    let mut x_of_t = Vec::with_capacity(m + 1);
    let mut j = 0usize;
    for i in 0..=m {
        let t = (i as f64 * ht).min(total_length);
        while j + 1 < fine && t_fine[j + 1] < t {
            j += 1;
        }
        let (t0, t1) = (t_fine[j], t_fine[j + 1]);
        let w = if t1 > t0 { ((t - t0) / (t1 - t0)).clamp(0.0, 1.0) } else { 0.0 };
        x_of_t.push((j as f64 + w) * hf);
    }
    x_of_t[0] = 0.0;
    x_of_t[m] = 1.0;

    let potential: Vec<f64> = x_of_t.iter().map(|&x| spec.liouville_potential(x)).collect();
    if potential.iter().any(|q| !q.is_finite()) {
        return Err(Error::OperatorSpec("non-finite Liouville potential".into()));
    }
    let c1 = 1.0;
    let c2 = spec.b().eval(1.0) - 0.5 * spec.a_prime().eval(1.0);
    Ok(LiouvilleForm {
        total_length,
        t_of_x: FunctionGrid::from_parts_unchecked(t_of_x, 1.0),
        x_of_t: FunctionGrid::from_parts_unchecked(x_of_t, total_length),
        potential: FunctionGrid::from_parts_unchecked(potential, total_length),
        c1,
        c2,
    })
}

struct Shot {
    u_end: f64,
    du_end: f64,
    zeros: usize,
    trace: Option<(Vec<f64>, Vec<f64>)>,
}

impl Shot {
    /// Unwrapped phase of `(u, u′)` at `T`.
    fn phase(&self) -> f64 {
        let s = if self.zeros % 2 == 0 { 1.0 } else { -1.0 };
        let mut phi = f64::atan2(s * self.u_end, s * self.du_end);
        if phi < 0.0 {
            phi += PI;
        }
        self.zeros as f64 * PI + phi
    }
}

/// Integrates `u″ = (Q − μ) u`, `u(0) = 0`, `u′(0) = 1` across `[0, T]`.
fn shoot(form: &LiouvilleForm, mu: f64, record: bool) -> Shot {
    let n = form.steps();
    let q = form.potential.values();
    let h = form.total_length / n as f64;
    let (mut u, mut v) = (0.0f64, 1.0f64);
    let mut zeros = 0usize;
    let mut trace = record.then(|| {
        let mut us = Vec::with_capacity(n + 1);
        let mut vs = Vec::with_capacity(n + 1);
        us.push(u);
        vs.push(v);
        (us, vs)
    });
    let mut prev = 0.0f64;
    for i in 0..n {
        let (q0, qm, q1) = (q[2 * i] - mu, q[2 * i + 1] - mu, q[2 * i + 2] - mu);
        let k1u = v;
        let k1v = q0 * u;
        let k2u = v + 0.5 * h * k1v;
        let k2v = qm * (u + 0.5 * h * k1u);
        let k3u = v + 0.5 * h * k2v;
        let k3v = qm * (u + 0.5 * h * k2u);
        let k4u = v + h * k3v;
        let k4v = q1 * (u + h * k3u);
        u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
        v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        if i > 0 && u != 0.0 && prev != 0.0 && (u > 0.0) != (prev > 0.0) {
            zeros += 1;
        }
        if u != 0.0 {
            prev = u;
        }
        if let Some((us, vs)) = trace.as_mut() {
            us.push(u);
            vs.push(v);
        }
    }
    Shot {
        u_end: u,
        du_end: v,
        zeros,
        trace,
    }
}

/// Per-mode record of the normalized-at-origin solution `v_k = u_k / u_k′(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VkRecord {
    pub sup: f64,
    pub deriv_sup: f64,
    pub l2: f64,
}

/// Eigenvalues (decreasing) and `L²[0,1]`-normalized eigenfunctions of `R Rᵀ`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenSystem {
    pub lambdas: Vec<f64>,
    pub psi: Vec<FunctionGrid>,
    pub psi_deriv: Vec<FunctionGrid>,
    pub sup_norms: Vec<f64>,
    pub deriv_sup_norms: Vec<f64>,
    /// Empty for systems produced by the SVD route.
    pub vk_diag: Vec<VkRecord>,
    pub total_length: f64,
    pub potential_sup: f64,
}

impl EigenSystem {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn grid_intervals(&self) -> usize {
        self.psi.first().map(|g| g.intervals()).unwrap_or(0)
    }

    /// `φ_k = Rᵀ ψ_k / √λ_k`, the matching right singular function.
    pub fn phi(&self, spec: &CoefficientPair, k: usize) -> Result<FunctionGrid> {
        let g = crate::operators::apply_rt(spec, &self.psi[k - 1])?;
        Ok(g.scaled(1.0 / self.lambdas[k - 1].sqrt()))
    }

    /// Keeps the first `k` eigenpairs.
    pub fn truncated(&self, k: usize) -> EigenSystem {
        let k = k.min(self.len());
        EigenSystem {
            lambdas: self.lambdas[..k].to_vec(),
            psi: self.psi[..k].to_vec(),
            psi_deriv: self.psi_deriv[..k.min(self.psi_deriv.len())].to_vec(),
            sup_norms: self.sup_norms[..k].to_vec(),
            deriv_sup_norms: self.deriv_sup_norms[..k.min(self.deriv_sup_norms.len())].to_vec(),
            vk_diag: self.vk_diag[..k.min(self.vk_diag.len())].to_vec(),
            total_length: self.total_length,
            potential_sup: self.potential_sup,
        }
    }
}

impl SpectralBasis for EigenSystem {
    fn len(&self) -> usize {
        self.lambdas.len()
    }

    fn lambda(&self, k: usize) -> f64 {
        self.lambdas[k - 1]
    }

    fn psi(&self, k: usize, x: f64) -> f64 {
        self.psi[k - 1].interp(x)
    }

    fn psi_sup(&self, k: usize) -> f64 {
        self.sup_norms[k - 1]
    }
}

fn scan_grid(total_length: f64, rho_max: f64) -> Vec<f64> {
    let knee = 0.5 * PI / total_length;
    let mut rho = vec![0.0];
    let mut r = 1e-3 * knee;
    while r < knee {
        rho.push(r);
        r *= 2.0;
    }
    let step = PI / (8.0 * total_length);
    let mut r = knee;
    while r <= rho_max + step {
        rho.push(r);
        r += step;
    }
    rho
}

fn bisect(form: &LiouvilleForm, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        if hi - lo <= BISECTION_REL_TOL * hi.abs().max(1e-300) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if shoot(form, mid, false).phase() < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Hermite cubic through `(u0, du0)` and `(u1, du1)` on a step `h`; returns
/// value and derivative at fraction `s ∈ [0, 1]`.
fn hermite(u0: f64, du0: f64, u1: f64, du1: f64, h: f64, s: f64) -> (f64, f64) {
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    let val = h00 * u0 + h10 * h * du0 + h01 * u1 + h11 * h * du1;
    let d00 = 6.0 * s2 - 6.0 * s;
    let d10 = 3.0 * s2 - 4.0 * s + 1.0;
    let d01 = -6.0 * s2 + 6.0 * s;
    let d11 = 3.0 * s2 - 2.0 * s;
    let der = (d00 * u0 + d01 * u1) / h + d10 * du0 + d11 * du1;
    (val, der)
}

struct Mode {
    lambda: f64,
    psi: FunctionGrid,
    dpsi: FunctionGrid,
    vk: VkRecord,
}

fn build_mode(form: &LiouvilleForm, spec: &CoefficientPair, mu: f64, k: usize) -> Result<Mode> {
    let shot = shoot(form, mu, true);
    if shot.zeros != k - 1 {
        return Err(Error::Consistency(format!(
            "eigenfunction {k} has {} interior zeros, expected {}",
            shot.zeros,
            k - 1
        )));
    }
    let (us, vs) = shot.trace.expect("recorded");
    let n = form.steps();
    let ht = form.total_length / n as f64;
    let hx = 1.0 / n as f64;
    let tx = form.t_of_x.values();
    let mut psi = Vec::with_capacity(n + 1);
    let mut dpsi = Vec::with_capacity(n + 1);
    for (i, &t) in tx.iter().enumerate() {
        let pos = (t / ht).clamp(0.0, n as f64);
        let j = (pos.floor() as usize).min(n - 1);
        let (uu, du) = hermite(us[j], vs[j], us[j + 1], vs[j + 1], ht, pos - j as f64);
        let x = i as f64 * hx;
        let a = spec.a().eval(x);
        let a1 = spec.a_prime().eval(x);
        psi.push(uu / a.sqrt());
        dpsi.push((du - 0.5 * a1 * uu) / (a * a.sqrt()));
    }
    psi[0] = 0.0;
    let norm = trapezoid(&psi.iter().map(|v| v * v).collect::<Vec<_>>(), hx).sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::Consistency(format!("eigenfunction {k} has zero norm")));
    }
    psi.iter_mut().for_each(|v| *v /= norm);
    dpsi.iter_mut().for_each(|v| *v /= norm);
    let vk = VkRecord {
        sup: us.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        deriv_sup: vs.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        l2: trapezoid(&us.iter().map(|v| v * v).collect::<Vec<_>>(), ht).sqrt(),
    };
    Ok(Mode {
        lambda: 1.0 / mu,
        psi: FunctionGrid::from_parts_unchecked(psi, 1.0),
        dpsi: FunctionGrid::from_parts_unchecked(dpsi, 1.0),
        vk,
    })
}

/// Computes the leading `count` eigenpairs by phase-verified shooting.
pub fn solve_eigs(form: &LiouvilleForm, spec: &CoefficientPair, count: usize) -> Result<EigenSystem> {
    if count == 0 {
        return Err(Error::param("eigensolver", "need at least one eigenpair"));
    }
    let n = form.steps();
    if n < 1024 {
        return Err(Error::param("eigensolver", format!("grid size {n} below 1024")));
    }
    let t_len = form.total_length;
    let q_sup = form.potential_sup();
    let theta_b = form.boundary_phase();
    let targets: Vec<f64> = (0..count).map(|j| theta_b + j as f64 * PI).collect();

    // √μ_K ≈ Kπ/T + O(‖Q‖); leave generous room before declaring exhaustion.
    let mut rho_max = (count as f64 + 1.0) * PI / t_len + q_sup.sqrt() + 1.0;
    let ht = t_len / n as f64;
    let (rho, phases) = loop {
        let rho = scan_grid(t_len, rho_max);
        let phases: Vec<f64> = rho.par_iter().map(|&r| shoot(form, r * r, false).phase()).collect();
        if phases.windows(2).any(|w| w[1] < w[0] - 1e-9) {
            return Err(Error::Consistency(
                "shooting phase is not monotone in the spectral parameter".into(),
            ));
        }
        if *phases.last().unwrap() >= targets[count - 1] {
            break (rho, phases);
        }
        if rho_max > 64.0 * (count as f64 + 1.0) * PI / t_len + q_sup.sqrt() + 1.0 {
            let found = targets.iter().filter(|&&t| t <= *phases.last().unwrap()).count();
            return Err(Error::BracketExhausted {
                index: found + 1,
                detail: format!("scan reached √μ = {rho_max:.3e} without crossing"),
            });
        }
        rho_max *= 2.0;
    };
    let mu_top = rho.last().unwrap().powi(2);
    if (mu_top + q_sup).sqrt() * ht > 0.25 * PI {
        return Err(Error::capacity(
            "eigensolver",
            format!("grid with {n} steps too coarse to resolve {count} modes"),
        ));
    }
    if phases[0] >= targets[0] {
        return Err(Error::BracketExhausted {
            index: 1,
            detail: "first eigenvalue lies below the scan start".into(),
        });
    }

    let modes: Vec<Mode> = targets
        .par_iter()
        .enumerate()
        .map(|(j, &target)| {
            let idx = phases
                .iter()
                .position(|&p| p >= target)
                .ok_or_else(|| Error::BracketExhausted {
                    index: j + 1,
                    detail: "no scan point beyond target phase".into(),
                })?;
            let lo = rho[idx - 1].powi(2);
            let hi = rho[idx].powi(2);
            let mu = bisect(form, target, lo, hi);
            build_mode(form, spec, mu, j + 1)
        })
        .collect::<Result<_>>()?;

    if modes.windows(2).any(|w| w[1].lambda >= w[0].lambda) {
        return Err(Error::Consistency("eigenvalues not strictly decreasing".into()));
    }
    let mut sys = EigenSystem {
        lambdas: Vec::with_capacity(count),
        psi: Vec::with_capacity(count),
        psi_deriv: Vec::with_capacity(count),
        sup_norms: Vec::with_capacity(count),
        deriv_sup_norms: Vec::with_capacity(count),
        vk_diag: Vec::with_capacity(count),
        total_length: t_len,
        potential_sup: q_sup,
    };
    for m in modes {
        sys.sup_norms.push(m.psi.sup_norm());
        sys.deriv_sup_norms.push(m.dpsi.sup_norm());
        sys.lambdas.push(m.lambda);
        sys.psi.push(m.psi);
        sys.psi_deriv.push(m.dpsi);
        sys.vk_diag.push(m.vk);
    }
    Ok(sys)
}

/// Convenience wrapper: transform then solve on an `n`-interval grid.
pub fn eigensystem(spec: &CoefficientPair, count: usize, n: usize) -> Result<EigenSystem> {
    let form = liouville_transform(spec, n)?;
    solve_eigs(&form, spec, count)
}

/// Independent route: weighted SVD of the dense discretization of `R`.
pub fn svd_oracle(spec: &CoefficientPair, n: usize, count: usize) -> Result<EigenSystem> {
    let m = discretize_r(spec, n)?;
    let h = 1.0 / n as f64;
    let w = trapezoid_weights(n, h);
    let sw: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
    let weighted = DMatrix::from_fn(n + 1, n + 1, |i, j| sw[i] * m[(i, j)] / sw[j]);
    let svd = weighted.svd(true, false);
    let u = svd.u.ok_or_else(|| Error::Consistency("SVD returned no left vectors".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    if count > order.len() {
        return Err(Error::capacity("eigensolver", "more modes than grid points"));
    }
    let mut sys = EigenSystem {
        lambdas: Vec::new(),
        psi: Vec::new(),
        psi_deriv: Vec::new(),
        sup_norms: Vec::new(),
        deriv_sup_norms: Vec::new(),
        vk_diag: Vec::new(),
        total_length: f64::NAN,
        potential_sup: f64::NAN,
    };
    for &idx in order.iter().take(count) {
        let s = svd.singular_values[idx];
        let mut psi: Vec<f64> = (0..=n).map(|i| u[(i, idx)] / sw[i]).collect();
        let norm = trapezoid(&psi.iter().map(|v| v * v).collect::<Vec<_>>(), h).sqrt();
        let sign = if psi[1] >= 0.0 { 1.0 } else { -1.0 };
        psi.iter_mut().for_each(|v| *v *= sign / norm);
        let dpsi = finite_difference(&psi, h);
        let grid = FunctionGrid::from_parts_unchecked(psi, 1.0);
        let dgrid = FunctionGrid::from_parts_unchecked(dpsi, 1.0);
        sys.lambdas.push(s * s);
        sys.sup_norms.push(grid.sup_norm());
        sys.deriv_sup_norms.push(dgrid.sup_norm());
        sys.psi.push(grid);
        sys.psi_deriv.push(dgrid);
    }
    Ok(sys)
}

fn finite_difference(v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len() - 1;
    (0..=n)
        .map(|i| match i {
            0 => (v[1] - v[0]) / h,
            i if i == n => (v[n] - v[n - 1]) / h,
            i => (v[i + 1] - v[i - 1]) / (2.0 * h),
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct CacheMeta {
    total_length: f64,
    potential_sup: f64,
    intervals: usize,
    count: usize,
}

#[derive(Serialize, Deserialize)]
struct LambdaRow {
    k: usize,
    lambda: f64,
    psi_sup: f64,
    dpsi_sup: f64,
    v_sup: Option<f64>,
    v_deriv_sup: Option<f64>,
    v_l2: Option<f64>,
}

/// Content hash of `(a, b, N, K)` naming a cache entry.
pub fn cache_key(spec: &CoefficientPair, n: usize, count: usize) -> String {
    use sha2::{Digest, Sha256};
    let payload = serde_json::json!({
        "a": spec.a().coeffs(),
        "b": spec.b().coeffs(),
        "N": n,
        "K": count,
        "v": 1,
    });
    let digest = Sha256::digest(payload.to_string().as_bytes());
    digest.iter().take(12).map(|b| format!("{b:02x}")).collect()
}

impl EigenSystem {
    /// Writes `lambdas.csv`, `psi.csv` and `meta.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join("lambdas.csv"))?;
        for k in 0..self.len() {
            let vk = self.vk_diag.get(k);
            w.serialize(LambdaRow {
                k: k + 1,
                lambda: self.lambdas[k],
                psi_sup: self.sup_norms[k],
                dpsi_sup: self.deriv_sup_norms.get(k).copied().unwrap_or(f64::NAN),
                v_sup: vk.map(|v| v.sup),
                v_deriv_sup: vk.map(|v| v.deriv_sup),
                v_l2: vk.map(|v| v.l2),
            })?;
        }
        w.flush()?;
        let n = self.grid_intervals();
        let mut w = csv::Writer::from_path(dir.join("psi.csv"))?;
        let mut header = vec!["x".to_string()];
        header.extend((1..=self.len()).map(|k| format!("psi_{k}")));
        w.write_record(&header)?;
        for i in 0..=n {
            let mut rec = vec![(i as f64 / n as f64).to_string()];
            rec.extend(self.psi.iter().map(|g| g.values()[i].to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        let meta = CacheMeta {
            total_length: self.total_length,
            potential_sup: self.potential_sup,
            intervals: n,
            count: self.len(),
        };
        std::fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;
        Ok(())
    }

    /// Reads a system written by [`EigenSystem::save`]. Derivative grids are
    /// not stored; their sup norms are.
    pub fn load(dir: &Path) -> Result<Self> {
        let meta: CacheMeta = serde_json::from_str(&std::fs::read_to_string(dir.join("meta.json"))?)?;
        let mut r = csv::Reader::from_path(dir.join("lambdas.csv"))?;
        let rows: Vec<LambdaRow> = r.deserialize().collect::<std::result::Result<_, _>>()?;
        if rows.len() != meta.count {
            return Err(Error::Consistency("cached eigenvalue count mismatch".into()));
        }
        let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(meta.intervals + 1); meta.count];
        let mut r = csv::Reader::from_path(dir.join("psi.csv"))?;
        for rec in r.records() {
            let rec = rec?;
            for (k, col) in cols.iter_mut().enumerate() {
                let v: f64 = rec[k + 1]
                    .parse()
                    .map_err(|_| Error::Consistency(format!("bad value in cached psi_{}", k + 1)))?;
                col.push(v);
            }
        }
        if cols.iter().any(|c| c.len() != meta.intervals + 1) {
            return Err(Error::Consistency("cached eigenfunction grid truncated".into()));
        }
        let vk_diag = if rows.iter().all(|r| r.v_sup.is_some()) {
            rows.iter()
                .map(|r| VkRecord {
                    sup: r.v_sup.unwrap_or(f64::NAN),
                    deriv_sup: r.v_deriv_sup.unwrap_or(f64::NAN),
                    l2: r.v_l2.unwrap_or(f64::NAN),
                })
                .collect()
        } else {
            Vec::new()
        };
        Ok(EigenSystem {
            lambdas: rows.iter().map(|r| r.lambda).collect(),
            psi: cols.into_iter().map(|c| FunctionGrid::from_parts_unchecked(c, 1.0)).collect(),
            psi_deriv: Vec::new(),
            sup_norms: rows.iter().map(|r| r.psi_sup).collect(),
            deriv_sup_norms: rows.iter().map(|r| r.dpsi_sup).collect(),
            vk_diag,
            total_length: meta.total_length,
            potential_sup: meta.potential_sup,
        })
    }
}

/// Solves, or loads from `cache_dir/<key>` when present. Returns the system
/// and whether it came from the cache.
pub fn cached_eigensystem(
    spec: &CoefficientPair,
    count: usize,
    n: usize,
    cache_dir: Option<&Path>,
) -> Result<(EigenSystem, bool)> {
    let Some(root) = cache_dir else {
        return Ok((eigensystem(spec, count, n)?, false));
    };
    let dir = root.join(cache_key(spec, n, count));
    if dir.join("meta.json").exists() {
        return Ok((EigenSystem::load(&dir)?, true));
    }
    let eig = eigensystem(spec, count, n)?;
    eig.save(&dir)?;
    Ok((eig, false))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeDiagnostics {
    pub k: usize,
    pub lambda: f64,
    pub psi_sup: f64,
    pub dpsi_sup_over_k: f64,
    pub v_sup: f64,
    pub v_deriv_sup: f64,
    pub v_l2: f64,
    /// `ρ_k = λ_k^{-1/2} > 2 T ‖Q‖∞`: the regime where the `v_k` bounds apply.
    pub above_threshold: bool,
    pub v_sup_ok: bool,
    pub v_deriv_ok: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenDiagnostics {
    pub modes: Vec<ModeDiagnostics>,
    /// First index from which every mode is above the threshold.
    pub k_star: Option<usize>,
    /// Empirical `min_k ‖v_k‖_{L²}/√λ_k` over modes above the threshold.
    pub c_estimate: Option<f64>,
    pub violations: Vec<String>,
}

impl EigenDiagnostics {
    /// Log–log slope of `‖ψ_k‖∞` against `k` over `k ∈ [lo, hi]`.
    pub fn psi_sup_slope(&self, lo: usize, hi: usize) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .modes
            .iter()
            .filter(|m| m.k >= lo && m.k <= hi)
            .map(|m| ((m.k as f64).ln(), m.psi_sup.ln()))
            .collect();
        crate::stats::ols_slope(&pts)
    }
}

pub fn eig_diagnostics(eig: &EigenSystem) -> EigenDiagnostics {
    let threshold = 2.0 * eig.total_length * eig.potential_sup;
    let mut modes = Vec::with_capacity(eig.len());
    let mut violations = Vec::new();
    for k in 1..=eig.len() {
        let lambda = eig.lambdas[k - 1];
        let rho = lambda.powf(-0.5);
        let above = rho > threshold;
        let vk = eig.vk_diag.get(k - 1).copied();
        let (v_sup, v_deriv_sup, v_l2) = vk
            .map(|v| (v.sup, v.deriv_sup, v.l2))
            .unwrap_or((f64::NAN, f64::NAN, f64::NAN));
        let v_sup_ok = !(above && vk.is_some()) || v_sup <= 2.0 * lambda.sqrt();
        let v_deriv_ok = !(above && vk.is_some()) || v_deriv_sup <= 2.0;
        if !v_sup_ok {
            violations.push(format!("k={k}: ‖v_k‖∞ = {v_sup:.3e} > 2√λ_k"));
        }
        if !v_deriv_ok {
            violations.push(format!("k={k}: ‖v_k′‖∞ = {v_deriv_sup:.3e} > 2"));
        }
        modes.push(ModeDiagnostics {
            k,
            lambda,
            psi_sup: eig.sup_norms[k - 1],
            dpsi_sup_over_k: eig.deriv_sup_norms.get(k - 1).copied().unwrap_or(f64::NAN) / k as f64,
            v_sup,
            v_deriv_sup,
            v_l2,
            above_threshold: above,
            v_sup_ok,
            v_deriv_ok,
        });
    }
    let k_star = (1..=modes.len()).find(|&k| modes[k - 1..].iter().all(|m| m.above_threshold));
    let c_estimate = modes
        .iter()
        .filter(|m| m.above_threshold && m.v_l2.is_finite())
        .map(|m| m.v_l2 / m.lambda.sqrt())
        .reduce(f64::min);
    EigenDiagnostics {
        modes,
        k_star,
        c_estimate,
        violations,
    }
}
