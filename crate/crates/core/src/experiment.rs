//! Config-driven pipeline: eigen solve, simulation, fit, certification,
//! validation and regime sweeps, each writing CSV/JSON artifacts.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certification::{
    compare_choices_with, gamma0_star, gram, omega_diagnostics, ortho_constant, radius_grid,
    scaled_matrix, certify_with, CertOptions, Certificate, Comparison, WeightChoice,
};
use crate::concentration::{empirical_outside_mass_grid, TailReport};
use crate::eigensolver::{cached_eigensystem, eig_diagnostics, EigenDiagnostics, EigenSystem};
use crate::error::{Error, Result};
use crate::model::{generate, Dataset, ExpFamily, TruthSpec};
use crate::operators::CoefficientPair;
use crate::posterior::{map_solve, LaplaceFit, Problem, SharedBasis};
use crate::stats::ols_slope;
use crate::validation::{tv_importance, tv_quadrature, TVEstimate};

/// Empirical TV values at or below this are treated as zero.
pub const TV_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigenConfig {
    /// Number of eigenpairs.
    #[serde(default = "EigenConfig::default_k")]
    pub k: usize,
    /// Grid intervals on `[0, 1]`; raised to at least `n` when needed.
    #[serde(default = "EigenConfig::default_grid")]
    pub grid: usize,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
}

impl EigenConfig {
    fn default_k() -> usize {
        50
    }
    fn default_grid() -> usize {
        4096
    }
}

impl Default for EigenConfig {
    fn default() -> Self {
        Self { k: Self::default_k(), grid: Self::default_grid(), cache_dir: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gamma0Spec {
    AutoStar,
    List(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertConfig {
    #[serde(default = "CertConfig::default_gamma0")]
    pub gamma0: Gamma0Spec,
    #[serde(default = "CertConfig::default_r_points")]
    pub r_points: usize,
    #[serde(default = "CertConfig::default_r_max_factor")]
    pub r_max_factor: f64,
    #[serde(default = "CertConfig::default_refine")]
    pub refine: usize,
    #[serde(default = "CertConfig::default_lambda_exp")]
    pub lambda_exp: f64,
    #[serde(default = "CertConfig::default_omega_samples")]
    pub omega_samples: usize,
}

impl CertConfig {
    fn default_gamma0() -> Gamma0Spec {
        Gamma0Spec::AutoStar
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
    fn default_lambda_exp() -> f64 {
        3.5
    }
    fn default_omega_samples() -> usize {
        1000
    }
}

impl Default for CertConfig {
    fn default() -> Self {
        Self {
            gamma0: Self::default_gamma0(),
            r_points: Self::default_r_points(),
            r_max_factor: Self::default_r_max_factor(),
            refine: Self::default_refine(),
            lambda_exp: Self::default_lambda_exp(),
            omega_samples: Self::default_omega_samples(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TvMethodSpec {
    Importance,
    Quadrature,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationConfig {
    #[serde(default = "ValidationConfig::default_method")]
    pub method: TvMethodSpec,
    #[serde(default = "ValidationConfig::default_samples")]
    pub samples: usize,
    #[serde(default = "ValidationConfig::default_per_axis")]
    pub per_axis: usize,
    #[serde(default = "ValidationConfig::default_tail_radii")]
    pub tail_radii: usize,
}

impl ValidationConfig {
    fn default_method() -> TvMethodSpec {
        TvMethodSpec::Importance
    }
    fn default_samples() -> usize {
        20_000
    }
    fn default_per_axis() -> usize {
        128
    }
    fn default_tail_radii() -> usize {
        12
    }
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            method: Self::default_method(),
            samples: Self::default_samples(),
            per_axis: Self::default_per_axis(),
            tail_radii: Self::default_tail_radii(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    P,
    N,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "SweepConfig::default_axis")]
    pub axis: SweepAxis,
    #[serde(default = "SweepConfig::default_values")]
    pub values: Vec<usize>,
}

impl SweepConfig {
    fn default_axis() -> SweepAxis {
        SweepAxis::P
    }
    fn default_values() -> Vec<usize> {
        vec![1, 2, 3, 4, 5, 6, 8, 12, 16, 24, 32, 48, 64]
    }
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { axis: Self::default_axis(), values: Self::default_values() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "CoefficientPair::volterra")]
    pub operator: CoefficientPair,
    #[serde(default = "ExperimentConfig::default_family")]
    pub family: ExpFamily,
    #[serde(default = "ExperimentConfig::default_n")]
    pub n: usize,
    #[serde(default = "ExperimentConfig::default_p")]
    pub p: usize,
    #[serde(default = "ExperimentConfig::default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub beta_override: Option<f64>,
    #[serde(default)]
    pub truth: TruthSpec,
    #[serde(default)]
    pub eigensolver: EigenConfig,
    #[serde(default)]
    pub certification: CertConfig,
    #[serde(default)]
    pub validation: ValidationConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default = "ExperimentConfig::default_seed")]
    pub seed: u64,
    #[serde(default = "ExperimentConfig::default_output")]
    pub output: PathBuf,
}

impl ExperimentConfig {
    fn default_family() -> ExpFamily {
        ExpFamily::Poisson
    }
    fn default_n() -> usize {
        1000
    }
    fn default_p() -> usize {
        4
    }
    fn default_gamma() -> f64 {
        2.0
    }
    fn default_seed() -> u64 {
        1
    }
    fn default_output() -> PathBuf {
        PathBuf::from("out")
    }

    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
            path: format!("{origin}: {}", e.path()),
            detail: e.inner().to_string(),
        })?;
        cfg.validate(origin)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        Self::from_json(&text, &path.display().to_string())
    }

    fn validate(&self, origin: &str) -> Result<()> {
        let bad = |field: &str, detail: String| Error::Config { path: format!("{origin}: {field}"), detail };
        if self.n == 0 {
            return Err(bad("n", "must be positive".into()));
        }
        if self.p == 0 {
            return Err(bad("p", "must be positive".into()));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(bad("gamma", format!("{} is not a valid exponent", self.gamma)));
        }
        if self.eigensolver.k < self.p.max(self.truth_dim()) {
            return Err(bad(
                "eigensolver.k",
                format!("{} eigenpairs cannot cover p = {} and truth dimension {}", self.eigensolver.k, self.p, self.truth_dim()),
            ));
        }
        if self.eigensolver.grid < 1024 {
            return Err(bad("eigensolver.grid", "must be at least 1024".into()));
        }
        if let Gamma0Spec::List(l) = &self.certification.gamma0 {
            if let Some(g) = l.iter().find(|&&g| g > self.gamma) {
                return Err(bad("certification.gamma0", format!("{g} exceeds gamma")));
            }
        }
        Ok(())
    }

    pub fn truth_dim(&self) -> usize {
        self.truth.theta_star().len()
    }

    pub fn beta(&self) -> f64 {
        self.beta_override.unwrap_or(1.0)
    }

    pub fn cert_options(&self) -> CertOptions {
        CertOptions {
            beta: self.beta(),
            r_points: self.certification.r_points,
            r_max_factor: self.certification.r_max_factor,
            refine: self.certification.refine,
        }
    }

    /// Grid size for an experiment with `n` observations.
    pub fn eigen_grid(&self, n: usize) -> usize {
        self.eigensolver.grid.max(n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Eigen,
    Simulate,
    Fit,
    Certify,
    Validate,
    Sweep,
    All,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Eigen => "eigen",
            Command::Simulate => "simulate",
            Command::Fit => "fit",
            Command::Certify => "certify",
            Command::Validate => "validate",
            Command::Sweep => "sweep",
            Command::All => "all",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageTime {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub git_hash: String,
    pub config: ExperimentConfig,
    pub stages: Vec<StageTime>,
    pub invariant_failures: Vec<String>,
    pub notes: Vec<String>,
}

/// Outcome of a run; `failures` lists violated invariants.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub failures: Vec<String>,
    pub notes: Vec<String>,
}

impl RunReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

fn git_hash() -> String {
    std::process::Command::new("git")
        .args(["rev-parse", "HEAD"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
        .unwrap_or_else(|| "unknown".into())
}

struct Timer {
    stages: Vec<StageTime>,
}

impl Timer {
    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let out = f();
        self.stages.push(StageTime { stage: stage.into(), seconds: t.elapsed().as_secs_f64() });
        out
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

/// Everything produced up to and including the fit.
pub struct Fitted {
    pub eig: Arc<EigenSystem>,
    pub data: Dataset,
    pub prob: Problem,
    pub fit: LaplaceFit,
}

pub fn solve_eigen(cfg: &ExperimentConfig, n: usize, count: usize, out: &Path) -> Result<(Arc<EigenSystem>, bool)> {
    let cache = cfg.eigensolver.cache_dir.clone().unwrap_or_else(|| out.join("cache"));
    let (eig, hit) = cached_eigensystem(&cfg.operator, count, cfg.eigen_grid(n), Some(&cache))?;
    Ok((Arc::new(eig), hit))
}

pub fn fit_instance(eig: Arc<EigenSystem>, cfg: &ExperimentConfig, n: usize, p: usize, seed: u64) -> Result<Fitted> {
    let data = generate(eig.as_ref(), cfg.family, &cfg.truth, n, seed)?;
    let basis: SharedBasis = eig.clone();
    let prob = Problem::new(basis, &data, cfg.gamma, p)?;
    let fit = map_solve(&prob, None)?;
    Ok(Fitted { eig, data, prob, fit })
}

#[derive(Debug, Clone, Serialize)]
struct EigenRow {
    k: usize,
    lambda: f64,
    k2_lambda: f64,
    psi_sup: f64,
    dpsi_sup_over_k: f64,
    v_sup: f64,
    v_deriv_sup: f64,
    v_l2: f64,
    above_threshold: bool,
    v_sup_ok: bool,
    v_deriv_ok: bool,
}

fn write_eigen(out: &Path, diag: &EigenDiagnostics) -> Result<()> {
    let mut w = csv::Writer::from_path(out.join("eigen.csv"))?;
    for m in &diag.modes {
        w.serialize(EigenRow {
            k: m.k,
            lambda: m.lambda,
            k2_lambda: (m.k * m.k) as f64 * m.lambda,
            psi_sup: m.psi_sup,
            dpsi_sup_over_k: m.dpsi_sup_over_k,
            v_sup: m.v_sup,
            v_deriv_sup: m.v_deriv_sup,
            v_l2: m.v_l2,
            above_threshold: m.above_threshold,
            v_sup_ok: m.v_sup_ok,
            v_deriv_ok: m.v_deriv_ok,
        })?;
    }
    w.flush()?;
    write_json(&out.join("eigen_diagnostics.json"), diag)
}

/// One CSV row per certificate.
#[derive(Debug, Clone, Serialize)]
pub struct CertRow {
    pub n: usize,
    pub p: usize,
    pub seed: u64,
    pub choice: String,
    pub gamma0: Option<f64>,
    pub alpha: f64,
    pub effdim: f64,
    pub tau3: f64,
    pub radius: f64,
    pub local_term: f64,
    pub tail_term: f64,
    pub tv_bound: f64,
    pub r_tau: f64,
    pub feasible: bool,
    pub certified: bool,
    pub a_sup: f64,
    pub b_norm: f64,
    pub k_loc: f64,
    pub d3: f64,
    pub grid_gap: f64,
    pub s_dim: Option<f64>,
    pub s_tau: Option<f64>,
}

impl CertRow {
    pub fn new(n: usize, p: usize, seed: u64, c: &Certificate) -> Self {
        Self {
            n,
            p,
            seed,
            choice: c.label.clone(),
            gamma0: match c.choice {
                WeightChoice::Gamma0 { gamma0 } => Some(gamma0),
                _ => None,
            },
            alpha: c.alpha,
            effdim: c.effdim,
            tau3: c.tau3_sup,
            radius: c.radius,
            local_term: c.local_term,
            tail_term: c.tail_term,
            tv_bound: c.tv_bound,
            r_tau: c.r_tau,
            feasible: c.feasible,
            certified: c.certified,
            a_sup: c.parts.a_sup,
            b_norm: c.parts.b_norm,
            k_loc: c.k_loc,
            d3: c.d3,
            grid_gap: c.parts.grid_gap(),
            s_dim: c.diagnostics.as_ref().map(|d| d.s_dim),
            s_tau: c.diagnostics.as_ref().map(|d| d.s_tau),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct TvRow {
    method: String,
    value: f64,
    ci_low: f64,
    ci_high: f64,
    ess: Option<f64>,
    grid_spec: Option<String>,
    warning: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
struct DominanceRow {
    choice: String,
    tv_bound: f64,
    feasible: bool,
    certified: bool,
    tv_ci_high: f64,
    checked: bool,
    dominates: bool,
}

#[derive(Debug, Clone, Serialize)]
struct TailRow {
    radius: f64,
    effdim: f64,
    gaussian_bound: f64,
    gaussian_fraction: f64,
    gaussian_ci_low: f64,
    gaussian_ci_high: f64,
    gaussian_ok: bool,
    posterior_bound: f64,
    posterior_applicable: bool,
    posterior_fraction: f64,
    posterior_ci_low: f64,
    posterior_ci_high: f64,
    posterior_ok: bool,
    ess: f64,
}

impl From<&TailReport> for TailRow {
    fn from(t: &TailReport) -> Self {
        Self {
            radius: t.radius,
            effdim: t.effdim,
            gaussian_bound: t.gaussian_bound,
            gaussian_fraction: t.gaussian_fraction,
            gaussian_ci_low: t.gaussian_ci.0,
            gaussian_ci_high: t.gaussian_ci.1,
            gaussian_ok: t.gaussian_ok(),
            posterior_bound: t.posterior_bound,
            posterior_applicable: t.posterior_applicable,
            posterior_fraction: t.posterior_fraction,
            posterior_ci_low: t.posterior_ci.0,
            posterior_ci_high: t.posterior_ci.1,
            posterior_ok: t.posterior_ok(),
            ess: t.ess,
        }
    }
}

fn tv_row(e: &TVEstimate) -> TvRow {
    TvRow {
        method: format!("{:?}", e.method).to_lowercase(),
        value: e.value,
        ci_low: e.ci_low,
        ci_high: e.ci_high,
        ess: e.ess,
        grid_spec: e.grid_spec.clone(),
        warning: e.warning.clone(),
    }
}

/// Certificates for `D_G`, `I/α(I)`, and each configured `γ₀`.
pub fn certificates(cfg: &ExperimentConfig, f: &Fitted) -> Result<(Comparison, Vec<Certificate>)> {
    let opts = cfg.cert_options();
    let cmp = compare_choices_with(&f.fit, &f.prob, &opts)?;
    let extra = match &cfg.certification.gamma0 {
        Gamma0Spec::AutoStar => Vec::new(),
        Gamma0Spec::List(l) => {
            let g = gram(&f.prob);
            l.par_iter()
                .map(|&gamma0| certify_with(&f.fit, &f.prob, WeightChoice::Gamma0 { gamma0 }, &opts, &g))
                .collect::<Result<Vec<_>>>()?
        }
    };
    Ok((cmp, extra))
}

pub fn tv_estimates(cfg: &ExperimentConfig, f: &Fitted) -> Result<Vec<TVEstimate>> {
    let v = &cfg.validation;
    let mut out = Vec::new();
    let quad_ok = f.fit.p() <= 3;
    if matches!(v.method, TvMethodSpec::Quadrature | TvMethodSpec::Both) {
        if !quad_ok {
            return Err(Error::capacity("validation", format!("quadrature TV needs p ≤ 3, got {}", f.fit.p())));
        }
        out.push(tv_quadrature(&f.fit, &f.prob, v.per_axis)?);
    }
    if matches!(v.method, TvMethodSpec::Importance | TvMethodSpec::Both) {
        out.push(tv_importance(&f.fit, &f.prob, v.samples, cfg.seed)?);
    }
    Ok(out)
}

/// Largest upper confidence limit among the estimates.
pub fn tv_upper(estimates: &[TVEstimate]) -> f64 {
    estimates.iter().map(|e| e.ci_high).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub p: usize,
    pub m: f64,
    pub m0star: f64,
    pub regime: String,
    pub choice: String,
    pub effdim: f64,
    pub tau3: f64,
    pub radius: f64,
    pub local_term: f64,
    pub local_sq: f64,
    pub tv_bound: f64,
    pub feasible: bool,
    pub ratio_dg: f64,
    pub ratio_identity: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSummary {
    pub n: usize,
    pub m: f64,
    pub m0star: f64,
    /// Slope of `log (dim_A τ₃)²` on `log p` for `D(γ₀*)`, `p < m`.
    pub slope_small_p: Option<f64>,
    /// Slope of `log tv_bound` on `log p` for `D(γ₀*)`, `p > m₀*`.
    pub slope_large_p: Option<f64>,
    /// Largest relative change of `tv_bound(D(γ₀*))` between `p` and `2p`,
    /// both beyond `m₀*`.
    pub max_doubling_change: Option<f64>,
    pub points_small_p: usize,
    pub points_large_p: usize,
}

pub fn regime(p: usize, m: f64, m0: f64) -> &'static str {
    let pf = p as f64;
    if pf < m {
        "p<m"
    } else if pf <= m0 {
        "m<=p<=m0"
    } else {
        "p>m0"
    }
}

pub fn summarize_sweep(rows: &[SweepRow]) -> Option<SweepSummary> {
    let star: Vec<&SweepRow> = rows.iter().filter(|r| r.choice.starts_with("gamma0")).collect();
    let first = star.first()?;
    let (m, m0) = (first.m, first.m0star);
    let small: Vec<(f64, f64)> = star
        .iter()
        .filter(|r| (r.p as f64) < m)
        .map(|r| ((r.p as f64).ln(), r.local_sq.ln()))
        .collect();
    let large: Vec<(f64, f64)> = star
        .iter()
        .filter(|r| (r.p as f64) > m0)
        .map(|r| ((r.p as f64).ln(), r.tv_bound.ln()))
        .collect();
    let mut doubling: Option<f64> = None;
    for a in star.iter().filter(|r| (r.p as f64) > m0) {
        if let Some(b) = star.iter().find(|r| r.p == 2 * a.p) {
            let c = (b.tv_bound - a.tv_bound).abs() / a.tv_bound;
            doubling = Some(doubling.map_or(c, |d: f64| d.max(c)));
        }
    }
    Some(SweepSummary {
        n: first.n,
        m,
        m0star: m0,
        slope_small_p: ols_slope(&small),
        slope_large_p: ols_slope(&large),
        max_doubling_change: doubling,
        points_small_p: small.len(),
        points_large_p: large.len(),
    })
}

/// Regime study: for each sweep value refit and compare the three choices.
pub fn sweep_rows(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<SweepRow>> {
    let values = &cfg.sweep.values;
    if values.is_empty() {
        return Err(Error::Config { path: "sweep.values".into(), detail: "empty".into() });
    }
    let (max_n, max_p) = match cfg.sweep.axis {
        SweepAxis::P => (cfg.n, *values.iter().max().unwrap()),
        SweepAxis::N => (*values.iter().max().unwrap(), cfg.p),
    };
    let count = cfg.eigensolver.k.max(max_p).max(cfg.truth_dim());
    let (eig, _) = solve_eigen(cfg, max_n, count, out)?;
    let opts = cfg.cert_options();
    let mut values = values.clone();
    values.sort_unstable();
    values.dedup();
    let per_point = values
        .par_iter()
        .map(|&v| {
            let (n, p) = match cfg.sweep.axis {
                SweepAxis::P => (cfg.n, v),
                SweepAxis::N => (v, cfg.p),
            };
            let f = fit_instance(eig.clone(), cfg, n, p, cfg.seed)?;
            let cmp = compare_choices_with(&f.fit, &f.prob, &opts)?;
            let g = cmp.gamma0star;
            Ok([&cmp.dg, &cmp.identity, &cmp.star]
                .into_iter()
                .map(|c| SweepRow {
                    n,
                    p,
                    m: g.m,
                    m0star: g.m0,
                    regime: regime(p, g.m, g.m0).into(),
                    choice: c.label.clone(),
                    effdim: c.effdim,
                    tau3: c.tau3_sup,
                    radius: c.radius,
                    local_term: c.local_term,
                    local_sq: c.local_term * c.local_term,
                    tv_bound: c.tv_bound,
                    feasible: c.feasible,
                    ratio_dg: cmp.ratio_dg,
                    ratio_identity: cmp.ratio_identity,
                })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<SweepRow> = per_point.into_iter().flatten().collect();
    Ok(rows)
}

/// Runs a subcommand and writes its artifacts and manifest under `out`.
pub fn run(command: Command, cfg: &ExperimentConfig, out: &Path) -> Result<RunReport> {
    std::fs::create_dir_all(out)?;
    let mut timer = Timer { stages: Vec::new() };
    let mut failures = Vec::new();
    let mut notes = Vec::new();
    let count = cfg.eigensolver.k.max(cfg.p).max(cfg.truth_dim());

    let (eig, hit) = timer.time("eigen", || solve_eigen(cfg, cfg.n, count, out))?;
    if hit {
        notes.push("eigensystem loaded from cache".into());
    }

    if matches!(command, Command::Eigen | Command::All) {
        let diag = eig_diagnostics(&eig);
        write_eigen(out, &diag)?;
        let ortho = ortho_constant(eig.as_ref(), cfg.n, cfg.p, cfg.certification.lambda_exp)?;
        notes.push(format!("orthogonality constant (λ = {}): {ortho:.6}", cfg.certification.lambda_exp));
        if !diag.violations.is_empty() {
            notes.extend(diag.violations.iter().cloned());
        }
    }

    if command == Command::Sweep {
        let rows = timer.time("sweep", || sweep_rows(cfg, out))?;
        let mut w = csv::Writer::from_path(out.join("sweep.csv"))?;
        for r in &rows {
            w.serialize(r)?;
        }
        w.flush()?;
        if let Some(s) = summarize_sweep(&rows) {
            write_json(&out.join("sweep_summary.json"), &s)?;
        }
    }

    let wants_fit = matches!(command, Command::Simulate | Command::Fit | Command::Certify | Command::Validate | Command::All);
    if wants_fit {
        let data = timer.time("simulate", || generate(eig.as_ref(), cfg.family, &cfg.truth, cfg.n, cfg.seed))?;
        data.save(out, "data")?;
        if command != Command::Simulate {
            let basis: SharedBasis = eig.clone();
            let prob = Problem::new(basis, &data, cfg.gamma, cfg.p)?;
            let fit = timer.time("fit", || map_solve(&prob, None))?;
            std::fs::write(out.join("fit.json"), fit.to_json()? + "\n")?;
            if fit.grad_norm > 1e-9 * (1.0 + fit.f_hat.abs()) {
                notes.push(format!("fit stopped on the Newton decrement with ‖∇f‖ = {:.3e}", fit.grad_norm));
            }
            let fitted = Fitted { eig: eig.clone(), data, prob, fit };
            if matches!(command, Command::Certify | Command::Validate | Command::All) {
                let (cmp, extra) = timer.time("certify", || certificates(cfg, &fitted))?;
                write_certificates(out, cfg, &cmp, &extra)?;
                for c in [&cmp.dg, &cmp.star].into_iter().chain(extra.iter()) {
                    if (c.alpha - 1.0).abs() > 1e-8 {
                        failures.push(format!("{}: α = {} not 1 after scaling", c.label, c.alpha));
                    }
                }
                if matches!(command, Command::Validate | Command::All) {
                    let all: Vec<&Certificate> = [&cmp.dg, &cmp.identity, &cmp.star].into_iter().chain(extra.iter()).collect();
                    timer.time("validate", || validate_stage(cfg, &fitted, &cmp, &all, out, &mut failures, &mut notes))?;
                }
            }
        }
    }

    let manifest = Manifest {
        command: command.name().into(),
        git_hash: git_hash(),
        config: cfg.clone(),
        stages: timer.stages,
        invariant_failures: failures.clone(),
        notes: notes.clone(),
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(RunReport { out_dir: out.to_path_buf(), failures, notes })
}

fn write_certificates(out: &Path, cfg: &ExperimentConfig, cmp: &Comparison, extra: &[Certificate]) -> Result<()> {
    let mut w = csv::Writer::from_path(out.join("certificates.csv"))?;
    for c in [&cmp.dg, &cmp.identity, &cmp.star].into_iter().chain(extra.iter()) {
        w.serialize(CertRow::new(cfg.n, cfg.p, cfg.seed, c))?;
    }
    w.flush()?;
    write_json(&out.join("comparison.json"), cmp)?;
    if !extra.is_empty() {
        write_json(&out.join("certificates_extra.json"), &extra)?;
    }
    Ok(())
}

fn validate_stage(
    cfg: &ExperimentConfig,
    f: &Fitted,
    cmp: &Comparison,
    certs: &[&Certificate],
    out: &Path,
    failures: &mut Vec<String>,
    notes: &mut Vec<String>,
) -> Result<()> {
    let est = tv_estimates(cfg, f)?;
    let mut w = csv::Writer::from_path(out.join("tv.csv"))?;
    for e in &est {
        w.serialize(tv_row(e))?;
        if let Some(msg) = &e.warning {
            notes.push(msg.clone());
        }
    }
    w.flush()?;
    let upper = tv_upper(&est);

    let mut w = csv::Writer::from_path(out.join("dominance.csv"))?;
    for c in certs {
        let checked = c.feasible && c.tv_bound < 1.0;
        let dominates = upper <= c.tv_bound.max(TV_FLOOR);
        if checked && !dominates {
            failures.push(format!("{}: empirical TV upper limit {upper:.4e} exceeds bound {:.4e}", c.label, c.tv_bound));
        }
        w.serialize(DominanceRow {
            choice: c.label.clone(),
            tv_bound: c.tv_bound,
            feasible: c.feasible,
            certified: c.certified,
            tv_ci_high: upper,
            checked,
            dominates,
        })?;
    }
    w.flush()?;

    // tails on the optimized ellipsoid
    let star = &cmp.star;
    let (d0, _) = scaled_matrix(&f.fit, &f.prob, star.choice)?;
    let dim = star.effdim;
    let mut radii: Vec<f64> = (0..cfg.validation.tail_radii)
        .map(|i| dim.sqrt() * (0.25 + 0.25 * i as f64))
        .collect();
    radii.extend(radius_grid(dim, &cfg.cert_options(), None).into_iter().step_by(15));
    let tails = empirical_outside_mass_grid(&f.fit, &f.prob, &d0, dim, &radii, cfg.validation.samples, cfg.seed)?;
    let mut w = csv::Writer::from_path(out.join("tails.csv"))?;
    for t in &tails {
        if !t.gaussian_ok() {
            failures.push(format!("Gaussian tail exceeded at r = {:.3}", t.radius));
        }
        if star.feasible && !t.posterior_ok() {
            failures.push(format!("posterior tail exceeded at r = {:.3}", t.radius));
        }
        w.serialize(TailRow::from(t))?;
    }
    w.flush()?;

    let omega = omega_diagnostics(
        &f.fit,
        &f.prob,
        &d0,
        star.radius,
        star.tau3_sup,
        cfg.certification.omega_samples,
        cfg.seed,
    )?;
    if !omega.chain_holds {
        failures.push(format!("ω chain violated: {omega:?}"));
    }
    write_json(&out.join("omega.json"), &omega)?;
    if let Ok(g) = gamma0_star(cfg.n, cfg.beta(), cfg.gamma) {
        if !g.above_threshold {
            notes.push("n is below the threshold of the S-sum brackets".into());
        }
    }
    Ok(())
}
