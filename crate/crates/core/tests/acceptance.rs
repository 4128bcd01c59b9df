//! Acceptance report: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the report is always shown.
//! A FAIL line does not fail the process; errors while computing a criterion
//! are reported as FAIL with the error text.

mod common;

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use common::{instance, root_enclosed, s_sum_enclosure, volterra};
use laplace_cert::certification::{
    compare_choices, effdim_of, gamma0_star, ortho_constant, scaled_matrix, tightness_probe, WeightChoice,
};
use laplace_cert::concentration::empirical_outside_mass_grid;
use laplace_cert::eigensolver::{eig_diagnostics, eigensystem, liouville_transform, svd_oracle};
use laplace_cert::experiment::{run, summarize_sweep, sweep_rows, Command, ExperimentConfig};
use laplace_cert::grid::FunctionGrid;
use laplace_cert::model::{generate, ExpFamily, TruthSpec};
use laplace_cert::operators::{CoefficientPair, CosineBasis};
use laplace_cert::posterior::{third_directional, LaplaceFit, Problem, SharedBasis};
use laplace_cert::validation::tv_importance;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Tolerances.
const C1_LAMBDA_REL: f64 = 1e-6;
const C1_PSI_L2: f64 = 1e-4;
const C1_SECONDS: f64 = 30.0;
const C2_BAND: f64 = 0.02;
const C2_SECONDS: f64 = 60.0;
const C3_SLOPE: f64 = 0.1;
const C3_DERIV_FACTOR: f64 = 2.0;
const C4_LAMBDA_REL: f64 = 1e-3;
const C4_ALIGN: f64 = 0.999;
const C5_SECONDS: f64 = 10.0;
const C6_TV: f64 = 1e-6;
const C7_MIN_INSTANCES: usize = 20;
const C7_SECONDS: f64 = 600.0;
const C8_SHARE: f64 = 0.9;
const C8_PLATEAU_SLOPE: f64 = 0.1;
const C8_SMALL_P_SLOPE: (f64, f64) = (2.7, 3.3);
const C9_SE: f64 = 3.0;
const C10_FACTOR: f64 = 3.0;
const C11_GRAD: f64 = 1e-6;
const C11_HESS: f64 = 1e-5;
const C11_THIRD: f64 = 1e-4;
const C12_RATIO: (f64, f64) = (0.05, 1.0);

type Verdict = laplace_cert::Result<(bool, String)>;

fn corpus() -> Vec<(&'static str, CoefficientPair)> {
    vec![
        ("a=1 b=0", CoefficientPair::volterra()),
        ("a=1+x/2 b=0.1", CoefficientPair::new(vec![1.0, 0.5], vec![0.1]).unwrap()),
        ("a=1+x² b=x", CoefficientPair::new(vec![1.0, 0.0, 1.0], vec![0.0, 1.0]).unwrap()),
    ]
}

fn c1() -> Verdict {
    let t = Instant::now();
    let eig = eigensystem(&CoefficientPair::volterra(), 50, 4096)?;
    let mut worst_l = 0.0f64;
    let mut worst_psi = 0.0f64;
    for k in 1..=50 {
        let exact = ((k as f64 - 0.5) * PI).powi(-2);
        worst_l = worst_l.max((eig.lambdas[k - 1] / exact - 1.0).abs());
        let s = FunctionGrid::sample(4096, |x| 2f64.sqrt() * ((k as f64 - 0.5) * PI * x).sin())?;
        let sign = eig.psi[k - 1].inner(&s).signum();
        let diff: Vec<f64> = eig.psi[k - 1].values().iter().zip(s.values()).map(|(a, b)| a - sign * b).collect();
        worst_psi = worst_psi.max(FunctionGrid::new(diff)?.l2_norm());
    }
    let secs = t.elapsed().as_secs_f64();
    Ok((
        worst_l <= C1_LAMBDA_REL && worst_psi <= C1_PSI_L2 && secs <= C1_SECONDS,
        format!("max |Δλ|/λ = {worst_l:.2e}, max L² error of ψ = {worst_psi:.2e}, {secs:.1}s"),
    ))
}

fn c2() -> Verdict {
    let t = Instant::now();
    let spec = CoefficientPair::new(vec![1.0, 0.5], vec![0.1])?;
    let eig = eigensystem(&spec, 50, 4096)?;
    let limit = (2.0 * 1.5f64.ln()).powi(2) / (PI * PI);
    let total = liouville_transform(&spec, 4096)?.total_length;
    let (mut worst, mut worst_shift) = (0.0f64, 0.0f64);
    for k in 40..=50 {
        let l = eig.lambdas[k - 1];
        worst = worst.max(((k * k) as f64 * l / limit - 1.0).abs());
        worst_shift = worst_shift.max(((k as f64 - 0.5).powi(2) * l / limit - 1.0).abs());
    }
    let secs = t.elapsed().as_secs_f64();
    Ok((
        worst <= C2_BAND && secs <= C2_SECONDS,
        format!(
            "max |k²λ_k/limit − 1| over k∈[40,50] = {:.2}% (band {:.0}%); with (k−½)²: {:.3}%; ∫a⁻¹ = {total:.6}; {secs:.1}s",
            100.0 * worst,
            100.0 * C2_BAND,
            100.0 * worst_shift
        ),
    ))
}

fn c3() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, spec) in corpus() {
        let d = eig_diagnostics(&eigensystem(&spec, 50, 4096)?);
        let slope = d.psi_sup_slope(10, 50).unwrap_or(f64::NAN);
        let base = d.modes[9].dpsi_sup_over_k;
        let ratio = d.modes[9..50].iter().map(|m| m.dpsi_sup_over_k / base).fold(0.0, f64::max);
        ok &= slope.abs() <= C3_SLOPE && ratio <= C3_DERIV_FACTOR;
        parts.push(format!("{name}: slope {slope:+.4}, max ratio {ratio:.3}"));
    }
    Ok((ok, parts.join("; ")))
}

fn c4() -> Verdict {
    let t = Instant::now();
    let (mut worst_rel, mut worst_align) = (0.0f64, 1.0f64);
    for (_, spec) in corpus() {
        let shoot = eigensystem(&spec, 20, 2048)?;
        let svd = svd_oracle(&spec, 2048, 20)?;
        for k in 0..20 {
            worst_rel = worst_rel.max((shoot.lambdas[k] - svd.lambdas[k]).abs() / svd.lambdas[k]);
            worst_align = worst_align.min(shoot.psi[k].inner(&svd.psi[k]).abs());
        }
    }
    Ok((
        worst_rel <= C4_LAMBDA_REL && worst_align >= C4_ALIGN,
        format!(
            "3 specs, N=2048, k≤20: max |Δλ|/λ = {worst_rel:.2e}, min |⟨ψ_a,ψ_b⟩| = {worst_align:.6}, {:.1}s",
            t.elapsed().as_secs_f64()
        ),
    ))
}

fn c5() -> Verdict {
    let t = Instant::now();
    let beta = 1.0;
    let (mut checked, mut failed) = (0, Vec::new());
    for gamma in [1.5, 2.0, 3.0] {
        for e in 8..=20 {
            let n = 1u64 << e;
            if (n as f64) <= (beta + gamma - 1.0f64).powf(-2.0 * beta - 2.0 * gamma) {
                continue;
            }
            let g = gamma0_star(n as usize, beta, gamma)?;
            let (m_lo, m_hi) = root_enclosed(n, 2.0 * beta + 2.0 * gamma);
            let (m0_lo, m0_hi) = root_enclosed(n, 2.0 * beta + 2.0 * g.gamma0);
            for p in (2..=9).map(|j| 1u64 << j) {
                let pf = p as f64;
                let (dim, tau2) = s_sum_enclosure(n, p, beta, gamma, g.gamma0);
                let ok = dim.above((0.5 * m_hi.min(pf)).next_up())
                    && dim.below(((2.0 + 1.0 / (2.0 * beta + 2.0 * gamma - 1.0)) * m_lo.min(pf)).next_down().next_down())
                    && tau2.above((0.5 * m0_hi.min(pf) / n as f64).next_up().next_up())
                    && tau2.below(((1.0 + 1.0 / (beta + gamma - 1.0)) * m0_lo.min(pf) / n as f64).next_down().next_down());
                checked += 1;
                if !ok {
                    failed.push(format!("γ={gamma} n=2^{e} p={p}"));
                }
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    Ok((
        failed.is_empty() && secs <= C5_SECONDS,
        format!("{checked} (γ, n, p) points, rational enclosures, {} violations {failed:?}, {secs:.1}s", failed.len()),
    ))
}

fn config_path(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn c6() -> Verdict {
    let tmp = tempfile::tempdir()?;
    let cfg = ExperimentConfig::load(&config_path("gaussian-exactness.json"))?;
    let report = run(Command::All, &cfg, tmp.path())?;
    let mut tv = csv::Reader::from_path(tmp.path().join("tv.csv"))?;
    let mut quad = None;
    for r in tv.records() {
        let r = r?;
        if &r[0] == "quadrature" {
            quad = Some(r[1].parse::<f64>().unwrap_or(f64::NAN));
        }
    }
    let mut certs = csv::Reader::from_path(tmp.path().join("certificates.csv"))?;
    let col = certs.headers()?.iter().position(|h| h == "local_term").expect("local_term column");
    let mut max_local = 0.0f64;
    for r in certs.records() {
        max_local = max_local.max(r?[col].parse::<f64>().unwrap_or(f64::NAN));
    }
    let quad = quad.unwrap_or(f64::NAN);
    Ok((
        quad <= C6_TV && max_local == 0.0 && report.ok(),
        format!(
            "p={}, quadrature TV = {quad:.2e}, max local term = {max_local}, invariant failures {}",
            cfg.p,
            report.failures.len()
        ),
    ))
}

/// Corpus for the dominance and improvement criteria; the tail criterion
/// uses the seeds 1 and 2.
fn desk_instances() -> Vec<(usize, usize, u64)> {
    let mut v = Vec::new();
    for n in [500, 1000, 2000, 3000, 4000] {
        for p in [2, 4, 6, 8] {
            for seed in 1..=4 {
                v.push((n, p, seed));
            }
        }
    }
    v
}

struct DeskResult {
    n: usize,
    p: usize,
    seed: u64,
    prob: Problem,
    fit: LaplaceFit,
    cmp: laplace_cert::certification::Comparison,
    tv_high: f64,
}

fn desk_corpus() -> laplace_cert::Result<(Vec<DeskResult>, f64)> {
    let t = Instant::now();
    let eig = volterra(20, 4096);
    let mut out = Vec::new();
    for (n, p, seed) in desk_instances() {
        let (prob, fit) = instance(&eig, ExpFamily::Poisson, n, p, seed);
        let cmp = compare_choices(&fit, &prob)?;
        let tv = tv_importance(&fit, &prob, 20_000, seed)?;
        out.push(DeskResult { n, p, seed, prob, fit, cmp, tv_high: tv.ci_high });
    }
    Ok((out, t.elapsed().as_secs_f64()))
}

fn c7(desk: &[DeskResult], secs: f64) -> Verdict {
    let mut instances = 0;
    let mut certs = 0;
    let mut violations = Vec::new();
    let mut min_margin = f64::INFINITY;
    for d in desk {
        let checked: Vec<_> = [&d.cmp.dg, &d.cmp.identity, &d.cmp.star]
            .into_iter()
            .filter(|c| c.feasible && c.tv_bound < 1.0)
            .collect();
        if checked.is_empty() {
            continue;
        }
        instances += 1;
        for c in checked {
            certs += 1;
            min_margin = min_margin.min(c.tv_bound / d.tv_high);
            if d.tv_high > c.tv_bound {
                violations.push(format!("n={} p={} seed={} {}", d.n, d.p, d.seed, c.label));
            }
        }
    }
    Ok((
        instances >= C7_MIN_INSTANCES && violations.is_empty() && secs <= C7_SECONDS,
        format!(
            "{instances}/{} instances with a feasible certificate below 1 ({certs} certificates), {} violations {violations:?}, min bound/TV upper CI = {min_margin:.1}, {secs:.0}s",
            desk.len(),
            violations.len()
        ),
    ))
}

fn c8(desk: &[DeskResult]) -> Verdict {
    let all3: Vec<_> = desk.iter().filter(|d| d.cmp.dg.feasible && d.cmp.identity.feasible && d.cmp.star.feasible).collect();
    let wins = all3
        .iter()
        .filter(|d| d.cmp.star.tv_bound <= d.cmp.dg.tv_bound && d.cmp.star.tv_bound <= d.cmp.identity.tv_bound)
        .count();
    let star_feasible: Vec<_> = desk.iter().filter(|d| d.cmp.star.feasible).collect();
    let star_wins = star_feasible
        .iter()
        .filter(|d| d.cmp.star.tv_bound <= d.cmp.dg.tv_bound && d.cmp.star.tv_bound <= d.cmp.identity.tv_bound)
        .count();
    let subset_ok = all3.is_empty() || wins as f64 >= C8_SHARE * all3.len() as f64;

    let tmp = tempfile::tempdir()?;
    let cfg = ExperimentConfig::load(&config_path("sweep-p.json"))?;
    let rows = sweep_rows(&cfg, tmp.path())?;
    let s = summarize_sweep(&rows).ok_or_else(|| laplace_cert::Error::Parameter { module: "acceptance", detail: "sweep has too few points".into() })?;
    let large = s.slope_large_p.unwrap_or(f64::NAN);
    let small = s.slope_small_p.unwrap_or(f64::NAN);
    let plateau_ok = large.abs() <= C8_PLATEAU_SLOPE;
    let growth_ok = (C8_SMALL_P_SLOPE.0..=C8_SMALL_P_SLOPE.1).contains(&small);
    Ok((
        subset_ok && plateau_ok && growth_ok,
        format!(
            "all-three-feasible subset: {wins}/{} ({}); D(γ₀*) feasible: {star_wins}/{} best; sweep n={} (m={:.2}, m₀*={:.2}): p>m₀* slope {:+.3} ({} pts, need |·|≤{C8_PLATEAU_SLOPE}), p<m squared-bound slope {:.3} ({} pts), max doubling change {:.1}%",
            all3.len(),
            if all3.is_empty() { "vacuous" } else { "evaluated" },
            star_feasible.len(),
            s.n,
            s.m,
            s.m0star,
            large,
            s.points_large_p,
            small,
            s.points_small_p,
            100.0 * s.max_doubling_change.unwrap_or(f64::NAN)
        ),
    ))
}

fn c9(desk: &[DeskResult]) -> Verdict {
    let (mut points, mut gauss_bad, mut post_bad, mut post_checked) = (0, 0, 0, 0);
    let mut worst = f64::NEG_INFINITY;
    let subset: Vec<&DeskResult> = desk.iter().filter(|d| d.seed <= 2).collect();
    for d in &subset {
        let g = gamma0_star(d.n, 1.0, d.prob.gamma())?;
        let (d0, _) = scaled_matrix(&d.fit, &d.prob, WeightChoice::Gamma0 { gamma0: g.gamma0 })?;
        let dim = effdim_of(&d0, &d.fit.dg2)?;
        let top = 3.0 + 3.0 * dim.sqrt() + 4.0;
        let radii: Vec<f64> = (0..16).map(|i| top * i as f64 / 15.0).collect();
        for t in empirical_outside_mass_grid(&d.fit, &d.prob, &d0, dim, &radii, 10_000, d.seed)? {
            points += 1;
            worst = worst.max(t.gaussian_ci3.0 - t.gaussian_bound);
            gauss_bad += usize::from(!t.gaussian_ok());
            if t.posterior_applicable {
                post_checked += 1;
                post_bad += usize::from(t.posterior_fraction - C9_SE * t.posterior_se > t.posterior_bound);
            }
        }
    }
    Ok((
        gauss_bad == 0 && post_bad == 0,
        format!(
            "{} instances × 16 radii = {points} points: Gaussian exceedances {gauss_bad}, posterior exceedances {post_bad}/{post_checked} applicable, max (3-SE lower − bound) = {worst:.3e}",
            subset.len()
        ),
    ))
}

fn c10() -> Verdict {
    let eig = eigensystem(&CoefficientPair::volterra(), 50, 4096)?;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for n in [200, 400, 800, 1600, 3200] {
        for p in [8, 16, 24, 32, 50] {
            let c = ortho_constant(&eig, n, p, 3.5)?;
            lo = lo.min(c);
            hi = hi.max(c);
        }
    }
    Ok((hi / lo < C10_FACTOR, format!("C ∈ [{lo:.4}, {hi:.4}], max/min = {:.3}", hi / lo)))
}

fn c11() -> Verdict {
    let eig = volterra(20, 4096);
    let families = [ExpFamily::Poisson, ExpFamily::Bernoulli, ExpFamily::Gaussian];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut eg, mut eh, mut e3) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..100 {
        let n = rng.gen_range(20..120);
        let p = rng.gen_range(1..=6);
        let data = generate(eig.as_ref(), families[i % 3], &TruthSpec::default(), n, rng.gen())?;
        let basis: SharedBasis = eig.clone();
        let prob = Problem::new(basis, &data, 2.0, p)?;
        let theta = DVector::from_fn(p, |_, _| rng.gen_range(-0.5..0.5));
        let v = DVector::from_fn(p, |_, _| rng.gen_range(-1.0..1.0));
        let shift = |k: usize, h: f64| {
            let mut t = theta.clone();
            t[k] += h;
            t
        };

        let g = prob.grad(&theta)?;
        let h = 1e-5;
        let mut fd = DVector::zeros(p);
        for k in 0..p {
            fd[k] = (prob.f_value(&shift(k, h))? - prob.f_value(&shift(k, -h))?) / (2.0 * h);
        }
        eg = eg.max((&fd - &g).norm() / g.norm().max(1.0));

        let hs = prob.hessian(&theta)?;
        let mut fdh = DMatrix::zeros(p, p);
        for k in 0..p {
            let col = (prob.grad(&shift(k, h))? - prob.grad(&shift(k, -h))?) / (2.0 * h);
            fdh.set_column(k, &col);
        }
        eh = eh.max((&fdh - &hs).norm() / hs.norm());

        let t3 = third_directional(&prob, &theta, &v)?;
        let q = |t: f64| -> laplace_cert::Result<f64> {
            Ok((v.transpose() * prob.hessian(&(&theta + t * &v))? * &v)[(0, 0)])
        };
        let h3 = 1e-4;
        let fd3 = (q(h3)? - q(-h3)?) / (2.0 * h3);
        e3 = e3.max((fd3 - t3).abs() / t3.abs().max(1e-3 * q(0.0)?));
    }
    Ok((
        eg <= C11_GRAD && eh <= C11_HESS && e3 <= C11_THIRD,
        format!("100 instances: gradient {eg:.2e} (≤{C11_GRAD:.0e}), Hessian {eh:.2e} (≤{C11_HESS:.0e}), third directional {e3:.2e} (≤{C11_THIRD:.0e})"),
    ))
}

fn c12() -> Verdict {
    let basis = CosineBasis::new(64, 1.0);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for e in 10..=18 {
        let n = 1usize << e;
        let g = gamma0_star(n, 1.0, 2.0)?;
        let r = tightness_probe(&basis, n, 64, 1.0, g.gamma0)?.ratio;
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Ok((
        lo >= C12_RATIO.0 && hi <= C12_RATIO.1,
        format!("cosine surrogate, p=64, n=2^10..2^18: ratio ∈ [{lo:.3}, {hi:.3}]"),
    ))
}

fn report(id: usize, name: &str, v: Verdict, passed: &mut usize) {
    let (ok, detail) = v.unwrap_or_else(|e| (false, format!("error: {e}")));
    *passed += usize::from(ok);
    println!("{} {id:>2} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let filters: Vec<&String> = args.iter().filter(|a| !a.starts_with('-')).collect();
    if !filters.is_empty() && !filters.iter().any(|f| "acceptance".contains(f.as_str())) {
        return;
    }

    let start = Instant::now();
    let mut passed = 0;
    report(1, "Volterra closed form", c1(), &mut passed);
    report(2, "eigenvalue asymptote", c2(), &mut passed);
    report(3, "eigenfunction regularity", c3(), &mut passed);
    report(4, "shooting vs SVD", c4(), &mut passed);
    report(5, "S-sum brackets", c5(), &mut passed);
    report(6, "Gaussian exactness", c6(), &mut passed);
    match desk_corpus() {
        Ok((desk, secs)) => {
            report(7, "certificate dominance", c7(&desk, secs), &mut passed);
            report(8, "optimized-D improvement", c8(&desk), &mut passed);
            report(9, "concentration bounds", c9(&desk), &mut passed);
        }
        Err(e) => {
            for (id, name) in [(7, "certificate dominance"), (8, "optimized-D improvement"), (9, "concentration bounds")] {
                report(id, name, Ok((false, format!("error: {e}"))), &mut passed);
            }
        }
    }
    report(10, "orthogonality constant", c10(), &mut passed);
    report(11, "derivative correctness", c11(), &mut passed);
    report(12, "tightness probe", c12(), &mut passed);
    println!("acceptance: {passed}/12 PASS in {:.0}s", start.elapsed().as_secs_f64());
}
