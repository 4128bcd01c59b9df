mod common;

use common::{instance, volterra};
use laplace_cert::certification::{gamma0_star, scaled_matrix, WeightChoice};
use laplace_cert::concentration::{empirical_outside_mass, empirical_outside_mass_grid, gaussian_tail, posterior_tail_bound};
use laplace_cert::certification::effdim_of;
use laplace_cert::model::ExpFamily;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[test]
fn chi_square_exceedance_below_gaussian_tail() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let draws = 1_000_000;
    // dim = 1, t = 3: P(γ² > 16)
    let count = (0..draws).filter(|_| rng.sample::<f64, _>(StandardNormal).powi(2) > 16.0).count();
    let frac = count as f64 / draws as f64;
    println!("P(γ² > 16) ≈ {frac:.3e} vs bound {:.3e}", gaussian_tail(1.0, 3.0));
    assert!(frac < gaussian_tail(1.0, 3.0) / 10.0);
}

#[test]
fn quadratic_form_deviation_bound() {
    // B = diag(1, 1/2, 1/4, …), ‖B‖ = 1
    let b: Vec<f64> = (0..8).map(|k| 0.5f64.powi(k)).collect();
    let dim: f64 = b.iter().sum();
    let v = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let draws = 200_000;
    let q: Vec<f64> = (0..draws)
        .map(|_| b.iter().map(|bk| bk * rng.sample::<f64, _>(StandardNormal).powi(2)).sum())
        .collect();
    for x in [1.0f64, 2.0, 4.0] {
        let thr = dim + 2.0 * v * x.sqrt() + 2.0 * x;
        let frac = q.iter().filter(|&&s| s > thr).count() as f64 / draws as f64;
        println!("x = {x}: {frac:.3e} ≤ {:.3e}", (-x).exp());
        assert!(frac <= (-x).exp());
    }
    for t in [0.5f64, 1.0, 2.0, 3.0] {
        let thr = (dim.sqrt() + t).powi(2);
        let frac = q.iter().filter(|&&s| s > thr).count() as f64 / draws as f64;
        assert!(frac <= gaussian_tail(dim, t));
    }
}

#[test]
fn posterior_bound_plug_in() {
    for dim in [1.0f64, 3.5, 12.0] {
        let r0 = 3.0 + 3.0 * dim.sqrt();
        let b = posterior_tail_bound(dim, r0);
        assert!(b.applicable && (b.value - (-3.0f64).exp() / 3.0).abs() < 1e-15);
        assert!(!posterior_tail_bound(dim, r0 - 1e-9).applicable);
        assert!(posterior_tail_bound(dim, 0.0).value <= 1.0);
    }
}

#[test]
fn extreme_radii() {
    let eig = volterra(20, 4096);
    let (prob, fit) = instance(&eig, ExpFamily::Poisson, 1000, 3, 1);
    let dim = 3.0;
    let at = |r: f64| empirical_outside_mass(&fit, &prob, &fit.dg2, dim, r, 2000, 4).unwrap();
    let zero = at(0.0);
    assert_eq!(zero.gaussian_fraction, 1.0);
    assert!((zero.posterior_fraction - 1.0).abs() < 1e-12);
    let far = at(1e6);
    assert_eq!(far.gaussian_fraction, 0.0);
    assert_eq!(far.posterior_fraction, 0.0);
    assert!(empirical_outside_mass(&fit, &prob, &fit.dg2, dim, 1.0, 999, 4).is_err());
}

#[test]
fn gaussian_family_fractions_coincide() {
    let eig = volterra(20, 4096);
    let (prob, fit) = instance(&eig, ExpFamily::Gaussian, 500, 3, 2);
    let radii: Vec<f64> = (0..12).map(|i| 0.5 * i as f64).collect();
    for t in empirical_outside_mass_grid(&fit, &prob, &fit.dg2, 3.0, &radii, 5000, 9).unwrap() {
        assert!((t.gaussian_fraction - t.posterior_fraction).abs() < 1e-12, "r = {}", t.radius);
        assert!((t.ess - 5000.0).abs() < 1e-6);
    }
}

#[test]
fn tails_hold_on_desk_instances() {
    let eig = volterra(20, 4096);
    for (n, p, seed) in [(1000, 2, 1), (2000, 4, 2), (3000, 6, 3), (4000, 8, 4)] {
        let (prob, fit) = instance(&eig, ExpFamily::Poisson, n, p, seed);
        let g = gamma0_star(n, 1.0, 2.0).unwrap();
        let (d0, _) = scaled_matrix(&fit, &prob, WeightChoice::Gamma0 { gamma0: g.gamma0 }).unwrap();
        let dim = effdim_of(&d0, &fit.dg2).unwrap();
        let radii: Vec<f64> = (0..24).map(|i| 0.25 * i as f64 * (1.0 + dim.sqrt())).collect();
        let reports = empirical_outside_mass_grid(&fit, &prob, &d0, dim, &radii, 20_000, seed).unwrap();
        for t in &reports {
            assert!(t.gaussian_ok(), "n={n} p={p} r={}: {} vs {}", t.radius, t.gaussian_fraction, t.gaussian_bound);
            assert!(t.posterior_ok(), "n={n} p={p} r={}: {} vs {}", t.radius, t.posterior_fraction, t.posterior_bound);
            assert!((0.0..=1.0).contains(&t.gaussian_bound) && (0.0..=1.0).contains(&t.posterior_bound));
        }
        assert!(reports.windows(2).all(|w| w[1].gaussian_fraction <= w[0].gaussian_fraction));
    }
}
