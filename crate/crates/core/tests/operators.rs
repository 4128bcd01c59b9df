use laplace_cert::grid::FunctionGrid;
use laplace_cert::operators::{apply_r, apply_rt, assemble_design, discretize_r, CoefficientPair};
use laplace_cert::eigensolver::eigensystem;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn corpus() -> Vec<CoefficientPair> {
    vec![
        CoefficientPair::volterra(),
        CoefficientPair::new(vec![1.0, 0.5], vec![0.1]).unwrap(),
        CoefficientPair::new(vec![1.0, 0.0, 1.0], vec![0.0, 1.0]).unwrap(),
    ]
}

/// Random trigonometric polynomial of low degree.
fn smooth(rng: &mut ChaCha8Rng) -> impl Fn(f64) -> f64 {
    let c: Vec<(f64, f64)> = (0..4).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    move |x: f64| {
        c.iter()
            .enumerate()
            .map(|(j, (s, k))| s * (std::f64::consts::PI * j as f64 * x).sin() + k * (std::f64::consts::PI * j as f64 * x).cos())
            .sum()
    }
}

#[test]
fn closed_forms() {
    let n = 1024;
    let one = FunctionGrid::sample(n, |_| 1.0).unwrap();
    let g = apply_r(&CoefficientPair::volterra(), &one).unwrap();
    for (i, v) in g.values().iter().enumerate() {
        assert!((v - i as f64 / n as f64).abs() < 1e-13);
    }
    let g = apply_rt(&CoefficientPair::volterra(), &one).unwrap();
    for (i, v) in g.values().iter().enumerate() {
        assert!((v - (1.0 - i as f64 / n as f64)).abs() < 1e-13);
    }
    assert_eq!(*g.values().last().unwrap(), 0.0);

    // a ≡ 1, b ≡ 1, f ≡ 1: g = 1 − e^{−x}
    let spec = CoefficientPair::new(vec![1.0], vec![1.0]).unwrap();
    let g = apply_r(&spec, &one).unwrap();
    for (i, v) in g.values().iter().enumerate() {
        let x = i as f64 / n as f64;
        assert!((v - (1.0 - (-x).exp())).abs() < 1e-6);
    }

    let zero = FunctionGrid::sample(n, |_| 0.0).unwrap();
    for spec in corpus() {
        assert!(apply_r(&spec, &zero).unwrap().values().iter().all(|&v| v == 0.0));
        assert!(apply_rt(&spec, &zero).unwrap().values().iter().all(|&v| v == 0.0));
    }
}

#[test]
fn adjointness_on_random_pairs() {
    let n = 4096;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for spec in corpus() {
        for _ in 0..34 {
            let f = FunctionGrid::sample(n, smooth(&mut rng)).unwrap();
            let h = FunctionGrid::sample(n, smooth(&mut rng)).unwrap();
            let lhs = apply_r(&spec, &f).unwrap().inner(&h);
            let rhs = f.inner(&apply_rt(&spec, &h).unwrap());
            let scale = f.l2_norm() * h.l2_norm();
            worst = worst.max((lhs - rhs).abs() / scale);
        }
    }
    assert!(worst < 1e-6, "worst relative adjointness gap {worst:.3e}");
}

#[test]
fn linearity() {
    let n = 2048;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for spec in corpus() {
        let f = FunctionGrid::sample(n, smooth(&mut rng)).unwrap();
        let h = FunctionGrid::sample(n, smooth(&mut rng)).unwrap();
        let (a, b) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let mix = FunctionGrid::new(f.values().iter().zip(h.values()).map(|(x, y)| a * x + b * y).collect()).unwrap();
        let lhs = apply_r(&spec, &mix).unwrap();
        let rf = apply_r(&spec, &f).unwrap();
        let rh = apply_r(&spec, &h).unwrap();
        for i in 0..=n {
            let rhs = a * rf.values()[i] + b * rh.values()[i];
            assert!((lhs.values()[i] - rhs).abs() <= 1e-13 * (1.0 + rhs.abs()));
        }
    }
}

fn ode_residual(spec: &CoefficientPair, n: usize, f: &dyn Fn(f64) -> f64) -> f64 {
    let fg = FunctionGrid::sample(n, f).unwrap();
    let g = apply_r(spec, &fg).unwrap();
    let h = 1.0 / n as f64;
    let v = g.values();
    (1..n)
        .map(|i| {
            let x = i as f64 * h;
            let dg = (v[i + 1] - v[i - 1]) / (2.0 * h);
            (spec.a().eval(x) * dg + spec.b().eval(x) * v[i] - f(x)).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn ode_residual_is_second_order() {
    let poly = |x: f64| 1.0 - 2.0 * x + 3.0 * x * x - x * x * x;
    for spec in corpus() {
        let r1 = ode_residual(&spec, 512, &poly);
        let r2 = ode_residual(&spec, 1024, &poly);
        let c = r1 * 512.0 * 512.0;
        println!("{}: ODE residual constant c = {c:.4}", spec.cache_tag());
        assert!(c < 10.0, "residual constant {c:.3} for {}", spec.cache_tag());
        assert!(r2 <= r1 / 3.0 || r2 < 1e-12, "{r1:e} → {r2:e}");
    }
}

#[test]
fn rrt_solves_the_sturm_liouville_problem() {
    let n = 4096;
    let h = 1.0 / n as f64;
    let f = |x: f64| 1.0 + x * x;
    for spec in corpus() {
        let fg = FunctionGrid::sample(n, f).unwrap();
        let u = apply_r(&spec, &apply_rt(&spec, &fg).unwrap()).unwrap();
        let v = u.values();
        let a = |x: f64| spec.a().eval(x);
        let q = |x: f64| spec.sl_q(x);
        let mut worst = 0.0f64;
        for i in 2..n - 1 {
            let x = i as f64 * h;
            let flux = |j: usize| {
                let xm = (j as f64 + 0.5) * h;
                a(xm).powi(2) * (v[j + 1] - v[j]) / h
            };
            let lhs = -(flux(i) - flux(i - 1)) / h + q(x) * v[i];
            worst = worst.max((lhs - f(x)).abs());
        }
        println!("{}: SL residual · N = {:.4}", spec.cache_tag(), worst * n as f64);
        assert!(worst * (n as f64) < 50.0, "SL residual {worst:.3e} for {}", spec.cache_tag());
        assert_eq!(v[0], 0.0);
        let d1 = (3.0 * v[n] - 4.0 * v[n - 1] + v[n - 2]) / (2.0 * h);
        let bc = a(1.0) * d1 + spec.b().eval(1.0) * v[n];
        assert!(bc.abs() < 1e-3, "boundary residual {bc:.3e}");
    }
}

#[test]
fn discretization_matches_apply_r() {
    let n = 512;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for spec in corpus() {
        let m = discretize_r(&spec, n).unwrap();
        let f = FunctionGrid::sample(n, smooth(&mut rng)).unwrap();
        let direct = apply_r(&spec, &f).unwrap();
        let via = &m * nalgebra::DVector::from_column_slice(f.values());
        for i in 0..=n {
            assert!((via[i] - direct.values()[i]).abs() < 1e-12);
            for j in i + 1..=n {
                assert_eq!(m[(i, j)], 0.0);
            }
        }
    }
}

#[test]
fn design_columns_follow_the_closed_form() {
    let eig = eigensystem(&CoefficientPair::volterra(), 4, 4096).unwrap();
    let n = 300;
    let d = assemble_design(&eig, n, 4).unwrap();
    for j in 1..=n {
        let x = j as f64 / n as f64;
        let exact = 2.0 / std::f64::consts::PI * 2f64.sqrt() * (std::f64::consts::PI * x / 2.0).sin();
        assert!((d.matrix()[(j - 1, 0)] - exact).abs() < 1e-4);
    }
    let gram = d.matrix().tr_mul(d.matrix()) / n as f64;
    for k in 0..4 {
        assert!((gram[(k, k)] / eig.lambdas[k] - 1.0).abs() < 0.05);
        for l in 0..k {
            assert!(gram[(k, l)].abs() < 2.0 / n as f64);
        }
    }
    assert!(assemble_design(&eig, n, 5).is_err());
}
