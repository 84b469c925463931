use catgrad::problems::{power_iteration, CsrMatrix, Objective, Problem, SyntheticLogistic};
use catgrad::rng;
use nalgebra::DMatrix;
use rand::Rng;

fn logistic() -> Problem {
    let lr = SyntheticLogistic {
        samples: 300,
        dim: 40,
        row_nnz: 6,
        zipf_exponent: 1.2,
        label_flip: 0.1,
        reg: 1e-2,
        seed: 4,
    }
    .build()
    .unwrap();
    Problem::Logistic(lr)
}

fn problems() -> Vec<Problem> {
    vec![
        logistic(),
        Problem::isotropic(2.5, 12).unwrap(),
        Problem::rank_one(3.0, 12).unwrap(),
        Problem::diagonal((1..=12).map(|i| i as f64 * 0.5).collect()).unwrap(),
    ]
}

#[test]
fn gradients_match_finite_differences() {
    let mut r = rng::stream(1, 0, 0);
    for p in problems() {
        let d = p.dim();
        for _ in 0..5 {
            let x: Vec<f64> = (0..d).map(|_| r.random::<f64>() * 2.0 - 1.0).collect();
            let g = p.gradient(&x).unwrap();
            let h = 1e-6;
            for j in 0..d {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += h;
                xm[j] -= h;
                let fd = (p.loss(&xp).unwrap() - p.loss(&xm).unwrap()) / (2.0 * h);
                let gj = g[j];
                assert!((fd - gj).abs() <= 1e-6 * (1.0 + gj.abs()), "coordinate {j}: {fd} vs {gj}");
            }
        }
    }
}

#[test]
fn gradients_are_lipschitz_with_the_reported_constant() {
    let mut r = rng::stream(2, 0, 0);
    for p in problems() {
        let d = p.dim();
        let l = p.smoothness();
        for _ in 0..1000 {
            let x: Vec<f64> = (0..d).map(|_| r.random::<f64>() * 6.0 - 3.0).collect();
            let y: Vec<f64> = (0..d).map(|_| r.random::<f64>() * 6.0 - 3.0).collect();
            let gx = p.gradient(&x).unwrap();
            let gy = p.gradient(&y).unwrap();
            let dg: f64 = gx.iter().zip(gy.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let dx: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(dg <= l * dx * (1.0 + 1e-9), "‖∇F(x) − ∇F(y)‖ = {dg} > L‖x − y‖ = {}", l * dx);
        }
    }
}

#[test]
fn power_iteration_matches_dense_eigensolver() {
    let mut r = rng::stream(9, 0, 0);
    let mut rows = vec![Vec::new(); 50];
    for row in &mut rows {
        for j in 0..20 {
            if r.random::<f64>() < 0.4 {
                row.push((j, r.random::<f64>() * 2.0 - 1.0));
            }
        }
    }
    let x = CsrMatrix::from_rows(rows, 20).unwrap();
    let dense = x.to_dense();
    let m = DMatrix::from_fn(50, 20, |i, j| dense[i][j]);
    let gram = m.transpose() * &m;
    let oracle = gram.symmetric_eigenvalues().iter().copied().fold(f64::MIN, f64::max);
    let estimate = power_iteration(&x, 1e-12, 100_000).unwrap();
    assert!((estimate - oracle).abs() <= 1e-5 * oracle, "{estimate} vs {oracle}");
}

#[test]
fn logistic_smoothness_bounds_the_hessian() {
    let Problem::Logistic(lr) = logistic() else { unreachable!() };
    let data = lr.data();
    let dense = data.features.to_dense();
    let n = data.samples();
    let m = DMatrix::from_fn(n, data.dim(), |i, j| dense[i][j]);
    let top = (m.transpose() * &m).symmetric_eigenvalues().iter().copied().fold(f64::MIN, f64::max);
    let exact = top / (4.0 * n as f64) + lr.reg();
    assert!((lr.smoothness() - exact).abs() <= 1e-5 * exact);
}
