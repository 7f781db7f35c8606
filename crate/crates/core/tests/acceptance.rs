//! Acceptance suite. Prints one PASS/FAIL line per criterion and a summary.
//!
//! A failed criterion is reported, not fatal; set `ACCEPTANCE_STRICT=1` to
//! turn any FAIL into a non-zero exit status.

mod common;

use std::collections::HashMap;
use std::time::Instant;

use aspline::basis::{build_design, eval_basis, make_knots, Boundary, KnotVector};
use aspline::fit::{fit_aspline, FitConfig};
use aspline::glm::{glm_run_path, irls_fit, Family, IrlsConfig};
use aspline::linalg::{cholesky, solve, xtwx, xtx, BandedSymMatrix};
use aspline::penalty::{penalty_matrix, DiffSpec, Penalty, WeightVector};
use aspline::selection::{bic, ebic0, Criterion};
use aspline::simulation::{
    replication_rng, run_scenario, simulate_dataset, ScenarioConfig, ScenarioResult, TestFunction,
    DEFAULT_SEED,
};
use aspline::solver::{
    adaptive_ridge, run_path, unpenalized_fit, wpss_minimize, ArConfig, DesignProducts, LambdaGrid,
    PathStart,
};
use common::{diff_matrix, lstsq, matmul_t, matvec, polynomial_fit, Dense, Lcg};

type Outcome = Result<String, String>;

const SIZES: [usize; 3] = [100, 200, 400];

fn scenarios() -> HashMap<(TestFunction, usize), ScenarioResult> {
    let mut out = HashMap::new();
    for f in TestFunction::ALL {
        for n in SIZES {
            let cfg = ScenarioConfig {
                function: f,
                n,
                replications: 100,
                ..ScenarioConfig::default()
            };
            let res = run_scenario(&cfg).unwrap_or_else(|e| panic!("{f} n={n}: {e}"));
            out.insert((f, n), res);
        }
    }
    out
}

fn med(s: &ScenarioResult, c: Criterion) -> f64 {
    s.median_mse(c).unwrap_or(f64::NAN)
}

fn criterion_1(runs: &HashMap<(TestFunction, usize), ScenarioResult>) -> Outcome {
    let mut detail = Vec::new();
    let mut ok = true;
    for f in TestFunction::ALL {
        let s = &runs[&(f, 200)];
        let (a, b, e) = (
            med(s, Criterion::Aic),
            med(s, Criterion::Bic),
            med(s, Criterion::Ebic0),
        );
        ok &= b < a && e < a;
        detail.push(format!("{f}: aic {a:.5} bic {b:.5} ebic0 {e:.5}"));
    }
    let msg = detail.join("; ");
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_2(runs: &HashMap<(TestFunction, usize), ScenarioResult>) -> Outcome {
    let spahet = med(&runs[&(TestFunction::SpaHet, 200)], Criterion::Ebic0);
    let logit = med(&runs[&(TestFunction::Logit, 200)], Criterion::Ebic0);
    let msg = format!("spahet {spahet:.5} in [0.0005, 0.005]; logit {logit:.5} in [0.0004, 0.004]");
    if (0.0005..=0.005).contains(&spahet) && (0.0004..=0.004).contains(&logit) {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_3(runs: &HashMap<(TestFunction, usize), ScenarioResult>) -> Outcome {
    let count = |f| {
        runs[&(f, 200)]
            .median_basis_count(Criterion::Ebic0)
            .unwrap_or(f64::NAN)
    };
    let bump = count(TestFunction::Bump);
    let logit = count(TestFunction::Logit);
    let msg = format!("bump {bump} in [6, 13]; logit {logit} in [4, 9]");
    if (6.0..=13.0).contains(&bump) && (4.0..=9.0).contains(&logit) {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_4(runs: &HashMap<(TestFunction, usize), ScenarioResult>) -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for f in TestFunction::ALL {
        let small = med(&runs[&(f, 100)], Criterion::Ebic0);
        let large = med(&runs[&(f, 400)], Criterion::Ebic0);
        ok &= large < small;
        detail.push(format!("{f}: n=100 {small:.5} n=400 {large:.5}"));
    }
    let msg = detail.join("; ");
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn dense_of(m: &BandedSymMatrix) -> Dense {
    m.to_dense()
}

fn max_abs_diff(a: &Dense, b: &Dense) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(r, s)| r.iter().zip(s).map(|(u, v)| (u - v).abs()))
        .fold(0.0, f64::max)
}

fn max_abs(a: &Dense) -> f64 {
    a.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()))
}

fn random_design(rng: &mut Lcg, n: usize, k: usize, q: usize) -> (KnotVector, Vec<f64>, Vec<f64>) {
    let kv = make_knots(0.0, 1.0, k, q).unwrap();
    let xs: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| (6.0 * x).sin() + 0.3 * rng.normal())
        .collect();
    (kv, xs, ys)
}

fn criterion_5() -> Outcome {
    let mut rng = Lcg(5);

    // (a) banded SPD systems
    let mut worst_a = 0.0_f64;
    for _ in 0..1000 {
        let p = 5 + (rng.uniform() * 60.0) as usize;
        let m = 1 + (rng.uniform() * 5.0) as usize;
        let mut a = BandedSymMatrix::zeros(p, m);
        for i in 0..p {
            for j in i.saturating_sub(m)..i {
                a.add(i, j, rng.uniform() * 2.0 - 1.0);
            }
        }
        for i in 0..p {
            // Diagonal dominance makes the matrix SPD.
            let off: f64 = (0..p).filter(|&j| j != i).map(|j| a.get(i, j).abs()).sum();
            a.add(i, i, off + 0.1 + rng.uniform());
        }
        let b: Vec<f64> = (0..p).map(|_| rng.normal()).collect();
        let x = solve(&cholesky(&a).unwrap(), &b).unwrap();
        let dense = dense_of(&a);
        let reference = common::solve(&dense, &b);
        let rel = x
            .iter()
            .zip(&reference)
            .map(|(u, v)| (u - v).abs())
            .fold(0.0, f64::max)
            / reference.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let r = matvec(&dense, &x);
        let resid = r
            .iter()
            .zip(&b)
            .map(|(u, v)| (u - v).abs())
            .fold(0.0, f64::max)
            / b.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        worst_a = worst_a.max(rel).max(resid);
    }

    // (b) cross products and penalty matrices
    let mut worst_b = 0.0_f64;
    for trial in 0..50 {
        let q = trial % 4;
        let (kv, xs, _) = random_design(&mut rng, 80, 3 + trial % 9, q);
        let d = build_design(&kv, &xs).unwrap();
        let bd = d.to_dense();
        let g = matmul_t(&bd, &bd);
        worst_b = worst_b.max(max_abs_diff(&dense_of(&xtx(&d)), &g) / max_abs(&g));

        let omega: Vec<f64> = (0..xs.len()).map(|_| 0.1 + rng.uniform()).collect();
        let wb: Dense = bd
            .iter()
            .zip(&omega)
            .map(|(r, w)| r.iter().map(|v| v * w).collect())
            .collect();
        let gw = matmul_t(&bd, &wb);
        worst_b =
            worst_b.max(max_abs_diff(&dense_of(&xtwx(&d, &omega).unwrap()), &gw) / max_abs(&gw));

        let spec = DiffSpec::new(q + 1, kv.dim()).unwrap();
        let w: Vec<f64> = (0..spec.num_diffs())
            .map(|_| rng.uniform() * 10.0)
            .collect();
        let dm = diff_matrix(q + 1, kv.dim());
        let wd: Dense = dm
            .iter()
            .zip(&w)
            .map(|(r, w)| r.iter().map(|v| v * w).collect())
            .collect();
        let pm = matmul_t(&dm, &wd);
        let banded = penalty_matrix(&spec, &WeightVector::new(w).unwrap()).unwrap();
        worst_b = worst_b.max(max_abs_diff(&dense_of(&banded), &pm) / max_abs(&pm));
    }

    // (c) weighted penalized least squares
    let mut worst_c = 0.0_f64;
    for trial in 0..50 {
        let q = trial % 4;
        let (kv, xs, ys) = random_design(&mut rng, 150, 4 + trial % 12, q);
        let d = build_design(&kv, &xs).unwrap();
        let prod = DesignProducts::new(d.clone(), &ys).unwrap();
        let spec = DiffSpec::new(q + 1, kv.dim()).unwrap();
        let w: Vec<f64> = (0..spec.num_diffs())
            .map(|_| 0.01 + rng.uniform() * 5.0)
            .collect();
        let lambda = 10f64.powf(rng.uniform() * 6.0 - 3.0);
        let pen = Penalty::new(spec, WeightVector::new(w.clone()).unwrap()).unwrap();
        let a = wpss_minimize(&prod, &pen, lambda).unwrap();

        let bd = d.to_dense();
        let dm = diff_matrix(q + 1, kv.dim());
        let wd: Dense = dm
            .iter()
            .zip(&w)
            .map(|(r, w)| r.iter().map(|v| v * w).collect())
            .collect();
        let mut lhs = matmul_t(&bd, &bd);
        for (row, prow) in lhs.iter_mut().zip(matmul_t(&dm, &wd)) {
            for (v, p) in row.iter_mut().zip(prow) {
                *v += lambda * p;
            }
        }
        let rhs: Vec<f64> = (0..kv.dim())
            .map(|j| bd.iter().zip(&ys).map(|(r, y)| r[j] * y).sum())
            .collect();
        let reference = common::solve(&lhs, &rhs);
        let rel = a
            .iter()
            .zip(&reference)
            .map(|(u, v)| (u - v).abs())
            .fold(0.0, f64::max)
            / reference.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        worst_c = worst_c.max(rel);
    }

    let msg = format!(
        "banded solve {worst_a:.2e} (<= 1e-8); products {worst_b:.2e} (<= 1e-12); wpss {worst_c:.2e} (<= 1e-8)"
    );
    if worst_a <= 1e-8 && worst_b <= 1e-12 && worst_c <= 1e-8 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_6() -> Outcome {
    let mut rng = Lcg(6);
    let mut worst_poly = 0.0_f64;
    let mut worst_free = 0.0_f64;
    for trial in 0..10 {
        let q = trial % 4;
        let n = 300;
        let (kv, xs, ys) = random_design(&mut rng, n, 6 + trial, q);
        let prod = DesignProducts::new(build_design(&kv, &xs).unwrap(), &ys).unwrap();
        let cfg = ArConfig::default();

        let st = adaptive_ridge(&prod, &kv, 1e12, &cfg, None).unwrap();
        let fitted = prod.design().mul_vec(&st.coefficients).unwrap();
        let poly = polynomial_fit(&xs, &ys, q);
        worst_poly = worst_poly.max(
            fitted
                .iter()
                .zip(&poly)
                .map(|(u, v)| (u - v).abs())
                .fold(0.0, f64::max),
        );

        let st = adaptive_ridge(&prod, &kv, 1e-8, &cfg, None).unwrap();
        let fitted = prod.design().mul_vec(&st.coefficients).unwrap();
        let free = prod
            .design()
            .mul_vec(&unpenalized_fit(&prod).unwrap())
            .unwrap();
        worst_free = worst_free.max(
            fitted
                .iter()
                .zip(&free)
                .map(|(u, v)| (u - v).abs())
                .fold(0.0, f64::max),
        );
    }
    let msg = format!("large penalty vs polynomial {worst_poly:.2e} (<= 1e-6); small penalty vs unpenalized {worst_free:.2e} (<= 1e-4)");
    if worst_poly <= 1e-6 && worst_free <= 1e-4 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_7() -> Outcome {
    let jumps = [0.25, 0.5, 0.8];
    let spacing = 0.01;
    let n = 500;
    let xs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
    let signal = |x: f64| {
        jumps
            .iter()
            .enumerate()
            .filter(|(_, &t)| x >= t)
            .map(|(i, _)| if i % 2 == 0 { 1.0 } else { -1.0 })
            .sum::<f64>()
    };
    let cfg = FitConfig {
        degree: 0,
        num_knots: 99,
        domain: Some((0.0, 1.0)),
        ..FitConfig::default()
    };
    let hits = (0..100u64)
        .filter(|&run| {
            let mut rng = Lcg(1000 + run);
            let ys: Vec<f64> = xs.iter().map(|&x| signal(x) + 0.2 * rng.normal()).collect();
            let Ok(out) = fit_aspline(&xs, &ys, &cfg) else {
                return false;
            };
            let knots = &out.best.selected_knots;
            knots.len() == 3
                && jumps
                    .iter()
                    .all(|t| knots.iter().any(|k| (k - t).abs() <= spacing + 1e-12))
        })
        .count();
    let msg = format!("{hits}/100 runs recover the three jumps (>= 90)");
    if hits >= 90 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_8() -> Outcome {
    let mut rng = Lcg(8);
    let lambdas = LambdaGrid {
        min: 1e-3,
        max: 1e4,
        count: 30,
    }
    .values()
    .unwrap();
    let cfg = ArConfig::default();
    let mut worst = 0.0_f64;
    let mut same_sel = true;
    for trial in 0..20 {
        let (kv, xs, ys) = random_design(&mut rng, 120 + 10 * trial, 10 + trial % 10, trial % 4);
        let d = build_design(&kv, &xs).unwrap();
        let prod = DesignProducts::new(d.clone(), &ys).unwrap();
        let lin = run_path(&prod, &kv, &lambdas, &cfg).unwrap();
        let glm = glm_run_path(
            &d,
            &ys,
            Family::Gaussian,
            &kv,
            &lambdas,
            &cfg,
            &IrlsConfig::default(),
        )
        .unwrap();
        for (a, b) in lin.states.iter().zip(&glm.states) {
            same_sel &= a.selected == b.selected;
            let scale = 1.0 + a.coefficients.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            let diff = a
                .coefficients
                .iter()
                .zip(&b.coefficients)
                .map(|(u, v)| (u - v).abs())
                .fold(0.0, f64::max);
            worst = worst.max(diff / scale);
        }
    }

    let mut fits = 0;
    let mut monotone = true;
    for trial in 0..20 {
        let q = trial % 4;
        let kv = make_knots(0.0, 1.0, 8 + trial % 7, q).unwrap();
        let xs: Vec<f64> = (0..200).map(|_| rng.uniform()).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|&x| poisson(&mut rng, (1.0 + 2.0 * (5.0 * x).sin()).exp()))
            .collect();
        let d = build_design(&kv, &xs).unwrap();
        let spec = DiffSpec::new(q + 1, kv.dim()).unwrap();
        for lambda in [0.01, 1.0, 100.0] {
            let w: Vec<f64> = (0..spec.num_diffs()).map(|_| 0.1 + rng.uniform()).collect();
            let pen = Penalty::new(spec.clone(), WeightVector::new(w).unwrap()).unwrap();
            let st = irls_fit(
                &d,
                &ys,
                Family::Poisson,
                Some(&pen),
                lambda,
                &IrlsConfig::default(),
                None,
            )
            .unwrap();
            fits += 1;
            monotone &= st
                .trace
                .windows(2)
                .all(|t| t[1] <= t[0] + 1e-10 * (1.0 + t[0].abs()));
        }
    }

    let msg = format!(
        "gaussian paths: selections {}, coefficient gap {worst:.2e} (<= 1e-10); poisson traces monotone on {fits} fits: {monotone}",
        if same_sel { "identical" } else { "differ" }
    );
    if same_sel && worst <= 1e-10 && monotone {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn poisson(rng: &mut Lcg, mean: f64) -> f64 {
    let limit = (-mean).exp();
    let mut k = 0.0;
    let mut p = rng.uniform();
    while p > limit {
        k += 1.0;
        p *= rng.uniform();
    }
    k
}

fn criterion_9() -> Outcome {
    let mut rng = Lcg(9);
    let mut failures = Vec::new();

    let mut unity = 0.0_f64;
    for q in 0..=5 {
        for k in [0, 1, 4, 17] {
            for boundary in [Boundary::Uniform, Boundary::Clamped] {
                let kv = KnotVector::equally_spaced(-1.0, 2.0, k, q, boundary).unwrap();
                for i in 0..=300 {
                    let x = -1.0 + 3.0 * i as f64 / 300.0;
                    let s: f64 = eval_basis(&kv, x).unwrap().iter().sum();
                    unity = unity.max((s - 1.0).abs());
                }
            }
        }
    }
    if unity > 1e-12 {
        failures.push(format!("partition of unity {unity:.2e}"));
    }

    // On benchmark fits, the selected state with its unselected knots dropped
    // lives in the reduced spline space.
    let mut removal = 0.0_f64;
    for f in TestFunction::ALL {
        for rep in 0..10 {
            let mut data_rng = replication_rng(DEFAULT_SEED, rep);
            let (xs, ys) = simulate_dataset(f, 200, &f.default_noise(), &mut data_rng);
            let cfg = FitConfig {
                domain: Some((0.0, 1.0)),
                ..FitConfig::default()
            };
            let out = fit_aspline(&xs, &ys, &cfg).unwrap();
            let kv = &out.path.knots;
            let st = out
                .path
                .states
                .iter()
                .find(|s| s.lambda == out.best.lambda)
                .unwrap();
            let fitted = build_design(kv, &xs)
                .unwrap()
                .mul_vec(&st.coefficients)
                .unwrap();
            let reduced =
                KnotVector::new(0.0, 1.0, st.selected_knots(kv), 3, Boundary::Clamped).unwrap();
            let rb = build_design(&reduced, &xs).unwrap().to_dense();
            let proj = matvec(&rb, &lstsq(&rb, &fitted));
            let resid = proj
                .iter()
                .zip(&fitted)
                .map(|(u, v)| (u - v) * (u - v))
                .sum::<f64>()
                .sqrt();
            let norm = fitted.iter().map(|v| v * v).sum::<f64>().sqrt();
            removal = removal.max(resid / norm);
        }
    }
    if removal > 1e-6 {
        failures.push(format!("knot removal residual {removal:.2e}"));
    }

    let mut ebic_ok = true;
    for full in [1usize, 5, 40, 100] {
        for dim in 0..=full {
            for n in [10usize, 200, 5000] {
                let (e, b) = (ebic0(3.7, dim, n, full).unwrap(), bic(3.7, dim, n));
                ebic_ok &= e >= b;
                if dim == full {
                    ebic_ok &= (e - b).abs() <= 1e-12 * b.abs();
                }
            }
        }
    }
    if !ebic_ok {
        failures.push("EBIC0 below BIC or unequal at full dimension".into());
    }

    // Smoke data: a linear spline with one knot at 0.5, lightly perturbed.
    let kv = make_knots(0.0, 1.0, 19, 1).unwrap();
    let xs: Vec<f64> = (0..200).map(|_| rng.uniform()).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| x + 2.0 * (x - 0.5).max(0.0) + 0.05 * rng.normal())
        .collect();
    let prod = DesignProducts::new(build_design(&kv, &xs).unwrap(), &ys).unwrap();
    let lambdas = LambdaGrid::default().values().unwrap();
    let warm = run_path(&prod, &kv, &lambdas, &ArConfig::default()).unwrap();
    let cold_cfg = ArConfig {
        path_start: PathStart::Cold,
        ..ArConfig::default()
    };
    let cold = run_path(&prod, &kv, &lambdas, &cold_cfg).unwrap();
    let differ = warm
        .states
        .iter()
        .zip(&cold.states)
        .filter(|(a, b)| a.selected != b.selected)
        .count();
    if differ > 0 {
        failures.push(format!(
            "warm and cold selections differ at {differ} of {} penalties",
            lambdas.len()
        ));
    }

    let msg = format!(
        "unity {unity:.2e}; knot removal {removal:.2e}; ebic0 >= bic: {ebic_ok}; warm/cold differing penalties: {differ}"
    );
    if failures.is_empty() {
        Ok(msg)
    } else {
        Err(format!("{msg} [{}]", failures.join(", ")))
    }
}

fn main() {
    let start = Instant::now();
    let mut passed = 0;
    let mut report = |id: u32, outcome: Outcome| {
        match &outcome {
            Ok(msg) => println!("PASS criterion {id}: {msg}"),
            Err(msg) => println!("FAIL criterion {id}: {msg}"),
        }
        passed += usize::from(outcome.is_ok());
    };

    let runs = scenarios();
    report(1, criterion_1(&runs));
    report(2, criterion_2(&runs));
    report(3, criterion_3(&runs));
    report(4, criterion_4(&runs));
    report(5, criterion_5());
    report(6, criterion_6());
    report(7, criterion_7());
    report(8, criterion_8());
    report(9, criterion_9());
    println!(
        "{passed}/9 criteria passed in {:.1}s",
        start.elapsed().as_secs_f64()
    );
    if passed < 9 && std::env::var_os("ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
