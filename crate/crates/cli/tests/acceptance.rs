//! Acceptance gate: one line per criterion, then a check that the set of
//! failing criteria is exactly the documented one.

use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bn6::bubble::{constants, talenti_u, BubbleParams};
use bn6::continuation::{
    default_schedule, default_window, extract_limit, radial_eigenvalue, trace_branch, trace_branch_in, LimitEstimate,
};
use bn6::linear_aux::{centre_value, essential_nondegeneracy, solve_v, w_eta};
use bn6::nonlinear_radial::{find_lambda0, solve_bvp, DEFAULT_AMPLITUDES};
use bn6::radial_core::operator::relative_residual;
use bn6::radial_core::quadrature::adaptive;
use bn6::radial_core::{
    make_grid, solve_dirichlet_with, sphere_area, Grading, OperatorSpec, RadialFn, RadialGrid, Scheme,
};
use bn6::reduction::{expansion_check, prepare_sweep, reduced_profile, refinement_check, tau_star, ExpansionConfig};
use bn6::Error;

/// Criteria expected to fail, with the analysis kept alongside the project notes.
const KNOWN_FAILURES: &[usize] = &[4, 9];

struct Verdict {
    id: usize,
    pass: bool,
    detail: String,
    seconds: f64,
}

fn uniform(dim: usize, n: usize) -> Arc<RadialGrid> {
    make_grid(dim, n, Grading::Uniform).unwrap().shared()
}

fn rel(x: f64, target: f64) -> f64 {
    (x - target).abs() / target.abs()
}

fn run(id: usize, budget: f64, f: impl FnOnce() -> (bool, String)) -> Verdict {
    let t = Instant::now();
    let (ok, detail) = f();
    let seconds = t.elapsed().as_secs_f64();
    let within = seconds < budget;
    let detail = if within { detail } else { format!("{detail}; over the {budget} s budget") };
    Verdict { id, pass: ok && within, detail, seconds }
}

/// First positive zero of `J_nu` from the power series of `x^-nu J_nu(x)`,
/// bracketed on a coarse scan and bisected.
fn bessel_zero(nu: f64) -> f64 {
    let reduced = |x: f64| {
        let q = -0.25 * x * x;
        let (mut term, mut sum) = (1.0f64, 1.0f64);
        for k in 1..80 {
            term *= q / (k as f64 * (k as f64 + nu));
            sum += term;
        }
        sum
    };
    let mut lo = 0.5;
    while reduced(lo + 0.01) > 0.0 {
        lo += 0.01;
    }
    let mut hi = lo + 0.01;
    while hi - lo > 1e-15 * hi {
        let mid = 0.5 * (lo + hi);
        if reduced(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn criterion1() -> Verdict {
    run(1, 1.0, || {
        let c = constants();
        let (e1, e2) = (rel(c.d1, 96.0 * PI.powi(3)), rel(c.omega6, PI.powi(3)));
        let ok = e1 <= 1e-8 && e2 <= 1e-10 && c.alpha6 == 24.0;
        (ok, format!("d1 rel {e1:.1e}, omega6 rel {e2:.1e}, alpha6 {}", c.alpha6))
    })
}

fn criterion2() -> Verdict {
    run(2, 5.0, || {
        // frozen oracle outputs guard the series itself
        let frozen =
            [(0.5, PI), (1.0, 3.831_705_970_207_512), (1.5, 4.493_409_457_909_064), (2.0, 5.135_622_301_840_683)];
        let mut ok = true;
        let mut parts = Vec::new();
        for (dim, (nu, j)) in (3..=6).zip(frozen) {
            let z = bessel_zero(nu);
            ok &= rel(z, j) <= 1e-13;
            let l = radial_eigenvalue(dim, 0).unwrap();
            let e = rel(l, z * z);
            ok &= e <= 1e-7;
            parts.push(format!("N{dim} {e:.1e}"));
        }
        (ok, format!("rel errors {}", parts.join(", ")))
    })
}

fn limit(dim: usize, m: usize) -> LimitEstimate {
    let b = if dim == 3 {
        trace_branch(3, m, 1.0, 1e4, 14).unwrap()
    } else {
        trace_branch_in(dim, m, &default_schedule(dim), default_window(dim, m).unwrap()).unwrap()
    };
    extract_limit(&b, Some(10)).unwrap()
}

fn criterion3() -> Verdict {
    run(3, 120.0, || {
        let target = PI * PI / 4.0;
        let e = limit(3, 1);
        let below = solve_bvp(&uniform(3, 256), 0.9 * target, 1, DEFAULT_AMPLITUDES);
        let none = matches!(below, Err(Error::NoSignChange { .. }));
        let err = rel(e.lambda_inf, target);
        (
            err <= 0.01 && none,
            format!("lambda_inf {:.6} (rel {err:.1e}), no solution below window: {none}", e.lambda_inf),
        )
    })
}

fn criterion4() -> Verdict {
    run(4, 600.0, || {
        let mut ok = true;
        let mut parts = Vec::new();
        for (m, k) in [(2usize, 3.0f64), (3, 5.0)] {
            let target = k * k * PI * PI / 4.0;
            let e = limit(3, m);
            let err = rel(e.lambda_inf, target);
            ok &= err <= 0.02;
            parts.push(format!("N3 m{m} {:.4} ({err:.1e})", e.lambda_inf));
        }
        for (dim, from_above) in [(4usize, true), (5, false)] {
            let l1 = radial_eigenvalue(dim, 0).unwrap();
            let e = limit(dim, 2);
            let err = rel(e.lambda_inf, l1);
            let side = e.tail.iter().all(|&(_, l)| (l > l1) == from_above);
            let trend_ok = e.trend == if from_above { -1 } else { 1 };
            ok &= err <= 0.02 && side && trend_ok;
            let dir = if from_above { "above" } else { "below" };
            parts.push(format!("N{dim} {:.4} vs {l1:.4} ({err:.1e}, from {dir}: {})", e.lambda_inf, side && trend_ok));
        }
        (ok, parts.join("; "))
    })
}

fn criterion5(lambda0: f64, gap: f64) -> Verdict {
    run(5, 600.0, || {
        let l1 = radial_eigenvalue(6, 0).unwrap();
        let e = limit(6, 2);
        let err = rel(e.lambda_inf, lambda0);
        let ok = lambda0 > 0.0 && lambda0 < l1 && gap.abs() <= 1e-8 && err <= 0.02 && e.lambda_inf < l1;
        (
            ok,
            format!(
                "lambda0 {lambda0:.9}, |2u(0) - lambda0| {:.1e}, branch limit {:.5} (rel {err:.1e})",
                gap.abs(),
                e.lambda_inf
            ),
        )
    })
}

fn criterion6(lambda0: f64) -> Verdict {
    run(6, 120.0, || {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let etas: Vec<[f64; 6]> = (0..10).map(|_| std::array::from_fn(|_| rng.random_range(-0.5..0.5))).collect();
        let mut reports = Vec::new();
        for n in [256usize, 512] {
            let u = solve_bvp(&uniform(6, n), lambda0, 1, DEFAULT_AMPLITUDES).unwrap();
            let v = solve_v(&u).unwrap();
            let expected = u.profile.at_origin() - lambda0 * v.at_origin();
            let r: Vec<_> = etas.iter().map(|&eta| w_eta(&u, &v, eta).unwrap()).collect();
            reports.push((r, expected));
        }
        let (coarse, fine) = (&reports[0].0, &reports[1].0);
        let worst = fine.iter().map(|w| w.residual0.max(w.residual1).max(w.residual)).fold(0.0, f64::max);
        let order = coarse
            .iter()
            .zip(fine)
            .flat_map(|(c, f)| {
                [
                    (c.residual0 / f.residual0).log2(),
                    (c.residual1 / f.residual1).log2(),
                    (c.residual / f.residual).log2(),
                ]
            })
            .fold(f64::INFINITY, f64::min);
        let expected = reports[1].1;
        let spread = fine.iter().map(|w| (w.at_origin - expected).abs()).fold(0.0, f64::max);
        let ok = worst <= 1e-6 && order >= 4.0 - 0.3 && spread <= 1e-10;
        (ok, format!("max residual {worst:.1e}, min order {order:.2}, |w(0) - (u(0) - lambda v(0))| {spread:.1e}"))
    })
}

fn criterion7(lambda0: f64) -> Verdict {
    run(7, 60.0, || {
        let u = solve_bvp(&uniform(6, 2048), lambda0, 1, DEFAULT_AMPLITUDES).unwrap();
        let v = solve_v(&u).unwrap();
        let rep = essential_nondegeneracy(&u, &v);
        let centre_only = rep.plus.len() == 1 && rep.plus[0].radius == 0.0 && rep.minus.is_empty();
        let c = centre_value(lambda0, 1024).unwrap();
        let ok = centre_only && rep.usable && !c.straddles_zero();
        (
            ok,
            format!(
                "plus {:?}, minus {}, 2v(0) - 1 = {:.9} +- {:.1e}",
                rep.plus.iter().map(|p| p.radius).collect::<Vec<_>>(),
                rep.minus.len(),
                c.value,
                c.error
            ),
        )
    })
}

fn sweep_verdicts(lambda0: f64) -> [Verdict; 3] {
    let cfg = ExpansionConfig::geometric(4e-3, 1.5, 8);
    let t = Instant::now();
    let setup = prepare_sweep(lambda0, &cfg, 4096).unwrap();
    let report = expansion_check(&setup.base, &setup.aux, &cfg).unwrap();
    let shared = t.elapsed().as_secs_f64();
    let mut c8 = run(8, 300.0 - shared, || {
        let p = report.residual.exponent;
        (
            report.rows.len() >= 6 && (1.8..=2.2).contains(&p),
            format!("{} rows, residual exponent {p:.3}", report.rows.len()),
        )
    });
    let mut c9 = run(9, 300.0 - shared, || {
        let (eps_c, cubic) = (report.fit.coef[0], report.fit.coef[1]);
        let e1 = rel(eps_c, report.predicted_eps_coefficient);
        let e2 = rel(cubic, report.predicted_cubic_coefficient);
        let p = report.remainder.exponent;
        let ok = e1 <= 0.05 && e2 <= 0.05 && p > 3.0;
        (
            ok,
            format!(
                "eps coef {eps_c:.1} ({e1:.1e}), cubic coef {cubic:.0} vs {:.0} ({e2:.1e}), remainder exponent {p:.4}",
                report.predicted_cubic_coefficient
            ),
        )
    });
    let c10 = run(10, 300.0, || match refinement_check(&setup.base, &setup.aux, &cfg) {
        Ok(r) => {
            let p = r.distance.exponent;
            (p >= 1.8, format!("{} Newton solves converged, distance exponent {p:.3}", r.rows.len()))
        }
        Err(e) => (false, format!("Newton failed: {e}")),
    });
    c8.seconds += shared;
    c9.seconds += shared;
    [c8, c9, c10]
}

fn quadrature_orders() -> bool {
    let f = |r: f64| (-r * r).exp() * (1.3 * r).cos();
    let df = |r: f64| (-r * r).exp() * (-2.0 * r * (1.3 * r).cos() - 1.3 * (1.3 * r).sin());
    (3..=8).all(|dim| {
        let exact = sphere_area(dim) * adaptive(|r| f(r) * r.powi(dim as i32 - 1), 0.0, 1.0, 1e-15).0;
        let errs: Vec<(f64, f64)> = [64usize, 128]
            .iter()
            .map(|&n| {
                let u = RadialFn::from_fn(uniform(dim, n), 0, |r| (f(r), df(r))).unwrap();
                ((u.integrate() - exact).abs(), (u.integrate_hermite() - exact).abs())
            })
            .collect();
        let (p2, p4) = ((errs[0].0 / errs[1].0).log2(), (errs[0].1 / errs[1].1).log2());
        (p2 - 2.0).abs() <= 0.3 && (p4 - 4.0).abs() <= 0.3
    })
}

fn duality(rng: &mut ChaCha8Rng) -> bool {
    (0..20).all(|_| {
        let grid = uniform(6, 200);
        let sector = rng.random_range(0..5);
        let op = OperatorSpec::free(grid.clone(), sector, rng.random_range(-10.0..5.0)).unwrap();
        let c: [f64; 3] = std::array::from_fn(|_| rng.random_range(-3.0..3.0));
        let g = RadialFn::from_fn(grid, sector, |r| {
            (c[0] + c[1] * r * r + c[2] * r.cos(), 2.0 * c[1] * r - c[2] * r.sin())
        })
        .unwrap();
        [Scheme::Second, Scheme::Fourth].into_iter().all(|s| {
            let u = solve_dirichlet_with(&op, &g, s).unwrap();
            relative_residual(&op, &u, &g, s) <= 1e-8
        })
    })
}

fn minimiser_optimality(rng: &mut ChaCha8Rng) -> bool {
    (0..1000).all(|_| {
        let a = 10f64.powf(rng.random_range(-3.0..3.0));
        let d = 10f64.powf(rng.random_range(-3.0..3.0));
        let t = tau_star(a, d).unwrap();
        let best = reduced_profile(a, d, t);
        (1..=2000).all(|k| best <= reduced_profile(a, d, 3.0 * t * k as f64 / 2000.0) + 1e-12 * best.abs())
    })
}

fn scaling_covariance(rng: &mut ChaCha8Rng) -> bool {
    let unit = BubbleParams::centred(1.0, 1).unwrap();
    (0..1000).all(|_| {
        let mu = 10f64.powf(rng.random_range(-4.0..0.0));
        let xi: [f64; 6] = std::array::from_fn(|_| rng.random_range(-0.35..0.35));
        let y: [f64; 6] = std::array::from_fn(|_| rng.random_range(-20.0..20.0));
        let p = BubbleParams::new(mu, xi, 1).unwrap();
        let x: [f64; 6] = std::array::from_fn(|i| xi[i] + mu * y[i]);
        let rhs = talenti_u(&unit, &y) / (mu * mu);
        (talenti_u(&p, &x) - rhs).abs() <= 1e-13 * rhs
    })
}

fn cli_determinism() -> bool {
    let dir = tempfile::tempdir().unwrap();
    let run = |args: &[&str], dir: &Path| {
        Command::new(env!("CARGO_BIN_EXE_bn6"))
            .args(args)
            .arg("--out")
            .arg(dir)
            .env_remove("BN6_OUT")
            .output()
            .is_ok_and(|o| o.status.success())
    };
    let jobs: [(&[&str], &str); 3] = [
        (&["constants"], "constants.json"),
        (&["lambda0", "--grid-n", "512"], "lambda0.json"),
        (&["nondeg", "--lambda", "lambda0", "--grid-n", "512"], "nondeg.json"),
    ];
    // the output directory is part of the echoed config, so both runs share it
    let read = |file: &str| std::fs::read(dir.path().join(file)).ok();
    jobs.iter().all(|(args, file)| {
        let first = run(args, dir.path()).then(|| read(file)).flatten();
        first.is_some() && run(args, dir.path()) && first == read(file)
    })
}

fn criterion11() -> Verdict {
    run(11, 300.0, || {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let checks = [
            ("quadrature orders", quadrature_orders()),
            ("solver duality", duality(&mut rng)),
            ("minimiser optimality", minimiser_optimality(&mut rng)),
            ("scaling covariance", scaling_covariance(&mut rng)),
            ("CLI determinism", cli_determinism()),
        ];
        let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
        let detail = if failed.is_empty() {
            "all checks green (full randomised suites run as the core property tests)".to_string()
        } else {
            format!("failed: {}", failed.join(", "))
        };
        (failed.is_empty(), detail)
    })
}

fn main() -> ExitCode {
    let mut verdicts = vec![criterion1(), criterion2(), criterion3(), criterion4()];
    let t = Instant::now();
    let cert = find_lambda0(&uniform(6, 2048), (0.5, 26.0)).unwrap();
    let mut c5 = criterion5(cert.lambda0, cert.gap);
    c5.seconds += t.elapsed().as_secs_f64();
    verdicts.push(c5);
    verdicts.push(criterion6(cert.lambda0));
    verdicts.push(criterion7(cert.lambda0));
    verdicts.extend(sweep_verdicts(cert.lambda0));
    verdicts.push(criterion11());

    for v in &verdicts {
        let status = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {status} {:>7.1} s  {}", v.id, v.seconds, v.detail);
    }
    let failing: Vec<usize> = verdicts.iter().filter(|v| !v.pass).map(|v| v.id).collect();
    if failing == KNOWN_FAILURES {
        println!("acceptance: failing set {failing:?} matches the documented known failures");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing set {failing:?} differs from the documented {KNOWN_FAILURES:?}");
        ExitCode::FAILURE
    }
}
