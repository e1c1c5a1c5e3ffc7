use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;

use bn6::bubble::{self, d2, project_bubble, projected_l32_norm, talenti_u, BubbleParams, ALPHA6};
use bn6::continuation::{default_window, extract_limit, trace_branch, trace_branch_in};
use bn6::fit::power_law;
use bn6::linear_aux::{essential_nondegeneracy, solve_aux, solve_v};
use bn6::nonlinear_radial::{
    energy, find_lambda0, match_lambda, shoot_end, solve_bvp, BranchPoint, DEFAULT_AMPLITUDES,
};
use bn6::radial_core::operator::relative_residual;
use bn6::radial_core::quadrature::adaptive;
use bn6::radial_core::{
    make_grid, sector_eigenvalue, solve_dirichlet_with, sphere_area, Grading, OperatorSpec, Potential, RadialFn,
    RadialGrid, Scheme,
};
use bn6::reduction::{
    assemble_ansatz, choose_bubbles, expansion_terms, reduced_profile, residual_norm, tau_star, AnsatzSpec, BubbleSpec,
    Candidate, Construction, DEFAULT_S,
};
use bn6::Error;

fn uniform(dim: usize, n: usize) -> Arc<RadialGrid> {
    make_grid(dim, n, Grading::Uniform).unwrap().shared()
}

fn grading() -> impl Strategy<Value = Grading> {
    prop_oneof![Just(Grading::Uniform), (1.0005f64..1.01).prop_map(|ratio| Grading::Geometric { ratio })]
}

fn fitted_order(errs: &[f64]) -> f64 {
    (errs[errs.len() - 2] / errs[errs.len() - 1]).log2()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn grid_invariants(dim in 3usize..=9, n in 16usize..600, g in grading()) {
        let grid = make_grid(dim, n, g).unwrap();
        let r = grid.nodes();
        prop_assert_eq!(r[0], 0.0);
        prop_assert_eq!(r[n], 1.0);
        prop_assert!(r.windows(2).all(|w| w[1] > w[0]));
        let vol = sphere_area(dim) / dim as f64;
        let h = r.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        let total: f64 = grid.weights().iter().sum();
        prop_assert!((total - vol).abs() <= 2.0 * dim as f64 * h * h * vol, "{} vs {}", total, vol);
    }

    #[test]
    fn integrate_is_linear(a in -5.0f64..5.0, b in -5.0f64..5.0, k in 0.5f64..4.0) {
        let grid = uniform(6, 128);
        let f = RadialFn::from_fn(grid.clone(), 0, |r| ((k * r).cos(), -k * (k * r).sin())).unwrap();
        let g = RadialFn::from_fn(grid, 0, |r| (r * r, 2.0 * r)).unwrap();
        let lhs = f.scaled(a).axpy(b, &g).unwrap().integrate();
        let rhs = a * f.integrate() + b * g.integrate();
        prop_assert!((lhs - rhs).abs() <= 1e-13 * (1.0 + rhs.abs()));
    }

    #[test]
    fn lp_norm_is_homogeneous(c in -20.0f64..20.0, p in 1.0f64..4.0, k in 0.5f64..4.0) {
        let grid = uniform(5, 96);
        let f = RadialFn::from_fn(grid, 0, |r| ((k * r).cos() + 0.3, -k * (k * r).sin())).unwrap();
        let lhs = f.scaled(c).lp_norm(p).unwrap();
        let rhs = c.abs() * f.lp_norm(p).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs));
    }

    #[test]
    fn csv_round_trip(n in 16usize..200, k in 0.1f64..10.0) {
        let grid = make_grid(6, n, Grading::Geometric { ratio: 1.003 }).unwrap().shared();
        let f = RadialFn::from_fn(grid.clone(), 0, |r| ((k * r).sin() / k + 1.0 / 3.0, (k * r).cos())).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let g = RadialFn::read_csv(grid, buf.as_slice(), 0).unwrap();
        prop_assert_eq!(f.values(), g.values());
        prop_assert_eq!(f.derivatives(), g.derivatives());
    }

    #[test]
    fn solver_operator_duality(
        sector in 0usize..5,
        lambda in -10.0f64..5.0,
        coef in prop::array::uniform3(-3.0f64..3.0),
        g in grading(),
    ) {
        let grid = make_grid(6, 200, g).unwrap().shared();
        let op = OperatorSpec::free(grid.clone(), sector, lambda).unwrap();
        let rhs = RadialFn::from_fn(grid, sector, |r| {
            (coef[0] + coef[1] * r * r + coef[2] * (3.0 * r).cos(), 2.0 * coef[1] * r - 3.0 * coef[2] * (3.0 * r).sin())
        })
        .unwrap();
        for scheme in [Scheme::Second, Scheme::Fourth] {
            let u = solve_dirichlet_with(&op, &rhs, scheme).unwrap();
            let res = relative_residual(&op, &u, &rhs, scheme);
            prop_assert!(res <= 1e-8, "{:?}: {}", scheme, res);
            prop_assert_eq!(u.at_boundary(), 0.0);
        }
    }

    #[test]
    fn sector_eigenvalues_nondecreasing_in_l(depth in 0.0f64..200.0, width in 0.1f64..0.6) {
        let grid = uniform(6, 160);
        let q = RadialFn::from_fn(grid.clone(), 0, |r| {
            let e = (-(r / width).powi(2)).exp();
            (depth * e, -2.0 * r / (width * width) * depth * e)
        })
        .unwrap();
        let base = OperatorSpec::new(grid, 0, 0.0, Potential::Profile(q)).unwrap();
        let lows: Vec<f64> = (0..8).map(|l| sector_eigenvalue(&base.with_sector(l), 0)).collect();
        prop_assert!(lows.windows(2).all(|w| w[1] >= w[0]), "{:?}", lows);
    }
}

/// Relative error of both quadratures for `f(r) = exp(-c r^2) cos(k r)` in dimension `dim`.
fn quadrature_errors(dim: usize, c: f64, k: f64) -> (Vec<f64>, Vec<f64>) {
    let f = |r: f64| (-c * r * r).exp() * (k * r).cos();
    let df = |r: f64| (-c * r * r).exp() * (-2.0 * c * r * (k * r).cos() - k * (k * r).sin());
    let exact = sphere_area(dim) * adaptive(|r| f(r) * r.powi(dim as i32 - 1), 0.0, 1.0, 1e-15).0;
    let mut trap = Vec::new();
    let mut herm = Vec::new();
    for n in [32usize, 64, 128] {
        let u = RadialFn::from_fn(uniform(dim, n), 0, |r| (f(r), df(r))).unwrap();
        trap.push((u.integrate() - exact).abs() / exact.abs());
        herm.push((u.integrate_hermite() - exact).abs() / exact.abs());
    }
    (trap, herm)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn quadrature_orders(dim in 3usize..=8, c in 0.2f64..2.0, k in 0.3f64..2.0) {
        let (trap, herm) = quadrature_errors(dim, c, k);
        let (pt, ph) = (fitted_order(&trap), fitted_order(&herm));
        prop_assert!((pt - 2.0).abs() <= 0.3, "trapezoid order {} ({:?})", pt, trap);
        prop_assert!((ph - 4.0).abs() <= 0.3, "hermite order {} ({:?})", ph, herm);
    }

    #[test]
    fn bubble_scaling_covariance(
        mu in 1e-4f64..1.0,
        xi in prop::array::uniform6(-0.35f64..0.35),
        y in prop::array::uniform6(-20.0f64..20.0),
    ) {
        let p = BubbleParams::new(mu, xi, 1).unwrap();
        let unit = BubbleParams::centred(1.0, 1).unwrap();
        let mut x = xi;
        x.iter_mut().zip(&y).for_each(|(a, b)| *a += mu * b);
        let lhs = talenti_u(&p, &x);
        let rhs = talenti_u(&unit, &y) / (mu * mu);
        prop_assert!((lhs - rhs).abs() <= 1e-13 * rhs, "{} vs {}", lhs, rhs);
    }

    #[test]
    fn projection_bound(mu in 1e-4f64..1.0, x in prop::array::uniform6(-0.4f64..0.4)) {
        let p = BubbleParams::centred(mu, 1).unwrap();
        let gap = talenti_u(&p, &x) - project_bubble(&p, &x);
        prop_assert!(gap > 0.0 && gap <= ALPHA6 * mu * mu * (1.0 + 1e-12), "{}", gap);
    }

    #[test]
    fn d2_monotone(t in 0.0f64..100.0, dt in 1e-6f64..10.0) {
        prop_assert!(d2(t + dt) > d2(t));
        prop_assert_eq!(d2(-t), d2(t));
        prop_assert_eq!(d2(0.0), 0.0);
    }

    #[test]
    fn cancellation_identity(
        lambda0 in 0.1f64..40.0,
        v in -5.0f64..5.0,
        mu in 1e-5f64..0.5,
        eps in -0.1f64..0.1,
    ) {
        prop_assert_eq!(expansion_terms(lambda0, lambda0 / 2.0, v, -1, mu, eps).level, 0.0);
        prop_assert_eq!(expansion_terms(lambda0, -lambda0 / 2.0, v, 1, mu, eps).level, 0.0);
    }

    #[test]
    fn sign_rule(v in -3.0f64..3.0, sign in prop_oneof![Just(1i8), Just(-1i8)], lambda0 in 1.0f64..30.0) {
        let u = sign as f64 * lambda0 / 2.0;
        let c = Candidate {
            xi: [0.0; 6],
            sign,
            u,
            v,
            kernel_slope: None,
            in_v_set: (v - sign as f64 * 0.5).abs() <= 1e-8,
            in_uv_set: true,
        };
        prop_assume!(!c.in_v_set);
        let sel = choose_bubbles(&[c]).unwrap();
        let b = sel.bubbles[0];
        prop_assert_eq!(b.beta, -sign);
        let t = expansion_terms(lambda0, u, v, b.beta, 1e-2 * b.tau, sel.eps_sign as f64 * 1e-2);
        prop_assert!(t.linear <= 0.0, "{:?}", t);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn tau_star_minimises(la in -3.0f64..3.0, ld in -3.0f64..3.0) {
        let (a, d) = (10f64.powf(la), 10f64.powf(ld));
        let t = tau_star(a, d).unwrap();
        let best = reduced_profile(a, d, t);
        prop_assert!(best < 0.0);
        let slack = 1e-12 * best.abs();
        for k in 1..=2000 {
            let tau = 3.0 * t * k as f64 / 2000.0;
            prop_assert!(best <= reduced_profile(a, d, tau) + slack, "tau {}", tau);
        }
        // golden-section cross-check
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let (mut lo, mut hi) = (0.0, 3.0 * t);
        for _ in 0..200 {
            let x1 = hi - g * (hi - lo);
            let x2 = lo + g * (hi - lo);
            if reduced_profile(a, d, x1) < reduced_profile(a, d, x2) { hi = x2 } else { lo = x1 }
        }
        prop_assert!((0.5 * (lo + hi) - t).abs() <= 1e-6 * t);
    }
}

#[test]
fn tau_star_rejects_bad_data() {
    for (a, d) in [(0.0, 1.0), (1.0, 0.0), (-1.0, 1.0), (f64::NAN, 1.0), (1.0, f64::INFINITY)] {
        assert!(matches!(tau_star(a, d), Err(Error::InvalidTauData { .. })));
    }
}

#[test]
fn projected_norm_slope() {
    // the log factor bends the local slope by (2/3)/ln(mu), small only for tiny mu
    let mus: Vec<f64> = (0..8).map(|k| 1e-6 * 2f64.powi(k)).collect();
    let norms: Vec<f64> = mus.iter().map(|&m| projected_l32_norm(m)).collect();
    let fit = power_law(&mus, &norms, 6).unwrap();
    assert!((fit.exponent - 2.0).abs() <= 0.1, "{}", fit.exponent);
}

#[test]
fn no_solution_at_zero_lambda() {
    let grid = uniform(6, 64);
    for (lo, hi) in [(1e-4, 1e6), (1e-2, 1e2), (0.5, 4.0), (10.0, 1e8)] {
        let r = solve_bvp(&grid, 0.0, 1, (lo, hi));
        assert!(matches!(r, Err(Error::NoSignChange { .. })), "[{lo}, {hi}]: {r:?}");
    }
}

fn ground_states() -> Vec<BranchPoint> {
    let grid = uniform(6, 512);
    [2.0, 8.0, 14.0, 20.0, 25.0].iter().map(|&l| solve_bvp(&grid, l, 1, DEFAULT_AMPLITUDES).unwrap()).collect()
}

#[test]
fn ground_state_uniqueness_and_energy() {
    let gs = ground_states();
    for p in &gs {
        assert_eq!(p.scan_transitions, 1, "lambda {}", p.lambda);
        assert_eq!(p.nodal_count, 1);
        let v = p.profile.values();
        assert!(v[..v.len() - 1].iter().all(|&x| x > 0.0));
        assert!(v.windows(2).all(|w| w[1] < w[0]));
        assert!(p.profile.at_boundary().abs() <= 1e-8 * p.amplitude);
        assert_eq!(p.profile.derivatives()[0], 0.0);
        assert!(p.ode_residual() <= 1e-6, "{}", p.ode_residual());
    }
    let e: Vec<f64> = gs.iter().map(|p| energy(&p.profile, p.lambda)).collect();
    assert!(e.iter().all(|&x| x > 0.0), "{e:?}");
    assert!(e.windows(2).all(|w| w[1] < w[0]), "{e:?}");
}

#[test]
fn fredholm_consistency() {
    // the residual is the truncation error of the difference scheme, so the grid
    // must resolve the core of u, which narrows as lambda decreases
    let grid = uniform(6, 4096);
    for l in [2.0, 8.0, 14.0, 20.0, 25.0] {
        let p = solve_bvp(&grid, l, 1, DEFAULT_AMPLITUDES).unwrap();
        let aux = solve_aux(&p).unwrap();
        assert!(aux.v_residual <= 1e-8 && aux.w_residual <= 1e-8, "{} {}", aux.v_residual, aux.w_residual);
        assert!(aux.v.at_boundary().abs() <= 1e-9 * aux.v.sup_norm());
        assert!(aux.w.at_boundary().abs() <= 1e-9 * aux.w.sup_norm());
    }
}

#[test]
fn matching_map_is_continuous() {
    // no jump exceeds a few times the neighbouring increments
    for (lambda, lo, hi) in [(10.0, 1.0, 200.0), (22.0, 20.0, 60.0)] {
        let n = 400;
        let a: Vec<f64> = (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect();
        let f: Vec<f64> = a.iter().map(|&x| shoot_end(6, lambda, x).unwrap().boundary).collect();
        let d: Vec<f64> = f.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        for i in 1..d.len() - 1 {
            let local = d[i - 1].max(d[i + 1]);
            assert!(d[i] <= 4.0 * local + 1e-9, "lambda {lambda}, a {}: {} vs {}", a[i], d[i], local);
        }
    }
}

#[test]
fn essential_points_avoid_excluded_set() {
    let c = find_lambda0(&uniform(6, 1024), (0.5, 26.0)).unwrap();
    let v = solve_v(&c.ground).unwrap();
    let rep = essential_nondegeneracy(&c.ground, &v);
    assert!(rep.verdict && rep.usable);
    assert!(rep.plus.iter().chain(&rep.minus).all(|p| !p.excluded()));
    assert!(rep.hessian_trace != 0.0);
}

#[test]
fn residual_nonincreasing_under_doubling() {
    let lambda0 = find_lambda0(&uniform(6, 1024), (0.5, 26.0)).unwrap().lambda0;
    let coarse = make_grid(6, 1024, Grading::with_first_cell(1024, 2e-6).unwrap()).unwrap();
    let fine = coarse.refine();
    let eps = -1e-2;
    let mut norms = Vec::new();
    for grid in [coarse.shared(), fine.shared()] {
        let base = solve_bvp(&grid, lambda0, 1, DEFAULT_AMPLITUDES).unwrap();
        let aux = solve_aux(&base).unwrap();
        let bubble = BubbleSpec { xi0: [0.0; 6], beta: -1, tau: 0.044, construction: Construction::Fixed };
        let spec = AnsatzSpec::new(base, aux, eps, vec![bubble], DEFAULT_S).unwrap();
        let v = assemble_ansatz(&spec).unwrap();
        norms.push(residual_norm(&v, spec.lambda()).unwrap());
    }
    assert!(norms[1] <= 2.0 * norms[0], "{norms:?}");
}

#[test]
fn branch_points_are_reproducible() {
    let window = default_window(5, 2).unwrap();
    let b = trace_branch_in(5, 2, &[1.0, 10.0, 100.0, 1000.0], window).unwrap();
    assert!(b.points.windows(2).all(|w| w[1].amplitude > w[0].amplitude));
    assert!(b.points.iter().all(|p| p.zeros == b.points[0].zeros));
    for p in &b.points {
        let fresh = match_lambda(5, p.amplitude, 2, (0.5 * window.0, window.1 * 1.01), 61).unwrap();
        assert!((fresh - p.lambda).abs() <= 1e-8 * p.lambda, "{} vs {}", fresh, p.lambda);
    }
}

#[test]
fn extrapolation_is_stable() {
    let b = trace_branch(3, 1, 1.0, 1e4, 14).unwrap();
    let full = extract_limit(&b, Some(10)).unwrap();
    let mut shorter = b.clone();
    shorter.points.pop();
    let cut = extract_limit(&shorter, Some(10)).unwrap();
    assert!(full.uncertainty.is_finite());
    let shift = (full.lambda_inf - cut.lambda_inf).abs();
    assert!(shift < full.uncertainty, "shift {shift:e} vs uncertainty {:e}", full.uncertainty);
    assert!((full.lambda_inf - PI * PI / 4.0).abs() < 0.01 * PI * PI / 4.0);
}

#[test]
fn constants_by_quadrature() {
    let c = bubble::constants();
    assert_eq!(c.alpha6, 24.0);
    assert!((c.omega6 - PI.powi(3)).abs() <= 1e-10 * PI.powi(3));
    assert!((c.d1 - 96.0 * PI.powi(3)).abs() <= 1e-8 * c.d1);
}
