//! Worked examples for each operation, checked against closed forms or
//! independent computations.

use approx::assert_relative_eq;
use bcs_edge_core::bs_operator::{
    assemble, spectral_gap, top_eigenpair, top_eigenpair_of, top_eigenvalue, BoundaryCondition,
};
use bcs_edge_core::critical_temperature::{
    tc_boundary, tc_bulk, tc_bulk_asymptotic, v_of_t, TcConfig,
};
use bcs_edge_core::kernels::{
    eval_a_of_p, eval_b, eval_e, eval_edge, eval_f, eval_l, ModelParams, EULER_GAMMA,
};
use bcs_edge_core::lemma_suite::{check_e_log_growth, check_k_majorant};
use bcs_edge_core::quadrature::{build_grid, integrate, kernel_tail, tail_bound, GridPolicy, MomentumGrid};
use bcs_edge_core::variational::{find_t0, int_f_residual, int_f_window, scaled_sup, trial_gap, TrialConfig};
use nalgebra::DMatrix;

/// `(1/π)∫₀^∞ tanh(p²/2)/p² dp`, computed to 30 digits with an
/// independent arbitrary-precision quadrature.
const A_ONE_ZERO: f64 = 0.428_902_351_861_511_135_987;

fn pr(t: f64, mu: f64) -> ModelParams {
    ModelParams::new(t, mu).unwrap()
}

#[test]
fn kernel_values() {
    assert_eq!(eval_f(1.0, &pr(0.5, 1.0)), 1.0);
    assert_relative_eq!(eval_f(0.0, &pr(0.5, 1.0)), 1f64.tanh(), max_relative = 1e-15);
    assert_eq!(eval_f(-1.7, &pr(0.3, 1.0)), eval_f(1.7, &pr(0.3, 1.0)));
    assert_relative_eq!(eval_l(2.0, 0.0, &pr(1.0, 0.0)), 2f64.tanh() / 4.0, max_relative = 1e-15);
    let p = pr(0.2, 1.3);
    for q in [0.0, 0.4, 1.9, 2.28, 7.0] {
        assert_relative_eq!(eval_b(0.0, q, &p), eval_f(q / 2.0, &p), max_relative = 1e-14);
    }
}

#[test]
fn edge_is_maximum_of_a() {
    let p = pr(0.05, 1.0);
    let g = build_grid(&p, 1e-8).unwrap();
    let a = eval_edge(&p, &g).unwrap();
    assert_eq!(a, eval_a_of_p(0.0, &p, &g).unwrap());
    assert_eq!(eval_e(0.0, &p, &g).unwrap(), 0.0);
    let mut prev = f64::INFINITY;
    for k in 1..60 {
        let x = 0.1 * k as f64;
        let ap = eval_a_of_p(x, &p, &g).unwrap();
        assert!(ap <= a, "A({x}) = {ap} > a = {a}");
        assert!(eval_e(x, &p, &g).unwrap() >= -1e-12);
        if x > 4.0 {
            // beyond the Fermi region A decays monotonically
            assert!(ap < prev);
        }
        prev = ap;
    }
    let far = eval_a_of_p(200.0, &p, &g).unwrap();
    assert!(far < 0.05 * a, "{far}");
}

#[test]
fn edge_low_temperature_and_monotone() {
    let p = pr(1e-3, 1.0);
    let g = build_grid(&p, 1e-8).unwrap();
    let a = eval_edge(&p, &g).unwrap();
    let asym = ((1e3f64).ln() + EULER_GAMMA + (8.0 / std::f64::consts::PI).ln()) / std::f64::consts::PI;
    assert!((a - asym).abs() < 1e-4, "{a} vs {asym}");

    let mut prev = f64::INFINITY;
    for t in [1e-3, 1e-2, 0.1, 1.0, 10.0] {
        let p = pr(t, 1.0);
        let a = eval_edge(&p, &build_grid(&p, 1e-8).unwrap()).unwrap();
        assert!(a < prev);
        prev = a;
    }
}

#[test]
fn edge_at_unit_temperature_zero_mu() {
    let p = pr(1.0, 0.0);
    let a = eval_edge(&p, &build_grid(&p, 1e-10).unwrap()).unwrap();
    assert_relative_eq!(a, A_ONE_ZERO, max_relative = 1e-9);
}

#[test]
fn grid_examples() {
    let p = pr(1e-4, 1.0);
    let g = build_grid(&p, 1e-8).unwrap();
    let fine = g.with_points_per_panel(16).unwrap();
    let f = |q: f64| eval_f(0.5 * q, &p) / std::f64::consts::PI;
    assert!((integrate(f, &g) - integrate(f, &fine)).abs() < 1e-8);

    let unit = pr(1.0, 0.0);
    let g = build_grid(&unit, 1e-8).unwrap();
    assert_eq!(g.record().depth, 0);

    let l = g.cutoff();
    let even = MomentumGrid::from_edges(&[0.0, 0.3 * l, l], 8, &unit).unwrap();
    assert_relative_eq!(integrate(|_| 1.0, &even), l, max_relative = 1e-12);
    assert_relative_eq!(integrate(|q| q * q, &even), l.powi(3) / 3.0, max_relative = 1e-10);
}

#[test]
fn tail_examples() {
    let p = pr(0.1, 1.0);
    let b50 = tail_bound(&p, 50.0).unwrap();
    assert_relative_eq!(b50, 2.0 * (52.0f64 / 48.0).ln(), max_relative = 1e-14);
    assert!(b50 < 0.2);
    assert!(tail_bound(&p, 1e6).unwrap() < 1e-5);
    // the bound dominates a brute-force integral over [Λ, 10Λ] and the
    // analytic remainder used by the discretization
    let wide = MomentumGrid::from_edges(&(0..=90).map(|k| 50.0 * (1.0 + 0.1 * k as f64) - 50.0).collect::<Vec<_>>(), 16, &p).unwrap();
    let brute: f64 = wide
        .nodes()
        .iter()
        .zip(wide.weights())
        .map(|(&x, &w)| w * eval_b(0.0, 50.0 + x, &p))
        .sum();
    assert!(brute <= b50);
    assert!(kernel_tail(0.0, &p, 50.0) <= b50);
}

#[test]
fn eigen_examples() {
    let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
    let e = top_eigenpair_of(&m, 1e-12).unwrap();
    assert_relative_eq!(e.value, 3.0, max_relative = 1e-14);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    assert_relative_eq!(e.vector[0], s, max_relative = 1e-12);
    assert_relative_eq!(e.vector[1], s, max_relative = 1e-12);
    let id = top_eigenpair_of(&DMatrix::identity(5, 5), 1e-12).unwrap();
    assert_eq!(id.value, 1.0);
    assert!(id.residual < 1e-14);
}

#[test]
fn operator_examples() {
    let cfg = TcConfig::default();
    let p = pr(1e-3, 1.0);
    let g = build_grid(&p, 1e-8).unwrap();
    let d = assemble(&p, &g, BoundaryCondition::Dirichlet).unwrap();
    // the multiplication part peaks at the node nearest 0, just below a
    let (imax, dmax) = d
        .diagonal
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |m, (i, &x)| if x > m.1 { (i, x) } else { m });
    assert_eq!(imax, 0);
    assert!(dmax <= d.a_edge && dmax > d.a_edge - 1e-3);

    let top = top_eigenpair(&d, cfg.eig_tol).unwrap();
    assert!(top.value > d.a_edge);
    let low: f64 = g
        .nodes()
        .iter()
        .zip(top.vector.iter())
        .filter(|(&x, _)| x < 1.0)
        .map(|(_, v)| v * v)
        .sum();
    assert!(low > 0.5, "mass below √μ: {low}");

    let n = assemble(&pr(1.0, 1.0), &build_grid(&pr(1.0, 1.0), 1e-8).unwrap(), BoundaryCondition::Neumann).unwrap();
    assert!(spectral_gap(&n, cfg.eig_tol).unwrap() > 0.0);

    let u = pr(1.0, 0.0);
    let ug = build_grid(&u, 1e-8).unwrap();
    let ud = assemble(&u, &ug, BoundaryCondition::Dirichlet).unwrap();
    assert!(spectral_gap(&ud, cfg.eig_tol).unwrap() <= 1e-5);
}

#[test]
fn bulk_examples() {
    let cfg = TcConfig::default();
    let t4 = tc_bulk(0.4, 1.0, &cfg).unwrap();
    let asym = tc_bulk_asymptotic(0.4, 1.0);
    assert!((t4.tc / asym - 1.0).abs() < 0.1);
    let t8 = tc_bulk(0.8, 1.0, &cfg).unwrap();
    assert!(t4.tc < t8.tc);

    // residual on a twice-refined grid
    let p = pr(t8.tc, 1.0);
    let g = build_grid(&p, cfg.grid.tol).unwrap().with_points_per_panel(32).unwrap();
    let a = eval_edge(&p, &g).unwrap();
    assert!((a - 1.0 / 0.8).abs() <= 10.0 * cfg.tol);

    assert!(tc_bulk_asymptotic(0.01, 1.0) < 1e-100);
    for (v, mu) in [(0.5, 2.0), (1.0, 0.3)] {
        assert_relative_eq!(
            tc_bulk_asymptotic(v, mu),
            mu * tc_bulk_asymptotic(v / mu.sqrt(), 1.0),
            max_relative = 1e-13
        );
    }
}

#[test]
fn boundary_examples() {
    let cfg = TcConfig::default();
    let d = tc_boundary(0.6, 1.0, BoundaryCondition::Dirichlet, &cfg).unwrap();
    let n = tc_boundary(0.6, 1.0, BoundaryCondition::Neumann, &cfg).unwrap();
    let bulk = tc_bulk(0.6, 1.0, &cfg).unwrap();
    assert!(d.tc > bulk.tc && !d.collapsed);
    assert!(n.tc >= d.tc);

    // 𝔳 ∘ T_c = id on the solver's own fixed point
    let v = v_of_t(d.tc, 1.0, BoundaryCondition::Dirichlet, &cfg).unwrap();
    assert_relative_eq!(v, 0.6, max_relative = 1e-5);

    // strong coupling: no Dirichlet enhancement
    let s = tc_boundary(5.0, 1.0, BoundaryCondition::Dirichlet, &cfg).unwrap();
    assert!(s.tc >= tc_bulk(5.0, 1.0, &cfg).unwrap().tc * (1.0 - cfg.tol));

    // 𝔳 increases with T
    let vs: Vec<f64> = [0.01, 0.05, 0.2]
        .iter()
        .map(|&t| v_of_t(t, 1.0, BoundaryCondition::Neumann, &cfg).unwrap())
        .collect();
    assert!(vs.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn trial_examples() {
    let cfg = TrialConfig { b: Some(1.0), grid: GridPolicy::default() };
    assert!(trial_gap(&pr(1e-4, 1.0), &cfg).unwrap() > 0.0);
    assert!(trial_gap(&pr(0.5, 1.0), &cfg).unwrap() < 0.0);
    let r = find_t0(1.0, &cfg, 1e-6).unwrap();
    assert!(r.t0 > 1e-6 && r.t0 < 1.0);
    assert!(trial_gap(&pr(0.9 * r.t0, 1.0), &cfg).unwrap() > 0.0);
    assert!(trial_gap(&pr(1.1 * r.t0, 1.0), &cfg).unwrap() < 0.0);
}

#[test]
fn int_f_examples() {
    let policy = GridPolicy::default();
    let r5 = int_f_residual(&pr(1e-5, 1.0), &policy).unwrap();
    let r2 = int_f_residual(&pr(1e-2, 1.0), &policy).unwrap();
    assert!(r5.abs() < r2.abs());
    assert!(int_f_residual(&pr(1e-6, 1.0), &policy).unwrap().abs() < 1e-2);
    let (w, bound) = int_f_window(&pr(1e-3, 1.0)).unwrap();
    assert!(w > 0.0 && w <= bound * (1.0 + 1e-12));
}

#[test]
fn high_temperature_examples() {
    let cfg = TcConfig::default();
    let d: Vec<f64> = [10.0, 100.0, 1000.0]
        .iter()
        .map(|&t| scaled_sup(t, 1.0, BoundaryCondition::Dirichlet, &cfg).unwrap())
        .collect();
    assert!(d.windows(2).all(|w| (w[1] - A_ONE_ZERO).abs() < (w[0] - A_ONE_ZERO).abs()));
    assert!((d[2] - A_ONE_ZERO).abs() < 1e-3);
    let n = scaled_sup(1000.0, 1.0, BoundaryCondition::Neumann, &cfg).unwrap();
    assert!(n - A_ONE_ZERO > 0.1);

    let lhs = scaled_sup(100.0, 1.0, BoundaryCondition::Neumann, &cfg).unwrap();
    let p = pr(1.0, 0.01);
    let rhs = top_eigenvalue(&assemble(&p, &build_grid(&p, 1e-8).unwrap(), BoundaryCondition::Neumann).unwrap(), 1e-10).unwrap();
    assert_relative_eq!(lhs, rhs, max_relative = 1e-10);
}

#[test]
fn lemma_examples() {
    let k = check_k_majorant(50, 1, 3).unwrap();
    assert!(k.passed());
    assert!(k.observed["gram_min_eigenvalue"] >= -1e-10);
    let e = check_e_log_growth(1.0, 0.5, &[1e-2, 1e-3, 1e-4], &GridPolicy::default()).unwrap();
    assert!(e.passed(), "{e:?}");
    assert!(e.observed["sup_int_B"].is_finite());
}
