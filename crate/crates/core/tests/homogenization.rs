use std::f64::consts::{PI, TAU};

use aphom_core::apfield::{CoeffField, CoeffMode, CoeffTensor, FieldShape, FnField};
use aphom_core::bvp::{
    solve_eps_problem, solve_homogenized, two_scale_corrector_grid, two_scale_error, BoxDomain, BvpConfig,
    DirichletProblem, SmoothingConfig,
};
use aphom_core::corrector::{
    compute_ahat, compute_flux, corrector_grid, flux_divergence_check, solve_approx_corrector, solve_dual_corrector,
    CorrectorConfig,
};
use aphom_core::discrete::{Grid, Variant};

/// `⟨1/a⟩^{-1}` for a one-periodic `a` by the trapezoid rule (spectrally accurate).
fn harmonic_mean(a: impl Fn(f64) -> f64) -> f64 {
    let n = 4096;
    let s: f64 = (0..n).map(|i| 1.0 / a(i as f64 / n as f64)).sum();
    n as f64 / s
}

fn arithmetic_mean(a: impl Fn(f64) -> f64) -> f64 {
    let n = 4096;
    (0..n).map(|i| a(i as f64 / n as f64)).sum::<f64>() / n as f64
}

#[test]
fn one_dimensional_tensor_is_the_harmonic_mean_for_both_orders() {
    let oracle = harmonic_mean(|y| 2.0 + (TAU * y).cos());
    assert!((oracle - 3f64.sqrt()).abs() < 1e-12);
    for (m, h, tol) in [(1, 1.0 / 64.0, 0.02), (2, 1.0 / 64.0, 0.05)] {
        let f = CoeffField::periodic_1d(m).unwrap();
        let g = corrector_grid(1, 32.0, 8.0, h).unwrap();
        let set = solve_approx_corrector(&f, 32.0, &g, &CorrectorConfig::default()).unwrap();
        let ah = compute_ahat(&set).unwrap().ahat.get(0, 0, 0, 0);
        assert!((ah - oracle).abs() < tol, "m={m}: {ah} vs {oracle}");
    }
}

#[test]
fn laminate_has_harmonic_and_arithmetic_axes() {
    // a(y) = 2 + cos(2π y_1) I: the ∂_1 slot gets the harmonic mean, the ∂_2 slot
    // the arithmetic one; slot 0 is the multi-index (0,1)
    let a = |y: f64| 2.0 + (TAU * y).cos();
    let shape = FieldShape::new(2, 1, 1).unwrap();
    let f = CoeffField::new(
        "laminate",
        shape,
        1.0 / 3.0,
        CoeffTensor::scaled_identity(2, 1, 2.0),
        vec![CoeffMode {
            frequency: vec![TAU, 0.0],
            phase: 0.0,
            amplitude: CoeffTensor::identity(2, 1),
        }],
    )
    .unwrap();
    let g = Grid::torus(2, 16.0, 256).unwrap();
    let set = solve_approx_corrector(&f, 8.0, &g, &CorrectorConfig::default()).unwrap();
    let ah = compute_ahat(&set).unwrap().ahat;
    assert!((ah.get(1, 1, 0, 0) - harmonic_mean(a)).abs() < 0.02, "{ah:?}");
    assert!((ah.get(0, 0, 0, 0) - arithmetic_mean(a)).abs() < 1e-9, "{ah:?}");
    assert!(ah.get(0, 1, 0, 0).abs() < 1e-9 && ah.get(1, 0, 0, 0).abs() < 1e-9);
}

#[test]
fn flux_identity_and_dual_correctors_close() {
    let f = CoeffField::quasi_periodic_1d(1).unwrap();
    let g = corrector_grid(1, 16.0, 8.0, 1.0 / 32.0).unwrap();
    let set = solve_approx_corrector(&f, 16.0, &g, &CorrectorConfig::default()).unwrap();
    let ah = compute_ahat(&set).unwrap();
    let flux = compute_flux(&set, &ah).unwrap();
    let chk = flux_divergence_check(&flux, &set, Variant::Backward).unwrap();
    assert!(chk.max_residual <= 10.0 * set.solver.rel_tol, "{}", chk.max_residual);
    let dual = solve_dual_corrector(&flux, 16.0, &set.solver).unwrap();
    assert!(dual.phi_means().iter().all(|v| v.abs() < 1e-8));
}

#[test]
fn homogenization_error_shrinks_with_eps() {
    let f = CoeffField::periodic_1d(1).unwrap();
    let src = FnField::new(1, 1, |x: &[f64], o: &mut [f64]| o[0] = (PI * x[0]).sin() + 0.5);
    let cfg = BvpConfig::default();
    let mut diff = Vec::new();
    let mut omega = Vec::new();
    for eps in [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0] {
        let dom = BoxDomain::unit_with_spacing(1, eps / 16.0, 1).unwrap();
        let t = 1.0 / eps;
        let cg = two_scale_corrector_grid(&dom, eps, t, 8.0).unwrap();
        let set = solve_approx_corrector(&f, t, &cg, &CorrectorConfig::default()).unwrap();
        let ah = compute_ahat(&set).unwrap();
        let ue = solve_eps_problem(&DirichletProblem { field: &f, eps, source: &src }, &dom, &cfg).unwrap();
        let u0 = solve_homogenized(&ah, &src, &dom, &cfg).unwrap();
        let scfg = SmoothingConfig::for_domain(eps, &dom).unwrap();
        let r = two_scale_error(&ue, &u0, &set, &scfg, &dom).unwrap();
        diff.push(r.norms.diff_l2);
        omega.push(r.norms.omega_hm);
    }
    // first-order decay in L²
    assert!(diff[0] / diff[1] > 1.6 && diff[1] / diff[2] > 1.6, "{diff:?}");
    assert!(omega.windows(2).all(|w| w[1] < w[0]), "{omega:?}");
}
