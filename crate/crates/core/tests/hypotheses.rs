use std::sync::Arc;

use approx::assert_relative_eq;
use proptest::prelude::*;
use relax_core::hypotheses::*;
use relax_core::linalg::Matrix;
use relax_core::sampling::WorkingBox;
use relax_core::systems::{
    make_combustion, make_elasticity, make_linear_reaction, BalanceLaw, CombustionParams, DampingLaw,
    ElasticityParams, SourceClass, SourceRegularity, StructuralConstants, SystemDefinition,
};

fn opts(samples: usize) -> CheckOptions<f64> {
    CheckOptions { samples, ..Default::default() }
}

fn elasticity(damping_coefficient: f64) -> SystemDefinition<f64> {
    make_elasticity(&ElasticityParams { damping_coefficient, ..Default::default() }).unwrap()
}

fn spec_elasticity() -> SystemDefinition<f64> {
    make_elasticity(&ElasticityParams { stiffness: 2.0, wiggle: 0.099, gamma: 1.9, big_gamma: 2.1, ..Default::default() })
        .unwrap()
}

/// Quadratic entropy with a rotation source `G(u1, u2) = (-u2, u1)`, which has no potential.
struct Rotation;

impl BalanceLaw<f64> for Rotation {
    fn dim(&self) -> usize {
        2
    }
    fn flux(&self, u: &[f64], out: &mut [f64]) {
        out.copy_from_slice(u);
    }
    fn source(&self, u: &[f64], out: &mut [f64]) {
        out[0] = -u[1];
        out[1] = u[0];
    }
    fn source_jacobian(&self, _u: &[f64]) -> Option<Matrix<f64>> {
        Some(Matrix::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]))
    }
    fn entropy(&self, u: &[f64]) -> f64 {
        0.5 * (u[0] * u[0] + u[1] * u[1])
    }
    fn entropy_flux(&self, u: &[f64]) -> f64 {
        0.5 * (u[0] * u[0] + u[1] * u[1])
    }
}

/// Scalar decay with a potential shifted so that `R(0) = 1`.
struct ShiftedPotential;

impl BalanceLaw<f64> for ShiftedPotential {
    fn dim(&self) -> usize {
        1
    }
    fn flux(&self, u: &[f64], out: &mut [f64]) {
        out[0] = u[0];
    }
    fn source(&self, u: &[f64], out: &mut [f64]) {
        out[0] = -u[0];
    }
    fn entropy(&self, u: &[f64]) -> f64 {
        0.5 * u[0] * u[0]
    }
    fn entropy_flux(&self, u: &[f64]) -> f64 {
        0.5 * u[0] * u[0]
    }
    fn potential(&self, u: &[f64]) -> Option<f64> {
        Some(1.0 + 0.5 * u[0] * u[0])
    }
}

fn custom(law: Arc<dyn BalanceLaw<f64>>) -> SystemDefinition<f64> {
    let n = law.dim();
    SystemDefinition::custom(
        "custom",
        law,
        StructuralConstants { alpha: 2.0, beta: 1.0, lipschitz: 1.0, growth: Some(1.0) },
        SourceRegularity::C2,
        SourceClass::General,
        WorkingBox::symmetric(n, 2.0),
    )
}

#[test]
fn entropy_bounds_tight_for_linear_reaction() {
    let r = check_entropy(&make_linear_reaction(1.0, 1.0).unwrap(), &opts(500));
    assert!(r.holds());
    assert!(r.margin.abs() < 1e-9, "margin {}", r.margin);
}

#[test]
fn entropy_bounds_hold_for_elasticity() {
    let r = check_entropy(&spec_elasticity(), &opts(500));
    assert!(r.holds(), "{r:?}");
    assert!(r.witness.is_none());
}

#[test]
fn misdeclared_beta_fails_with_witness() {
    let mut sys = spec_elasticity();
    sys.constants.beta = 3.0;
    let r = check_entropy(&sys, &opts(500));
    assert_eq!(r.verdict, Verdict::Fails);
    assert!(r.margin < 0.0);
    let w = r.witness.unwrap().state;
    let slope = 2.0 + 0.099 * w[0].cos();
    assert!(slope < 3.0);
    assert_relative_eq!(entropy_margin_at(&sys, &w, 1e-6), r.margin);
}

fn scalar_a(a: f64) -> Matrix<f64> {
    Matrix::from_rows(&[vec![a]])
}

#[test]
fn scalar_subcharacteristic_arithmetic() {
    let sys = make_linear_reaction(1.0, 1.0).unwrap();
    let r = check_subcharacteristic(&sys, &scalar_a(4.0), &opts(100)).unwrap();
    assert!(r.holds());
    assert_relative_eq!(r.margin, 2.0, max_relative = 1e-12);
    let r = check_subcharacteristic(&sys, &scalar_a(1.5), &opts(100)).unwrap();
    assert_eq!(r.verdict, Verdict::Fails);
    assert_relative_eq!(r.margin, -0.5, max_relative = 1e-12);
}

#[test]
fn relaxation_matrix_is_validated() {
    let sys = make_linear_reaction(1.0, 1.0).unwrap();
    assert!(check_subcharacteristic(&sys, &scalar_a(-1.0), &opts(10)).is_err());
    assert!(check_subcharacteristic(&sys, &Matrix::identity(2), &opts(10)).is_err());
    let sys = elasticity(1.0);
    let asym = Matrix::from_rows(&[vec![1.0, 0.5], vec![0.0, 1.0]]);
    assert!(check_subcharacteristic(&sys, &asym, &opts(10)).is_err());
}

/// Oracle: for the diagonal elasticity form with A = a I the matrix is
/// diag(a sigma' - alpha sigma'^2, a - alpha); its smallest entry is minimised over the
/// extreme values of sigma' on the box.
#[test]
fn elasticity_subcharacteristic_matches_diagonal_oracle() {
    let sys = elasticity(1.0);
    let alpha = sys.constants.alpha;
    let a = suggest_a(&sys);
    let r = check_subcharacteristic(&sys, &a, &opts(2000)).unwrap();
    let grid: Vec<f64> = (0..=20_000).map(|i| -5.0 + 10.0 * i as f64 / 20_000.0).collect();
    let oracle = grid
        .iter()
        .map(|&u| {
            let s = 1.5 + 0.1 * f64::cos(u);
            (2.0 * alpha * s - alpha * s * s).min(2.0 * alpha - alpha)
        })
        .fold(f64::INFINITY, f64::min);
    assert!(r.holds());
    // Sampled minimum can only sit above the dense-grid minimum, and not far above it.
    assert!(r.margin >= oracle - 1e-9 && r.margin < oracle + 1e-3, "{} vs {oracle}", r.margin);
}

#[test]
fn suggested_matrix_satisfies_condition_for_builtins() {
    for sys in [
        make_linear_reaction(1.0, 1.0).unwrap(),
        elasticity(1.0),
        make_combustion(&CombustionParams::default()).unwrap(),
    ] {
        let r = check_subcharacteristic(&sys, &suggest_a(&sys), &opts(2000)).unwrap();
        assert!(r.holds(), "{}: {}", sys.name, r.margin);
    }
}

#[test]
fn suggested_matrix_is_two_alpha() {
    let a = suggest_a(&make_linear_reaction(1.0, 1.0).unwrap());
    assert_eq!(a.to_rows(), vec![vec![4.0]]);
}

#[test]
fn directional_form_reduces_to_one_dimension() {
    let sys = elasticity(1.0);
    let a = suggest_a(&sys);
    let u = [0.7, -1.2];
    let h = sys.law.entropy_hessian(&u);
    let df = sys.law.flux_jacobian(&u);
    let m = subcharacteristic_matrix(&sys, &a, &u);
    let xi = vec![vec![0.6, 0.8]];
    let form = directional_subcharacteristic_form(&h, &[df], std::slice::from_ref(&a), sys.constants.alpha, &xi);
    assert_relative_eq!(form, m.quad(&xi[0], &xi[0]), max_relative = 1e-12);
    let jac = |x: &[f64]| vec![sys.law.flux_jacobian(x)];
    let r = check_subcharacteristic_directions(&sys, &jac, &[a], 64, &opts(200)).unwrap();
    assert!(r.holds());
}

#[test]
fn weak_dissipation_of_linear_damping() {
    let r = check_weak_dissipation(&elasticity(1.0), &opts(1000));
    assert!(r.holds());
    assert!(r.margin >= 0.0);
}

#[test]
fn anti_damping_fails_weak_dissipation() {
    let sys = elasticity(-1.0);
    let r = check_weak_dissipation(&sys, &opts(1000));
    assert_eq!(r.verdict, Verdict::Fails);
    let w = r.witness.unwrap();
    let p = w.partner.unwrap();
    assert_ne!(w.state[1], p[1]);
    assert_relative_eq!(r.margin, -(w.state[1] - p[1]).powi(2), max_relative = 1e-12);
}

#[test]
fn combustion_routes_to_general_source() {
    let sys = make_combustion(&CombustionParams::default()).unwrap();
    assert_eq!(check_weak_dissipation(&sys, &opts(1000)).verdict, Verdict::Fails);
    assert!(check_lipschitz(&sys, &opts(1000)).holds());
    let suite = check_all(&sys, &suggest_a(&sys), false, &opts(1000)).unwrap();
    assert_eq!(suite.route, Route::General);
    assert!(suite.passed);
}

#[test]
fn elasticity_routes_to_weak_dissipation() {
    let sys = elasticity(1.0);
    let suite = check_all(&sys, &suggest_a(&sys), true, &opts(1000)).unwrap();
    assert_eq!(suite.route, Route::WeaklyDissipative);
    assert!(suite.passed, "{suite:?}");
}

#[test]
fn quadratic_potential_has_linear_growth() {
    let r = check_potential(&elasticity(1.0), &opts(1000));
    assert!(r.holds(), "{r:?}");
}

#[test]
fn shifted_potential_fails_normalisation() {
    let sys = custom(Arc::new(ShiftedPotential));
    let r = check_potential(&sys, &opts(100));
    assert_eq!(r.verdict, Verdict::Fails);
    assert_eq!(r.witness.unwrap().state, vec![0.0]);
    assert_relative_eq!(r.margin, -1.0);
}

#[test]
fn rotation_source_has_no_potential() {
    let sys = custom(Arc::new(Rotation));
    let r = check_potential(&sys, &opts(100));
    assert_eq!(r.verdict, Verdict::NotApplicable);
    assert!(r.note.contains("no potential"), "{}", r.note);
    let [psd, h5] = check_h5_and_gradient_psd(&sys, &opts(100));
    assert_eq!(psd.verdict, Verdict::Fails);
    assert_eq!(h5.verdict, Verdict::Fails);
}

#[test]
fn linear_damping_dissipation_potential() {
    let sys = elasticity(1.0);
    let [psd, h5] = check_h5_and_gradient_psd(&sys, &opts(500));
    assert!(psd.holds() && h5.holds(), "{psd:?} {h5:?}");
    // S = -g(v) v - R = v^2 / 2.
    for &(u, v) in &[(0.3, 1.7), (-2.0, -0.4)] {
        assert_relative_eq!(dissipation_potential(&sys, &[u, v]).unwrap(), 0.5 * v * v, max_relative = 1e-12);
    }
}

#[test]
fn quadratic_entropy_with_gradient_source() {
    // eta = u^2 / 2, G = -lambda u: S = DR u - R = lambda u^2 / 2.
    let sys = make_linear_reaction(1.0, 3.0).unwrap();
    let [_, h5] = check_h5_and_gradient_psd(&sys, &opts(200));
    assert!(h5.holds());
    assert_relative_eq!(dissipation_potential(&sys, &[2.0]).unwrap(), 6.0, max_relative = 1e-12);
}

#[test]
fn kinked_source_skips_second_derivative_checks() {
    let sys = make_elasticity(&ElasticityParams { damping: DampingLaw::PositivePart, ..Default::default() }).unwrap();
    let [psd, h5] = check_h5_and_gradient_psd(&sys, &opts(100));
    assert_eq!(psd.verdict, Verdict::NotApplicable);
    assert_eq!(h5.verdict, Verdict::NotApplicable);
}

#[test]
fn reports_are_deterministic() {
    let sys = make_combustion(&CombustionParams::default()).unwrap();
    let a = suggest_a(&sys);
    let run = || serde_json::to_string(&check_all(&sys, &a, true, &opts(500)).unwrap()).unwrap();
    assert_eq!(run(), run());
}

#[test]
fn gradient_sources_agree_between_checks() {
    for sys in [elasticity(1.0), make_linear_reaction(1.0, 2.0).unwrap()] {
        if check_potential(&sys, &opts(500)).holds() {
            assert!(check_weak_dissipation(&sys, &opts(500)).margin >= -1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn more_samples_never_raise_margin(n in 1usize..400, extra in 1usize..400, seed in 0u32..1000) {
        let mut sys = elasticity(1.0);
        sys.constants.beta = 1.4;
        let small = check_entropy(&sys, &CheckOptions { samples: n, seed, ..Default::default() });
        let large = check_entropy(&sys, &CheckOptions { samples: n + extra, seed, ..Default::default() });
        prop_assert!(large.margin <= small.margin);
        let a = Matrix::scaled_identity(2, 3.5);
        let s = check_subcharacteristic(&sys, &a, &CheckOptions { samples: n, seed, ..Default::default() }).unwrap();
        let l = check_subcharacteristic(&sys, &a, &CheckOptions { samples: n + extra, seed, ..Default::default() }).unwrap();
        prop_assert!(l.margin <= s.margin);
    }

    #[test]
    fn elasticity_weak_dissipation_holds_pointwise(
        u in -5.0f64..5.0, v in -5.0f64..5.0, ub in -5.0f64..5.0, vb in -5.0f64..5.0, c in 0.0f64..3.0,
    ) {
        let sys = elasticity(c);
        prop_assert!(weak_dissipation_margin_at(&sys, &[u, v], &[ub, vb]) >= -1e-12);
    }
}
