use std::f64::consts::PI;
use std::sync::Arc;

use approx::assert_relative_eq;
use relax_core::equilibrium::{manufactured_forcing, manufactured_trace, with_derivatives, EquilibriumSnapshot, TravellingWave};
use relax_core::functionals::{functional_trace, FunctionalContext, SaturatedEntropy};
use relax_core::hypotheses::suggest_a;
use relax_core::linalg::Matrix;
use relax_core::solver::{
    uniform_schedule, Grid, Initialization, Limiter, Model, Profile, RelaxationField, RelaxationSolver, SolverConfig,
};
use relax_core::systems::{make_elasticity, make_linear_reaction, ElasticityParams, SystemDefinition};

fn grid(n: usize) -> Grid<f64> {
    Grid::new(0.0, 1.0, n).unwrap()
}

fn undamped() -> SystemDefinition<f64> {
    make_elasticity(&ElasticityParams { damping_coefficient: 0.0, ..Default::default() }).unwrap()
}

fn damped() -> SystemDefinition<f64> {
    make_elasticity(&ElasticityParams::default()).unwrap()
}

fn prepared(sys: &SystemDefinition<f64>, g: &Grid<f64>, eps: f64, u0: &Profile<f64>) -> RelaxationField<f64> {
    let s = RelaxationSolver::new(sys, *g, SolverConfig::new(eps, suggest_a(sys))).unwrap();
    s.initial_field(u0.clone(), Initialization::WellPrepared, 0.0).unwrap()
}

fn smooth(g: &Grid<f64>) -> Profile<f64> {
    Profile::from_fn(g, 2, |x| vec![0.1 * (2.0 * PI * x).sin(), 0.1 * (2.0 * PI * x).cos()])
}

fn at_rest(g: &Grid<f64>) -> Profile<f64> {
    Profile::from_fn(g, 2, |x| vec![0.1 * (2.0 * PI * x).sin(), 0.0])
}

#[test]
fn phi_vanishes_at_zero() {
    let sys = damped();
    let g = grid(16);
    let f = prepared(&sys, &g, 1e-2, &Profile::zeros(16, 2));
    let ctx = FunctionalContext::new(&sys, g, 1e-2, suggest_a(&sys));
    assert_eq!(ctx.phi(&f), 0.0);
}

#[test]
fn phi_of_constant_state_is_squared_norm_times_length() {
    let sys = undamped();
    let g = Grid::new(-1.0, 2.0, 24).unwrap();
    let c = [0.3, -0.4];
    let f = prepared(&sys, &g, 1e-2, &Profile::from_fn(&g, 2, |_| c.to_vec()));
    let ctx = FunctionalContext::new(&sys, g, 1e-2, suggest_a(&sys));
    assert_relative_eq!(ctx.phi(&f), 0.25 * 3.0, max_relative = 1e-14);
}

fn matching_equilibrium(sys: &SystemDefinition<f64>, g: &Grid<f64>, f: &RelaxationField<f64>) -> EquilibriumSnapshot<f64> {
    with_derivatives(sys, g, f.u.clone(), f.time, None)
}

#[test]
fn identical_fields_have_zero_relative_functionals() {
    let sys = undamped();
    let g = grid(64);
    let eps = 1e-2;
    let f = prepared(&sys, &g, eps, &smooth(&g));
    let eq = matching_equilibrium(&sys, &g, &f);
    let ctx = FunctionalContext::new(&sys, g, eps, suggest_a(&sys));
    assert!(ctx.psi(&f, &eq) <= 1e-20);
    assert!(ctx.lyapunov(&f, &eq).abs() <= 1e-20);
    assert_eq!(ctx.relative_potential(&f, &eq), Some(0.0));
    let r = ctx.relative_entropy_residual_window(&f, &eq);
    for t in [r.a1, r.a2, r.b1, r.b2, r.c1, r.c2, r.d1, r.d2, r.d3] {
        assert!(t.abs() < 1e-14, "{r:?}");
    }
}

/// Helper trait so the window test reads naturally: three copies of one field at equal spacing.
trait Window {
    fn relative_entropy_residual_window(
        &self,
        f: &RelaxationField<f64>,
        eq: &EquilibriumSnapshot<f64>,
    ) -> relax_core::functionals::ErrorTerms<f64>;
}

impl Window for FunctionalContext<'_, f64> {
    fn relative_entropy_residual_window(
        &self,
        f: &RelaxationField<f64>,
        eq: &EquilibriumSnapshot<f64>,
    ) -> relax_core::functionals::ErrorTerms<f64> {
        let shift = |k: f64| {
            let mut g = f.clone();
            g.time = k * 1e-3;
            let mut e = eq.clone();
            e.time = k * 1e-3;
            (g, e)
        };
        let (w0, e0) = shift(0.0);
        let (w1, e1) = shift(1.0);
        let (w2, e2) = shift(2.0);
        self.relative_entropy_residual([&w0, &w1, &w2], [&e0, &e1, &e2]).unwrap().terms
    }
}

#[test]
fn averaged_hessian_of_quadratic_entropy_is_half() {
    let sys = make_linear_reaction::<f64>(1.0, 1.0).unwrap();
    let ctx = FunctionalContext::new(&sys, grid(8), 0.3, suggest_a(&sys));
    let m = ctx.averaged_hessian(&[1.7], &[-4.0]);
    assert!((m.row(0)[0] - 0.5).abs() < 1e-15);
}

/// For eta = u^2 / 2: H_rel = |w - ubar|^2 / 2 with w = u + eps e_t, and the
/// averaged Hessian is 1/2, so the density is
/// `H_rel + eps^2 (alpha - 1/2) e_t^2 + eps^2 alpha A e_x^2`.
#[test]
fn lyapunov_of_quadratic_entropy_matches_closed_form() {
    let (eps, a_val) = (0.05, 4.0);
    let sys = make_linear_reaction::<f64>(1.0, 0.0).unwrap();
    let g = grid(32);
    let u = Profile::from_fn(&g, 1, |x| vec![(2.0 * PI * x).sin()]);
    let ub = Profile::from_fn(&g, 1, |x| vec![0.9 * (2.0 * PI * x).sin() + 0.05]);
    let v = Profile::from_fn(&g, 1, |x| vec![0.8 * (2.0 * PI * x).sin()]);
    let f = RelaxationField { time: 0.0, u: u.clone(), v, global_term: Profile::zeros(32, 1), seam_jump: vec![0.0] };
    let eq = with_derivatives(&sys, &g, ub.clone(), 0.0, None);
    let ctx = FunctionalContext::new(&sys, g, eps, Matrix::from_rows(&[vec![a_val]]));
    let d = ctx.derivatives(&f);
    let alpha = sys.constants.alpha;
    let mut expect = 0.0;
    for i in 0..32 {
        let et = d.u_t.cell(i)[0] - eq.u_t.cell(i)[0];
        let ex = d.u_x.cell(i)[0] - eq.u_x.cell(i)[0];
        let w = u.cell(i)[0] + eps * et - ub.cell(i)[0];
        expect += 0.5 * w * w + eps * eps * (alpha - 0.5) * et * et + eps * eps * alpha * a_val * ex * ex;
    }
    expect *= g.dx();
    assert_relative_eq!(ctx.lyapunov(&f, &eq), expect, max_relative = 1e-12);
}

#[test]
fn relative_potential_of_quadratic_damping() {
    let sys = damped();
    let g = grid(16);
    let f = prepared(&sys, &g, 1e-2, &smooth(&g));
    let ub = Profile::from_fn(&g, 2, |x| vec![0.0, 0.3 * (2.0 * PI * x).sin()]);
    let eq = with_derivatives(&sys, &g, ub.clone(), 0.0, None);
    let ctx = FunctionalContext::new(&sys, g, 1e-2, suggest_a(&sys));
    let expect: f64 = (0..16).map(|i| 0.5 * (f.u.cell(i)[1] - ub.cell(i)[1]).powi(2)).sum::<f64>() * g.dx();
    assert_relative_eq!(ctx.relative_potential(&f, &eq).unwrap(), expect, max_relative = 1e-12);
}

#[test]
fn energy_residual_vanishes_for_constant_state() {
    let sys = undamped();
    let g = grid(16);
    let eps = 1e-2;
    let s = RelaxationSolver::new(&sys, g, SolverConfig::new(eps, suggest_a(&sys))).unwrap();
    let trace = s.run(Profile::from_fn(&g, 2, |_| vec![0.2, 0.1]), Initialization::WellPrepared, &[0.0, 0.01, 0.02]).unwrap();
    let ctx = FunctionalContext::new(&sys, g, eps, suggest_a(&sys));
    let w = &trace.snapshots;
    assert!(ctx.energy_identity_residual([&w[0], &w[1], &w[2]]).unwrap() < 1e-13);
    assert!(ctx.energy_identity_residual([&w[0], &w[2], &w[1]]).is_err());
}

/// Manufactured elasticity wave; returns the window and reference used by the identities.
fn manufactured_window(n: usize) -> (SystemDefinition<f64>, Grid<f64>, Vec<RelaxationField<f64>>, Vec<EquilibriumSnapshot<f64>>, relax_core::solver::Forcing<f64>) {
    let sys = damped();
    let g = grid(n);
    let eps = 1e-2;
    let a = suggest_a(&sys);
    let wave = Arc::new(TravellingWave {
        offset: vec![0.0, 0.0],
        amplitude: vec![0.05, 0.05],
        phase: vec![0.0, PI / 2.0],
        kappa: 2.0 * PI,
        speed: 1.0,
    });
    let forcing = manufactured_forcing(&sys, wave.clone(), eps, &a);
    let mut cfg = SolverConfig::new(eps, a);
    cfg.limiter = Limiter::Unlimited;
    cfg.forcing = Some(forcing.equilibrium.clone());
    let s = RelaxationSolver::new(&sys, g, cfg).unwrap();
    use relax_core::equilibrium::ManufacturedSolution;
    let u0 = Profile::from_fn(&g, 2, |x| wave.value(x, 0.0));
    let h = g.dx();
    let schedule = [0.2 - h, 0.2, 0.2 + h];
    let trace = s.run(u0, Initialization::WellPrepared, &schedule).unwrap();
    let reference = manufactured_trace(&sys, &g, wave.as_ref(), &forcing.equilibrium, &schedule);
    (sys, g, trace.snapshots, reference.snapshots, forcing.equilibrium)
}

#[test]
fn wrong_relaxation_matrix_breaks_the_energy_identity() {
    let residual = |n: usize, scale: f64| {
        let (sys, g, w, _, forcing) = manufactured_window(n);
        let mut ctx = FunctionalContext::new(&sys, g, 1e-2, suggest_a(&sys).scale(scale));
        ctx.forcing = Some(forcing);
        ctx.energy_identity_residual([&w[0], &w[1], &w[2]]).unwrap()
    };
    let (good_c, good_f) = (residual(64, 1.0), residual(128, 1.0));
    let (bad_c, bad_f) = (residual(64, 2.0), residual(128, 2.0));
    assert!(good_c / good_f > 3.0, "{good_c} {good_f}");
    assert!(bad_c / bad_f < 1.5, "{bad_c} {bad_f}");
    assert!(bad_f > 100.0 * good_f);
}

#[test]
fn weak_dissipation_keeps_d1_nonpositive() {
    let (sys, g, w, e, forcing) = manufactured_window(64);
    let mut ctx = FunctionalContext::new(&sys, g, 1e-2, suggest_a(&sys));
    ctx.forcing = Some(forcing);
    let r = ctx.relative_entropy_residual([&w[0], &w[1], &w[2]], [&e[0], &e[1], &e[2]]).unwrap();
    assert!(r.d1_max <= 1e-15, "{}", r.d1_max);
    assert!(r.terms.d1 <= 0.0);
}

#[test]
fn d2_bounded_by_source_size_for_linear_decay() {
    let lambda = 1.5;
    let sys = make_linear_reaction::<f64>(1.0, lambda).unwrap();
    let g = grid(64);
    let eps = 1e-2;
    let s = RelaxationSolver::new(&sys, g, SolverConfig::new(eps, suggest_a(&sys))).unwrap();
    let u0 = Profile::from_fn(&g, 1, |x| vec![(2.0 * PI * x).sin()]);
    let h = g.dx();
    let trace = s.run(u0, Initialization::WellPrepared, &[0.3 - h, 0.3, 0.3 + h]).unwrap();
    let exact = |t: f64| Profile::from_fn(&g, 1, |x| vec![(-lambda * t).exp() * (2.0 * PI * (x - t)).sin()]);
    let e: Vec<_> = trace.snapshots.iter().map(|f| with_derivatives(&sys, &g, exact(f.time), f.time, None)).collect();
    let ctx = FunctionalContext::new(&sys, g, eps, suggest_a(&sys));
    let w = &trace.snapshots;
    let r = ctx.relative_entropy_residual([&w[0], &w[1], &w[2]], [&e[0], &e[1], &e[2]]).unwrap();
    let g_sup = e[1].u.data.iter().fold(0.0f64, |m, &u| m.max((lambda * u).abs()));
    let diff2 = w[1].u.sub(&e[1].u).l2_squared(g.dx());
    assert!(r.terms.d2.abs() <= sys.constants.alpha * g_sup * diff2 + 1e-15);
}

#[test]
fn no_source_means_no_source_dissipation() {
    let sys = undamped();
    let g = grid(32);
    let eps = 1e-2;
    let s = RelaxationSolver::new(&sys, g, SolverConfig::new(eps, suggest_a(&sys))).unwrap();
    let trace = s.run(smooth(&g), Initialization::WellPrepared, &uniform_schedule(0.1, 4)).unwrap();
    let ctx = FunctionalContext::new(&sys, g, eps, suggest_a(&sys));
    let rep = ctx.dissipation_decomposition(&trace.snapshots, &SaturatedEntropy { radius: 2.0 });
    assert!(rep.samples.iter().all(|s| s.i5 == 0.0 && s.i6.is_none()));
    assert_eq!(rep.i5_total, 0.0);
    assert!(rep.i3_total > 0.0);
}

#[test]
fn alternative_model_reports_source_derivative_term() {
    let sys = damped();
    let g = grid(32);
    let eps = 1e-2;
    let mut cfg = SolverConfig::new(eps, suggest_a(&sys));
    cfg.model = Model::Alternative;
    let s = RelaxationSolver::new(&sys, g, cfg).unwrap();
    let trace = s.run(smooth(&g), Initialization::WellPrepared, &uniform_schedule(0.1, 2)).unwrap();
    let mut ctx = FunctionalContext::new(&sys, g, eps, suggest_a(&sys));
    ctx.model = Model::Alternative;
    let rep = ctx.dissipation_decomposition(&trace.snapshots, &SaturatedEntropy { radius: 2.0 });
    assert!(rep.i6_total.unwrap() > 0.0);
    let w = &trace.snapshots;
    assert!(ctx.energy_identity_residual([&w[0], &w[1], &w[2]]).is_err());
}

#[test]
fn saturated_entropy_matches_finite_differences() {
    let sys = damped();
    let test = SaturatedEntropy { radius: 1.5 };
    let u = [0.8, -2.3];
    let h = 1e-6;
    let g = test.gradient(&sys, &u);
    let hess = test.hessian(&sys, &u);
    for k in 0..2 {
        let mut up = u;
        let mut um = u;
        up[k] += h;
        um[k] -= h;
        let (gp, gm) = (test.gradient(&sys, &up), test.gradient(&sys, &um));
        for j in 0..2 {
            assert_relative_eq!(hess.row(j)[k], (gp[j] - gm[j]) / (2.0 * h), epsilon = 1e-6);
        }
    }
    assert!(g.iter().all(|x| x.is_finite()));
}

#[test]
fn functionals_are_nonnegative_along_a_run() {
    let sys = damped();
    let g = grid(64);
    let eps = 5e-3;
    let s = RelaxationSolver::new(&sys, g, SolverConfig::new(eps, suggest_a(&sys))).unwrap();
    let schedule = uniform_schedule(0.3, 6);
    let trace = s.run(at_rest(&g), Initialization::WellPrepared, &schedule).unwrap();
    let reference = relax_core::equilibrium::solve_balance_law(
        &sys,
        &g,
        &|x| vec![0.1 * (2.0 * PI * x).sin(), 0.0],
        &Default::default(),
        &schedule,
    )
    .unwrap();
    let ctx = FunctionalContext::new(&sys, g, eps, suggest_a(&sys));
    let rows = functional_trace(&ctx, &trace.snapshots, Some(&reference.snapshots), &SaturatedEntropy { radius: 2.0 });
    assert_eq!(rows.len(), schedule.len());
    for (k, r) in rows.iter().enumerate() {
        assert!(r.phi >= 0.0 && r.psi.unwrap() >= 0.0 && r.lyapunov.unwrap() >= 0.0);
        assert!(r.potential.unwrap() >= 0.0 && r.relative_potential.unwrap() >= 0.0);
        let interior = k > 0 && k + 1 < rows.len();
        assert_eq!(r.energy_residual.is_some(), interior);
        assert_eq!(r.error_terms.is_some(), interior);
    }
}
