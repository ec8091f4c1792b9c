use std::f64::consts::PI;

use approx::assert_relative_eq;
use proptest::prelude::*;
use relax_core::hypotheses::suggest_a;
use relax_core::linalg::Matrix;
use relax_core::solver::{uniform_schedule, Grid, Initialization, Limiter, Model, Order, Profile, RelaxationSolver, SolverConfig};
use relax_core::systems::{
    make_combustion, make_elasticity, make_linear_reaction, CombustionParams, ElasticityParams, SystemDefinition,
};

fn grid(n: usize) -> Grid<f64> {
    Grid::new(0.0, 1.0, n).unwrap()
}

fn cfg(sys: &SystemDefinition<f64>, eps: f64) -> SolverConfig<f64> {
    SolverConfig::new(eps, suggest_a(sys))
}

fn linear(a: f64, lambda: f64) -> SystemDefinition<f64> {
    make_linear_reaction(a, lambda).unwrap()
}

fn undamped_elasticity() -> SystemDefinition<f64> {
    make_elasticity(&ElasticityParams { damping_coefficient: 0.0, ..Default::default() }).unwrap()
}

#[test]
fn global_term_of_unit_source() {
    // G(u) = u for lambda = -1.
    let sys = linear(1.0, -1.0);
    let g = grid(4);
    let s = RelaxationSolver::new(&sys, g, cfg(&sys, 1e-2)).unwrap();
    let (r, jump) = s.global_term(&Profile::from_fn(&g, 1, |_| vec![1.0]), 0.0);
    for (got, want) in r.component(0).iter().zip([0.125, 0.375, 0.625, 0.875]) {
        assert_relative_eq!(*got, want, max_relative = 1e-15);
    }
    assert_relative_eq!(jump[0], 1.0);
}

#[test]
fn global_term_vanishes_without_source() {
    let sys = linear(1.0, 0.0);
    let g = grid(16);
    let s = RelaxationSolver::new(&sys, g, cfg(&sys, 1e-2)).unwrap();
    let (r, jump) = s.global_term(&Profile::from_fn(&g, 1, |x| vec![(2.0 * PI * x).sin()]), 0.0);
    assert!(r.data.iter().all(|&x| x == 0.0));
    assert_eq!(jump, vec![0.0]);
}

#[test]
fn global_term_of_linear_profile_is_second_order() {
    let sys = linear(1.0, -1.0);
    for n in [16, 32] {
        let g = grid(n);
        let s = RelaxationSolver::new(&sys, g, cfg(&sys, 1e-2)).unwrap();
        let (r, _) = s.global_term(&Profile::from_fn(&g, 1, |x| vec![x]), 0.0);
        let err = g.centers().iter().zip(r.component(0)).map(|(x, r)| (r - x * x / 2.0).abs()).fold(0.0, f64::max);
        // The half cell next to the left edge integrates the cell value, not x.
        assert!(err <= g.dx() * g.dx(), "n={n}: {err}");
    }
}

#[test]
fn well_prepared_constant_state_with_decay() {
    let (lambda, c) = (1.0, 0.7);
    let sys = linear(1.0, lambda);
    let g = grid(8);
    let s = RelaxationSolver::new(&sys, g, cfg(&sys, 1e-2)).unwrap();
    let f = s.initial_field(Profile::from_fn(&g, 1, |_| vec![c]), Initialization::WellPrepared, 0.0).unwrap();
    for (i, x) in g.centers().into_iter().enumerate() {
        assert_relative_eq!(f.global_term.cell(i)[0], -lambda * c * x, max_relative = 1e-14);
        assert_relative_eq!(f.v.cell(i)[0], c + lambda * c * x, max_relative = 1e-14);
    }
}

#[test]
fn well_prepared_elasticity_at_rest_is_flux() {
    let sys = make_elasticity::<f64>(&ElasticityParams::default()).unwrap();
    let g = grid(32);
    let s = RelaxationSolver::new(&sys, g, cfg(&sys, 1e-2)).unwrap();
    let u0 = Profile::from_fn(&g, 2, |x| vec![0.1 * (2.0 * PI * x).sin(), 0.0]);
    let f = s.initial_field(u0.clone(), Initialization::WellPrepared, 0.0).unwrap();
    assert!(f.global_term.data.iter().all(|&r| r == 0.0));
    for i in 0..g.n {
        assert_eq!(f.v.cell(i), sys.flux(u0.cell(i)).as_slice());
    }
}

#[test]
fn constant_equilibrium_is_a_fixed_point() {
    let c = [0.3, -0.2];
    let sys = undamped_elasticity();
    let g = grid(32);
    let s = RelaxationSolver::new(&sys, g, cfg(&sys, 1e-3)).unwrap();
    let mut f = s.initial_field(Profile::from_fn(&g, 2, |_| c.to_vec()), Initialization::WellPrepared, 0.0).unwrap();
    let fc = sys.flux(&c);
    for _ in 0..200 {
        s.step(&mut f, s.max_dt()).unwrap();
    }
    for i in 0..g.n {
        for k in 0..2 {
            assert!((f.u.cell(i)[k] - c[k]).abs() < 1e-13);
            assert!((f.v.cell(i)[k] - fc[k]).abs() < 1e-13);
        }
    }
}

/// Exact solution of `eps u'' + u' = -lambda u` with `u(0) = c`, `u'(0) = -lambda c`.
fn telegraph_ode(eps: f64, lambda: f64, c: f64, t: f64) -> f64 {
    let d = (1.0 - 4.0 * eps * lambda).sqrt();
    let (r1, r2) = ((-1.0 + d) / (2.0 * eps), (-1.0 - d) / (2.0 * eps));
    // A + B = c, r1 A + r2 B = -lambda c.
    let a = c * (-lambda - r2) / (r1 - r2);
    a * (r1 * t).exp() + (c - a) * (r2 * t).exp()
}

#[test]
fn homogeneous_data_follows_the_damped_ode() {
    let (eps, lambda, c) = (0.05, 1.0, 2.0);
    let sys = linear(0.0, lambda);
    let g = grid(8);
    let mut config = cfg(&sys, eps);
    config.dt_max = Some(1e-4);
    let s = RelaxationSolver::new(&sys, g, config).unwrap();
    let schedule = uniform_schedule(1.0, 4);
    let trace = s.run(Profile::from_fn(&g, 1, |_| vec![c]), Initialization::WellPrepared, &schedule).unwrap();
    for snap in &trace.snapshots {
        let exact = telegraph_ode(eps, lambda, c, snap.time);
        for &u in &snap.u.data {
            assert!((u - exact).abs() < 1e-3 * c, "t={}: {u} vs {exact}", snap.time);
        }
    }
}

#[test]
fn stiff_step_projects_onto_equilibrium() {
    let sys = make_elasticity::<f64>(&ElasticityParams::default()).unwrap();
    let g = grid(32);
    let s = RelaxationSolver::new(&sys, g, cfg(&sys, 1e-14)).unwrap();
    let u0 = Profile::from_fn(&g, 2, |x| vec![0.1 * (2.0 * PI * x).sin(), 0.2 * (2.0 * PI * x).cos()]);
    let mut f = s.initial_field(u0, Initialization::Given(Profile::zeros(g.n, 2)), 0.0).unwrap();
    s.step(&mut f, s.max_dt()).unwrap();
    let (r, _) = s.global_term(&f.u, f.time);
    let eq = s.equilibrium_v(&f.u, &r);
    for (v, e) in f.v.data.iter().zip(&eq.data) {
        assert!((v - e).abs() < 1e-10, "{v} vs {e}");
    }
}

#[test]
fn zero_final_time_returns_initial_field() {
    let sys = make_elasticity::<f64>(&ElasticityParams::default()).unwrap();
    let g = grid(16);
    let s = RelaxationSolver::new(&sys, g, cfg(&sys, 1e-2)).unwrap();
    let u0 = Profile::from_fn(&g, 2, |x| vec![(2.0 * PI * x).sin(), 0.0]);
    let init = s.initial_field(u0.clone(), Initialization::WellPrepared, 0.0).unwrap();
    let trace = s.run(u0, Initialization::WellPrepared, &[0.0]).unwrap();
    assert_eq!(trace.snapshots.len(), 1);
    assert_eq!(trace.snapshots[0], init);
    assert!(trace.dt_history.is_empty());
}

#[test]
fn time_steps_respect_cfl() {
    let sys = make_combustion::<f64>(&CombustionParams::default()).unwrap();
    let g = grid(64);
    let config = cfg(&sys, 1e-2);
    let bound = config.cfl * g.dx() / (2.0 * sys.constants.alpha).sqrt();
    let s = RelaxationSolver::new(&sys, g, config).unwrap();
    let u0 = Profile::from_fn(&g, 3, |x| vec![0.2 * (2.0 * PI * x).sin(), 0.0, 0.5]);
    let trace = s.run(u0, Initialization::WellPrepared, &uniform_schedule(0.2, 3)).unwrap();
    assert!(!trace.dt_history.is_empty());
    assert!(trace.dt_history.iter().all(|&dt| dt <= bound * (1.0 + 1e-12)));
}

#[test]
fn rejects_mismatched_inputs() {
    let sys = make_elasticity::<f64>(&ElasticityParams::default()).unwrap();
    let g = grid(16);
    assert!(RelaxationSolver::new(&sys, g, SolverConfig::new(1e-2, Matrix::identity(3))).is_err());
    let s = RelaxationSolver::new(&sys, g, cfg(&sys, 1e-2)).unwrap();
    assert!(s.initial_field(Profile::zeros(8, 2), Initialization::WellPrepared, 0.0).is_err());
    assert!(s.run(Profile::zeros(16, 2), Initialization::WellPrepared, &[0.2, 0.1]).is_err());
}

fn final_relaxation_residual(eps: f64) -> f64 {
    let sys = make_elasticity::<f64>(&ElasticityParams::default()).unwrap();
    let g = grid(256);
    let s = RelaxationSolver::new(&sys, g, cfg(&sys, eps)).unwrap();
    let u0 = Profile::from_fn(&g, 2, |x| vec![0.05 * (2.0 * PI * x).sin(), 0.05 * (2.0 * PI * x).cos()]);
    let trace = s.run(u0, Initialization::WellPrepared, &[0.3]).unwrap();
    let f = &trace.snapshots[0];
    let eq = s.equilibrium_v(&f.u, &f.global_term);
    f.v.sub(&eq).l2_squared(g.dx()).sqrt()
}

#[test]
fn distance_to_equilibrium_scales_with_eps() {
    let ratio = final_relaxation_residual(1e-2) / final_relaxation_residual(1e-3);
    assert!(ratio > 5.0 && ratio < 20.0, "ratio {ratio}");
}

fn fourier(n: usize, comps: usize, coeffs: &[(f64, f64)]) -> Profile<f64> {
    Profile::from_fn(&grid(n), comps, |x| {
        (0..comps).map(|k| coeffs[k].0 * (2.0 * PI * x).sin() + coeffs[k].1 * (4.0 * PI * x).cos()).collect()
    })
}

fn totals(p: &Profile<f64>, dx: f64) -> Vec<f64> {
    (0..p.comps).map(|k| p.component(k).iter().sum::<f64>() * dx).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn mass_is_conserved_without_source(
        c in prop::collection::vec((-0.3f64..0.3, -0.3f64..0.3), 3),
        eps in 1e-3f64..1e-1,
        first in any::<bool>(),
        unlimited in any::<bool>(),
    ) {
        let sys = make_combustion::<f64>(&CombustionParams { rate: 0.0, ..Default::default() }).unwrap();
        let g = grid(64);
        let mut config = cfg(&sys, eps);
        config.order = if first { Order::First } else { Order::Second };
        config.limiter = if unlimited { Limiter::Unlimited } else { Limiter::Minmod };
        let s = RelaxationSolver::new(&sys, g, config).unwrap();
        let u0 = fourier(64, 3, &c);
        let m0 = totals(&u0, g.dx());
        let trace = s.run(u0, Initialization::WellPrepared, &[0.2]).unwrap();
        let m1 = totals(&trace.snapshots[0].u, g.dx());
        for (a, b) in m0.iter().zip(&m1) {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn models_coincide_without_source(
        c in prop::collection::vec((-0.3f64..0.3, -0.3f64..0.3), 2),
        eps in 1e-3f64..1e-1,
        first in any::<bool>(),
    ) {
        let sys = undamped_elasticity();
        let g = grid(32);
        let run = |model| {
            let mut config = cfg(&sys, eps);
            config.model = model;
            config.order = if first { Order::First } else { Order::Second };
            let s = RelaxationSolver::new(&sys, g, config).unwrap();
            s.run(fourier(32, 2, &c), Initialization::WellPrepared, &uniform_schedule(0.1, 2)).unwrap()
        };
        let (main, alt) = (run(Model::Main), run(Model::Alternative));
        prop_assert_eq!(main.snapshots, alt.snapshots);
        prop_assert_eq!(main.dt_history, alt.dt_history);
    }
}

#[test]
fn single_precision_run_tracks_double_precision() {
    let run32 = {
        let sys = make_linear_reaction::<f32>(1.0, 1.0).unwrap();
        let g = Grid::<f32>::new(0.0, 1.0, 64).unwrap();
        let s = RelaxationSolver::new(&sys, g, SolverConfig::new(1e-2, suggest_a(&sys))).unwrap();
        let u0 = Profile::from_fn(&g, 1, |x: f32| vec![(2.0 * std::f32::consts::PI * x).sin()]);
        s.run(u0, Initialization::WellPrepared, &[0.25]).unwrap()
    };
    let sys = linear(1.0, 1.0);
    let g = grid(64);
    let s = RelaxationSolver::new(&sys, g, cfg(&sys, 1e-2)).unwrap();
    let trace = s.run(Profile::from_fn(&g, 1, |x| vec![(2.0 * PI * x).sin()]), Initialization::WellPrepared, &[0.25]).unwrap();
    for (a, b) in run32.snapshots[0].u.data.iter().zip(&trace.snapshots[0].u.data) {
        assert!((*a as f64 - b).abs() < 1e-4);
    }
}
