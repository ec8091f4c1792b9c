use proptest::prelude::*;
use relax_core::config::{RunConfig, SystemName};
use relax_core::harness::{
    dx_sweep, eps_sweep, fit_rate, linear_reaction_scenario, stability_report, ConvergenceTable, ErrorMeasure,
    InitialData, Scenario, SweepOptions, SweepParameter,
};
use relax_core::solver::Grid;
use relax_core::systems::{make_elasticity, ElasticityParams};

fn manufactured_slope(system: SystemName, order: u8) -> f64 {
    let mut cfg = RunConfig::default_for(system);
    cfg.order = order;
    cfg.eps = 1e-2;
    cfg.t_end = 0.25;
    let sc = cfg.manufactured(1.0).unwrap();
    let sweep = dx_sweep(&sc, &[64, 128, 256, 512], Some(2)).unwrap();
    assert!(sweep.table.monotone(), "{:?}", sweep.table.rows);
    sweep.table.slope
}

#[test]
fn first_order_scheme_converges_linearly() {
    for system in [SystemName::LinearReaction, SystemName::Elasticity] {
        let slope = manufactured_slope(system, 1);
        assert!((0.8..=1.3).contains(&slope), "{system}: {slope}");
    }
}

#[test]
fn second_order_scheme_converges_quadratically() {
    for system in [SystemName::LinearReaction, SystemName::Elasticity] {
        let slope = manufactured_slope(system, 2);
        assert!((1.6..=2.3).contains(&slope), "{system}: {slope}");
    }
}

#[test]
fn synthetic_quadratic_rows() {
    let (slope, r2) = fit_rate(&[(1e-2, 1e-4), (1e-3, 1e-6), (1e-4, 1e-8)]).unwrap();
    assert!((slope - 2.0).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
}

#[test]
fn constant_undamped_state_is_perfectly_stable() {
    let sys = make_elasticity(&ElasticityParams { damping_coefficient: 0.0, ..Default::default() }).unwrap();
    let grid = Grid::new(0.0, 1.0, 32).unwrap();
    let mut sc = Scenario::new("constant", sys, grid, std::sync::Arc::new(|_| vec![0.2, -0.1]) as InitialData);
    sc.t_end = 0.1;
    sc.snapshots = 4;
    let opts = SweepOptions { floor_check: false, ..Default::default() };
    // Every run is exact, so the Psi table is degenerate rather than a failed fit.
    let sweep = eps_sweep(&sc, &[1e-2, 5e-3, 2.5e-3], &opts).unwrap();
    assert!(sweep.table.degenerate);
    let report = stability_report(&sweep);
    for r in &report.rows {
        assert!((r.phi_ratio - 1.0).abs() < 1e-12, "{}", r.phi_ratio);
        assert!((r.energy_ratio.unwrap() - 1.0).abs() < 1e-12);
    }
    assert!(report.phi_ratio_spread < 1e-12);
}

#[test]
fn eps_list_must_decrease() {
    let sc = linear_reaction_scenario(64).unwrap();
    assert!(eps_sweep(&sc, &[1e-3, 2e-3, 5e-4], &SweepOptions::default()).is_err());
    assert!(eps_sweep(&sc, &[1e-3, 5e-4], &SweepOptions::default()).is_err());
}

proptest! {
    #[test]
    fn tables_are_sorted_by_decreasing_parameter(
        rows in prop::collection::vec((1e-6f64..1.0, 1e-12f64..1.0), 3..12),
    ) {
        prop_assume!(rows.windows(2).all(|w| w[0].0 != w[1].0));
        let Ok(t) = ConvergenceTable::new(SweepParameter::Dx, ErrorMeasure::FinalL2VsExact, rows.clone()) else {
            return Ok(());
        };
        prop_assert!(t.rows.windows(2).all(|w| w[0].0 > w[1].0));
        prop_assert_eq!(t.rows.len(), rows.len());
        prop_assert_eq!(t.floor_suspected, t.r2 < 0.98);
    }

    #[test]
    fn fitted_slope_recovers_power_law(p in 0.2f64..4.0, c in 1e-3f64..1e3) {
        let rows: Vec<(f64, f64)> = [0.1, 0.05, 0.025, 0.0125].iter().map(|&h: &f64| (h, c * h.powf(p))).collect();
        let (slope, r2) = fit_rate(&rows).unwrap();
        prop_assert!((slope - p).abs() < 1e-9);
        prop_assert!(r2 > 1.0 - 1e-12);
    }
}
