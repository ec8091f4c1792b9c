use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use relax_core::config::{RunConfig, SystemName};
use relax_core::functionals::{functional_trace, SaturatedEntropy};
use relax_core::harness::acceptance::{Acceptance, AcceptanceOptions, CriterionOutcome};
use relax_core::harness::{
    dx_sweep, eps_sweep, residual_sweep, stability_report, with_pool, ConvergenceTable, RateExpectation, SweepOptions,
};
use relax_core::hypotheses::{check_all, CheckOptions, CheckSuite};
use relax_core::linalg::Matrix;
use relax_core::output::{
    output_root, write_equilibrium_csv, write_functional_csv, write_json, write_plot_file, write_snapshot_csv,
    write_table_csv, OutputDir,
};
use relax_core::solver::{Initialization, Order, RelaxationSolver};

use crate::{Cli, Command, ConfigSource, EXIT_ASSERT_FAILED, EXIT_CHECK_FAILED};

pub fn dispatch(cli: Cli) -> Result<u8> {
    let jobs = cli.jobs;
    with_pool(jobs, move || match cli.command {
        Command::Check { system, strict, samples, seed, a, alternative, out } => {
            check(&system, strict, samples, seed, &a, alternative, out.as_deref())
        }
        Command::Run { source, no_reference } => run(&source, !no_reference),
        Command::SweepEps { source, eps_list, assert, no_floor_check } => {
            sweep_eps(&source, &eps_list, assert, !no_floor_check)
        }
        Command::SweepDx { source, cells_list, speed, identities, assert } => {
            sweep_dx(&source, &cells_list, speed, identities, assert)
        }
        Command::Report { criteria, inputs, assert, out } => report(criteria, &inputs, assert, out.as_deref()),
    })?
}

fn load_config(source: &ConfigSource) -> Result<RunConfig> {
    let mut cfg = match (&source.config, &source.system) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            RunConfig::from_json(&text)?
        }
        (None, Some(name)) => RunConfig::default_for(SystemName::parse(name)?),
        (None, None) => bail!("either --config or --system is required"),
    };
    if let Some(e) = source.eps {
        cfg.eps = e;
    }
    if let Some(n) = source.cells {
        cfg.grid.n = n;
    }
    if let Some(t) = source.t_end {
        cfg.t_end = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn output_dir(source: &ConfigSource, command: &str, cfg: &RunConfig) -> Result<OutputDir> {
    let dir = match &source.out {
        Some(p) => p.clone(),
        None => output_root(None).join(format!("{command}-{}-{}", cfg.system, &cfg.hash()?[..12])),
    };
    Ok(OutputDir::create(dir)?)
}

fn relaxation_matrix(spec: &str, n: usize, suggested: Matrix<f64>) -> Result<Matrix<f64>> {
    if spec == "suggest" {
        return Ok(suggested);
    }
    let c: f64 = spec.parse().with_context(|| format!("--a expects `suggest` or a number, got `{spec}`"))?;
    Ok(Matrix::scaled_identity(n, c))
}

fn check(
    system: &str,
    strict: bool,
    samples: usize,
    seed: u32,
    a: &str,
    alternative: bool,
    out: Option<&Path>,
) -> Result<u8> {
    let cfg = RunConfig::default_for(SystemName::parse(system)?);
    let sys = cfg.system()?;
    let a = relaxation_matrix(a, sys.dim(), cfg.relaxation_matrix(&sys)?)?;
    let opts = CheckOptions { samples, seed, ..Default::default() };
    let suite = check_all(&sys, &a, alternative, &opts)?;
    let text = serde_json::to_string_pretty(&suite)?;
    println!("{text}");
    if let Some(path) = out {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, format!("{text}\n"))?;
    }
    Ok(if strict && !suite.passed { EXIT_CHECK_FAILED } else { 0 })
}

fn run(source: &ConfigSource, with_reference: bool) -> Result<u8> {
    let cfg = load_config(source)?;
    let sc = cfg.scenario()?;
    let mut out = output_dir(source, "run", &cfg)?;
    let solver = RelaxationSolver::new(&sc.system, sc.grid, sc.solver_config(cfg.eps))?;
    let schedule = sc.schedule();
    let trace = solver.run(sc.initial_profile(), Initialization::WellPrepared, &schedule)?;
    let reference = if with_reference { Some(sc.reference()?) } else { None };

    for (k, snap) in trace.snapshots.iter().enumerate() {
        write_snapshot_csv(&out.file(&format!("snapshot_{k:04}.csv")), &sc.grid, snap)?;
    }
    if let Some(r) = &reference {
        for (k, snap) in r.snapshots.iter().enumerate() {
            let (global, _) = solver.global_term(&snap.u, snap.time);
            let v = solver.equilibrium_v(&snap.u, &global);
            write_equilibrium_csv(&out.file(&format!("equilibrium_snapshot_{k:04}.csv")), &sc.grid, snap, &v, &global)?;
        }
    }
    let ctx = sc.context(cfg.eps);
    let test = SaturatedEntropy { radius: sc.saturation_radius };
    let rows = functional_trace(&ctx, &trace.snapshots, reference.as_ref().map(|r| r.snapshots.as_slice()), &test);
    write_functional_csv(&out.file("functionals.csv"), &rows)?;

    let dt = &trace.dt_history;
    let summary = json!({
        "system": cfg.system,
        "model": cfg.model,
        "eps": trace.eps,
        "dx": trace.dx,
        "order": cfg.order,
        "limiter": cfg.limiter,
        "steps": dt.len(),
        "dt_min": dt.iter().copied().fold(f64::INFINITY, f64::min),
        "dt_max": dt.iter().copied().fold(0.0, f64::max),
        "snapshots": trace.snapshots.len(),
        "reference_shock_suspected": reference.as_ref().map(|r| r.shock_suspected),
    });
    write_json(&out.file("summary.json"), &summary)?;
    let dir = out.path().to_path_buf();
    out.finish("run", &cfg, json!({ "reference": with_reference }))?;
    println!("{}", dir.display());
    Ok(0)
}

fn write_table_outputs(out: &mut OutputDir, table: &ConvergenceTable) -> Result<()> {
    write_table_csv(&out.file("table.csv"), table)?;
    write_plot_file(&out.file("plot.dat"), table)?;
    Ok(())
}

#[derive(Serialize)]
struct Verdict {
    expectation: String,
    bounds: (f64, f64),
    passed: bool,
}

fn sweep_eps(source: &ConfigSource, eps_list: &[f64], assert: bool, floor_check: bool) -> Result<u8> {
    let cfg = load_config(source)?;
    let sc = cfg.scenario()?;
    let suite: CheckSuite<f64> =
        check_all(&sc.system, &sc.a, false, &CheckOptions { seed: cfg.seed, ..Default::default() })?;
    let expectation = RateExpectation::for_suite(&suite, sc.system.regularity);
    let opts = SweepOptions { jobs: None, floor_check, dissipation: true };
    let sweep = eps_sweep(&sc, eps_list, &opts)?;
    let passed = expectation.accepts(sweep.table.slope) && !sweep.table.degenerate;
    let verdict = Verdict { expectation: format!("{expectation:?}"), bounds: expectation.bounds(), passed };

    let mut out = output_dir(source, "sweep-eps", &cfg)?;
    write_table_outputs(&mut out, &sweep.table)?;
    let summary = json!({
        "system": cfg.system,
        "model": sweep.model,
        "route": suite.route,
        "checks_passed": suite.passed,
        "slope": sweep.table.slope,
        "r2": sweep.table.r2,
        "floor_suspected": sweep.table.floor_suspected,
        "degenerate": sweep.table.degenerate,
        "monotone": sweep.table.monotone(),
        "verdict": verdict,
        "floor": sweep.floor,
        "reference_shock_suspected": sweep.reference_shock_suspected,
        "stability": stability_report(&sweep),
        "rows": sweep.rows,
    });
    write_json(&out.file("summary.json"), &summary)?;
    let dir = out.path().to_path_buf();
    out.finish("sweep-eps", &cfg, json!({ "eps_list": eps_list, "floor_check": floor_check }))?;
    println!("{}: slope {:.3}, r2 {:.4}, {}", dir.display(), sweep.table.slope, sweep.table.r2, pass_word(passed));
    Ok(if assert && !passed { EXIT_ASSERT_FAILED } else { 0 })
}

fn pass_word(passed: bool) -> &'static str {
    if passed {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Accepted slopes for the design order of the scheme.
fn design_order_bounds(order: Order) -> (f64, f64) {
    match order {
        Order::First => (0.8, 1.3),
        Order::Second => (1.6, 2.3),
    }
}

fn sweep_dx(source: &ConfigSource, cells: &[usize], speed: f64, identities: bool, assert: bool) -> Result<u8> {
    let cfg = load_config(source)?;
    let sc = cfg.manufactured(speed)?;
    let sweep = dx_sweep(&sc, cells, None)?;
    let bounds = design_order_bounds(sc.order);
    let slope = sweep.table.slope;
    let passed = sweep.table.degenerate || (slope >= bounds.0 && slope <= bounds.1);
    let mut out = output_dir(source, "sweep-dx", &cfg)?;
    write_table_outputs(&mut out, &sweep.table)?;
    let residuals = if identities {
        let (energy, relative) = residual_sweep(&sc, cells, None)?;
        write_table_csv(&out.file("energy_residual.csv"), &energy)?;
        write_table_csv(&out.file("relative_residual.csv"), &relative)?;
        Some(json!({ "energy": energy, "relative": relative }))
    } else {
        None
    };
    let summary = json!({
        "system": cfg.system,
        "eps": sweep.eps,
        "order": sweep.order,
        "slope": slope,
        "r2": sweep.table.r2,
        "degenerate": sweep.table.degenerate,
        "verdict": Verdict { expectation: format!("order {}", sweep.order), bounds, passed },
        "rows": sweep.table.rows,
        "identity_residuals": residuals,
    });
    write_json(&out.file("summary.json"), &summary)?;
    let dir = out.path().to_path_buf();
    out.finish("sweep-dx", &cfg, json!({ "cells_list": cells, "speed": speed, "identities": identities }))?;
    println!("{}: slope {:.3}, r2 {:.4}, {}", dir.display(), slope, sweep.table.r2, pass_word(passed));
    Ok(if assert && !passed { EXIT_ASSERT_FAILED } else { 0 })
}

#[derive(Serialize)]
struct AggregatedRun {
    dir: PathBuf,
    command: String,
    system: String,
    slope: Option<f64>,
    passed: Option<bool>,
}

fn aggregate(dir: &Path) -> Result<AggregatedRun> {
    let manifest = relax_core::output::verify_manifest(dir).with_context(|| format!("verifying {}", dir.display()))?;
    let summary: Value = serde_json::from_str(
        &fs::read_to_string(dir.join("summary.json")).with_context(|| format!("reading {}/summary.json", dir.display()))?,
    )?;
    Ok(AggregatedRun {
        dir: dir.to_path_buf(),
        command: manifest.command,
        system: summary["system"].as_str().unwrap_or("?").to_string(),
        slope: summary["slope"].as_f64(),
        passed: summary["verdict"]["passed"].as_bool(),
    })
}

fn report(criteria: Option<Vec<u8>>, inputs: &[PathBuf], assert: bool, out: Option<&Path>) -> Result<u8> {
    let ids = match criteria {
        Some(ids) => ids,
        None if inputs.is_empty() => (1..=11).collect(),
        None => Vec::new(),
    };
    let acc = Acceptance::new(AcceptanceOptions::default());
    let mut outcomes: Vec<CriterionOutcome> = Vec::new();
    for id in ids {
        let outcome = acc.criterion(id).with_context(|| format!("unknown criterion {id}"))?;
        println!("{outcome}");
        outcomes.push(outcome);
    }
    let runs = inputs.iter().map(|d| aggregate(d)).collect::<Result<Vec<_>>>()?;
    for r in &runs {
        let verdict = r.passed.map_or("n/a", pass_word);
        let slope = r.slope.map_or_else(|| "n/a".to_string(), |s| format!("{s:.3}"));
        println!("{} {} {} slope {slope} {verdict}", r.dir.display(), r.command, r.system);
    }
    let failed = outcomes.iter().any(|o| !o.passed) || runs.iter().any(|r| r.passed == Some(false));
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| output_root(None).join("report"));
    fs::create_dir_all(&dir)?;
    write_json(&dir.join("report.json"), &json!({ "criteria": outcomes, "runs": runs, "passed": !failed }))?;
    Ok(if assert && failed { EXIT_ASSERT_FAILED } else { 0 })
}
