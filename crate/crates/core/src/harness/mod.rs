//! Parameter sweeps, rate fits and the acceptance checks built on them.

pub mod acceptance;
mod scenarios;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use scenarios::{
    combustion_scenario, elasticity_scenario, elasticity_wave, linear_reaction_scenario, InitialData, Scenario,
};

use crate::equilibrium::{manufactured_forcing, manufactured_trace, ManufacturedSolution, TravellingWave};
use crate::error::{Error, Result};
use crate::functionals::{DissipationReport, FunctionalContext, SaturatedEntropy};
use crate::hypotheses::{CheckSuite, Route};
use crate::linalg::Matrix;
use crate::solver::{Grid, Initialization, Limiter, Model, Order, Profile, RelaxationSolver, SolverConfig};
use crate::systems::{SourceRegularity, SystemDefinition};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Eps,
    Dx,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMeasure {
    SupTPsi,
    FinalL2VsExact,
    ResidualL1,
}

/// Least-squares slope and coefficient of determination of `log error` against `log parameter`.
pub fn fit_rate(rows: &[(f64, f64)]) -> Result<(f64, f64)> {
    if rows.len() < 3 {
        return Err(Error::TooFewRows(rows.len()));
    }
    if let Some(&(p, e)) = rows.iter().find(|&&(p, e)| !(p > 0.0 && e > 0.0)) {
        return Err(Error::InvalidParameter(format!("rate fit needs positive values, got ({p}, {e})")));
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.0.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.1.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("rate fit needs distinct parameter values".into()));
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    Ok((slope, r2))
}

/// Errors below this are treated as round-off and make a table degenerate.
pub const ROUND_OFF: f64 = 1e-24;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub parameter: SweepParameter,
    pub measure: ErrorMeasure,
    /// `(parameter, error)`, parameter descending.
    pub rows: Vec<(f64, f64)>,
    pub slope: f64,
    pub r2: f64,
    /// Set when `r2 < 0.98`.
    pub floor_suspected: bool,
    /// Set when every error is at round-off level; slope and `r2` are then zero.
    pub degenerate: bool,
}

impl ConvergenceTable {
    pub fn new(parameter: SweepParameter, measure: ErrorMeasure, mut rows: Vec<(f64, f64)>) -> Result<Self> {
        if rows.len() < 3 {
            return Err(Error::TooFewRows(rows.len()));
        }
        rows.sort_by(|a, b| b.0.total_cmp(&a.0));
        if rows.iter().all(|r| r.1.abs() <= ROUND_OFF) {
            return Ok(Self { parameter, measure, rows, slope: 0.0, r2: 0.0, floor_suspected: false, degenerate: true });
        }
        let (slope, r2) = fit_rate(&rows)?;
        Ok(Self { parameter, measure, rows, slope, r2, floor_suspected: r2 < 0.98, degenerate: false })
    }

    /// Errors never increase as the parameter decreases.
    pub fn monotone(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].1 <= w[0].1)
    }
}

/// Rate predicted for the sweep from the checked route and the source regularity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateExpectation {
    /// Slope in `[1.7, 2.3]`.
    Quadratic,
    /// Slope at least `0.8`.
    AtLeastLinear,
}

impl RateExpectation {
    pub fn for_suite<T: crate::Real>(suite: &CheckSuite<T>, regularity: SourceRegularity) -> Self {
        match (suite.route, regularity) {
            (Route::WeaklyDissipative, SourceRegularity::C2) => Self::Quadratic,
            (Route::WeaklyDissipative, _) => Self::AtLeastLinear,
            (Route::General, _) => Self::Quadratic,
        }
    }

    pub fn bounds(self) -> (f64, f64) {
        match self {
            Self::Quadratic => (1.7, 2.3),
            Self::AtLeastLinear => (0.8, f64::INFINITY),
        }
    }

    pub fn accepts(self, slope: f64) -> bool {
        let (lo, hi) = self.bounds();
        slope >= lo && slope <= hi
    }
}

#[derive(Clone, Debug)]
pub struct SweepOptions {
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
    /// Compare against a run on the halved grid at the smallest `eps`.
    pub floor_check: bool,
    /// Computes the dissipation decomposition for every `eps`.
    pub dissipation: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { jobs: None, floor_check: true, dissipation: true }
    }
}

/// Runs `f` on a pool of `jobs` threads, or on the current pool for `None`.
pub fn with_pool<R: Send>(jobs: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match jobs {
        None => Ok(f()),
        Some(j) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(j.max(1))
                .build()
                .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Measurements of one relaxation run against the reference.
#[derive(Clone, Debug, Serialize)]
pub struct EpsRow {
    pub eps: f64,
    pub sup_psi: f64,
    pub final_psi: f64,
    pub phi_initial: f64,
    /// `sup_t phi / phi(0)`.
    pub phi_ratio: f64,
    /// `sup_t (phi + eps int R) / (phi + eps int R)(0)`; `None` without a potential.
    pub energy_ratio: Option<f64>,
    /// `int int |Deta(u) G(u)| dx dt`.
    pub source_work: f64,
    /// Largest integrated `d1` over the snapshots.
    pub d1_max: f64,
    pub steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dissipation: Option<DissipationReport<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FloorCheck {
    pub proxy: f64,
    /// `0.1 * sup_t Psi` at the largest `eps`.
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct EpsSweep {
    pub scenario: String,
    pub model: Model,
    pub table: ConvergenceTable,
    pub rows: Vec<EpsRow>,
    pub floor: Option<FloorCheck>,
    pub reference_shock_suspected: bool,
}

fn trapezoid(times: &[f64], vals: &[f64]) -> f64 {
    times.windows(2).zip(vals.windows(2)).map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1])).sum()
}

fn measure_run(
    sc: &Scenario,
    eps: f64,
    reference: &crate::equilibrium::EquilibriumTrace<f64>,
    dissipation: bool,
) -> Result<EpsRow> {
    let trace = sc.run(eps)?;
    let ctx = sc.context(eps);
    let snaps = &trace.snapshots;
    let psi: Vec<f64> = snaps.iter().zip(&reference.snapshots).map(|(f, e)| ctx.psi(f, e)).collect();
    let phi: Vec<f64> = snaps.iter().map(|f| ctx.phi(f)).collect();
    let times: Vec<f64> = snaps.iter().map(|f| f.time).collect();
    let energy: Option<Vec<f64>> =
        snaps.iter().zip(&phi).map(|(f, p)| ctx.potential_integral(f).map(|r| p + eps * r)).collect();
    let work: Vec<f64> = snaps.iter().map(|f| ctx.source_work(f)).collect();
    let d1_max = snaps
        .iter()
        .zip(&reference.snapshots)
        .map(|(f, e)| ctx.source_pairing(f, e).0)
        .fold(f64::NEG_INFINITY, f64::max);
    let sup = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ratio = |v: &[f64]| if v[0] > 0.0 { sup(v) / v[0] } else { f64::NAN };
    Ok(EpsRow {
        eps,
        sup_psi: sup(&psi),
        final_psi: *psi.last().unwrap_or(&f64::NAN),
        phi_initial: phi[0],
        phi_ratio: ratio(&phi),
        energy_ratio: energy.as_deref().map(ratio),
        source_work: trapezoid(&times, &work),
        d1_max,
        steps: trace.dt_history.len(),
        dissipation: dissipation
            .then(|| ctx.dissipation_decomposition(snaps, &SaturatedEntropy { radius: sc.saturation_radius })),
    })
}

/// Well-prepared runs for every `eps`, measured against one shared reference.
pub fn eps_sweep(sc: &Scenario, eps_list: &[f64], opts: &SweepOptions) -> Result<EpsSweep> {
    if eps_list.len() < 3 {
        return Err(Error::TooFewRows(eps_list.len()));
    }
    if eps_list.windows(2).any(|w| !(w[1] < w[0])) || eps_list.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::InvalidParameter("eps list must be positive and strictly decreasing".into()));
    }
    let reference = sc.reference()?;
    if reference.shock_suspected {
        log::warn!("{}: reference total variation grew by {:.2}; a shock may have formed", sc.name, reference.tv_growth);
    }
    let (rows, floor_run) = with_pool(opts.jobs, || {
        let rows: Result<Vec<EpsRow>> =
            eps_list.par_iter().map(|&eps| measure_run(sc, eps, &reference, opts.dissipation)).collect();
        let floor_run = opts.floor_check.then(|| {
            let eps = *eps_list.last().expect("nonempty");
            let fine = sc.run(eps)?;
            let coarse = sc.with_cells(sc.grid.n / 2)?.run(eps)?;
            let (uf, uc) = (&fine.snapshots.last().expect("snapshot").u, &coarse.snapshots.last().expect("snapshot").u);
            Ok::<f64, Error>(uf.restrict(2).sub(uc).l2_squared(2.0 * sc.grid.dx()))
        });
        (rows, floor_run)
    })?;
    let rows = rows?;
    let table = ConvergenceTable::new(
        SweepParameter::Eps,
        ErrorMeasure::SupTPsi,
        rows.iter().map(|r| (r.eps, r.sup_psi)).collect(),
    )?;
    if table.floor_suspected {
        log::warn!("{}: eps fit has r2 {:.4}; a discretisation floor is suspected", sc.name, table.r2);
    }
    let floor = match floor_run {
        None => None,
        Some(proxy) => {
            let proxy = proxy?;
            let threshold = 0.1 * rows[0].sup_psi;
            if proxy > threshold {
                return Err(Error::DxFloor { proxy, coarsest: rows[0].sup_psi });
            }
            Some(FloorCheck { proxy, threshold, passed: true })
        }
    };
    Ok(EpsSweep {
        scenario: sc.name.clone(),
        model: sc.model,
        table,
        rows,
        floor,
        reference_shock_suspected: reference.shock_suspected,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityRow {
    pub eps: f64,
    pub phi_ratio: f64,
    pub energy_ratio: Option<f64>,
    pub source_work: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityReport {
    pub rows: Vec<StabilityRow>,
    /// `(max - min) / min` of the `phi` ratios.
    pub phi_ratio_spread: f64,
    /// Common constant bounding every energy ratio.
    pub energy_ratio_max: Option<f64>,
}

pub fn stability_report(sweep: &EpsSweep) -> StabilityReport {
    let rows: Vec<StabilityRow> = sweep
        .rows
        .iter()
        .map(|r| StabilityRow {
            eps: r.eps,
            phi_ratio: r.phi_ratio,
            energy_ratio: r.energy_ratio,
            source_work: r.source_work,
        })
        .collect();
    let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r.phi_ratio), b.max(r.phi_ratio)));
    let energy_ratio_max = rows.iter().map(|r| r.energy_ratio).collect::<Option<Vec<f64>>>().map(|v| v.into_iter().fold(f64::NEG_INFINITY, f64::max));
    StabilityReport { phi_ratio_spread: (hi - lo) / lo, energy_ratio_max, rows }
}

/// Manufactured travelling wave driven through the relaxation system.
#[derive(Clone)]
pub struct ManufacturedScenario {
    pub name: String,
    pub system: SystemDefinition<f64>,
    pub a: Matrix<f64>,
    pub wave: TravellingWave<f64>,
    pub xmin: f64,
    pub xmax: f64,
    pub eps: f64,
    pub t_end: f64,
    pub order: Order,
    pub limiter: Limiter,
    pub cfl: f64,
}

impl ManufacturedScenario {
    fn config(&self, forcing: crate::solver::Forcing<f64>) -> SolverConfig<f64> {
        let mut cfg = SolverConfig::new(self.eps, self.a.clone());
        cfg.order = self.order;
        cfg.limiter = self.limiter;
        cfg.cfl = self.cfl;
        cfg.forcing = Some(forcing);
        cfg
    }

    fn grid(&self, n: usize) -> Result<Grid<f64>> {
        Grid::new(self.xmin, self.xmax, n)
    }

    /// Final-time L2 error against the wave with the forcing that makes it exact.
    pub fn exact_error(&self, n: usize) -> Result<f64> {
        let grid = self.grid(n)?;
        let wave = Arc::new(self.wave.clone());
        let forcing = manufactured_forcing(&self.system, wave.clone(), self.eps, &self.a);
        let solver = RelaxationSolver::new(&self.system, grid, self.config(forcing.relaxation))?;
        let u0 = Profile::from_fn(&grid, wave.dim(), |x| wave.value(x, 0.0));
        // v_x = -u_t = c u_x for a travelling wave; the constant in v does not reach u.
        let v0 = u0.map_cells(wave.dim(), |u| u.iter().map(|&x| self.wave.speed * x).collect());
        let trace = solver.run(u0, Initialization::Given(v0), &[0.0, self.t_end])?;
        let last = trace.snapshots.last().expect("snapshot");
        let exact = Profile::from_fn(&grid, wave.dim(), |x| wave.value(x, self.t_end));
        Ok(last.u.sub(&exact).l2_squared(grid.dx()).sqrt())
    }

    /// Energy and relative-entropy identity residuals at `t_end`, using a
    /// window of half-width `dx` and the balance-law forcing on both sides.
    pub fn identity_residuals(&self, n: usize) -> Result<IdentityResiduals> {
        let grid = self.grid(n)?;
        let wave = Arc::new(self.wave.clone());
        let forcing = manufactured_forcing(&self.system, wave.clone(), self.eps, &self.a);
        let solver = RelaxationSolver::new(&self.system, grid, self.config(forcing.equilibrium.clone()))?;
        let u0 = Profile::from_fn(&grid, wave.dim(), |x| wave.value(x, 0.0));
        let h = grid.dx();
        let schedule = [self.t_end - h, self.t_end, self.t_end + h];
        let trace = solver.run(u0, Initialization::WellPrepared, &schedule)?;
        let reference = manufactured_trace(&self.system, &grid, wave.as_ref(), &forcing.equilibrium, &schedule);
        let mut ctx = FunctionalContext::new(&self.system, grid, self.eps, self.a.clone());
        ctx.forcing = Some(forcing.equilibrium);
        let w = [&trace.snapshots[0], &trace.snapshots[1], &trace.snapshots[2]];
        let e = [&reference.snapshots[0], &reference.snapshots[1], &reference.snapshots[2]];
        let energy = ctx.energy_identity_residual(w)?;
        let relative = ctx.relative_entropy_residual(w, e)?;
        Ok(IdentityResiduals { dx: h, energy, relative: relative.residual_l1 })
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct IdentityResiduals {
    pub dx: f64,
    pub energy: f64,
    pub relative: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DxSweep {
    pub scenario: String,
    pub eps: f64,
    pub order: u8,
    pub table: ConvergenceTable,
}

/// Final-time error against the manufactured solution for each cell count.
pub fn dx_sweep(sc: &ManufacturedScenario, cells: &[usize], jobs: Option<usize>) -> Result<DxSweep> {
    let errors: Result<Vec<f64>> = with_pool(jobs, || cells.par_iter().map(|&n| sc.exact_error(n)).collect())?;
    let rows = cells.iter().zip(errors?).map(|(&n, e)| ((sc.xmax - sc.xmin) / n as f64, e)).collect();
    Ok(DxSweep {
        scenario: sc.name.clone(),
        eps: sc.eps,
        order: sc.order.as_int(),
        table: ConvergenceTable::new(SweepParameter::Dx, ErrorMeasure::FinalL2VsExact, rows)?,
    })
}

/// Identity residual tables `(energy, relative entropy)` under grid refinement.
pub fn residual_sweep(
    sc: &ManufacturedScenario,
    cells: &[usize],
    jobs: Option<usize>,
) -> Result<(ConvergenceTable, ConvergenceTable)> {
    let res: Result<Vec<IdentityResiduals>> =
        with_pool(jobs, || cells.par_iter().map(|&n| sc.identity_residuals(n)).collect())?;
    let res = res?;
    let energy = ConvergenceTable::new(
        SweepParameter::Dx,
        ErrorMeasure::ResidualL1,
        res.iter().map(|r| (r.dx, r.energy)).collect(),
    )?;
    let relative = ConvergenceTable::new(
        SweepParameter::Dx,
        ErrorMeasure::ResidualL1,
        res.iter().map(|r| (r.dx, r.relative)).collect(),
    )?;
    Ok((energy, relative))
}
