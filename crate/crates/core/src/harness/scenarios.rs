use std::f64::consts::PI;
use std::sync::Arc;

use crate::config::{FourierData, SystemName};
use crate::equilibrium::{reference_trace, BalanceLawConfig, EquilibriumTrace, TravellingWave};
use crate::error::Result;
use crate::functionals::FunctionalContext;
use crate::hypotheses::suggest_a;
use crate::linalg::Matrix;
use crate::solver::{
    uniform_schedule, Grid, Initialization, Limiter, Model, Order, Profile, RelaxationSolver, SolutionTrace, SolverConfig,
};
use crate::systems::{
    make_combustion, make_elasticity, make_linear_reaction, CombustionParams, DampingLaw, ElasticityParams,
    SystemDefinition,
};

pub type InitialData = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

/// A system, grid, initial profile and time window shared by all runs of a sweep.
#[derive(Clone)]
pub struct Scenario {
    pub name: String,
    pub system: SystemDefinition<f64>,
    pub a: Matrix<f64>,
    pub grid: Grid<f64>,
    pub t_end: f64,
    /// Number of intervals in the uniform snapshot schedule.
    pub snapshots: usize,
    pub order: Order,
    pub limiter: Limiter,
    pub model: Model,
    pub cfl: f64,
    pub dt_max: Option<f64>,
    pub initial: InitialData,
    /// Refinement factor of the reference solve.
    pub reference_refine: usize,
    /// Radius of the saturated test entropy.
    pub saturation_radius: f64,
}

impl Scenario {
    pub fn new(name: impl Into<String>, system: SystemDefinition<f64>, grid: Grid<f64>, initial: InitialData) -> Self {
        Self {
            name: name.into(),
            a: suggest_a(&system),
            system,
            grid,
            t_end: 0.5,
            snapshots: 50,
            order: Order::Second,
            limiter: Limiter::Minmod,
            model: Model::Main,
            cfl: 0.45,
            dt_max: None,
            initial,
            reference_refine: 3,
            saturation_radius: 1.0,
        }
    }

    pub fn schedule(&self) -> Vec<f64> {
        if self.t_end == 0.0 {
            return vec![0.0];
        }
        uniform_schedule(self.t_end, self.snapshots.max(1))
    }

    pub fn with_cells(&self, n: usize) -> Result<Self> {
        Ok(Self { grid: Grid::new(self.grid.xmin, self.grid.xmax, n)?, ..self.clone() })
    }

    pub fn with_model(&self, model: Model) -> Self {
        Self { model, name: format!("{}-{}", self.name, model_tag(model)), ..self.clone() }
    }

    pub fn solver_config(&self, eps: f64) -> SolverConfig<f64> {
        let mut cfg = SolverConfig::new(eps, self.a.clone());
        cfg.order = self.order;
        cfg.limiter = self.limiter;
        cfg.model = self.model;
        cfg.cfl = self.cfl;
        cfg.dt_max = self.dt_max;
        cfg
    }

    pub fn initial_profile(&self) -> Profile<f64> {
        Profile::from_fn(&self.grid, self.system.dim(), |x| (self.initial)(x))
    }

    /// Relaxation run from well-prepared data.
    pub fn run(&self, eps: f64) -> Result<SolutionTrace<f64>> {
        let solver = RelaxationSolver::new(&self.system, self.grid, self.solver_config(eps))?;
        solver.run(self.initial_profile(), Initialization::WellPrepared, &self.schedule())
    }

    pub fn reference(&self) -> Result<EquilibriumTrace<f64>> {
        let cfg = BalanceLawConfig { refine: self.reference_refine, order: Order::Second, ..Default::default() };
        let init = self.initial.clone();
        reference_trace(&self.system, &self.grid, &move |x| init(x), &cfg, &self.schedule())
    }

    pub fn context(&self, eps: f64) -> FunctionalContext<'_, f64> {
        let mut ctx = FunctionalContext::new(&self.system, self.grid, eps, self.a.clone());
        ctx.model = self.model;
        ctx
    }
}

fn model_tag(m: Model) -> &'static str {
    match m {
        Model::Main => "main",
        Model::Alternative => "alternative",
    }
}

/// `u_t + u_x = -u` with `u0 = sin(2 pi x)` on `[0, 1]`.
pub fn linear_reaction_scenario(n: usize) -> Result<Scenario> {
    let sys = make_linear_reaction(1.0, 1.0)?;
    let init = FourierData::default_for(SystemName::LinearReaction).profile(0.0, 1.0);
    Ok(Scenario::new("linear_reaction", sys, Grid::new(0.0, 1.0, n)?, init))
}

/// Small smooth strain and velocity waves for damped elasticity.
pub fn elasticity_scenario(damping: DampingLaw, n: usize) -> Result<Scenario> {
    let sys = make_elasticity(&ElasticityParams { damping, ..Default::default() })?;
    let init = FourierData::default_for(SystemName::Elasticity).profile(0.0, 1.0);
    let name = match damping {
        DampingLaw::Linear => "elasticity",
        DampingLaw::PositivePart => "elasticity_positive_part",
    };
    Ok(Scenario::new(name, sys, Grid::new(0.0, 1.0, n)?, init))
}

/// Mixed-phase combustion data with partial burning where `v > 0`.
pub fn combustion_scenario(n: usize) -> Result<Scenario> {
    let sys = make_combustion(&CombustionParams::default())?;
    let init = FourierData::default_for(SystemName::Combustion).profile(0.0, 1.0);
    Ok(Scenario::new("combustion", sys, Grid::new(0.0, 1.0, n)?, init))
}

/// Manufactured elasticity wave used for residual and order checks.
pub fn elasticity_wave() -> TravellingWave<f64> {
    TravellingWave {
        offset: vec![0.0, 0.0],
        amplitude: vec![0.1, 0.1],
        phase: vec![0.0, 0.7],
        kappa: 2.0 * PI,
        speed: 1.0,
    }
}
