//! Reference solutions of the limiting balance law `u_t + F(u)_x = G(u)`.
//!
//! Three sources are available: the closed form for linear transport with
//! decay, manufactured profiles with a matching forcing, and a MUSCL-Hancock
//! finite-volume solve on a refined grid injected back onto the coarse one.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{symmetrizable_eigenvalues, Matrix};
use crate::scalar::{lit, minmod, Real};
use crate::solver::{Forcing, Grid, Order, Profile};
use crate::systems::{SystemDefinition, SystemKind};

/// Reference state with the derivatives the functionals need.
#[derive(Clone, Debug)]
pub struct EquilibriumSnapshot<T> {
    pub time: T,
    pub u: Profile<T>,
    /// `-F(u)_x + G(u) + f`, with central differences for `F(u)_x`.
    pub u_t: Profile<T>,
    pub u_x: Profile<T>,
    pub u_xx: Profile<T>,
}

#[derive(Clone, Debug)]
pub struct EquilibriumTrace<T> {
    pub snapshots: Vec<EquilibriumSnapshot<T>>,
    /// Largest ratio of total variation to its initial value over all components.
    pub tv_growth: T,
    /// Set when the total variation more than doubled (a shock may have formed).
    pub shock_suspected: bool,
}

fn periodic<T: Real>(p: &Profile<T>, i: isize) -> &[T] {
    let n = p.cells() as isize;
    p.cell(i.rem_euclid(n) as usize)
}

/// Central-difference derivatives on a periodic grid.
pub fn with_derivatives<T: Real>(
    sys: &SystemDefinition<T>,
    grid: &Grid<T>,
    u: Profile<T>,
    time: T,
    forcing: Option<&Forcing<T>>,
) -> EquilibriumSnapshot<T> {
    let n = u.comps;
    let cells = u.cells();
    let dx = grid.dx();
    let two = lit::<T>(2.0);
    let flux = u.map_cells(n, |c| sys.flux(c));
    let mut u_t = Profile::zeros(cells, n);
    let mut u_x = Profile::zeros(cells, n);
    let mut u_xx = Profile::zeros(cells, n);
    let mut extra = vec![T::zero(); n];
    for i in 0..cells {
        let ii = i as isize;
        let g = sys.source(u.cell(i));
        if let Some(f) = forcing {
            f(grid.x(ii), time, &mut extra);
        }
        for k in 0..n {
            let (um, u0, up) = (periodic(&u, ii - 1)[k], u.cell(i)[k], periodic(&u, ii + 1)[k]);
            u_x.cell_mut(i)[k] = (up - um) / (two * dx);
            u_xx.cell_mut(i)[k] = (up - two * u0 + um) / (dx * dx);
            let fx = (periodic(&flux, ii + 1)[k] - periodic(&flux, ii - 1)[k]) / (two * dx);
            u_t.cell_mut(i)[k] = -fx + g[k] + if forcing.is_some() { extra[k] } else { T::zero() };
        }
    }
    EquilibriumSnapshot { time, u, u_t, u_x, u_xx }
}

fn total_variation<T: Real>(p: &Profile<T>, k: usize) -> T {
    let n = p.cells() as isize;
    (0..n).map(|i| (periodic(p, i + 1)[k] - periodic(p, i)[k]).abs()).sum()
}

fn trace_from_profiles<T: Real>(
    sys: &SystemDefinition<T>,
    grid: &Grid<T>,
    profiles: Vec<(T, Profile<T>)>,
    forcing: Option<&Forcing<T>>,
) -> EquilibriumTrace<T> {
    let n = sys.dim();
    let tv0: Vec<T> = profiles.first().map_or(vec![], |(_, p)| (0..n).map(|k| total_variation(p, k)).collect());
    let mut tv_growth = T::one();
    for (_, p) in &profiles {
        for k in 0..n {
            if tv0[k] > T::epsilon() {
                tv_growth = tv_growth.max(total_variation(p, k) / tv0[k]);
            }
        }
    }
    let snapshots = profiles.into_iter().map(|(t, u)| with_derivatives(sys, grid, u, t, forcing)).collect();
    EquilibriumTrace { snapshots, tv_growth, shock_suspected: tv_growth > lit(2.0) }
}

fn wrap<T: Real>(grid: &Grid<T>, x: T) -> T {
    let l = grid.length();
    let y = (x - grid.xmin) % l;
    grid.xmin + if y < T::zero() { y + l } else { y }
}

/// Closed form `e^{-lambda t} u0(x - a t)` for linear transport with decay (periodic).
pub fn exact_linear_reaction<T: Real>(
    sys: &SystemDefinition<T>,
    grid: &Grid<T>,
    u0: &(dyn Fn(T) -> Vec<T> + Sync),
    schedule: &[T],
) -> Result<EquilibriumTrace<T>> {
    let SystemKind::LinearReaction { a, lambda } = sys.kind else {
        return Err(Error::Unsupported(format!("no closed form for system `{}`", sys.name)));
    };
    let profiles = schedule
        .iter()
        .map(|&t| {
            let decay = (-lambda * t).exp();
            (t, Profile::from_fn(grid, 1, |x| vec![decay * u0(wrap(grid, x - a * t))[0]]))
        })
        .collect();
    Ok(trace_from_profiles(sys, grid, profiles, None))
}

/// Smooth space-time profile with analytic derivatives.
pub trait ManufacturedSolution<T: Real>: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: T, t: T) -> Vec<T>;
    fn d_x(&self, x: T, t: T) -> Vec<T>;
    fn d_xx(&self, x: T, t: T) -> Vec<T>;
    fn d_t(&self, x: T, t: T) -> Vec<T>;
    fn d_tt(&self, x: T, t: T) -> Vec<T>;
}

/// `u_k = offset_k + amplitude_k sin(kappa (x - c t) + phase_k)`.
#[derive(Clone, Debug)]
pub struct TravellingWave<T> {
    pub offset: Vec<T>,
    pub amplitude: Vec<T>,
    pub phase: Vec<T>,
    /// Angular wavenumber.
    pub kappa: T,
    pub speed: T,
}

impl<T: Real> TravellingWave<T> {
    fn arg(&self, k: usize, x: T, t: T) -> T {
        self.kappa * (x - self.speed * t) + self.phase[k]
    }

    fn map(&self, f: impl Fn(usize, T) -> T, x: T, t: T) -> Vec<T> {
        (0..self.dim()).map(|k| f(k, self.arg(k, x, t))).collect()
    }
}

impl<T: Real> ManufacturedSolution<T> for TravellingWave<T> {
    fn dim(&self) -> usize {
        self.offset.len()
    }

    fn value(&self, x: T, t: T) -> Vec<T> {
        self.map(|k, s| self.offset[k] + self.amplitude[k] * s.sin(), x, t)
    }

    fn d_x(&self, x: T, t: T) -> Vec<T> {
        self.map(|k, s| self.amplitude[k] * self.kappa * s.cos(), x, t)
    }

    fn d_xx(&self, x: T, t: T) -> Vec<T> {
        self.map(|k, s| -self.amplitude[k] * self.kappa * self.kappa * s.sin(), x, t)
    }

    fn d_t(&self, x: T, t: T) -> Vec<T> {
        self.d_x(x, t).into_iter().map(|d| -self.speed * d).collect()
    }

    fn d_tt(&self, x: T, t: T) -> Vec<T> {
        self.d_xx(x, t).into_iter().map(|d| self.speed * self.speed * d).collect()
    }
}

/// Forcings that make a manufactured profile exact.
#[derive(Clone)]
pub struct ManufacturedForcing<T> {
    /// `f_eq = u_t + DF(u) u_x - G(u)` for the balance law.
    pub equilibrium: Forcing<T>,
    /// `f_rx = f_eq + eps (u_tt - A u_xx)` for the second-order relaxation form.
    pub relaxation: Forcing<T>,
}

pub fn manufactured_forcing<T: Real>(
    sys: &SystemDefinition<T>,
    sol: Arc<dyn ManufacturedSolution<T>>,
    eps: T,
    a: &Matrix<T>,
) -> ManufacturedForcing<T> {
    let law = sys.law.clone();
    let sol_eq = sol.clone();
    let f_eq = move |x: T, t: T, out: &mut [T]| {
        let u = sol_eq.value(x, t);
        let adv = law.flux_jacobian(&u).matvec(&sol_eq.d_x(x, t));
        law.source(&u, out);
        for ((o, ut), ad) in out.iter_mut().zip(sol_eq.d_t(x, t)).zip(adv) {
            *o = ut + ad - *o;
        }
    };
    let f_eq: Forcing<T> = Arc::new(f_eq);
    let inner = f_eq.clone();
    let a = a.clone();
    let f_rx = move |x: T, t: T, out: &mut [T]| {
        inner(x, t, out);
        let axx = a.matvec(&sol.d_xx(x, t));
        for ((o, tt), ax) in out.iter_mut().zip(sol.d_tt(x, t)).zip(axx) {
            *o = *o + eps * (tt - ax);
        }
    };
    ManufacturedForcing { equilibrium: f_eq, relaxation: Arc::new(f_rx) }
}

/// Manufactured profile sampled on the schedule, derivatives by central differences.
pub fn manufactured_trace<T: Real>(
    sys: &SystemDefinition<T>,
    grid: &Grid<T>,
    sol: &dyn ManufacturedSolution<T>,
    forcing: &Forcing<T>,
    schedule: &[T],
) -> EquilibriumTrace<T> {
    let profiles = schedule.iter().map(|&t| (t, Profile::from_fn(grid, sol.dim(), |x| sol.value(x, t)))).collect();
    trace_from_profiles(sys, grid, profiles, Some(forcing))
}

#[derive(Clone)]
pub struct BalanceLawConfig<T> {
    pub cfl: T,
    pub order: Order,
    /// Odd refinement factor; the middle fine cell shares the coarse cell centre.
    pub refine: usize,
    pub forcing: Option<Forcing<T>>,
}

impl<T: Real> Default for BalanceLawConfig<T> {
    fn default() -> Self {
        Self { cfl: lit(0.45), order: Order::Second, refine: 3, forcing: None }
    }
}

/// Spectral radius of `DF(u)`, via symmetrisation by the entropy Hessian when possible.
pub fn characteristic_speed<T: Real>(sys: &SystemDefinition<T>, u: &[T]) -> T {
    if let Some(s) = sys.law.wave_speed(u) {
        return s;
    }
    let df = sys.law.flux_jacobian(u);
    match symmetrizable_eigenvalues(&df, &sys.law.entropy_hessian(u)) {
        Some(ev) => ev.iter().fold(T::zero(), |m, &x| m.max(x.abs())),
        None => (0..df.rows()).map(|i| df.row(i).iter().map(|x| x.abs()).sum::<T>()).fold(T::zero(), T::max),
    }
}

struct FineSolver<'a, T: Real> {
    sys: &'a SystemDefinition<T>,
    grid: Grid<T>,
    cfg: &'a BalanceLawConfig<T>,
}

impl<T: Real> FineSolver<'_, T> {
    /// Heun sub-step for `u' = G(u) + f(x, t)`.
    fn source_step(&self, u: &mut Profile<T>, h: T, t: T) {
        let n = u.comps;
        let mut g0 = vec![T::zero(); n];
        let mut g1 = vec![T::zero(); n];
        let mut f0 = vec![T::zero(); n];
        let mut f1 = vec![T::zero(); n];
        for i in 0..u.cells() {
            let x = self.grid.x(i as isize);
            if let Some(f) = &self.cfg.forcing {
                f(x, t, &mut f0);
                f(x, t + h, &mut f1);
            }
            let c = u.cell_mut(i);
            self.sys.law.source(c, &mut g0);
            let pred: Vec<T> = (0..n).map(|k| c[k] + h * (g0[k] + f0[k])).collect();
            self.sys.law.source(&pred, &mut g1);
            for k in 0..n {
                c[k] = c[k] + h * lit(0.5) * (g0[k] + f0[k] + g1[k] + f1[k]);
            }
        }
    }

    fn max_speed(&self, u: &Profile<T>) -> Vec<T> {
        (0..u.cells()).map(|i| characteristic_speed(self.sys, u.cell(i))).collect()
    }

    /// MUSCL-Hancock step with local Lax-Friedrichs fluxes.
    fn transport_step(&self, u: &mut Profile<T>, dt: T, speeds: &[T]) {
        let n = u.comps;
        let cells = u.cells() as isize;
        let half = lit::<T>(0.5);
        let lam = dt / self.grid.dx();
        let mut left = Profile::zeros(u.cells(), n);
        let mut right = Profile::zeros(u.cells(), n);
        let mut fl = vec![T::zero(); n];
        let mut fr = vec![T::zero(); n];
        for i in 0..cells {
            let (um, u0, up) = (periodic(u, i - 1), periodic(u, i), periodic(u, i + 1));
            for k in 0..n {
                let s = match self.cfg.order {
                    Order::First => T::zero(),
                    Order::Second => minmod(up[k] - u0[k], u0[k] - um[k]),
                };
                left.cell_mut(i as usize)[k] = u0[k] - half * s;
                right.cell_mut(i as usize)[k] = u0[k] + half * s;
            }
            if self.cfg.order == Order::Second {
                self.sys.law.flux(left.cell(i as usize), &mut fl);
                self.sys.law.flux(right.cell(i as usize), &mut fr);
                for k in 0..n {
                    let d = half * lam * (fr[k] - fl[k]);
                    left.cell_mut(i as usize)[k] = left.cell(i as usize)[k] - d;
                    right.cell_mut(i as usize)[k] = right.cell(i as usize)[k] - d;
                }
            }
        }
        // Face i + 1/2 between cells i and i + 1.
        let mut faces = Profile::zeros(u.cells(), n);
        for i in 0..cells {
            let j = (i + 1).rem_euclid(cells) as usize;
            let (ul, ur) = (right.cell(i as usize), left.cell(j));
            self.sys.law.flux(ul, &mut fl);
            self.sys.law.flux(ur, &mut fr);
            let s = speeds[i as usize].max(speeds[j]);
            for k in 0..n {
                faces.cell_mut(i as usize)[k] = half * (fl[k] + fr[k]) - half * s * (ur[k] - ul[k]);
            }
        }
        for i in 0..cells {
            for k in 0..n {
                let d = periodic(&faces, i)[k] - periodic(&faces, i - 1)[k];
                u.cell_mut(i as usize)[k] = u.cell(i as usize)[k] - lam * d;
            }
        }
    }
}

/// Finite-volume reference on a grid refined by `cfg.refine`, injected back onto `grid`.
pub fn solve_balance_law<T: Real>(
    sys: &SystemDefinition<T>,
    grid: &Grid<T>,
    u0: &(dyn Fn(T) -> Vec<T> + Sync),
    cfg: &BalanceLawConfig<T>,
    schedule: &[T],
) -> Result<EquilibriumTrace<T>> {
    if cfg.refine.is_multiple_of(2) {
        return Err(Error::InvalidParameter("reference refinement factor must be odd".into()));
    }
    let fine = grid.refined(cfg.refine);
    let solver = FineSolver { sys, grid: fine, cfg };
    let mut u = Profile::from_fn(&fine, sys.dim(), u0);
    let mut t = T::zero();
    let mid = cfg.refine / 2;
    let inject = |p: &Profile<T>| {
        let mut out = Profile::zeros(grid.n, p.comps);
        for i in 0..grid.n {
            out.cell_mut(i).copy_from_slice(p.cell(i * cfg.refine + mid));
        }
        out
    };
    let mut profiles = Vec::with_capacity(schedule.len());
    for &target in schedule {
        while t < target {
            let speeds = solver.max_speed(&u);
            let smax = speeds.iter().fold(T::epsilon(), |m, &s| m.max(s));
            let mut dt = cfg.cfl * fine.dx() / smax;
            if t + dt >= target - lit::<T>(1e-12) * target.abs().max(T::one()) {
                dt = target - t;
            }
            let half = dt * lit(0.5);
            solver.source_step(&mut u, half, t);
            solver.transport_step(&mut u, dt, &speeds);
            solver.source_step(&mut u, half, t + half);
            t = if dt == target - t { target } else { t + dt };
            if !u.is_finite() {
                return Err(Error::NonFinite { time: crate::scalar::to_f64(t) });
            }
        }
        profiles.push((target, inject(&u)));
    }
    Ok(trace_from_profiles(sys, grid, profiles, cfg.forcing.as_ref()))
}

/// Closed form when the system has one, otherwise the refined finite-volume solve.
pub fn reference_trace<T: Real>(
    sys: &SystemDefinition<T>,
    grid: &Grid<T>,
    u0: &(dyn Fn(T) -> Vec<T> + Sync),
    cfg: &BalanceLawConfig<T>,
    schedule: &[T],
) -> Result<EquilibriumTrace<T>> {
    match sys.kind {
        SystemKind::LinearReaction { .. } if cfg.forcing.is_none() => exact_linear_reaction(sys, grid, u0, schedule),
        _ => solve_balance_law(sys, grid, u0, cfg, schedule),
    }
}
