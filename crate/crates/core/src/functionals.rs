//! Energy, relative-entropy and dissipation functionals evaluated on snapshots.
//!
//! Space derivatives are central differences on the periodic grid. The time
//! derivative of the relaxation solution is read off the first equation,
//! `u_t = -v_x` (plus `G(u)` for the alternative model), with `v` continued
//! across the seam by the stored jump of the global term.

use serde::Serialize;

use crate::equilibrium::EquilibriumSnapshot;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{dot, lit, sub, Real};
use crate::solver::{Forcing, Grid, Model, Profile, RelaxationField};
use crate::systems::SystemDefinition;

/// Everything a functional needs besides the snapshots.
#[derive(Clone)]
pub struct FunctionalContext<'a, T: Real> {
    pub sys: &'a SystemDefinition<T>,
    pub grid: Grid<T>,
    pub eps: T,
    pub a: Matrix<T>,
    pub model: Model,
    /// Forcing attached to the relaxation run (added to `G` in every identity).
    pub forcing: Option<Forcing<T>>,
}

/// Central-difference `u_x` and equation-based `u_t` of a relaxation snapshot.
pub struct FieldDerivatives<T> {
    pub u_x: Profile<T>,
    pub u_t: Profile<T>,
}

impl<'a, T: Real> FunctionalContext<'a, T> {
    pub fn new(sys: &'a SystemDefinition<T>, grid: Grid<T>, eps: T, a: Matrix<T>) -> Self {
        Self { sys, grid, eps, a, model: Model::Main, forcing: None }
    }

    fn dx(&self) -> T {
        self.grid.dx()
    }

    pub fn derivatives(&self, f: &RelaxationField<T>) -> FieldDerivatives<T> {
        let n = f.u.comps;
        let cells = f.u.cells();
        let two_dx = lit::<T>(2.0) * self.dx();
        let mut u_x = Profile::zeros(cells, n);
        let mut u_t = Profile::zeros(cells, n);
        for i in 0..cells {
            let (im, ip) = ((i + cells - 1) % cells, (i + 1) % cells);
            let g = if self.model == Model::Alternative { self.sys.source(f.u.cell(i)) } else { vec![T::zero(); n] };
            for k in 0..n {
                let vm = f.v.cell(im)[k] + if i == 0 { f.seam_jump[k] } else { T::zero() };
                let vp = f.v.cell(ip)[k] - if i + 1 == cells { f.seam_jump[k] } else { T::zero() };
                u_x.cell_mut(i)[k] = (f.u.cell(ip)[k] - f.u.cell(im)[k]) / two_dx;
                u_t.cell_mut(i)[k] = -(vp - vm) / two_dx + g[k];
            }
        }
        FieldDerivatives { u_x, u_t }
    }

    /// `G(u) + f(x, t)` at cell `i`.
    fn total_source(&self, i: usize, t: T, u: &[T]) -> Vec<T> {
        let mut g = self.sys.source(u);
        if let Some(f) = &self.forcing {
            let mut extra = vec![T::zero(); g.len()];
            f(self.grid.x(i as isize), t, &mut extra);
            for (a, b) in g.iter_mut().zip(extra) {
                *a = *a + b;
            }
        }
        g
    }

    fn central_dx(&self, q: &[T]) -> Vec<T> {
        let n = q.len();
        let two_dx = lit::<T>(2.0) * self.dx();
        (0..n).map(|i| (q[(i + 1) % n] - q[(i + n - 1) % n]) / two_dx).collect()
    }

    /// `phi = int |u|^2 + eps^2 |u_x|^2 + eps^2 |u_t|^2 dx`.
    pub fn phi(&self, f: &RelaxationField<T>) -> T {
        let d = self.derivatives(f);
        let e2 = self.eps * self.eps;
        (f.u.l2_squared(T::one()) + e2 * d.u_x.l2_squared(T::one()) + e2 * d.u_t.l2_squared(T::one())) * self.dx()
    }

    /// `Psi = int |ubar - u|^2 + eps^2 |(ubar - u)_x|^2 + eps^2 |(ubar - u)_t|^2 dx`.
    pub fn psi(&self, f: &RelaxationField<T>, eq: &EquilibriumSnapshot<T>) -> T {
        let d = self.derivatives(f);
        let e2 = self.eps * self.eps;
        (eq.u.sub(&f.u).l2_squared(T::one())
            + e2 * eq.u_x.sub(&d.u_x).l2_squared(T::one())
            + e2 * eq.u_t.sub(&d.u_t).l2_squared(T::one()))
            * self.dx()
    }

    /// `int R(u) dx`, if the system has a potential.
    pub fn potential_integral(&self, f: &RelaxationField<T>) -> Option<T> {
        let mut s = T::zero();
        for c in f.u.iter_cells() {
            s = s + self.sys.law.potential(c)?;
        }
        Some(s * self.dx())
    }

    /// `int R(u) - R(ubar) - DR(ubar)(u - ubar) dx`.
    pub fn relative_potential(&self, f: &RelaxationField<T>, eq: &EquilibriumSnapshot<T>) -> Option<T> {
        let law = &self.sys.law;
        let mut s = T::zero();
        for (u, ub) in f.u.iter_cells().zip(eq.u.iter_cells()) {
            let dr = law.potential_grad(ub)?;
            s = s + law.potential(u)? - law.potential(ub)? - dot(&dr, &sub(u, ub));
        }
        Some(s * self.dx())
    }

    /// `int_0^1 int_0^s D2eta(u + eps tau d) dtau ds` by tensor Gauss quadrature.
    pub fn averaged_hessian(&self, u: &[T], d: &[T]) -> Matrix<T> {
        let r = (0.6f64).sqrt();
        let nodes = [(1.0 - r) / 2.0, 0.5, (1.0 + r) / 2.0];
        let weights = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];
        let n = u.len();
        let mut acc = Matrix::zeros(n, n);
        for (&s, &ws) in nodes.iter().zip(&weights) {
            for (&t, &wt) in nodes.iter().zip(&weights) {
                let tau = s * t;
                let p: Vec<T> = u.iter().zip(d).map(|(&a, &b)| a + self.eps * lit::<T>(tau) * b).collect();
                acc = acc.add(&self.sys.law.entropy_hessian(&p).scale(lit(ws * wt * s)));
            }
        }
        acc
    }

    fn alpha(&self) -> T {
        self.sys.constants.alpha
    }

    /// Density of the modulated functional
    /// `H_rel + eps^2 e_t^T (alpha I - avg D2eta) e_t + eps^2 alpha e_x^T A e_x`.
    fn lyapunov_density(&self, u: &[T], ub: &[T], e_t: &[T], e_x: &[T]) -> T {
        let law = &self.sys.law;
        let e2 = self.eps * self.eps;
        let w: Vec<T> = u.iter().zip(e_t).map(|(&a, &b)| a + self.eps * b).collect();
        let h_rel = law.entropy(&w) - law.entropy(ub) - dot(&law.entropy_grad(ub), &sub(&w, ub));
        let n = u.len();
        let m = Matrix::scaled_identity(n, self.alpha()).sub(&self.averaged_hessian(u, e_t));
        h_rel + e2 * m.quad(e_t, e_t) + e2 * self.alpha() * self.a.quad(e_x, e_x)
    }

    /// Integral of the modulated relative-entropy functional.
    pub fn lyapunov(&self, f: &RelaxationField<T>, eq: &EquilibriumSnapshot<T>) -> T {
        let d = self.derivatives(f);
        let mut s = T::zero();
        for i in 0..f.u.cells() {
            let e_t = sub(d.u_t.cell(i), eq.u_t.cell(i));
            let e_x = sub(d.u_x.cell(i), eq.u_x.cell(i));
            s = s + self.lyapunov_density(f.u.cell(i), eq.u.cell(i), &e_t, &e_x);
        }
        s * self.dx()
    }

    fn check_window(&self, times: [T; 3]) -> Result<T> {
        let (d0, d1) = (times[1] - times[0], times[2] - times[1]);
        if !(d0 > T::zero()) || (d0 - d1).abs() > lit::<T>(1e-9) * d0.max(T::one()) {
            return Err(Error::InvalidParameter("residual window needs three equally spaced times".into()));
        }
        Ok(times[2] - times[0])
    }

    /// Pointwise residual of the energy identity at the middle snapshot; returns its L1 norm.
    pub fn energy_identity_residual(&self, w: [&RelaxationField<T>; 3]) -> Result<T> {
        if self.model != Model::Main {
            return Err(Error::Unsupported("energy identity residual is defined for the main model".into()));
        }
        let span = self.check_window([w[0].time, w[1].time, w[2].time])?;
        let law = &self.sys.law;
        let (eps, alpha) = (self.eps, self.alpha());
        let (e2, two) = (eps * eps, lit::<T>(2.0));
        let n = self.sys.dim();
        let cells = w[1].u.cells();
        let density = |f: &RelaxationField<T>| -> Vec<T> {
            let d = self.derivatives(f);
            (0..cells)
                .map(|i| {
                    let (u, ut, ux) = (f.u.cell(i), d.u_t.cell(i), d.u_x.cell(i));
                    let shifted: Vec<T> = u.iter().zip(ut).map(|(&a, &b)| a + eps * b).collect();
                    let m = Matrix::scaled_identity(n, alpha * lit(0.5)).sub(&self.averaged_hessian(u, ut));
                    law.entropy(&shifted)
                        + lit::<T>(0.5) * e2 * alpha * dot(ut, ut)
                        + e2 * alpha * self.a.quad(ux, ux)
                        + e2 * m.quad(ut, ut)
                })
                .collect()
        };
        let (e_lo, e_hi) = (density(w[0]), density(w[2]));
        let mid = w[1];
        let d = self.derivatives(mid);
        let mut q = Vec::with_capacity(cells);
        let mut flux = Vec::with_capacity(cells);
        let mut local = Vec::with_capacity(cells);
        for i in 0..cells {
            let (u, ut, ux) = (mid.u.cell(i), d.u_t.cell(i), d.u_x.cell(i));
            let h = law.entropy_hessian(u);
            let df = law.flux_jacobian(u);
            let deta = law.entropy_grad(u);
            let g = self.total_source(i, mid.time, u);
            let aux = self.a.matvec(ux);
            q.push(law.entropy_flux(u));
            flux.push(eps * dot(&deta, &aux) + two * e2 * alpha * dot(ut, &aux));
            let dfux = df.matvec(ux);
            let mix: Vec<T> = ut.iter().zip(&dfux).map(|(&a, &b)| a + b).collect();
            let m1 = Matrix::scaled_identity(n, alpha).sub(&h);
            let m2 = h.matmul(&self.a).sub(&df.transpose().matmul(&df).scale(alpha));
            let diss = eps * alpha * dot(&mix, &mix) + eps * m1.quad(ut, ut) + eps * m2.quad(ux, ux);
            let rhs_local = dot(&deta, &g) + two * eps * alpha * dot(ut, &g);
            local.push(diss - rhs_local);
        }
        let (qx, fx) = (self.central_dx(&q), self.central_dx(&flux));
        let l1 = (0..cells)
            .map(|i| ((e_hi[i] - e_lo[i]) / span + qx[i] + local[i] - fx[i]).abs())
            .sum::<T>();
        Ok(l1 * self.dx())
    }

    /// Residual of the relative-entropy identity at the middle snapshot, with the
    /// integrated error terms.
    pub fn relative_entropy_residual(
        &self,
        w: [&RelaxationField<T>; 3],
        eq: [&EquilibriumSnapshot<T>; 3],
    ) -> Result<RelativeEntropyReport<T>> {
        if self.model != Model::Main {
            return Err(Error::Unsupported("relative entropy residual is defined for the main model".into()));
        }
        let span = self.check_window([w[0].time, w[1].time, w[2].time])?;
        let law = &self.sys.law;
        let (eps, alpha) = (self.eps, self.alpha());
        let (e2, two) = (eps * eps, lit::<T>(2.0));
        let n = self.sys.dim();
        let cells = w[1].u.cells();
        let g_at = |k: usize| -> Vec<T> {
            let d = self.derivatives(w[k]);
            (0..cells)
                .map(|i| {
                    let e_t = sub(d.u_t.cell(i), eq[k].u_t.cell(i));
                    let e_x = sub(d.u_x.cell(i), eq[k].u_x.cell(i));
                    self.lyapunov_density(w[k].u.cell(i), eq[k].u.cell(i), &e_t, &e_x)
                })
                .collect()
        };
        let (g_lo, g_hi) = (g_at(0), g_at(2));
        let (mid, em) = (w[1], eq[1]);
        let d = self.derivatives(mid);
        let mut terms = ErrorTerms::<T>::zero();
        let mut q_rel = Vec::with_capacity(cells);
        let mut flux = Vec::with_capacity(cells);
        let mut local = Vec::with_capacity(cells);
        let mut d1_max = T::neg_infinity();
        for i in 0..cells {
            let (u, ub) = (mid.u.cell(i), em.u.cell(i));
            let e = sub(u, ub);
            let e_t = sub(d.u_t.cell(i), em.u_t.cell(i));
            let e_x = sub(d.u_x.cell(i), em.u_x.cell(i));
            let (ub_t, ub_x, ub_xx) = (em.u_t.cell(i), em.u_x.cell(i), em.u_xx.cell(i));
            let ub_tt: Vec<T> = eq[2].u_t.cell(i).iter().zip(eq[0].u_t.cell(i)).map(|(&a, &b)| (a - b) / span).collect();
            let (h, hb) = (law.entropy_hessian(u), law.entropy_hessian(ub));
            let (df, dfb) = (law.flux_jacobian(u), law.flux_jacobian(ub));
            let (fu, fb) = (self.sys.flux(u), self.sys.flux(ub));
            let delta = sub(&law.entropy_grad(u), &law.entropy_grad(ub));
            let g = self.total_source(i, mid.time, u);
            let gb = self.total_source(i, mid.time, ub);
            let dg = sub(&g, &gb);
            let dh = h.sub(&hb);
            let aex = self.a.matvec(&e_x);
            let aubxx = self.a.matvec(ub_xx);

            q_rel.push(law.entropy_flux(u) - law.entropy_flux(ub) - dot(&law.entropy_grad(ub), &sub(&fu, &fb)));
            flux.push(eps * dot(&delta, &aex) + two * alpha * e2 * dot(&aex, &e_t));

            let dfe = df.matvec(&e_x);
            let mix: Vec<T> = e_t.iter().zip(&dfe).map(|(&a, &b)| a + b).collect();
            let m1 = Matrix::scaled_identity(n, alpha).sub(&h);
            let m2 = h.matmul(&self.a).sub(&df.transpose().matmul(&df).scale(alpha));
            let diss = eps * alpha * dot(&mix, &mix) + eps * m1.quad(&e_t, &e_t) + eps * m2.quad(&e_x, &e_x);

            let lin = sub(&sub(&fu, &fb), &dfb.matvec(&e));
            let conv = -dot(&hb.matvec(ub_x), &lin);
            let a1 = eps * dot(&dh.matvec(ub_t), &e_t);
            let a2 = -eps * dot(&delta, &ub_tt);
            let b1 = eps * dot(&dh.matvec(ub_x), &aex);
            let b2 = -eps * dot(&delta, &aubxx);
            let c1_vec: Vec<T> = aubxx.iter().zip(&ub_tt).map(|(&a, &b)| a - b).collect();
            let c1 = eps * dot(&c1_vec, &e_t);
            let c2 = -dot(&df.sub(&dfb).matvec(ub_x), &e_t);
            let d1 = dot(&delta, &dg);
            let d2 = dot(&gb, &sub(&delta, &hb.matvec(&e)));
            let d3 = dot(&dg, &e_t);
            d1_max = d1_max.max(d1);
            terms.accumulate([a1, a2, b1, b2, c1, c2, d1, d2, d3]);
            let rhs = conv + a1 + a2 - b1 - b2 + two * eps * alpha * (c1 + c2) + d1 + d2 + two * eps * alpha * d3;
            local.push(diss - rhs);
        }
        let (qx, fx) = (self.central_dx(&q_rel), self.central_dx(&flux));
        let dx = self.dx();
        let residual = (0..cells)
            .map(|i| ((g_hi[i] - g_lo[i]) / span + qx[i] + local[i] - fx[i]).abs())
            .sum::<T>()
            * dx;
        Ok(RelativeEntropyReport { time: mid.time, residual_l1: residual, terms: terms.scaled(dx), d1_max })
    }
}

/// Integrals of the error terms of the relative-entropy identity at one time.
#[derive(Clone, Debug, Serialize)]
pub struct ErrorTerms<T> {
    pub a1: T,
    pub a2: T,
    pub b1: T,
    pub b2: T,
    pub c1: T,
    pub c2: T,
    pub d1: T,
    pub d2: T,
    pub d3: T,
}

impl<T: Real> ErrorTerms<T> {
    fn zero() -> Self {
        let z = T::zero();
        Self { a1: z, a2: z, b1: z, b2: z, c1: z, c2: z, d1: z, d2: z, d3: z }
    }

    fn accumulate(&mut self, v: [T; 9]) {
        for (slot, x) in self.slots().into_iter().zip(v) {
            *slot = *slot + x;
        }
    }

    fn slots(&mut self) -> [&mut T; 9] {
        [&mut self.a1, &mut self.a2, &mut self.b1, &mut self.b2, &mut self.c1, &mut self.c2, &mut self.d1, &mut self.d2, &mut self.d3]
    }

    fn scaled(mut self, s: T) -> Self {
        for slot in self.slots() {
            *slot = *slot * s;
        }
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RelativeEntropyReport<T> {
    pub time: T,
    pub residual_l1: T,
    pub terms: ErrorTerms<T>,
    /// Largest pointwise value of `d1`; nonpositive under weak dissipation.
    pub d1_max: T,
}

/// Bounded test entropy `eta(s(u))` with `s_k(u) = r tanh(u_k / r)`.
#[derive(Clone, Copy, Debug)]
pub struct SaturatedEntropy<T> {
    pub radius: T,
}

impl<T: Real> SaturatedEntropy<T> {
    fn saturate(&self, u: &[T]) -> (Vec<T>, Vec<T>, Vec<T>) {
        let r = self.radius;
        let mut s = Vec::with_capacity(u.len());
        let mut ds = Vec::with_capacity(u.len());
        let mut dds = Vec::with_capacity(u.len());
        for &x in u {
            let th = (x / r).tanh();
            let sech2 = T::one() - th * th;
            s.push(r * th);
            ds.push(sech2);
            dds.push(-lit::<T>(2.0) / r * th * sech2);
        }
        (s, ds, dds)
    }

    pub fn gradient(&self, sys: &SystemDefinition<T>, u: &[T]) -> Vec<T> {
        let (s, ds, _) = self.saturate(u);
        sys.law.entropy_grad(&s).into_iter().zip(ds).map(|(g, d)| g * d).collect()
    }

    pub fn hessian(&self, sys: &SystemDefinition<T>, u: &[T]) -> Matrix<T> {
        let (s, ds, dds) = self.saturate(u);
        let h = sys.law.entropy_hessian(&s);
        let g = sys.law.entropy_grad(&s);
        let n = u.len();
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] = ds[i] * h[(i, j)] * ds[j];
            }
            out[(i, i)] = out[(i, i)] + g[i] * dds[i];
        }
        out
    }
}

/// Norms of the dissipation decomposition terms at one time.
#[derive(Clone, Debug, Serialize)]
pub struct DissipationSample<T> {
    pub time: T,
    /// `|| eps Deta_bar A u_x ||_L2`, proxy for the `H^-1` norm of the space-divergence term.
    pub i1_proxy: T,
    /// `|| eps Deta_bar u_t ||_L2`, proxy for the time-derivative term.
    pub i2_proxy: T,
    /// `|| eps u_x^T D2eta_bar A u_x ||_L1`.
    pub i3: T,
    /// `|| eps u_t^T D2eta_bar u_t ||_L1`.
    pub i4: T,
    /// `|| Deta_bar G(u) ||_L1`.
    pub i5: T,
    /// `|| eps Deta_bar DG u_t ||_L1` (alternative model only).
    pub i6: Option<T>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DissipationReport<T> {
    /// Per-snapshot norms; left out of JSON summaries (the functional CSV has them).
    #[serde(skip)]
    pub samples: Vec<DissipationSample<T>>,
    /// Space-time L1 norms (trapezoid in time) of `I3, I4, I5`.
    pub i3_total: T,
    pub i4_total: T,
    pub i5_total: T,
    pub i6_total: Option<T>,
    pub i1_proxy_sup: T,
    pub i2_proxy_sup: T,
}

fn trapezoid<T: Real>(times: &[T], vals: &[T]) -> T {
    times.windows(2).zip(vals.windows(2)).map(|(t, v)| (t[1] - t[0]) * (v[0] + v[1]) * lit(0.5)).sum()
}

impl<T: Real> FunctionalContext<'_, T> {
    pub fn dissipation_sample(&self, f: &RelaxationField<T>, test: &SaturatedEntropy<T>) -> DissipationSample<T> {
        let d = self.derivatives(f);
        let eps = self.eps;
        let dx = self.dx();
        let (mut i1, mut i2, mut i3, mut i4, mut i5, mut i6) = (T::zero(), T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
        for i in 0..f.u.cells() {
            let (u, ut, ux) = (f.u.cell(i), d.u_t.cell(i), d.u_x.cell(i));
            let g = test.gradient(self.sys, u);
            let h = test.hessian(self.sys, u);
            let aux = self.a.matvec(ux);
            let p1 = eps * dot(&g, &aux);
            let p2 = eps * dot(&g, ut);
            i1 = i1 + p1 * p1;
            i2 = i2 + p2 * p2;
            i3 = i3 + (eps * h.quad(ux, &aux)).abs();
            i4 = i4 + (eps * h.quad(ut, ut)).abs();
            i5 = i5 + dot(&g, &self.sys.source(u)).abs();
            if self.model == Model::Alternative {
                let dg = self.sys.source_jacobian_or_fd(u);
                i6 = i6 + (eps * dot(&g, &dg.matvec(ut))).abs();
            }
        }
        DissipationSample {
            time: f.time,
            i1_proxy: (i1 * dx).sqrt(),
            i2_proxy: (i2 * dx).sqrt(),
            i3: i3 * dx,
            i4: i4 * dx,
            i5: i5 * dx,
            i6: (self.model == Model::Alternative).then_some(i6 * dx),
        }
    }

    pub fn dissipation_decomposition(&self, snaps: &[RelaxationField<T>], test: &SaturatedEntropy<T>) -> DissipationReport<T> {
        let samples: Vec<_> = snaps.iter().map(|f| self.dissipation_sample(f, test)).collect();
        let times: Vec<T> = samples.iter().map(|s| s.time).collect();
        let col = |f: &dyn Fn(&DissipationSample<T>) -> T| -> Vec<T> { samples.iter().map(f).collect() };
        let sup = |v: Vec<T>| v.into_iter().fold(T::zero(), T::max);
        DissipationReport {
            i3_total: trapezoid(&times, &col(&|s| s.i3)),
            i4_total: trapezoid(&times, &col(&|s| s.i4)),
            i5_total: trapezoid(&times, &col(&|s| s.i5)),
            i6_total: (self.model == Model::Alternative).then(|| trapezoid(&times, &col(&|s| s.i6.unwrap_or_else(T::zero)))),
            i1_proxy_sup: sup(col(&|s| s.i1_proxy)),
            i2_proxy_sup: sup(col(&|s| s.i2_proxy)),
            samples,
        }
    }

    /// Smallest `C` with `|Deta_bar G| <= C (m - Deta G)` over `states`; `None` if
    /// `m - Deta G` is not positive somewhere.
    pub fn projection_growth_constant(&self, test: &SaturatedEntropy<T>, m: T, states: &[Vec<T>]) -> Option<T> {
        let mut c = T::zero();
        for u in states {
            let g = self.sys.source(u);
            let denom = m - dot(&self.sys.law.entropy_grad(u), &g);
            if !(denom > T::zero()) {
                return None;
            }
            c = c.max(dot(&test.gradient(self.sys, u), &g).abs() / denom);
        }
        Some(c)
    }
}

/// One row of the functional trace.
///
/// Window-based columns (identity residuals, error terms) use the neighbouring
/// snapshots and are `None` at the ends of the trace or when the spacing is uneven.
#[derive(Clone, Debug, Serialize)]
pub struct FunctionalRow<T> {
    pub time: T,
    pub phi: T,
    pub psi: Option<T>,
    pub lyapunov: Option<T>,
    pub potential: Option<T>,
    pub relative_potential: Option<T>,
    pub energy_residual: Option<T>,
    pub relative_residual: Option<T>,
    pub dissipation: DissipationSample<T>,
    pub error_terms: Option<ErrorTerms<T>>,
}

/// Scalar functionals at every snapshot; reference-dependent columns need `reference`.
pub fn functional_trace<T: Real>(
    ctx: &FunctionalContext<'_, T>,
    snaps: &[RelaxationField<T>],
    reference: Option<&[EquilibriumSnapshot<T>]>,
    test: &SaturatedEntropy<T>,
) -> Vec<FunctionalRow<T>> {
    let window = |k: usize| (k > 0 && k + 1 < snaps.len()).then(|| [&snaps[k - 1], &snaps[k], &snaps[k + 1]]);
    snaps
        .iter()
        .enumerate()
        .map(|(k, f)| {
            let eq = reference.and_then(|r| r.get(k));
            let relative = window(k).and_then(|w| {
                let r = reference?;
                let e = [r.get(k - 1)?, r.get(k)?, r.get(k + 1)?];
                ctx.relative_entropy_residual(w, e).ok()
            });
            FunctionalRow {
                time: f.time,
                phi: ctx.phi(f),
                psi: eq.map(|e| ctx.psi(f, e)),
                lyapunov: eq.map(|e| ctx.lyapunov(f, e)),
                potential: ctx.potential_integral(f),
                relative_potential: eq.and_then(|e| ctx.relative_potential(f, e)),
                energy_residual: window(k).and_then(|w| ctx.energy_identity_residual(w).ok()),
                relative_residual: relative.as_ref().map(|r| r.residual_l1),
                dissipation: ctx.dissipation_sample(f, test),
                error_terms: relative.map(|r| r.terms),
            }
        })
        .collect()
}

impl<T: Real> FunctionalContext<'_, T> {
    /// `int (Deta(u) - Deta(ubar)) . (G(u) - G(ubar)) dx` (the `d1` term) and its
    /// largest pointwise value.
    pub fn source_pairing(&self, f: &RelaxationField<T>, eq: &EquilibriumSnapshot<T>) -> (T, T) {
        let law = &self.sys.law;
        let mut total = T::zero();
        let mut max = T::neg_infinity();
        for (u, ub) in f.u.iter_cells().zip(eq.u.iter_cells()) {
            let delta = sub(&law.entropy_grad(u), &law.entropy_grad(ub));
            let d1 = dot(&delta, &sub(&self.sys.source(u), &self.sys.source(ub)));
            total = total + d1;
            max = max.max(d1);
        }
        (total * self.dx(), max)
    }

    /// `int |Deta(u) . G(u)| dx`.
    pub fn source_work(&self, f: &RelaxationField<T>) -> T {
        let law = &self.sys.law;
        f.u.iter_cells().map(|u| dot(&law.entropy_grad(u), &self.sys.source(u)).abs()).sum::<T>() * self.dx()
    }
}
