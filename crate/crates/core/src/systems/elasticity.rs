use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    BalanceLaw, SourceClass, SourceRegularity, StructuralConstants, SystemDefinition, SystemKind,
};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::sampling::WorkingBox;
use crate::scalar::{from_usize, lit, Real};

/// Damping law `g(v)` acting on the velocity equation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DampingLaw {
    /// `g(v) = -c v`.
    Linear,
    /// `g(v) = -c max(v, 0)`: Lipschitz, not `C^1`.
    PositivePart,
}

/// Damped nonlinear elasticity in strain/velocity form:
/// `u_t - v_x = 0`, `v_t - sigma(u)_x = g(v)` with `sigma(u) = k u + b sin u`.
#[derive(Clone, Debug)]
pub struct Elasticity<T> {
    pub stiffness: T,
    pub wiggle: T,
    pub damping: DampingLaw,
    pub damping_coefficient: T,
}

impl<T: Real> Elasticity<T> {
    pub fn stress(&self, u: T) -> T {
        self.stiffness * u + self.wiggle * u.sin()
    }

    pub fn stress_slope(&self, u: T) -> T {
        self.stiffness + self.wiggle * u.cos()
    }

    /// Stored energy `Sigma(u) = int_0^u sigma`.
    pub fn stored_energy(&self, u: T) -> T {
        lit::<T>(0.5) * self.stiffness * u * u + self.wiggle * (T::one() - u.cos())
    }

    fn damping_force(&self, v: T) -> T {
        match self.damping {
            DampingLaw::Linear => -self.damping_coefficient * v,
            DampingLaw::PositivePart => -self.damping_coefficient * v.max(T::zero()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ElasticityParams {
    pub stiffness: f64,
    pub wiggle: f64,
    /// Strict lower bound of `sigma'` on the working box.
    pub gamma: f64,
    /// Strict upper bound of `sigma'` on the working box.
    #[serde(alias = "Gamma")]
    pub big_gamma: f64,
    pub damping: DampingLaw,
    pub damping_coefficient: f64,
}

impl Default for ElasticityParams {
    fn default() -> Self {
        Self {
            stiffness: 1.5,
            wiggle: 0.1,
            gamma: 1.35,
            big_gamma: 1.65,
            damping: DampingLaw::Linear,
            damping_coefficient: 1.0,
        }
    }
}

impl<T: Real> BalanceLaw<T> for Elasticity<T> {
    fn dim(&self) -> usize {
        2
    }

    fn flux(&self, u: &[T], out: &mut [T]) {
        out[0] = -u[1];
        out[1] = -self.stress(u[0]);
    }

    fn flux_jacobian(&self, u: &[T]) -> Matrix<T> {
        Matrix::from_rows(&[vec![T::zero(), -T::one()], vec![-self.stress_slope(u[0]), T::zero()]])
    }

    fn wave_speed(&self, u: &[T]) -> Option<T> {
        Some(self.stress_slope(u[0]).abs().sqrt())
    }

    fn source(&self, u: &[T], out: &mut [T]) {
        out[0] = T::zero();
        out[1] = self.damping_force(u[1]);
    }

    fn source_jacobian(&self, _u: &[T]) -> Option<Matrix<T>> {
        match self.damping {
            DampingLaw::Linear => Some(Matrix::diagonal(&[T::zero(), -self.damping_coefficient])),
            DampingLaw::PositivePart => None,
        }
    }

    fn entropy(&self, u: &[T]) -> T {
        lit::<T>(0.5) * u[1] * u[1] + self.stored_energy(u[0])
    }

    fn entropy_grad(&self, u: &[T]) -> Vec<T> {
        vec![self.stress(u[0]), u[1]]
    }

    fn entropy_hessian(&self, u: &[T]) -> Matrix<T> {
        Matrix::diagonal(&[self.stress_slope(u[0]), T::one()])
    }

    fn entropy_flux(&self, u: &[T]) -> T {
        -self.stress(u[0]) * u[1]
    }

    fn potential(&self, u: &[T]) -> Option<T> {
        let w = match self.damping {
            DampingLaw::Linear => u[1],
            DampingLaw::PositivePart => u[1].max(T::zero()),
        };
        Some(lit::<T>(0.5) * self.damping_coefficient * w * w)
    }

    fn potential_grad(&self, u: &[T]) -> Option<Vec<T>> {
        Some(vec![T::zero(), -self.damping_force(u[1])])
    }
}

/// Builds the damped elasticity system; `alpha = max(2 Gamma, 1)`, `beta = min(gamma, 1)`.
///
/// Rejects parameters whose sampled `sigma'` leaves `(gamma, Gamma)` on the working box.
pub fn make_elasticity<T: Real>(p: &ElasticityParams) -> Result<SystemDefinition<T>> {
    let (gamma, big_gamma): (T, T) = (lit(p.gamma), lit(p.big_gamma));
    if !(p.gamma > 0.0 && p.gamma < p.big_gamma) {
        return Err(Error::InvalidParameter("elasticity needs 0 < gamma < big_gamma".into()));
    }
    let law: Elasticity<T> = Elasticity {
        stiffness: lit(p.stiffness),
        wiggle: lit(p.wiggle),
        damping: p.damping,
        damping_coefficient: lit(p.damping_coefficient),
    };
    let working_box: WorkingBox<T> = WorkingBox::symmetric(2, lit(5.0));
    let samples = 4001;
    for i in 0..samples {
        let s: T = from_usize::<T>(i) / from_usize::<T>(samples - 1);
        let u = working_box.lo[0] + (working_box.hi[0] - working_box.lo[0]) * s;
        let slope = law.stress_slope(u);
        if !(slope > gamma && slope < big_gamma) {
            return Err(Error::SystemRejected(format!(
                "sigma'({u}) = {slope} lies outside ({gamma}, {big_gamma})"
            )));
        }
    }
    let c = law.damping_coefficient;
    Ok(SystemDefinition {
        name: "elasticity".into(),
        constants: StructuralConstants {
            alpha: (lit::<T>(2.0) * big_gamma).max(T::one()),
            beta: gamma.min(T::one()),
            lipschitz: c.abs(),
            growth: Some(T::one().max((c.abs() * lit(0.5)).sqrt())),
        },
        regularity: match p.damping {
            DampingLaw::Linear => SourceRegularity::C2,
            DampingLaw::PositivePart => SourceRegularity::Lipschitz,
        },
        class: if c >= T::zero() { SourceClass::WeaklyDissipative } else { SourceClass::General },
        working_box,
        kind: SystemKind::Elasticity,
        law: Arc::new(law),
    })
}
