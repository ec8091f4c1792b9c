use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    BalanceLaw, SourceClass, SourceRegularity, StructuralConstants, SystemDefinition, SystemKind,
};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::sampling::WorkingBox;
use crate::scalar::{lit, Real};

/// Lagrangian reacting gas with state `(v, u, Z)`:
/// `v_t - u_x = 0`, `u_t + P(v, Z)_x = 0`, `Z_t = -K phi(Theta) Z`.
///
/// Pressure is affine, `P = -p_v v + p_z Z`, temperature `Theta = v`, rate
/// `phi(theta) = max(0, tanh theta)` and the convexifier is `B(Z) = b Z^2`.
#[derive(Clone, Debug)]
pub struct AffineGas<T> {
    pub p_v: T,
    pub p_z: T,
    pub b: T,
    pub rate: T,
}

impl<T: Real> AffineGas<T> {
    pub fn pressure(&self, v: T, z: T) -> T {
        -self.p_v * v + self.p_z * z
    }

    pub fn temperature(&self, v: T, _z: T) -> T {
        v
    }

    pub fn reaction_rate(&self, theta: T) -> T {
        theta.tanh().max(T::zero())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CombustionParams {
    /// `-dP/dv`.
    pub p_v: f64,
    /// `dP/dZ`.
    pub p_z: f64,
    /// `B(Z) = b Z^2`.
    pub b: f64,
    /// Reaction constant `K`.
    #[serde(alias = "K")]
    pub rate: f64,
    pub gamma: f64,
    #[serde(alias = "Gamma")]
    pub big_gamma: f64,
    /// Bound on `|dP/dZ|`.
    pub c_bar: f64,
}

impl Default for CombustionParams {
    fn default() -> Self {
        Self { p_v: 1.5, p_z: 0.1, b: 0.7, rate: 1.0, gamma: 1.0, big_gamma: 3.0, c_bar: 0.2 }
    }
}

impl<T: Real> BalanceLaw<T> for AffineGas<T> {
    fn dim(&self) -> usize {
        3
    }

    fn flux(&self, u: &[T], out: &mut [T]) {
        out[0] = -u[1];
        out[1] = self.pressure(u[0], u[2]);
        out[2] = T::zero();
    }

    fn flux_jacobian(&self, _u: &[T]) -> Matrix<T> {
        let z = T::zero();
        Matrix::from_rows(&[vec![z, -T::one(), z], vec![-self.p_v, z, self.p_z], vec![z, z, z]])
    }

    fn source(&self, u: &[T], out: &mut [T]) {
        out[0] = T::zero();
        out[1] = T::zero();
        out[2] = -self.rate * self.reaction_rate(self.temperature(u[0], u[2])) * u[2];
    }

    fn entropy(&self, u: &[T]) -> T {
        let (v, w, z) = (u[0], u[1], u[2]);
        // -int_0^v P(tau, Z) dtau = p_v v^2 / 2 - p_z Z v
        lit::<T>(0.5) * w * w + lit::<T>(0.5) * self.p_v * v * v - self.p_z * z * v + self.b * z * z
    }

    fn entropy_grad(&self, u: &[T]) -> Vec<T> {
        let (v, w, z) = (u[0], u[1], u[2]);
        vec![-self.pressure(v, z), w, -self.p_z * v + lit::<T>(2.0) * self.b * z]
    }

    fn entropy_hessian(&self, _u: &[T]) -> Matrix<T> {
        let z = T::zero();
        Matrix::from_rows(&[
            vec![self.p_v, z, -self.p_z],
            vec![z, T::one(), z],
            vec![-self.p_z, z, lit::<T>(2.0) * self.b],
        ])
    }

    fn entropy_flux(&self, u: &[T]) -> T {
        self.pressure(u[0], u[2]) * u[1]
    }
}

/// Builds the combustion system with
/// `alpha = max(1, Gamma + C, 2 C^2 / Gamma + 2 C)` and `beta = min(gamma / 2, 1)`.
pub fn make_combustion<T: Real>(p: &CombustionParams) -> Result<SystemDefinition<T>> {
    if !(p.gamma > 0.0 && p.gamma < p.p_v && p.p_v < p.big_gamma) {
        return Err(Error::InvalidParameter("combustion needs 0 < gamma < p_v < big_gamma".into()));
    }
    if !(p.p_z.abs() < p.c_bar) {
        return Err(Error::InvalidParameter("combustion needs |p_z| < c_bar".into()));
    }
    if !(p.rate >= 0.0) {
        return Err(Error::InvalidParameter("reaction constant must be nonnegative".into()));
    }
    let law = AffineGas { p_v: lit(p.p_v), p_z: lit(p.p_z), b: lit(p.b), rate: lit(p.rate) };
    let (g, gg, c): (T, T, T) = (lit(p.gamma), lit(p.big_gamma), lit(p.c_bar));
    let two = lit::<T>(2.0);
    let alpha = T::one().max(gg + c).max(two / gg * c * c + two * c);
    let beta = (g / two).min(T::one());
    let working_box = WorkingBox::new(
        vec![lit(-5.0), lit(-5.0), T::zero()],
        vec![lit(5.0), lit(5.0), T::one()],
    )?;
    // The Hessian is constant for an affine pressure, so one evaluation is a full sweep.
    let min_eig = law.entropy_hessian(&working_box.lo).symmetric_eigen().min();
    if min_eig < beta {
        return Err(Error::SystemRejected(format!(
            "entropy Hessian eigenvalue {min_eig} below beta = {beta}; increase b"
        )));
    }
    // phi o Theta is 1-Lipschitz and bounded by 1; Z ranges over the box.
    let z_max = working_box.max_abs()[2];
    let lipschitz = law.rate * (z_max + T::one());
    Ok(SystemDefinition {
        name: "combustion".into(),
        constants: StructuralConstants { alpha, beta, lipschitz, growth: None },
        regularity: SourceRegularity::Lipschitz,
        class: SourceClass::General,
        working_box,
        kind: SystemKind::Combustion,
        law: Arc::new(law),
    })
}
