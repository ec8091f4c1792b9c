use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    BalanceLaw, SourceClass, SourceRegularity, StructuralConstants, SystemDefinition, SystemKind,
};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::sampling::WorkingBox;
use crate::scalar::{lit, Real};

/// Scalar transport with linear decay: `u_t + a u_x = -lambda u`.
#[derive(Clone, Debug)]
pub struct LinearReaction<T> {
    pub a: T,
    pub lambda: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearReactionParams {
    #[serde(default = "one")]
    pub a: f64,
    #[serde(default = "one")]
    pub lambda: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for LinearReactionParams {
    fn default() -> Self {
        Self { a: 1.0, lambda: 1.0 }
    }
}

impl<T: Real> BalanceLaw<T> for LinearReaction<T> {
    fn dim(&self) -> usize {
        1
    }

    fn flux(&self, u: &[T], out: &mut [T]) {
        out[0] = self.a * u[0];
    }

    fn flux_jacobian(&self, _u: &[T]) -> Matrix<T> {
        Matrix::diagonal(&[self.a])
    }

    fn wave_speed(&self, _u: &[T]) -> Option<T> {
        Some(self.a.abs())
    }

    fn source(&self, u: &[T], out: &mut [T]) {
        out[0] = -self.lambda * u[0];
    }

    fn source_jacobian(&self, _u: &[T]) -> Option<Matrix<T>> {
        Some(Matrix::diagonal(&[-self.lambda]))
    }

    fn entropy(&self, u: &[T]) -> T {
        lit::<T>(0.5) * u[0] * u[0]
    }

    fn entropy_grad(&self, u: &[T]) -> Vec<T> {
        vec![u[0]]
    }

    fn entropy_hessian(&self, _u: &[T]) -> Matrix<T> {
        Matrix::identity(1)
    }

    fn entropy_flux(&self, u: &[T]) -> T {
        lit::<T>(0.5) * self.a * u[0] * u[0]
    }

    fn potential(&self, u: &[T]) -> Option<T> {
        Some(lit::<T>(0.5) * self.lambda * u[0] * u[0])
    }

    fn potential_grad(&self, u: &[T]) -> Option<Vec<T>> {
        Some(vec![self.lambda * u[0]])
    }
}

/// `F = a u`, `G = -lambda u`, `eta = u^2 / 2`; `beta = 1`, `alpha = 2`, `L = |lambda|`.
pub fn make_linear_reaction<T: Real>(a: T, lambda: T) -> Result<SystemDefinition<T>> {
    if !a.is_finite() || !lambda.is_finite() {
        return Err(Error::InvalidParameter("linear reaction coefficients must be finite".into()));
    }
    let growth = T::one().max((lambda.abs() * lit(0.5)).sqrt());
    Ok(SystemDefinition {
        name: "linear_reaction".into(),
        law: Arc::new(LinearReaction { a, lambda }),
        constants: StructuralConstants {
            alpha: lit(2.0),
            beta: T::one(),
            lipschitz: lambda.abs(),
            growth: Some(growth),
        },
        regularity: SourceRegularity::C2,
        class: if lambda >= T::zero() { SourceClass::WeaklyDissipative } else { SourceClass::General },
        working_box: WorkingBox::symmetric(1, lit(5.0)),
        kind: SystemKind::LinearReaction { a, lambda },
    })
}
