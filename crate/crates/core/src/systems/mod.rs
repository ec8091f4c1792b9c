//! Balance laws `u_t + F(u)_x = G(u)` together with an entropy pair and the
//! structural constants the relaxation construction needs.

mod combustion;
mod elasticity;
mod linear_reaction;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use combustion::{make_combustion, AffineGas, CombustionParams};
pub use elasticity::{make_elasticity, DampingLaw, Elasticity, ElasticityParams};
pub use linear_reaction::{make_linear_reaction, LinearReaction, LinearReactionParams};

use crate::linalg::Matrix;
use crate::numdiff;
use crate::sampling::WorkingBox;
use crate::scalar::Real;

/// A one-dimensional system of balance laws with an entropy pair.
///
/// Only the flux, source, entropy and entropy flux are mandatory; derivatives
/// fall back to central finite differences.
pub trait BalanceLaw<T: Real>: Send + Sync {
    /// Number of conserved components.
    fn dim(&self) -> usize;

    fn flux(&self, u: &[T], out: &mut [T]);

    fn flux_jacobian(&self, u: &[T]) -> Matrix<T> {
        numdiff::jacobian(|x, o: &mut [T]| self.flux(x, o), u, self.dim())
    }

    fn source(&self, u: &[T], out: &mut [T]);

    /// Closed-form spectral radius of the flux Jacobian, when cheap to evaluate.
    fn wave_speed(&self, _u: &[T]) -> Option<T> {
        None
    }

    /// Analytic source Jacobian; `None` when the source is not `C^1`.
    fn source_jacobian(&self, _u: &[T]) -> Option<Matrix<T>> {
        None
    }

    fn entropy(&self, u: &[T]) -> T;

    fn entropy_grad(&self, u: &[T]) -> Vec<T> {
        numdiff::gradient(|x| self.entropy(x), u)
    }

    fn entropy_hessian(&self, u: &[T]) -> Matrix<T> {
        numdiff::jacobian_of(|x| self.entropy_grad(x), u).symmetric_part()
    }

    fn entropy_flux(&self, u: &[T]) -> T;

    /// Potential `R` with `G = -DR^T`, if the source is a gradient.
    fn potential(&self, _u: &[T]) -> Option<T> {
        None
    }

    fn potential_grad(&self, u: &[T]) -> Option<Vec<T>> {
        self.potential(u)?;
        Some(numdiff::gradient(|x| self.potential(x).unwrap_or_else(T::nan), u))
    }
}

/// Constants entering the entropy bounds and the subcharacteristic condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructuralConstants<T> {
    /// Upper Hessian bound is `alpha / 2`; also weights the subcharacteristic condition.
    pub alpha: T,
    /// Lower Hessian bound.
    pub beta: T,
    /// Lipschitz constant of the source on the working box.
    pub lipschitz: T,
    /// Growth constant `C_R` in `|DR| <= C_R (1 + R)`, when a potential exists.
    pub growth: Option<T>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceRegularity {
    /// Lipschitz but with kinks (for example `-max(v, 0)`).
    Lipschitz,
    C1,
    C2,
}

/// Which stability route a system is tagged for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceClass {
    /// Monotone gradient source; the weak-dissipation route applies once checked.
    WeaklyDissipative,
    /// Only a Lipschitz bound is available.
    General,
}

/// Identifies builtin systems that have closed-form solutions.
#[derive(Clone, Debug, PartialEq)]
pub enum SystemKind<T> {
    LinearReaction { a: T, lambda: T },
    Elasticity,
    Combustion,
    Custom,
}

/// A balance law bundled with its constants and metadata.
#[derive(Clone)]
pub struct SystemDefinition<T: Real> {
    pub name: String,
    pub law: Arc<dyn BalanceLaw<T>>,
    pub constants: StructuralConstants<T>,
    pub regularity: SourceRegularity,
    pub class: SourceClass,
    pub working_box: WorkingBox<T>,
    pub kind: SystemKind<T>,
}

impl<T: Real> fmt::Debug for SystemDefinition<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemDefinition")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("constants", &self.constants)
            .field("regularity", &self.regularity)
            .field("class", &self.class)
            .finish()
    }
}

impl<T: Real> SystemDefinition<T> {
    /// Wraps a user-supplied law.
    pub fn custom(
        name: impl Into<String>,
        law: Arc<dyn BalanceLaw<T>>,
        constants: StructuralConstants<T>,
        regularity: SourceRegularity,
        class: SourceClass,
        working_box: WorkingBox<T>,
    ) -> Self {
        Self { name: name.into(), law, constants, regularity, class, working_box, kind: SystemKind::Custom }
    }

    pub fn dim(&self) -> usize {
        self.law.dim()
    }

    pub fn flux(&self, u: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim()];
        self.law.flux(u, &mut out);
        out
    }

    pub fn source(&self, u: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim()];
        self.law.source(u, &mut out);
        out
    }

    pub fn has_potential(&self) -> bool {
        let origin = vec![T::zero(); self.dim()];
        self.law.potential(&origin).is_some()
    }

    /// Source Jacobian, analytic when available, otherwise by finite differences.
    pub fn source_jacobian_or_fd(&self, u: &[T]) -> Matrix<T> {
        self.law
            .source_jacobian(u)
            .unwrap_or_else(|| numdiff::jacobian(|x, o: &mut [T]| self.law.source(x, o), u, self.dim()))
    }
}
