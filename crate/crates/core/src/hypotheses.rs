//! Sampled verification of the structural conditions on a system.
//!
//! Every report uses the slack convention: `margin >= 0` means the condition
//! holds on the samples, and a failing report carries the sample (witness)
//! where the pointwise margin is most negative. Pointwise margins are public so
//! a witness can be re-evaluated independently.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::numdiff;
use crate::sampling::WorkingBox;
use crate::scalar::{lit, norm2, sub, Real};
use crate::systems::{SourceClass, SystemDefinition};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HypothesisId {
    /// Entropy bounds `beta I <= D2eta <= alpha/2 I`, compatibility, normalisation.
    H1,
    /// Subcharacteristic condition in one space dimension.
    H2,
    /// Subcharacteristic condition over direction tuples (several space dimensions).
    H2Star,
    /// Weak dissipation `(Deta(u) - Deta(w)) (G(u) - G(w)) <= 0`.
    H3a,
    /// Lipschitz source.
    H3b,
    /// Source is minus the gradient of a nonnegative potential with controlled growth.
    H4,
    /// `Deta DG` is minus the gradient of a nonnegative function.
    H5,
    /// `-DG` symmetric positive semidefinite.
    D2RPsd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails,
    NotApplicable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness<T> {
    pub state: Vec<T>,
    /// Second state for pairwise conditions.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partner: Option<Vec<T>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport<T> {
    pub id: HypothesisId,
    pub verdict: Verdict,
    pub margin: T,
    pub witness: Option<Witness<T>>,
    pub samples_used: usize,
    pub seed: u32,
    #[serde(skip_serializing_if = "String::is_empty", default)]
    pub note: String,
}

impl<T: Real> HypothesisReport<T> {
    fn not_applicable(id: HypothesisId, seed: u32, note: impl Into<String>) -> Self {
        Self {
            id,
            verdict: Verdict::NotApplicable,
            margin: T::nan(),
            witness: None,
            samples_used: 0,
            seed,
            note: note.into(),
        }
    }

    pub fn holds(&self) -> bool {
        self.verdict == Verdict::Holds
    }
}

#[derive(Clone, Debug)]
pub struct CheckOptions<T> {
    /// Quasi-random samples in addition to the box corners.
    pub samples: usize,
    pub seed: u32,
    /// Tolerance for exact inequalities.
    pub tol: T,
    /// Relative tolerance for comparisons against finite differences.
    pub fd_tol: T,
    /// Overrides the system's working box.
    pub working_box: Option<WorkingBox<T>>,
}

impl<T: Real> Default for CheckOptions<T> {
    fn default() -> Self {
        Self { samples: 10_000, seed: 0, tol: lit(1e-9), fd_tol: lit(1e-6), working_box: None }
    }
}

impl<T: Real> CheckOptions<T> {
    fn working_box<'a>(&'a self, sys: &'a SystemDefinition<T>) -> &'a WorkingBox<T> {
        self.working_box.as_ref().unwrap_or(&sys.working_box)
    }
}

/// Minimum of `f` over `items` with the lowest index winning ties; NaN counts as `-inf`.
fn min_over<P: Sync, T: Real>(items: &[P], f: impl Fn(&P) -> T + Sync) -> (T, usize) {
    items
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let m = f(p);
            (if m.is_nan() { T::neg_infinity() } else { m }, i)
        })
        .reduce(
            || (T::infinity(), usize::MAX),
            |a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a },
        )
}

fn report<T: Real>(
    id: HypothesisId,
    margin: T,
    holds: bool,
    witness: Option<Witness<T>>,
    samples_used: usize,
    seed: u32,
) -> HypothesisReport<T> {
    HypothesisReport {
        id,
        verdict: if holds { Verdict::Holds } else { Verdict::Fails },
        margin,
        witness: if holds { None } else { witness },
        samples_used,
        seed,
        note: String::new(),
    }
}

fn neg_part<T: Real>(x: T) -> T {
    x.min(T::zero())
}

// ---------------------------------------------------------------- H1

/// Pointwise H1 slack: Hessian bounds, plus negative parts of the
/// nonnegativity and entropy-flux compatibility slacks.
pub fn entropy_margin_at<T: Real>(sys: &SystemDefinition<T>, u: &[T], fd_tol: T) -> T {
    let law = &sys.law;
    let c = &sys.constants;
    let eig = law.entropy_hessian(u).symmetric_eigen();
    let hess = (eig.min() - c.beta).min(c.alpha * lit(0.5) - eig.max());
    let dq = numdiff::gradient(|x| law.entropy_flux(x), u);
    let deta_df = law.flux_jacobian(u).vecmat(&law.entropy_grad(u));
    let scale = T::one().max(norm2(&deta_df));
    let compat = fd_tol * scale - norm2(&sub(&dq, &deta_df));
    hess.min(neg_part(law.entropy(u))).min(neg_part(compat))
}

pub fn check_entropy<T: Real>(sys: &SystemDefinition<T>, opts: &CheckOptions<T>) -> HypothesisReport<T> {
    let pts = opts.working_box(sys).sample(opts.samples, opts.seed);
    let (mut margin, idx) = min_over(&pts, |u| entropy_margin_at(sys, u, opts.fd_tol));
    let mut witness = pts[idx].clone();
    let origin = vec![T::zero(); sys.dim()];
    let at_origin = sys.law.entropy(&origin).abs() + norm2(&sys.law.entropy_grad(&origin));
    if at_origin > opts.tol && -at_origin < margin {
        margin = -at_origin;
        witness = origin;
    }
    report(
        HypothesisId::H1,
        margin,
        margin >= -opts.tol,
        Some(Witness { state: witness, partner: None }),
        pts.len(),
        opts.seed,
    )
}

// ---------------------------------------------------------------- H2

fn validate_relaxation_matrix<T: Real>(a: &Matrix<T>, n: usize) -> Result<()> {
    if a.rows() != n || a.cols() != n {
        return Err(Error::ShapeMismatch(format!("A is {}x{}, system has {n} components", a.rows(), a.cols())));
    }
    if a.asymmetry() > lit::<T>(1e-12) * T::one().max(a.max_abs()) {
        return Err(Error::InvalidParameter("relaxation matrix A must be symmetric".into()));
    }
    let min = a.symmetric_eigen().min();
    if !(min > T::zero()) {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: crate::scalar::to_f64(min) });
    }
    Ok(())
}

/// `1/2 (A D2eta + D2eta A) - alpha DF^T DF`.
pub fn subcharacteristic_matrix<T: Real>(sys: &SystemDefinition<T>, a: &Matrix<T>, u: &[T]) -> Matrix<T> {
    let h = sys.law.entropy_hessian(u);
    let df = sys.law.flux_jacobian(u);
    a.matmul(&h)
        .add(&h.matmul(a))
        .scale(lit(0.5))
        .sub(&df.transpose().matmul(&df).scale(sys.constants.alpha))
}

/// Smallest eigenvalue of the subcharacteristic matrix at `u`.
pub fn subcharacteristic_margin_at<T: Real>(sys: &SystemDefinition<T>, a: &Matrix<T>, u: &[T]) -> T {
    subcharacteristic_matrix(sys, a, u).symmetric_eigen().min()
}

/// Holds iff the sampled minimum `nu` is strictly positive.
pub fn check_subcharacteristic<T: Real>(
    sys: &SystemDefinition<T>,
    a: &Matrix<T>,
    opts: &CheckOptions<T>,
) -> Result<HypothesisReport<T>> {
    validate_relaxation_matrix(a, sys.dim())?;
    let pts = opts.working_box(sys).sample(opts.samples, opts.seed);
    let (margin, idx) = min_over(&pts, |u| subcharacteristic_margin_at(sys, a, u));
    Ok(report(
        HypothesisId::H2,
        margin,
        margin > T::zero(),
        Some(Witness { state: pts[idx].clone(), partner: None }),
        pts.len(),
        opts.seed,
    ))
}

/// Value of the several-dimensional subcharacteristic form for one direction tuple:
/// `sum_j 1/2 xi_j^T (A_j H + H A_j) xi_j - alpha |sum_j DF_j xi_j|^2`.
pub fn directional_subcharacteristic_form<T: Real>(
    hessian: &Matrix<T>,
    flux_jacobians: &[Matrix<T>],
    a_mats: &[Matrix<T>],
    alpha: T,
    xi: &[Vec<T>],
) -> T {
    let n = hessian.rows();
    let mut quad = T::zero();
    let mut sum = vec![T::zero(); n];
    for ((aj, dfj), x) in a_mats.iter().zip(flux_jacobians).zip(xi) {
        let m = aj.matmul(hessian).add(&hessian.matmul(aj)).scale(lit(0.5));
        quad = quad + m.quad(x, x);
        for (s, t) in sum.iter_mut().zip(dfj.matvec(x)) {
            *s = *s + t;
        }
    }
    quad - alpha * sum.iter().map(|&s| s * s).sum::<T>()
}

/// Several-dimensional subcharacteristic condition, sampled over states and
/// unit direction tuples. `flux_jacobians(u)` returns one Jacobian per direction.
pub fn check_subcharacteristic_directions<T: Real>(
    sys: &SystemDefinition<T>,
    flux_jacobians: &(dyn Fn(&[T]) -> Vec<Matrix<T>> + Sync),
    a_mats: &[Matrix<T>],
    directions: usize,
    opts: &CheckOptions<T>,
) -> Result<HypothesisReport<T>> {
    for a in a_mats {
        validate_relaxation_matrix(a, sys.dim())?;
    }
    let pts = opts.working_box(sys).sample(opts.samples, opts.seed);
    let dirs = WorkingBox::<T>::sample_directions(sys.dim(), a_mats.len(), directions, opts.seed.wrapping_add(1));
    let alpha = sys.constants.alpha;
    let (margin, idx) = min_over(&pts, |u| {
        let h = sys.law.entropy_hessian(u);
        let jacs = flux_jacobians(u);
        dirs.iter()
            .map(|xi| directional_subcharacteristic_form(&h, &jacs, a_mats, alpha, xi))
            .fold(T::infinity(), T::min)
    });
    Ok(report(
        HypothesisId::H2Star,
        margin,
        margin > T::zero(),
        Some(Witness { state: pts[idx].clone(), partner: None }),
        pts.len() * dirs.len(),
        opts.seed,
    ))
}

/// `A = 2 alpha I`.
pub fn suggest_a<T: Real>(sys: &SystemDefinition<T>) -> Matrix<T> {
    Matrix::scaled_identity(sys.dim(), lit::<T>(2.0) * sys.constants.alpha)
}

// ---------------------------------------------------------------- H3

/// `-(Deta(u) - Deta(w)) . (G(u) - G(w))`.
pub fn weak_dissipation_margin_at<T: Real>(sys: &SystemDefinition<T>, u: &[T], w: &[T]) -> T {
    let de = sub(&sys.law.entropy_grad(u), &sys.law.entropy_grad(w));
    let dg = sub(&sys.source(u), &sys.source(w));
    -crate::scalar::dot(&de, &dg)
}

pub fn check_weak_dissipation<T: Real>(sys: &SystemDefinition<T>, opts: &CheckOptions<T>) -> HypothesisReport<T> {
    let pairs = opts.working_box(sys).sample_pairs(opts.samples, opts.seed);
    let (margin, idx) = min_over(&pairs, |(u, w)| weak_dissipation_margin_at(sys, u, w));
    report(
        HypothesisId::H3a,
        margin,
        margin >= -opts.tol,
        Some(Witness { state: pairs[idx].0.clone(), partner: Some(pairs[idx].1.clone()) }),
        pairs.len(),
        opts.seed,
    )
}

/// `L - |G(u) - G(w)| / |u - w|`.
pub fn lipschitz_margin_at<T: Real>(sys: &SystemDefinition<T>, u: &[T], w: &[T]) -> T {
    let d = norm2(&sub(u, w));
    if d <= T::epsilon() {
        return T::infinity();
    }
    sys.constants.lipschitz - norm2(&sub(&sys.source(u), &sys.source(w))) / d
}

pub fn check_lipschitz<T: Real>(sys: &SystemDefinition<T>, opts: &CheckOptions<T>) -> HypothesisReport<T> {
    let pairs = opts.working_box(sys).sample_pairs(opts.samples, opts.seed);
    let (margin, idx) = min_over(&pairs, |(u, w)| lipschitz_margin_at(sys, u, w));
    report(
        HypothesisId::H3b,
        margin,
        margin >= -opts.tol,
        Some(Witness { state: pairs[idx].0.clone(), partner: Some(pairs[idx].1.clone()) }),
        pairs.len(),
        opts.seed,
    )
}

// ---------------------------------------------------------------- H4

/// Growth slack `C_R (1 + R) - |DR|`, plus negative parts of `R >= 0` and of
/// the agreement between `G` and `-DR` (both analytic and finite-difference `DR`).
pub fn potential_margin_at<T: Real>(sys: &SystemDefinition<T>, u: &[T], growth: T, fd_tol: T) -> T {
    let law = &sys.law;
    let r = law.potential(u).unwrap_or_else(T::nan);
    let dr_fd = numdiff::gradient(|x| law.potential(x).unwrap_or_else(T::nan), u);
    let dr = law.potential_grad(u).unwrap_or_else(|| dr_fd.clone());
    let g = sys.source(u);
    let scale = T::one().max(norm2(&g));
    let neg_g: Vec<T> = g.iter().map(|&x| -x).collect();
    let mismatch = norm2(&sub(&neg_g, &dr)).max(norm2(&sub(&neg_g, &dr_fd)));
    let growth_slack = growth * (T::one() + r) - norm2(&dr);
    growth_slack.min(neg_part(r)).min(neg_part(fd_tol * scale - mismatch))
}

pub fn check_potential<T: Real>(sys: &SystemDefinition<T>, opts: &CheckOptions<T>) -> HypothesisReport<T> {
    let bx = opts.working_box(sys);
    if !sys.has_potential() {
        let pts = bx.sample(opts.samples.min(256), opts.seed);
        let asym = pts
            .iter()
            .map(|u| sys.source_jacobian_or_fd(u).asymmetry())
            .fold(T::zero(), T::max);
        let note = if asym > opts.fd_tol {
            format!("no potential: source Jacobian is not symmetric (asymmetry {asym})")
        } else {
            "no potential supplied".to_string()
        };
        return HypothesisReport::not_applicable(HypothesisId::H4, opts.seed, note);
    }
    let Some(growth) = sys.constants.growth else {
        return HypothesisReport::not_applicable(HypothesisId::H4, opts.seed, "growth constant C_R not supplied");
    };
    let pts = bx.sample(opts.samples, opts.seed);
    let (mut margin, idx) = min_over(&pts, |u| potential_margin_at(sys, u, growth, opts.fd_tol));
    let mut witness = pts[idx].clone();
    let origin = vec![T::zero(); sys.dim()];
    let r0 = sys.law.potential(&origin).unwrap_or_else(T::nan).abs();
    if !(r0 <= opts.tol) && -r0 < margin {
        margin = -r0;
        witness = origin;
    }
    report(HypothesisId::H4, margin, margin >= -opts.tol, Some(Witness { state: witness, partner: None }), pts.len(), opts.seed)
}

// ---------------------------------------------------------------- H5

/// Smallest eigenvalue of `-DG`, plus the negative part of its symmetry slack.
pub fn d2r_psd_margin_at<T: Real>(dg: &Matrix<T>, fd_tol: T) -> T {
    let neg = dg.scale(-T::one());
    let sym = fd_tol * T::one().max(neg.max_abs()) - neg.asymmetry();
    neg.symmetric_eigen().min().min(neg_part(sym))
}

/// Row field `w(u) = Deta(u) DG(u)`.
fn entropy_source_field<T: Real>(sys: &SystemDefinition<T>, u: &[T]) -> Option<Vec<T>> {
    let dg = sys.law.source_jacobian(u)?;
    Some(dg.vecmat(&sys.law.entropy_grad(u)))
}

/// `S(u) = -int_0^1 w(s u) . u ds`, the candidate potential with `DS = -Deta DG`.
pub fn dissipation_potential<T: Real>(sys: &SystemDefinition<T>, u: &[T]) -> Option<T> {
    // 5-point Gauss-Legendre on [0, 1].
    const NODES: [f64; 5] = [0.046910077030668, 0.230765344947158, 0.5, 0.769234655052842, 0.953089922969332];
    const WEIGHTS: [f64; 5] = [0.118463442528095, 0.239314335249683, 0.284444444444444, 0.239314335249683, 0.118463442528095];
    let mut s = T::zero();
    for (&x, &wgt) in NODES.iter().zip(&WEIGHTS) {
        let p: Vec<T> = u.iter().map(|&c| c * lit(x)).collect();
        let w = entropy_source_field(sys, &p)?;
        s = s - lit::<T>(wgt) * crate::scalar::dot(&w, u);
    }
    Some(s)
}

/// `S(u)` plus the negative part of the gradient-field (symmetry) slack of `Dw`.
pub fn h5_margin_at<T: Real>(sys: &SystemDefinition<T>, u: &[T], fd_tol: T) -> T {
    let dw = numdiff::jacobian_of(|x| entropy_source_field(sys, x).unwrap_or_else(|| vec![T::nan(); x.len()]), u);
    let sym = fd_tol * T::one().max(dw.max_abs()) - dw.asymmetry();
    dissipation_potential(sys, u).unwrap_or_else(T::nan).min(neg_part(sym))
}

/// Returns the `-DG >= 0` report and the H5 report, in that order.
pub fn check_h5_and_gradient_psd<T: Real>(
    sys: &SystemDefinition<T>,
    opts: &CheckOptions<T>,
) -> [HypothesisReport<T>; 2] {
    let origin = vec![T::zero(); sys.dim()];
    if sys.law.source_jacobian(&origin).is_none() {
        let note = "source is not C^1 (no analytic Jacobian)";
        return [
            HypothesisReport::not_applicable(HypothesisId::D2RPsd, opts.seed, note),
            HypothesisReport::not_applicable(HypothesisId::H5, opts.seed, note),
        ];
    }
    let pts = opts.working_box(sys).sample(opts.samples, opts.seed);
    let (m_psd, i_psd) = min_over(&pts, |u| {
        sys.law.source_jacobian(u).map_or(T::nan(), |dg| d2r_psd_margin_at(&dg, opts.fd_tol))
    });
    let (m_h5, i_h5) = min_over(&pts, |u| h5_margin_at(sys, u, opts.fd_tol));
    [
        report(HypothesisId::D2RPsd, m_psd, m_psd >= -opts.tol, Some(Witness { state: pts[i_psd].clone(), partner: None }), pts.len(), opts.seed),
        report(HypothesisId::H5, m_h5, m_h5 >= -opts.tol, Some(Witness { state: pts[i_h5].clone(), partner: None }), pts.len(), opts.seed),
    ]
}

// ---------------------------------------------------------------- suite

/// Stability route a system qualifies for after checking.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// Weak dissipation and potential conditions hold.
    WeaklyDissipative,
    /// Falls back to the Lipschitz-source route.
    General,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckedHypothesis<T> {
    pub report: HypothesisReport<T>,
    /// Whether the verdict gates the chosen route.
    pub required: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckSuite<T> {
    pub system: String,
    pub route: Route,
    pub passed: bool,
    pub hypotheses: Vec<CheckedHypothesis<T>>,
}

/// Runs every check. `alternative_model` additionally requires the two
/// conditions of the alternative relaxation model.
pub fn check_all<T: Real>(
    sys: &SystemDefinition<T>,
    a: &Matrix<T>,
    alternative_model: bool,
    opts: &CheckOptions<T>,
) -> Result<CheckSuite<T>> {
    let h1 = check_entropy(sys, opts);
    let h2 = check_subcharacteristic(sys, a, opts)?;
    let h3a = check_weak_dissipation(sys, opts);
    let h3b = check_lipschitz(sys, opts);
    let h4 = check_potential(sys, opts);
    let [psd, h5] = check_h5_and_gradient_psd(sys, opts);
    let route = if sys.class == SourceClass::WeaklyDissipative && h3a.holds() && h4.holds() {
        Route::WeaklyDissipative
    } else {
        Route::General
    };
    let wd = route == Route::WeaklyDissipative;
    let hypotheses = vec![
        CheckedHypothesis { report: h1, required: true },
        CheckedHypothesis { report: h2, required: true },
        CheckedHypothesis { report: h3a, required: wd },
        CheckedHypothesis { report: h4, required: wd },
        CheckedHypothesis { report: h3b, required: !wd },
        CheckedHypothesis { report: psd, required: alternative_model },
        CheckedHypothesis { report: h5, required: alternative_model },
    ];
    let passed = hypotheses.iter().all(|h| !h.required || h.report.holds());
    Ok(CheckSuite { system: sys.name.clone(), route, passed, hypotheses })
}
