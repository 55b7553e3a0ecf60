//! Update-direction sampling: the forbidden subspace, the sub-isotropic
//! covariance matrix, and the draws themselves.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix, OrthoBasis, SpectralDecomposition};

/// Default `κ` and `η` for the sub-isotropic matrix.
pub const DEFAULT_KAPPA: f64 = 0.25;
pub const DEFAULT_ETA: f64 = 0.25;

/// Tolerances used by [`verify_plan`].
pub const TOL_BLOCKED_MASS: f64 = 1e-8;
pub const TOL_DIAGONAL: f64 = 1e-8;
pub const TOL_TRACE: f64 = 1e-6;
pub const TOL_DOMINANCE: f64 = 1e-6;
/// Orthogonality required between a drawn direction and the blocked subspace.
pub const TOL_ORTHOGONAL: f64 = 1e-7;

const MAX_REWEIGHT_PASSES: usize = 500;

/// Which blocking rule contributed a row vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockRule {
    /// Row with more than `10k` alive entries; contributes `a_i` on `V_t`.
    Large,
    /// Among the `⌊n_t/10⌋` highest potentials.
    TopPotential,
    /// Among the `⌊n_t/10⌋` dangerous rows with the most alive entries.
    DangerousSupport,
}

/// A row vector submitted for blocking.
#[derive(Debug, Clone)]
pub struct BlockedVector {
    pub rule: BlockRule,
    pub values: Vec<f64>,
}

/// Orthonormal basis of the forbidden subspace `W ⊂ R^h`.
#[derive(Debug, Clone)]
pub struct SubspaceBasis {
    pub h: usize,
    pub basis: OrthoBasis,
    /// Vectors submitted before orthonormalization.
    pub declared_count: usize,
}

impl SubspaceBasis {
    pub fn empty(h: usize) -> Self {
        Self { h, basis: OrthoBasis::new(h), declared_count: 0 }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn matrix(&self) -> nalgebra::DMatrixView<'_, f64> {
        self.basis.matrix()
    }
}

/// Assembles `W` from blocked rows, the two singular families and the current
/// alive coloring. Per-rule caps are enforced, not truncated: exceeding them
/// is a caller bug.
pub fn build_subspace(
    h: usize,
    blocked: &[BlockedVector],
    dang_singular: &DenseMatrix,
    safe_singular: &DenseMatrix,
    x_alive: &[f64],
) -> Result<SubspaceBasis> {
    let row_cap = h / 10;
    let singular_cap = h / 11;
    for rule in [BlockRule::Large, BlockRule::TopPotential, BlockRule::DangerousSupport] {
        let count = blocked.iter().filter(|b| b.rule == rule).count();
        if count > row_cap {
            return Err(Error::InvariantViolation(format!("{count} {rule:?} vectors exceed cap {row_cap} at h = {h}")));
        }
    }
    for (name, m) in [("dangerous", dang_singular), ("safe", safe_singular)] {
        if m.ncols() > singular_cap {
            return Err(Error::InvariantViolation(format!(
                "{} {name} singular vectors exceed cap {singular_cap} at h = {h}",
                m.ncols()
            )));
        }
        if m.ncols() > 0 && m.nrows() != h {
            return Err(Error::DimensionMismatch { expected: h, got: m.nrows() });
        }
    }
    if x_alive.len() != h {
        return Err(Error::DimensionMismatch { expected: h, got: x_alive.len() });
    }
    if let Some(b) = blocked.iter().find(|b| b.values.len() != h) {
        return Err(Error::DimensionMismatch { expected: h, got: b.values.len() });
    }

    let mut vectors: Vec<&[f64]> = blocked.iter().map(|b| b.values.as_slice()).collect();
    let x_nonzero = x_alive.iter().any(|&v| v != 0.0);
    if x_nonzero {
        vectors.push(x_alive);
    }
    let singular_norm = if dang_singular.ncols() + safe_singular.ncols() > 0 { 1.0 } else { 0.0 };
    let tol = linalg::rank_tolerance(vectors.iter().copied()).max(1e-8 * singular_norm);
    let declared_count = vectors.len() + dang_singular.ncols() + safe_singular.ncols();

    // Singular families first: each is already orthonormal, so most of the
    // work happens in GEMM-friendly block projections.
    let mut basis = OrthoBasis::new(h);
    basis.extend(safe_singular, tol);
    basis.extend(dang_singular, tol);
    let mut rows = DenseMatrix::zeros(h, vectors.len());
    for (c, v) in vectors.iter().enumerate() {
        rows.column_mut(c).copy_from_slice(v);
    }
    basis.extend(&rows, tol);

    if basis.len() > h / 2 {
        return Err(Error::InvariantViolation(format!("dim W = {} exceeds h/2 at h = {h}", basis.len())));
    }
    Ok(SubspaceBasis { h, basis, declared_count })
}

/// A PSD matrix `U` that annihilates `W`, has unit-bounded diagonal, trace at
/// least `κh` and satisfies `U ⪯ (1/η) diag(U)`, ready for direction draws.
#[derive(Debug, Clone)]
pub struct SubIsotropicPlan {
    pub u: DenseMatrix,
    pub decomposition: SpectralDecomposition,
    pub trace: f64,
    pub kappa: f64,
    pub eta: f64,
    /// `Q Λ^{1/2} / sqrt(Tr Λ)` restricted to positive eigenvalues.
    factor: DenseMatrix,
    pub passes: usize,
}

impl SubIsotropicPlan {
    pub fn h(&self) -> usize {
        self.u.nrows()
    }
}

/// Outcome of the independent four-condition check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanCheck {
    /// `max_w wᵀ U w` over the basis of `W`.
    pub blocked_mass: f64,
    pub max_diagonal: f64,
    pub trace: f64,
    /// Smallest eigenvalue of `(1/η) diag(U) − U`.
    pub dominance_min_eig: f64,
    pub trace_floor: f64,
}

impl PlanCheck {
    pub fn passes(&self) -> bool {
        self.blocked_mass <= TOL_BLOCKED_MASS
            && self.max_diagonal <= 1.0 + TOL_DIAGONAL
            && self.trace >= self.trace_floor - TOL_TRACE
            && self.dominance_min_eig >= -TOL_DOMINANCE
    }
}

/// Recomputes the four sub-isotropy conditions from `U` and `W` alone.
pub fn verify_plan(u: &DenseMatrix, w: &SubspaceBasis, kappa: f64, eta: f64) -> PlanCheck {
    let h = u.nrows();
    let q = w.matrix();
    let blocked_mass = if q.ncols() == 0 {
        0.0
    } else {
        let uq = u * q;
        (0..q.ncols()).map(|c| q.column(c).dot(&uq.column(c))).fold(0.0, f64::max)
    };
    let max_diagonal = (0..h).map(|i| u[(i, i)]).fold(f64::NEG_INFINITY, f64::max);
    let trace = u.trace();
    let mut dominance = -u.clone();
    for i in 0..h {
        dominance[(i, i)] += u[(i, i)] / eta;
    }
    let dominance = 0.5 * (&dominance + dominance.transpose());
    let dominance_min_eig = dominance.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
    PlanCheck { blocked_mass, max_diagonal, trace, dominance_min_eig, trace_floor: kappa * h as f64 }
}

/// Builds a sub-isotropic matrix for `W`.
///
/// The matrix is a reweighted projector `U = D^{1/2} Π D^{1/2}`, where
/// `D = diag(d)` with `d ∈ [0, 1]^h` and `Π` is the orthogonal projector onto
/// the complement of `D^{1/2} W`. This annihilates `W`, keeps the diagonal at
/// most one, and gives `U ⪯ D ⪯ (1/η) diag(U)` as soon as every supported
/// coordinate has `Π_ii ≥ η`. Starting from `d = 1`, coordinates with
/// `Π_ii < η` have their weight lowered (a rank-one leverage update) until no
/// violation remains; weights only ever decrease, and at the fixed point
/// `Tr U ≥ (1 − η − dim W / h) h ≥ κ h`.
pub fn solve_subisotropic(w: &SubspaceBasis, kappa: f64, eta: f64) -> Result<SubIsotropicPlan> {
    let h = w.h;
    if h == 0 {
        return Err(Error::Degenerate("empty ambient space".into()));
    }
    if !(kappa > 0.0 && eta > 0.0 && kappa < 1.0 && eta < 1.0) {
        return Err(Error::InvalidParameter(format!("kappa = {kappa}, eta = {eta} must lie in (0, 1)")));
    }
    let delta = w.dim() as f64 / h as f64;
    if kappa + eta + delta > 1.0 + 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "kappa + eta + dim(W)/h = {} exceeds 1",
            kappa + eta + delta
        )));
    }

    // Rescaling coordinate i alone moves its leverage exactly to `target`, but
    // lowering one weight raises the others' leverage. Aiming well inside the
    // limit `1 − η` keeps simultaneous updates from creeping back over it.
    let target = 1.0 - 1.1 * eta;
    let mut weights = vec![1.0f64; h];
    let mut q = w.matrix().clone_owned();
    let mut passes = 0;
    loop {
        let leverage: Vec<f64> = (0..h).map(|i| q.row(i).norm_squared()).collect();
        let violators: Vec<usize> =
            (0..h).filter(|&i| weights[i] > 0.0 && leverage[i] > 1.0 - eta).collect();
        if violators.is_empty() {
            break;
        }
        if passes == MAX_REWEIGHT_PASSES {
            return Err(Error::SolverFailure {
                iterations: passes,
                detail: format!("{} coordinates still below the diagonal-dominance target", violators.len()),
            });
        }
        passes += 1;
        for i in violators {
            let lev = leverage[i];
            let factor = if lev >= 1.0 - 1e-12 { 0.0 } else { target * (1.0 - lev) / ((1.0 - target) * lev) };
            weights[i] *= factor;
            if weights[i] < 1e-14 {
                weights[i] = 0.0;
            }
        }
        let mut scaled = w.matrix().clone_owned();
        for (i, &d) in weights.iter().enumerate() {
            scaled.row_mut(i).scale_mut(d.sqrt());
        }
        let mut basis = OrthoBasis::new(h);
        let tol = 1e-10 * scaled.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
        basis.extend(&scaled, tol);
        q = basis.into_matrix();
    }

    let sqrt_d: Vec<f64> = weights.iter().map(|d| d.sqrt()).collect();
    let qqt = &q * q.transpose();
    let mut u = DenseMatrix::zeros(h, h);
    for c in 0..h {
        for r in 0..h {
            let pi = if r == c { 1.0 } else { 0.0 } - 0.5 * (qqt[(r, c)] + qqt[(c, r)]);
            u[(r, c)] = sqrt_d[r] * pi * sqrt_d[c];
        }
    }
    let decomposition = linalg::spectral_decompose_psd(&u)?;
    let trace = u.trace();
    let check = verify_plan(&u, w, kappa, eta);
    if !check.passes() {
        return Err(Error::SolverFailure { iterations: passes, detail: format!("verifier rejected plan: {check:?}") });
    }

    let lambda_sum: f64 = decomposition.eigenvalues.iter().sum();
    let top = decomposition.eigenvalues.first().copied().unwrap_or(0.0);
    let rank = decomposition.eigenvalues.iter().take_while(|&&l| l > 1e-12 * top.max(1e-300)).count();
    let mut factor = decomposition.eigenvectors.columns(0, rank).into_owned();
    for (mut col, &l) in factor.column_iter_mut().zip(&decomposition.eigenvalues) {
        col *= (l / lambda_sum).sqrt();
    }
    Ok(SubIsotropicPlan { u, decomposition, trace, kappa, eta, factor, passes })
}

/// `v = Q Λ^{1/2} r / sqrt(Tr U)` for a Rademacher vector `r`.
pub fn draw_direction<R: Rng + ?Sized>(plan: &SubIsotropicPlan, rng: &mut R) -> Result<Vec<f64>> {
    let signs: Vec<f64> = (0..plan.h()).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
    direction_from_signs(plan, &signs)
}

/// Deterministic core of [`draw_direction`] for a given sign vector.
pub fn direction_from_signs(plan: &SubIsotropicPlan, signs: &[f64]) -> Result<Vec<f64>> {
    if !(plan.trace > 0.0) || plan.factor.ncols() == 0 {
        return Err(Error::Degenerate("plan has zero trace".into()));
    }
    if signs.len() != plan.h() {
        return Err(Error::DimensionMismatch { expected: plan.h(), got: signs.len() });
    }
    let r = nalgebra::DVector::from_column_slice(&signs[..plan.factor.ncols()]);
    Ok((&plan.factor * r).as_slice().to_vec())
}

/// Normalized projection of a standard Gaussian onto `W^⊥`.
pub fn projection_fallback_direction<R: Rng + ?Sized>(w: &SubspaceBasis, rng: &mut R) -> Result<Vec<f64>> {
    if w.dim() >= w.h {
        return Err(Error::Degenerate(format!("W spans all of R^{}", w.h)));
    }
    loop {
        let mut v: Vec<f64> = (0..w.h).map(|_| rng.sample(StandardNormal)).collect();
        w.basis.project_out(&mut v);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            return Ok(v);
        }
    }
}
