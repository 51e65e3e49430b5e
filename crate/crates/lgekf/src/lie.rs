//! Generic matrix Lie group machinery.
//!
//! A [`GroupDescriptor`] realizes one matrix Lie group: the algebra dimension
//! `k`, the embedding size `n`, a basis of `k` generator matrices, and the
//! operation table built on top of them (hat/vee, exp/log, adjoints, group
//! Jacobians). Everything has a generic series implementation driven purely by
//! the basis; concrete groups install closed-form overrides where available
//! (see the `groups` module).
//!
//! All operations are pure and a descriptor is immutable after construction,
//! so descriptors can be shared freely across threads.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use once_cell::sync::Lazy;
use thiserror::Error;

/// Frobenius tolerance for the group membership predicate.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// Generic series terminate when the next term drops below this norm.
pub const SERIES_TOL: f64 = 1e-15;

/// Hard cap on series terms; hitting it without convergence is an error for
/// the Bernoulli (inverse-Jacobian) series.
pub const MAX_SERIES_TERMS: usize = 40;

#[derive(Debug, Error)]
pub enum LieError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not on the group (membership residual {residual:.3e})")]
    NotOnGroup { residual: f64 },
    #[error("rotation angle {angle:.9} is within the guard band of the cut locus at pi")]
    NearCutLocus { angle: f64 },
    #[error("series failed to converge within {MAX_SERIES_TERMS} terms")]
    SeriesDivergence,
    #[error("matrix is singular")]
    Singular,
    #[error("non-finite value encountered")]
    NonFinite,
}

/// A point on a matrix Lie group, stored as its embedded n-by-n matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupElement {
    matrix: DMatrix<f64>,
}

impl GroupElement {
    /// Wraps a matrix without running the membership predicate. Callers that
    /// construct elements from raw data should go through
    /// [`GroupDescriptor::element`] instead.
    pub fn from_matrix_unchecked(matrix: DMatrix<f64>) -> Self {
        Self { matrix }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

pub type ExpFn = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;
pub type LogFn = Arc<dyn Fn(&DMatrix<f64>) -> Result<DVector<f64>, LieError> + Send + Sync>;
pub type AdjointFn = Arc<dyn Fn(&DMatrix<f64>) -> DMatrix<f64> + Send + Sync>;
pub type AdFn = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;
pub type JacFn = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;
pub type JacInvFn = Arc<dyn Fn(&DVector<f64>) -> Result<DMatrix<f64>, LieError> + Send + Sync>;
pub type MembershipFn = Arc<dyn Fn(&DMatrix<f64>) -> f64 + Send + Sync>;
pub type ProjectFn = Arc<dyn Fn(&DMatrix<f64>) -> DMatrix<f64> + Send + Sync>;

/// Optional closed-form overrides installed by concrete group realizations.
/// Any entry left as `None` falls back to the generic series path.
#[derive(Clone, Default)]
pub struct ClosedForms {
    pub exp: Option<ExpFn>,
    pub log: Option<LogFn>,
    pub adjoint: Option<AdjointFn>,
    pub ad: Option<AdFn>,
    pub jac_right: Option<JacFn>,
    pub jac_right_inv: Option<JacInvFn>,
    pub membership: Option<MembershipFn>,
    pub project: Option<ProjectFn>,
}

/// A realized matrix Lie group.
#[derive(Clone)]
pub struct GroupDescriptor {
    name: String,
    dim: usize,
    mat_size: usize,
    basis: Vec<DMatrix<f64>>,
    gram_inv: DMatrix<f64>,
    overrides: ClosedForms,
}

impl std::fmt::Debug for GroupDescriptor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GroupDescriptor")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("mat_size", &self.mat_size)
            .finish()
    }
}

impl GroupDescriptor {
    /// Builds a descriptor from generator matrices. Fails if the generators
    /// are not square of a common size or not linearly independent.
    pub fn new(
        name: impl Into<String>,
        mat_size: usize,
        basis: Vec<DMatrix<f64>>,
    ) -> Result<Self, LieError> {
        let dim = basis.len();
        if dim == 0 {
            return Err(LieError::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        for e in &basis {
            if e.nrows() != mat_size || e.ncols() != mat_size {
                return Err(LieError::DimensionMismatch {
                    expected: mat_size,
                    got: e.nrows(),
                });
            }
        }
        // Gram matrix in the Frobenius inner product; positive definiteness
        // is exactly linear independence.
        let mut gram = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                gram[(i, j)] = basis[i].dot(&basis[j]);
            }
        }
        let gram_inv = gram.clone().cholesky().ok_or(LieError::Singular)?.inverse();
        Ok(Self {
            name: name.into(),
            dim,
            mat_size,
            basis,
            gram_inv,
            overrides: ClosedForms::default(),
        })
    }

    pub fn with_overrides(mut self, overrides: ClosedForms) -> Self {
        self.overrides = overrides;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Algebra dimension k.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Embedding size n.
    pub fn mat_size(&self) -> usize {
        self.mat_size
    }

    pub fn basis(&self) -> &[DMatrix<f64>] {
        &self.basis
    }

    fn check_dim(&self, v: &DVector<f64>) -> Result<(), LieError> {
        if v.len() != self.dim {
            return Err(LieError::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        Ok(())
    }

    fn check_mat(&self, m: &DMatrix<f64>) -> Result<(), LieError> {
        if m.nrows() != self.mat_size || m.ncols() != self.mat_size {
            return Err(LieError::DimensionMismatch {
                expected: self.mat_size,
                got: m.nrows(),
            });
        }
        Ok(())
    }

    /// Coordinates to algebra matrix, `hat(xi) = sum_i xi_i E_i`.
    pub fn hat(&self, xi: &DVector<f64>) -> Result<DMatrix<f64>, LieError> {
        self.check_dim(xi)?;
        let mut m = DMatrix::zeros(self.mat_size, self.mat_size);
        for (i, e) in self.basis.iter().enumerate() {
            if xi[i] != 0.0 {
                m += e * xi[i];
            }
        }
        Ok(m)
    }

    /// Algebra matrix to coordinates; orthogonally projects onto the span of
    /// the basis, so `vee(hat(xi)) == xi` up to rounding even for non-
    /// orthonormal bases.
    pub fn vee(&self, m: &DMatrix<f64>) -> DVector<f64> {
        let mut inner = DVector::zeros(self.dim);
        for (i, e) in self.basis.iter().enumerate() {
            inner[i] = e.dot(m);
        }
        &self.gram_inv * inner
    }

    pub fn identity(&self) -> GroupElement {
        GroupElement::from_matrix_unchecked(DMatrix::identity(self.mat_size, self.mat_size))
    }

    /// Group exponential of algebra coordinates.
    pub fn exp(&self, xi: &DVector<f64>) -> Result<GroupElement, LieError> {
        self.check_dim(xi)?;
        if !xi.iter().all(|x| x.is_finite()) {
            return Err(LieError::NonFinite);
        }
        let m = match &self.overrides.exp {
            Some(f) => f(xi),
            None => expm(&self.hat(xi)?),
        };
        Ok(GroupElement::from_matrix_unchecked(m))
    }

    /// Generic series exponential, bypassing any closed-form override.
    /// Kept public as an independent route for cross-checking.
    pub fn exp_series(&self, xi: &DVector<f64>) -> Result<GroupElement, LieError> {
        Ok(GroupElement::from_matrix_unchecked(expm(&self.hat(xi)?)))
    }

    /// Group logarithm; inverse of [`GroupDescriptor::exp`] within the
    /// injectivity radius.
    pub fn log(&self, g: &GroupElement) -> Result<DVector<f64>, LieError> {
        self.check_mat(g.matrix())?;
        let residual = self.membership_residual(g.matrix());
        if residual > MEMBERSHIP_TOL {
            return Err(LieError::NotOnGroup { residual });
        }
        match &self.overrides.log {
            Some(f) => f(g.matrix()),
            None => self.log_generic(g),
        }
    }

    /// Generic matrix logarithm via inverse scaling and squaring, projected
    /// onto the algebra basis.
    pub fn log_generic(&self, g: &GroupElement) -> Result<DVector<f64>, LieError> {
        let l = logm(g.matrix())?;
        Ok(self.vee(&l))
    }

    /// Adjoint matrix of a group element, `Ad(g) xi = vee(g hat(xi) g^-1)`.
    pub fn adjoint(&self, g: &GroupElement) -> Result<DMatrix<f64>, LieError> {
        self.check_mat(g.matrix())?;
        match &self.overrides.adjoint {
            Some(f) => Ok(f(g.matrix())),
            None => self.adjoint_generic(g),
        }
    }

    /// Column-wise generic adjoint.
    pub fn adjoint_generic(&self, g: &GroupElement) -> Result<DMatrix<f64>, LieError> {
        let ginv = invert(g.matrix())?;
        let mut ad = DMatrix::zeros(self.dim, self.dim);
        for (i, e) in self.basis.iter().enumerate() {
            let col = self.vee(&(g.matrix() * e * &ginv));
            ad.set_column(i, &col);
        }
        Ok(ad)
    }

    /// Algebra adjoint, the matrix of the commutator `[hat(zeta), .]`.
    pub fn ad(&self, zeta: &DVector<f64>) -> Result<DMatrix<f64>, LieError> {
        self.check_dim(zeta)?;
        match &self.overrides.ad {
            Some(f) => Ok(f(zeta)),
            None => self.ad_generic(zeta),
        }
    }

    /// Column-wise generic algebra adjoint.
    pub fn ad_generic(&self, zeta: &DVector<f64>) -> Result<DMatrix<f64>, LieError> {
        let z = self.hat(zeta)?;
        let mut ad = DMatrix::zeros(self.dim, self.dim);
        for (i, e) in self.basis.iter().enumerate() {
            let col = self.vee(&(&z * e - e * &z));
            ad.set_column(i, &col);
        }
        Ok(ad)
    }

    /// Right group Jacobian `J_zeta = sum_k (-1)^k / (k+1)! ad_zeta^k`.
    pub fn jac_right(&self, zeta: &DVector<f64>) -> Result<DMatrix<f64>, LieError> {
        self.check_dim(zeta)?;
        match &self.overrides.jac_right {
            Some(f) => Ok(f(zeta)),
            None => self.jac_right_series(zeta),
        }
    }

    /// Left group Jacobian; equals `jac_right(-zeta)` by construction.
    pub fn jac_left(&self, zeta: &DVector<f64>) -> Result<DMatrix<f64>, LieError> {
        self.jac_right(&-zeta)
    }

    /// Generic series evaluation of the right group Jacobian.
    pub fn jac_right_series(&self, zeta: &DVector<f64>) -> Result<DMatrix<f64>, LieError> {
        let ad = self.ad(zeta)?;
        let mut sum = DMatrix::identity(self.dim, self.dim);
        let mut term = DMatrix::identity(self.dim, self.dim);
        for k in 1..=MAX_SERIES_TERMS {
            term = (&term * &ad) * (-1.0 / (k as f64 + 1.0));
            sum += &term;
            if term.norm() < SERIES_TOL {
                break;
            }
        }
        Ok(sum)
    }

    /// Inverse right group Jacobian via the Bernoulli series
    /// `sum_k (-1)^k B_k / k! ad_zeta^k`.
    pub fn jac_right_inv(&self, zeta: &DVector<f64>) -> Result<DMatrix<f64>, LieError> {
        self.check_dim(zeta)?;
        match &self.overrides.jac_right_inv {
            Some(f) => f(zeta),
            None => self.jac_right_inv_series(zeta),
        }
    }

    /// Inverse left group Jacobian; equals `jac_right_inv(-zeta)`.
    pub fn jac_left_inv(&self, zeta: &DVector<f64>) -> Result<DMatrix<f64>, LieError> {
        self.jac_right_inv(&-zeta)
    }

    /// Generic Bernoulli-series inverse Jacobian. Signals divergence when the
    /// series has not converged after [`MAX_SERIES_TERMS`] terms, which
    /// happens outside the convergence radius (rotation angles near 2 pi).
    pub fn jac_right_inv_series(&self, zeta: &DVector<f64>) -> Result<DMatrix<f64>, LieError> {
        let ad = self.ad(zeta)?;
        let mut sum = DMatrix::identity(self.dim, self.dim);
        // ad^k / k!, built incrementally
        let mut pow = DMatrix::identity(self.dim, self.dim);
        let mut last = f64::INFINITY;
        for k in 1..=MAX_SERIES_TERMS {
            pow = (&pow * &ad) / k as f64;
            let b = BERNOULLI[k];
            if b == 0.0 {
                continue;
            }
            let term = &pow * (if k % 2 == 0 { b } else { -b });
            sum += &term;
            last = term.norm();
            if last < SERIES_TOL {
                return Ok(sum);
            }
        }
        if last > 1e-12 {
            return Err(LieError::SeriesDivergence);
        }
        Ok(sum)
    }

    /// Group composition (matrix product on the embedding).
    pub fn compose(&self, a: &GroupElement, b: &GroupElement) -> Result<GroupElement, LieError> {
        self.check_mat(a.matrix())?;
        self.check_mat(b.matrix())?;
        Ok(GroupElement::from_matrix_unchecked(a.matrix() * b.matrix()))
    }

    /// Group inverse (matrix inverse on the embedding).
    pub fn inverse(&self, g: &GroupElement) -> Result<GroupElement, LieError> {
        self.check_mat(g.matrix())?;
        Ok(GroupElement::from_matrix_unchecked(invert(g.matrix())?))
    }

    /// Membership residual; zero on the group, growing with the violation.
    /// Descriptors without a predicate report zero.
    pub fn membership_residual(&self, m: &DMatrix<f64>) -> f64 {
        match &self.overrides.membership {
            Some(f) => f(m),
            None => 0.0,
        }
    }

    /// Validates a raw matrix as a group element.
    pub fn element(&self, matrix: DMatrix<f64>) -> Result<GroupElement, LieError> {
        self.check_mat(&matrix)?;
        if !matrix.iter().all(|x| x.is_finite()) {
            return Err(LieError::NonFinite);
        }
        let residual = self.membership_residual(&matrix);
        if residual > MEMBERSHIP_TOL {
            return Err(LieError::NotOnGroup { residual });
        }
        // Invertibility guard; membership predicates for the concrete groups
        // already imply it, but generic descriptors may not have one.
        invert(&matrix)?;
        Ok(GroupElement::from_matrix_unchecked(matrix))
    }

    /// Re-projects an element onto the group (polar projection of rotation
    /// blocks for the concrete groups); identity when no projection is known.
    pub fn project(&self, g: &GroupElement) -> GroupElement {
        match &self.overrides.project {
            Some(f) => GroupElement::from_matrix_unchecked(f(g.matrix())),
            None => g.clone(),
        }
    }
}

/// In-place re-symmetrization `P <- (P + P^T) / 2`, applied after every
/// congruence transform to bound floating-point asymmetry accumulation.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

fn invert(m: &DMatrix<f64>) -> Result<DMatrix<f64>, LieError> {
    m.clone().lu().try_inverse().ok_or(LieError::Singular)
}

/// Matrix exponential by scaling and squaring of the plain power series.
pub fn expm(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let norm = x.norm();
    let s = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = x / 2f64.powi(s as i32);
    let mut sum = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..=MAX_SERIES_TERMS {
        term = (&term * &scaled) / k as f64;
        sum += &term;
        if term.norm() < SERIES_TOL {
            break;
        }
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// Principal matrix logarithm by inverse scaling and squaring, with
/// Denman-Beavers iterations for the square roots.
pub fn logm(m: &DMatrix<f64>) -> Result<DMatrix<f64>, LieError> {
    let n = m.nrows();
    let eye = DMatrix::identity(n, n);
    let mut a = m.clone();
    let mut s = 0u32;
    while (&a - &eye).norm() > 0.25 {
        a = sqrtm(&a)?;
        s += 1;
        if s > 60 {
            return Err(LieError::SeriesDivergence);
        }
    }
    let e = &a - &eye;
    let mut sum = DMatrix::zeros(n, n);
    let mut pow = eye.clone();
    for k in 1..=100 {
        pow = &pow * &e;
        let term = &pow * (if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64);
        sum += &term;
        if term.norm() < SERIES_TOL {
            break;
        }
    }
    Ok(sum * 2f64.powi(s as i32))
}

fn sqrtm(m: &DMatrix<f64>) -> Result<DMatrix<f64>, LieError> {
    let n = m.nrows();
    let mut y = m.clone();
    let mut z = DMatrix::identity(n, n);
    for _ in 0..60 {
        let yi = invert(&y)?;
        let zi = invert(&z)?;
        let y_next = (&y + zi) * 0.5;
        let z_next = (&z + yi) * 0.5;
        let delta = (&y_next - &y).norm();
        y = y_next;
        z = z_next;
        if delta < 1e-15 {
            break;
        }
    }
    Ok(y)
}

/// Bernoulli numbers B_0..B_40 (B_1 = -1/2 convention), via the standard
/// recurrence.
pub static BERNOULLI: Lazy<Vec<f64>> = Lazy::new(|| {
    let n = MAX_SERIES_TERMS + 1;
    let mut b = vec![0.0f64; n];
    b[0] = 1.0;
    for m in 1..n {
        // binomial(m+1, j) running product
        let mut acc = 0.0;
        let mut binom = 1.0f64; // C(m+1, 0)
        for (j, bj) in b.iter().enumerate().take(m) {
            acc += binom * bj;
            binom *= (m + 1 - j) as f64 / (j + 1) as f64;
        }
        // odd Bernoulli numbers above B_1 are exactly zero; the recurrence
        // only produces them up to rounding noise
        b[m] = if m > 1 && m % 2 == 1 {
            0.0
        } else {
            -acc / (m as f64 + 1.0)
        };
    }
    b
});
