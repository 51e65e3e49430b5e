//! Extended concentrated Gaussians on a matrix Lie group.
//!
//! A distribution is a reference point `g0`, a local mean `mu` and covariance
//! `P` on the algebra, and a frame tag: in the body frame the random variable
//! is `g = g0 * exp(xi)`, in the spatial frame `g = exp(xi) * g0`, with
//! `xi ~ N(mu, P)`. The two frames are related by the adjoint congruence
//! `mu_bar = Ad(g0) mu`, `P_bar = Ad(g0) P Ad(g0)^T`.
//!
//! Distributions are immutable values; `sample` mutates only the caller's
//! RNG.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::lie::{symmetrize, GroupDescriptor, GroupElement, LieError};

/// Which side of the reference point carries the local error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    Body,
    Spatial,
}

#[derive(Debug, Error)]
pub enum GaussianError {
    #[error(transparent)]
    Lie(#[from] LieError),
    #[error("covariance is not symmetric positive definite")]
    NotPositiveDefinite,
    #[error("distribution is in the {got:?} frame, expected {expected:?}")]
    WrongFrame { expected: Frame, got: Frame },
}

/// Extended concentrated Gaussian distribution on a group.
#[derive(Debug, Clone)]
pub struct ConcentratedGaussian {
    pub reference: GroupElement,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub frame: Frame,
}

impl ConcentratedGaussian {
    pub fn new(
        group: &GroupDescriptor,
        reference: GroupElement,
        mean: DVector<f64>,
        cov: DMatrix<f64>,
        frame: Frame,
    ) -> Result<Self, GaussianError> {
        let k = group.dim();
        if mean.len() != k || cov.nrows() != k || cov.ncols() != k {
            return Err(LieError::DimensionMismatch {
                expected: k,
                got: mean.len(),
            }
            .into());
        }
        if (cov.transpose() - &cov).norm() > 1e-12 * cov.norm().max(1.0) {
            return Err(GaussianError::NotPositiveDefinite);
        }
        Ok(Self {
            reference,
            mean,
            cov,
            frame,
        })
    }
}

fn require_frame(d: &ConcentratedGaussian, expected: Frame) -> Result<(), GaussianError> {
    if d.frame != expected {
        return Err(GaussianError::WrongFrame {
            expected,
            got: d.frame,
        });
    }
    Ok(())
}

/// Converts between body and spatial parameterizations of the same
/// distribution. Converting twice is the identity up to rounding.
pub fn convert_frame(
    group: &GroupDescriptor,
    d: &ConcentratedGaussian,
) -> Result<ConcentratedGaussian, GaussianError> {
    let ad = match d.frame {
        Frame::Body => group.adjoint(&d.reference)?,
        Frame::Spatial => group.adjoint(&group.inverse(&d.reference)?)?,
    };
    let mean = &ad * &d.mean;
    let mut cov = &ad * &d.cov * ad.transpose();
    symmetrize(&mut cov);
    Ok(ConcentratedGaussian {
        reference: d.reference.clone(),
        mean,
        cov,
        frame: match d.frame {
            Frame::Body => Frame::Spatial,
            Frame::Spatial => Frame::Body,
        },
    })
}

/// Moves the reference point of a body-frame distribution to `new_ref`,
/// returning the KL-optimal reparameterization (up to second-order
/// linearization error).
///
/// In the filter's use case `new_ref = reference * exp(mean)` the new mean is
/// zero and the covariance becomes `J_r(mean) P J_r(mean)^T`, the covariance
/// reset.
pub fn reset_body(
    group: &GroupDescriptor,
    d: &ConcentratedGaussian,
    new_ref: &GroupElement,
) -> Result<ConcentratedGaussian, GaussianError> {
    require_frame(d, Frame::Body)?;
    let shifted = group.compose(
        &group.compose(&group.inverse(new_ref)?, &d.reference)?,
        &group.exp(&d.mean)?,
    )?;
    let new_mean = group.log(&shifted)?;
    let j1 = group.jac_right(&d.mean)?;
    let j2_inv = group.jac_right_inv(&new_mean)?;
    let t = &j2_inv * &j1;
    let mut cov = &t * &d.cov * t.transpose();
    symmetrize(&mut cov);
    if cov.clone().cholesky().is_none() {
        return Err(GaussianError::NotPositiveDefinite);
    }
    Ok(ConcentratedGaussian {
        reference: new_ref.clone(),
        mean: new_mean,
        cov,
        frame: Frame::Body,
    })
}

/// Spatial-frame counterpart of [`reset_body`], using left Jacobians:
/// `mu2 = log(exp(mu1) x1 x2^-1)` and
/// `S2 = Jl(mu2)^-1 Jl(mu1) S1 Jl(mu1)^T Jl(mu2)^-T`.
pub fn reset_spatial(
    group: &GroupDescriptor,
    d: &ConcentratedGaussian,
    new_ref: &GroupElement,
) -> Result<ConcentratedGaussian, GaussianError> {
    require_frame(d, Frame::Spatial)?;
    let shifted = group.compose(
        &group.compose(&group.exp(&d.mean)?, &d.reference)?,
        &group.inverse(new_ref)?,
    )?;
    let new_mean = group.log(&shifted)?;
    let j1 = group.jac_left(&d.mean)?;
    let j2_inv = group.jac_left_inv(&new_mean)?;
    let t = &j2_inv * &j1;
    let mut cov = &t * &d.cov * t.transpose();
    symmetrize(&mut cov);
    if cov.clone().cholesky().is_none() {
        return Err(GaussianError::NotPositiveDefinite);
    }
    Ok(ConcentratedGaussian {
        reference: new_ref.clone(),
        mean: new_mean,
        cov,
        frame: Frame::Spatial,
    })
}

/// Draws one group element. Uses the lower-triangular Cholesky factor of the
/// covariance; a zero covariance yields `reference * exp(mean)` (body) or
/// `exp(mean) * reference` (spatial) deterministically.
pub fn sample<R: Rng + ?Sized>(
    group: &GroupDescriptor,
    d: &ConcentratedGaussian,
    rng: &mut R,
) -> Result<GroupElement, GaussianError> {
    let k = group.dim();
    let xi = if d.cov.norm() == 0.0 {
        d.mean.clone()
    } else {
        let chol = d
            .cov
            .clone()
            .cholesky()
            .ok_or(GaussianError::NotPositiveDefinite)?;
        let z = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
        &d.mean + chol.l() * z
    };
    let e = group.exp(&xi)?;
    Ok(match d.frame {
        Frame::Body => group.compose(&d.reference, &e)?,
        Frame::Spatial => group.compose(&e, &d.reference)?,
    })
}
