//! Closed-form SO(3) operations: Rodrigues exponential, stabilized logarithm
//! and the group Jacobians with their inverses.
//!
//! These are used both directly and as the rotation-block kernels of the
//! composite navigation group. All angle handling is Taylor-stabilized below
//! `SMALL_ANGLE` and the logarithm rejects inputs within `CUT_LOCUS_GUARD`
//! of the cut locus at pi.

use nalgebra::{Matrix3, Vector3};

use crate::lie::LieError;

/// Angle below which series expansions replace the trigonometric closed forms.
pub const SMALL_ANGLE: f64 = 1e-4;

/// Half-width of the rejection band around the cut locus at pi.
pub const CUT_LOCUS_GUARD: f64 = 1e-6;

/// Skew-symmetric map, `skew(v) * x == v.cross(&x)`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`skew`] on exactly skew-symmetric input; averages the two
/// off-diagonal triangles so small symmetric noise cancels.
pub fn unskew(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

/// Rodrigues formula, `exp(skew(w))`.
pub fn exp(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = w.norm_squared();
    let theta = theta2.sqrt();
    let (a, b) = if theta < SMALL_ANGLE {
        // sin(t)/t and (1-cos(t))/t^2
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    let wx = skew(w);
    Matrix3::identity() + wx * a + wx * wx * b
}

/// Rotation angle in `[0, pi]`, computed from both the trace and the
/// skew part so it stays well conditioned over the whole range.
pub fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    let c = 0.5 * (r.trace() - 1.0);
    let s = (unskew(&(r - r.transpose())) * 0.5).norm();
    s.atan2(c.clamp(-1.0, 1.0))
}

/// Logarithm of a rotation matrix.
///
/// Uses the skew part for the axis up to moderate angles and switches to the
/// symmetric part near pi, where the skew part degenerates. Angles within
/// [`CUT_LOCUS_GUARD`] of pi are rejected.
pub fn log(r: &Matrix3<f64>) -> Result<Vector3<f64>, LieError> {
    let c = (0.5 * (r.trace() - 1.0)).clamp(-1.0, 1.0);
    let w = unskew(&(r - r.transpose())) * 0.5; // = sin(theta) * axis
    let s = w.norm();
    let theta = s.atan2(c);

    if theta < SMALL_ANGLE {
        // theta/sin(theta) = 1 + t^2/6 + 7 t^4/360 + ...
        let t2 = theta * theta;
        return Ok(w * (1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0));
    }
    if theta > std::f64::consts::PI - CUT_LOCUS_GUARD {
        return Err(LieError::NearCutLocus { angle: theta });
    }
    if theta < 3.0 {
        return Ok(w * (theta / s));
    }

    // Near-pi branch: recover the axis from the symmetric part
    // R + R^T = 2 c I + 2 (1 - c) a a^T.
    let b = (r + r.transpose()) * 0.5 - Matrix3::identity() * c;
    let scale = 1.0 - c;
    let diag = Vector3::new(b[(0, 0)], b[(1, 1)], b[(2, 2)]);
    let i = diag.imax();
    let mut axis = Vector3::zeros();
    axis[i] = (diag[i] / scale).max(0.0).sqrt();
    for j in 0..3 {
        if j != i {
            axis[j] = b[(i, j)] / (scale * axis[i]);
        }
    }
    axis.normalize_mut();
    // sin(theta) > 0 below pi, so the skew part fixes the sign.
    if axis.dot(&w) < 0.0 {
        axis = -axis;
    }
    Ok(axis * theta)
}

/// Right group Jacobian of SO(3).
pub fn jac_right(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = w.norm_squared();
    let theta = theta2.sqrt();
    let (a, b) = if theta < SMALL_ANGLE {
        // (1-cos t)/t^2 and (t - sin t)/t^3
        (0.5 - theta2 / 24.0, 1.0 / 6.0 - theta2 / 120.0)
    } else {
        (
            (1.0 - theta.cos()) / theta2,
            (theta - theta.sin()) / (theta2 * theta),
        )
    };
    let wx = skew(w);
    Matrix3::identity() - wx * a + wx * wx * b
}

/// Left group Jacobian, `jac_left(w) = jac_right(-w)`.
pub fn jac_left(w: &Vector3<f64>) -> Matrix3<f64> {
    jac_right(&-w)
}

/// Inverse of the right group Jacobian.
///
/// Valid for angles below 2 pi; the caller is expected to stay within the
/// convergence bound (the filter only ever needs small arguments here).
pub fn jac_right_inv(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = w.norm_squared();
    let theta = theta2.sqrt();
    let c2 = if theta < SMALL_ANGLE {
        1.0 / 12.0 + theta2 / 720.0
    } else {
        // 1/t^2 - (1 + cos t) / (2 t sin t), written to stay finite at pi
        (1.0 - 0.5 * theta * (1.0 + theta.cos()) / theta.sin()) / theta2
    };
    let wx = skew(w);
    Matrix3::identity() + wx * 0.5 + wx * wx * c2
}

/// Inverse of the left group Jacobian.
pub fn jac_left_inv(w: &Vector3<f64>) -> Matrix3<f64> {
    jac_right_inv(&-w)
}

/// Polar projection onto SO(3) through an SVD, used to control orthonormality
/// drift over long integrations.
pub fn project(r: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = r.svd(true, true);
    let u = svd.u.expect("svd requested u");
    let vt = svd.v_t.expect("svd requested v_t");
    let mut p = u * vt;
    if p.determinant() < 0.0 {
        // Flip the weakest singular direction to land on SO(3), not O(3).
        let mut u = u;
        u.column_mut(2).neg_mut();
        p = u * vt;
    }
    p
}
