//! GNSS-aided inertial navigation on SE2(3) x R^3 x R^3.
//!
//! State: extended pose (R, v, p) plus accelerometer and gyroscope biases
//! modeled as Gauss-Markov processes. Inputs are the IMU specific force and
//! angular rate; the measurement is the world-frame GNSS position. Algebra
//! coordinates are ordered (phi, nu, rho, beta_f, beta_omega).

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::groups;
use crate::lekf::SystemModel;
use crate::lie::{GroupDescriptor, GroupElement};
use crate::so3;

/// IMU sample driving the dynamics.
#[derive(Debug, Clone, Copy)]
pub struct InsInput {
    /// Specific force, m/s^2, body frame.
    pub f: Vector3<f64>,
    /// Angular rate, rad/s, body frame.
    pub omega: Vector3<f64>,
}

impl InsInput {
    /// Packs the input as `[f; omega]` for the generic filter interface.
    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_vec(vec![
            self.f.x,
            self.f.y,
            self.f.z,
            self.omega.x,
            self.omega.y,
            self.omega.z,
        ])
    }

    pub fn from_vector(u: &DVector<f64>) -> Self {
        Self {
            f: Vector3::new(u[0], u[1], u[2]),
            omega: Vector3::new(u[3], u[4], u[5]),
        }
    }
}

fn default_gravity() -> [f64; 3] {
    [0.0, 0.0, -9.81]
}

fn default_sigma_f() -> f64 {
    6.9343e-4
}
fn default_sigma_omega() -> f64 {
    3.0853e-5
}
fn default_sigma_bf() -> f64 {
    4.1881e-5
}
fn default_sigma_bomega() -> f64 {
    3.9284e-6
}
fn default_time_constant() -> f64 {
    600.0
}
fn default_sigma_y() -> f64 {
    0.07
}
fn default_sigma_bf0() -> f64 {
    0.0073
}
fn default_sigma_bomega0() -> f64 {
    0.0012
}

/// Noise and physical parameters. Defaults correspond to a tactical-grade
/// (STIM300-class) IMU with 1 Hz GNSS at 7 cm.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InsParams {
    /// Accelerometer white-noise density, m/s^(3/2).
    pub sigma_f: f64,
    /// Gyroscope white-noise density, rad/s^(1/2).
    pub sigma_omega: f64,
    /// Accelerometer bias driving-noise density, m/s^(5/2).
    pub sigma_bf: f64,
    /// Gyroscope bias driving-noise density, rad/s^(3/2).
    pub sigma_bomega: f64,
    /// Accelerometer bias time constant, s.
    pub t_bf: f64,
    /// Gyroscope bias time constant, s.
    pub t_bomega: f64,
    /// GNSS position noise standard deviation, m.
    pub sigma_y: f64,
    /// Initial accelerometer bias standard deviation, m/s^2.
    pub sigma_bf0: f64,
    /// Initial gyroscope bias standard deviation, rad/s.
    pub sigma_bomega0: f64,
    /// World-frame gravity vector, m/s^2.
    pub gravity: [f64; 3],
}

impl Default for InsParams {
    fn default() -> Self {
        Self {
            sigma_f: default_sigma_f(),
            sigma_omega: default_sigma_omega(),
            sigma_bf: default_sigma_bf(),
            sigma_bomega: default_sigma_bomega(),
            t_bf: default_time_constant(),
            t_bomega: default_time_constant(),
            sigma_y: default_sigma_y(),
            sigma_bf0: default_sigma_bf0(),
            sigma_bomega0: default_sigma_bomega0(),
            gravity: default_gravity(),
        }
    }
}

impl InsParams {
    pub fn gravity_vector(&self) -> Vector3<f64> {
        Vector3::new(self.gravity[0], self.gravity[1], self.gravity[2])
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("sigma_f", self.sigma_f),
            ("sigma_omega", self.sigma_omega),
            ("sigma_bf", self.sigma_bf),
            ("sigma_bomega", self.sigma_bomega),
            ("t_bf", self.t_bf),
            ("t_bomega", self.t_bomega),
            ("sigma_y", self.sigma_y),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive and finite"));
            }
        }
        Ok(())
    }

    /// Default initial covariance: 20 degrees of attitude, 10 m/s and 10 m
    /// per axis, and the initial bias standard deviations, block-diagonal in
    /// (phi, nu, rho, beta_f, beta_omega) order.
    pub fn default_initial_covariance(&self) -> DMatrix<f64> {
        let att = (20.0_f64).to_radians().powi(2);
        let mut d = DVector::zeros(15);
        for i in 0..3 {
            d[i] = att;
            d[3 + i] = 100.0;
            d[6 + i] = 100.0;
            d[9 + i] = self.sigma_bf0 * self.sigma_bf0;
            d[12 + i] = self.sigma_bomega0 * self.sigma_bomega0;
        }
        DMatrix::from_diagonal(&d)
    }
}

/// Compact navigation state, convertible to and from the 13x13 embedded
/// group element.
#[derive(Debug, Clone, Copy)]
pub struct NavState {
    pub r: Matrix3<f64>,
    pub v: Vector3<f64>,
    pub p: Vector3<f64>,
    pub b_f: Vector3<f64>,
    pub b_omega: Vector3<f64>,
}

impl NavState {
    pub fn identity() -> Self {
        Self {
            r: Matrix3::identity(),
            v: Vector3::zeros(),
            p: Vector3::zeros(),
            b_f: Vector3::zeros(),
            b_omega: Vector3::zeros(),
        }
    }

    pub fn to_group(&self) -> GroupElement {
        let mut m = DMatrix::identity(13, 13);
        m.view_mut((0, 0), (5, 5))
            .copy_from(&groups::se23_matrix(&self.r, &self.v, &self.p));
        m.view_mut((5, 8), (3, 1)).copy_from(&self.b_f);
        m.view_mut((9, 12), (3, 1)).copy_from(&self.b_omega);
        GroupElement::from_matrix_unchecked(m)
    }

    pub fn from_group(g: &GroupElement) -> Self {
        let m = g.matrix();
        let (r, v, p) = groups::se23_parts(&m.view((0, 0), (5, 5)).into_owned());
        Self {
            r,
            v,
            p,
            b_f: Vector3::new(m[(5, 8)], m[(6, 8)], m[(7, 8)]),
            b_omega: Vector3::new(m[(9, 12)], m[(10, 12)], m[(11, 12)]),
        }
    }
}

/// The case-study system model. Holds the navigation group descriptor; all
/// evaluation functions are pure.
pub struct InsModel {
    group: GroupDescriptor,
    params: InsParams,
    gravity: Vector3<f64>,
}

impl InsModel {
    pub fn new(params: InsParams) -> Self {
        let gravity = params.gravity_vector();
        Self {
            group: groups::navigation_group(),
            params,
            gravity,
        }
    }

    pub fn params(&self) -> &InsParams {
        &self.params
    }

    /// Drift split into per-block algebra components
    /// (phi, nu, rho, beta_f, beta_omega), avoiding the embedded-matrix
    /// round trip on hot simulation paths.
    pub fn drift_parts(&self, s: &NavState, u: &InsInput) -> [Vector3<f64>; 5] {
        let rt = s.r.transpose();
        [
            u.omega - s.b_omega,
            u.f - s.b_f + rt * self.gravity,
            rt * s.v,
            -s.b_f / self.params.t_bf,
            -s.b_omega / self.params.t_bomega,
        ]
    }

    /// Body-frame time derivative of the raw embedded state under the SDE
    /// right-hand side with the given noise-free input; used as the oracle
    /// counterpart of the hat-form drift.
    pub fn raw_state_derivative(&self, s: &NavState, u: &InsInput) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(13, 13);
        let r_dot = s.r * so3::skew(&(u.omega - s.b_omega));
        let v_dot = s.r * (u.f - s.b_f) + self.gravity;
        d.view_mut((0, 0), (3, 3)).copy_from(&r_dot);
        d.view_mut((0, 3), (3, 1)).copy_from(&v_dot);
        d.view_mut((0, 4), (3, 1)).copy_from(&s.v);
        d.view_mut((5, 8), (3, 1))
            .copy_from(&(-s.b_f / self.params.t_bf));
        d.view_mut((9, 12), (3, 1))
            .copy_from(&(-s.b_omega / self.params.t_bomega));
        d
    }
}

fn set_vec3(out: &mut DVector<f64>, at: usize, v: &Vector3<f64>) {
    out[at] = v.x;
    out[at + 1] = v.y;
    out[at + 2] = v.z;
}

impl SystemModel for InsModel {
    fn group(&self) -> &GroupDescriptor {
        &self.group
    }

    fn drift(&self, g: &GroupElement, u: &DVector<f64>) -> DVector<f64> {
        let s = NavState::from_group(g);
        let parts = self.drift_parts(&s, &InsInput::from_vector(u));
        let mut a = DVector::zeros(15);
        for (i, part) in parts.iter().enumerate() {
            set_vec3(&mut a, 3 * i, part);
        }
        a
    }

    fn noise_input(&self, _g: &GroupElement, _u: &DVector<f64>) -> DMatrix<f64> {
        // noise vector order: (w_f, w_omega, w_bf, w_bomega)
        let mut b = DMatrix::zeros(15, 12);
        for i in 0..3 {
            b[(i, 3 + i)] = -1.0; // rotation slot <- -w_omega
            b[(3 + i, i)] = -1.0; // velocity slot <- -w_f
            b[(9 + i, 6 + i)] = 1.0;
            b[(12 + i, 9 + i)] = 1.0;
        }
        b
    }

    fn measurement(&self, g: &GroupElement, _u: &DVector<f64>) -> DVector<f64> {
        let s = NavState::from_group(g);
        DVector::from_vec(vec![s.p.x, s.p.y, s.p.z])
    }

    fn measurement_noise_input(&self, _g: &GroupElement, _u: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(3, 3)
    }

    fn process_noise(&self) -> DMatrix<f64> {
        let p = &self.params;
        let mut q = DVector::zeros(12);
        for i in 0..3 {
            q[i] = p.sigma_f * p.sigma_f;
            q[3 + i] = p.sigma_omega * p.sigma_omega;
            q[6 + i] = p.sigma_bf * p.sigma_bf;
            q[9 + i] = p.sigma_bomega * p.sigma_bomega;
        }
        DMatrix::from_diagonal(&q)
    }

    fn measurement_noise(&self) -> DMatrix<f64> {
        // inflated by 3 to absorb linearization error in the update
        DMatrix::identity(3, 3) * (3.0 * self.params.sigma_y * self.params.sigma_y)
    }

    fn drift_derivative(&self, g: &GroupElement, _u: &DVector<f64>) -> Option<DMatrix<f64>> {
        let s = NavState::from_group(g);
        let rt = s.r.transpose();
        let mut d = DMatrix::zeros(15, 15);
        // d a_phi / d beta_omega
        d.view_mut((0, 12), (3, 3))
            .copy_from(&(-Matrix3::identity()));
        // d a_nu / d phi and / d beta_f
        d.view_mut((3, 0), (3, 3))
            .copy_from(&so3::skew(&(rt * self.gravity)));
        d.view_mut((3, 9), (3, 3))
            .copy_from(&(-Matrix3::identity()));
        // d a_rho / d phi and / d nu
        d.view_mut((6, 0), (3, 3))
            .copy_from(&so3::skew(&(rt * s.v)));
        d.view_mut((6, 3), (3, 3)).copy_from(&Matrix3::identity());
        // bias mean reversion
        d.view_mut((9, 9), (3, 3))
            .copy_from(&(Matrix3::identity() * (-1.0 / self.params.t_bf)));
        d.view_mut((12, 12), (3, 3))
            .copy_from(&(Matrix3::identity() * (-1.0 / self.params.t_bomega)));
        Some(d)
    }

    fn measurement_derivative(&self, g: &GroupElement, _u: &DVector<f64>) -> Option<DMatrix<f64>> {
        let s = NavState::from_group(g);
        let mut c = DMatrix::zeros(3, 15);
        c.view_mut((0, 6), (3, 3)).copy_from(&s.r);
        Some(c)
    }
}
