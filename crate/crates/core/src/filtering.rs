//! Constant-velocity Kalman filter on the ground plane.
//!
//! State is `[x, z, vx, vz]` with velocities in meters per frame; the time
//! step is always one frame.

use nalgebra::{Matrix2, Matrix2x4, Matrix4, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Location;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KalmanParams {
    /// Standard deviation of a position measurement, meters.
    pub measurement_noise_std: f64,
    /// White-noise acceleration intensity is the square of this, m/frame².
    pub process_accel_std: f64,
    /// Prior standard deviation of the velocity of a new track, m/frame.
    pub initial_velocity_std: f64,
}

impl Default for KalmanParams {
    fn default() -> Self {
        Self { measurement_noise_std: 0.05, process_accel_std: 0.1, initial_velocity_std: 3.16 }
    }
}

impl KalmanParams {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if ok(self.measurement_noise_std) && ok(self.process_accel_std) && ok(self.initial_velocity_std) {
            Ok(())
        } else {
            Err(Error::InvalidTrackerConfig(format!("Kalman noise terms must be positive: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanState {
    pub mean: Vector4<f64>,
    pub covariance: Matrix4<f64>,
}

impl KalmanState {
    pub fn location(&self) -> Location {
        Location::new(self.mean[0], self.mean[1])
    }

    pub fn velocity(&self) -> (f64, f64) {
        (self.mean[2], self.mean[3])
    }
}

/// Filter matrices for one parameter set; states are plain values passed in and out.
#[derive(Debug, Clone)]
pub struct ConstantVelocityFilter {
    params: KalmanParams,
    transition: Matrix4<f64>,
    process_noise: Matrix4<f64>,
    observation: Matrix2x4<f64>,
    measurement_noise: Matrix2<f64>,
}

impl ConstantVelocityFilter {
    pub fn new(params: KalmanParams) -> Self {
        #[rustfmt::skip]
        let transition = Matrix4::new(
            1.0, 0.0, 1.0, 0.0,
            0.0, 1.0, 0.0, 1.0,
            0.0, 0.0, 1.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
        );
        // continuous white-noise acceleration integrated over dt = 1
        let q = params.process_accel_std.powi(2);
        let (pp, pv, vv) = (q / 3.0, q / 2.0, q);
        #[rustfmt::skip]
        let process_noise = Matrix4::new(
            pp,  0.0, pv,  0.0,
            0.0, pp,  0.0, pv,
            pv,  0.0, vv,  0.0,
            0.0, pv,  0.0, vv,
        );
        let observation = Matrix2x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0);
        let measurement_noise = Matrix2::identity() * params.measurement_noise_std.powi(2);
        Self { params, transition, process_noise, observation, measurement_noise }
    }

    pub fn params(&self) -> &KalmanParams {
        &self.params
    }

    /// Fresh state at rest on `loc`.
    pub fn initiate(&self, loc: Location) -> KalmanState {
        let pos = self.params.measurement_noise_std.powi(2);
        let vel = self.params.initial_velocity_std.powi(2);
        KalmanState {
            mean: Vector4::new(loc.x, loc.z, 0.0, 0.0),
            covariance: Matrix4::from_diagonal(&Vector4::new(pos, pos, vel, vel)),
        }
    }

    /// One-frame prediction; also returns the predicted position.
    pub fn predict(&self, state: &KalmanState) -> (KalmanState, Location) {
        let mean = self.transition * state.mean;
        let cov = self.transition * state.covariance * self.transition.transpose() + self.process_noise;
        let next = KalmanState { mean, covariance: symmetrize(cov) };
        (next, next.location())
    }

    pub fn update(&self, state: &KalmanState, measured: Location) -> KalmanState {
        let h = &self.observation;
        let innovation = Vector2::new(measured.x, measured.z) - h * state.mean;
        let s = h * state.covariance * h.transpose() + self.measurement_noise;
        // S is 2x2 SPD: R has a strictly positive diagonal
        let s_inv = s.try_inverse().expect("innovation covariance is positive definite");
        let gain = state.covariance * h.transpose() * s_inv;
        let mean = state.mean + gain * innovation;
        // Joseph form keeps the covariance symmetric positive-definite
        let i_kh = Matrix4::identity() - gain * h;
        let cov =
            i_kh * state.covariance * i_kh.transpose() + gain * self.measurement_noise * gain.transpose();
        KalmanState { mean, covariance: symmetrize(cov) }
    }
}

fn symmetrize(m: Matrix4<f64>) -> Matrix4<f64> {
    (m + m.transpose()) * 0.5
}
