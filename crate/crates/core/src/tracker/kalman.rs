//! Constant-velocity Kalman filter over boxes in `(u, v, s, r)` form:
//! center, area and aspect ratio, with velocities for `u`, `v` and `s`.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::corpus::BBox;

pub type StateVector = SVector<f64, 7>;
pub type StateMatrix = SMatrix<f64, 7, 7>;
pub type Measurement = SVector<f64, 4>;

/// Area assigned to a prediction whose area went non-positive.
pub const MIN_AREA: f64 = 1e-6;
/// Added to the innovation covariance diagonal when it cannot be factored.
pub const REGULARIZATION: f64 = 1e-9;

/// Diagonal noise terms of the filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel {
    pub measurement: [f64; 4],
    pub process: [f64; 7],
    pub initial_covariance: [f64; 7],
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            measurement: [1.0, 1.0, 10.0, 10.0],
            process: [1.0, 1.0, 1.0, 1.0, 0.01, 0.01, 1e-4],
            initial_covariance: [10.0, 10.0, 10.0, 10.0, 1e4, 1e4, 1e4],
        }
    }
}

impl NoiseModel {
    pub fn validate(&self) -> Result<(), String> {
        let all = self.measurement.iter().chain(&self.process).chain(&self.initial_covariance);
        if all.clone().any(|v| !v.is_finite() || *v < 0.0) {
            return Err("noise terms must be finite and >= 0".into());
        }
        Ok(())
    }
}

/// `(u, v, s, r)` of a box.
pub fn measurement_from_bbox(b: &BBox) -> Measurement {
    let (u, v) = b.center();
    Measurement::new(u, v, b.w * b.h, b.w / b.h)
}

/// Box from `(u, v, s, r)`. Non-positive `s` or `r` yields a zero-size box.
pub fn bbox_from_measurement(u: f64, v: f64, s: f64, r: f64) -> BBox {
    let w = (s * r).max(0.0).sqrt();
    let h = if w > 0.0 { s / w } else { 0.0 };
    BBox::from_center(u, v, w, h.max(0.0))
}

fn transition() -> StateMatrix {
    let mut f = StateMatrix::identity();
    f[(0, 4)] = 1.0;
    f[(1, 5)] = 1.0;
    f[(2, 6)] = 1.0;
    f
}

fn observation() -> SMatrix<f64, 4, 7> {
    SMatrix::<f64, 4, 7>::identity()
}

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub mean: StateVector,
    pub covariance: StateMatrix,
}

impl KalmanState {
    /// State at rest on `bbox`, with the initial covariance of `noise`.
    pub fn from_bbox(bbox: &BBox, noise: &NoiseModel) -> Self {
        let z = measurement_from_bbox(bbox);
        let mut mean = StateVector::zeros();
        mean.fixed_rows_mut::<4>(0).copy_from(&z);
        KalmanState {
            mean,
            covariance: StateMatrix::from_diagonal(&StateVector::from(noise.initial_covariance)),
        }
    }

    pub fn bbox(&self) -> BBox {
        bbox_from_measurement(self.mean[0], self.mean[1], self.mean[2], self.mean[3])
    }

    pub fn center(&self) -> (f64, f64) {
        (self.mean[0], self.mean[1])
    }

    /// One step of the motion model. The flag is set when the predicted area
    /// was non-positive and had to be clamped to [`MIN_AREA`].
    pub fn predict(&self, noise: &NoiseModel) -> (KalmanState, bool) {
        let f = transition();
        let mut mean = f * self.mean;
        let covariance =
            f * self.covariance * f.transpose() + StateMatrix::from_diagonal(&StateVector::from(noise.process));
        let degenerate = mean[2] <= 0.0;
        if degenerate {
            mean[2] = MIN_AREA;
        }
        (KalmanState { mean, covariance }, degenerate)
    }

    /// Correction against measurement `z`. The flag is set when the
    /// innovation covariance was singular and got regularized.
    pub fn update(&self, z: &Measurement, noise: &NoiseModel) -> (KalmanState, bool) {
        let h = observation();
        let r = SMatrix::<f64, 4, 4>::from_diagonal(&Measurement::from(noise.measurement));
        let mut s = h * self.covariance * h.transpose() + r;
        let mut regularized = false;
        let s_inv = match s.try_inverse() {
            Some(inv) if inv.iter().all(|v| v.is_finite()) => inv,
            _ => {
                regularized = true;
                s += SMatrix::<f64, 4, 4>::identity() * REGULARIZATION;
                s.try_inverse().unwrap_or_else(SMatrix::<f64, 4, 4>::zeros)
            }
        };
        let gain = self.covariance * h.transpose() * s_inv;
        let innovation = z - h * self.mean;
        let mean = self.mean + gain * innovation;
        let p = (StateMatrix::identity() - gain * h) * self.covariance;
        let covariance = (p + p.transpose()) * 0.5;
        (KalmanState { mean, covariance }, regularized)
    }
}
