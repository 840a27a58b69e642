//! Constant-velocity Kalman filter over box coordinates (Bot-Sort variant).
//!
//! The state is the 8-vector `z = (left, top, width, height, v_left, v_top,
//! v_width, v_height)`. Transition and observation models are linear:
//!
//! ```text
//! ẑ_t = F z̃_{t-1}           P̂_t = F P̃_{t-1} Fᵀ + Q_t
//! x̂_t = H ẑ_t               Σ̂_t = H P̂_t Hᵀ + R_t
//! K_t = P̂_t Hᵀ Σ̂_t⁻¹
//! z̃_t = ẑ_t + K_t (x_t − x̂_t)
//! P̃_t = P̂_t − K_t Σ̂_t K_tᵀ
//! ```
//!
//! Process noise is rescaled every step from the previous posterior width and
//! height, measurement noise from the measured box, following the Bot-Sort
//! convention: position-like rows use `σ_p`, velocity rows `σ_v`, measurement
//! rows `σ_m`, each multiplied by `w` or `h` in the `(w, h, w, h)` pattern.

use nalgebra::{Cholesky, SMatrix, SVector};
use thiserror::Error;

use crate::gaussian::GaussianState;
use crate::geom::Box;

pub type StateVector = SVector<f64, 8>;
pub type StateCov = SMatrix<f64, 8, 8>;

#[derive(Debug, Error, PartialEq)]
pub enum KalmanError {
    #[error("innovation covariance is singular")]
    SingularInnovation,
}

/// Noise multipliers and frame period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanParams {
    /// Position process-noise multiplier.
    pub sigma_p: f64,
    /// Velocity process-noise multiplier.
    pub sigma_v: f64,
    /// Measurement-noise multiplier.
    pub sigma_m: f64,
    /// Time step between frames.
    pub dt: f64,
}

impl Default for KalmanParams {
    fn default() -> Self {
        Self { sigma_p: 0.05, sigma_v: 0.00625, sigma_m: 0.05, dt: 1.0 }
    }
}

/// Gaussian state `N(z, P)`; `P` stays symmetric positive semi-definite.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub z: StateVector,
    pub p: StateCov,
}

impl KalmanState {
    /// Measurement-space projection: mean `Hz`, variance `diag(H P Hᵀ)`.
    pub fn measurement_projection(&self) -> GaussianState {
        let mean = [self.z[0], self.z[1], self.z[2], self.z[3]];
        let var = [self.p[(0, 0)], self.p[(1, 1)], self.p[(2, 2)], self.p[(3, 3)]];
        GaussianState::new(mean, var)
    }
}

fn transition(params: &KalmanParams) -> StateCov {
    let mut f = StateCov::identity();
    for i in 0..4 {
        f[(i, i + 4)] = params.dt;
    }
    f
}

fn process_noise(params: &KalmanParams, w: f64, h: f64) -> StateCov {
    let mut q = StateCov::zeros();
    let dims = [w, h, w, h];
    for i in 0..4 {
        q[(i, i)] = (params.sigma_p * dims[i]).powi(2);
        q[(i + 4, i + 4)] = (params.sigma_v * dims[i]).powi(2);
    }
    q
}

fn measurement_noise(params: &KalmanParams, w: f64, h: f64) -> SMatrix<f64, 4, 4> {
    let dims = [w, h, w, h];
    SMatrix::<f64, 4, 4>::from_diagonal(&SVector::<f64, 4>::from_iterator(
        dims.iter().map(|d| (params.sigma_m * d).powi(2)),
    ))
}

/// Initializes a track state from its first measurement.
///
/// The position block copies the measurement, velocities start at zero, and
/// the covariance is diagonal with standard deviations `2 σ_p dim` for
/// positions and `10 σ_v dim` for velocities (`dim` is `w` or `h` in the
/// `(w, h, w, h)` pattern).
pub fn kf_init(measurement: &Box, params: &KalmanParams) -> KalmanState {
    let [l, t, w, h] = measurement.ltwh();
    let z = StateVector::from_row_slice(&[l, t, w, h, 0.0, 0.0, 0.0, 0.0]);
    let mut p = StateCov::zeros();
    let dims = [w, h, w, h];
    for i in 0..4 {
        p[(i, i)] = (2.0 * params.sigma_p * dims[i]).powi(2);
        p[(i + 4, i + 4)] = (10.0 * params.sigma_v * dims[i]).powi(2);
    }
    KalmanState { z, p }
}

/// One prediction step; returns the prior and its measurement-space projection.
pub fn kf_predict(state: &KalmanState, params: &KalmanParams) -> (KalmanState, GaussianState) {
    let f = transition(params);
    let q = process_noise(params, state.z[2], state.z[3]);
    let z = f * state.z;
    let p = f * state.p * f.transpose() + q;
    let prior = KalmanState { z, p };
    let projection = prior.measurement_projection();
    (prior, projection)
}

/// Fuses a prior with a measured box; returns the posterior state.
pub fn kf_update(
    prior: &KalmanState,
    measurement: &Box,
    params: &KalmanParams,
) -> Result<KalmanState, KalmanError> {
    let r = measurement_noise(params, measurement.width, measurement.height);
    // H P̂ Hᵀ is the top-left 4x4 block; P̂ Hᵀ the first four columns.
    let pht = prior.p.fixed_view::<8, 4>(0, 0).into_owned();
    let innovation_cov = prior.p.fixed_view::<4, 4>(0, 0) + r;
    let chol = Cholesky::new(innovation_cov).ok_or(KalmanError::SingularInnovation)?;
    // K = P̂ Hᵀ Σ⁻¹, obtained by solving Σ Kᵀ = (P̂ Hᵀ)ᵀ.
    let k = chol.solve(&pht.transpose()).transpose();
    let x = SVector::<f64, 4>::from_row_slice(&measurement.ltwh());
    let residual = x - prior.z.fixed_rows::<4>(0);
    let z = prior.z + k * residual;
    let p = prior.p - k * innovation_cov * k.transpose();
    let p = (p + p.transpose()) * 0.5;
    Ok(KalmanState { z, p })
}
