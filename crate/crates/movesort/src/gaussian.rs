//! Gaussian states over box coordinates and exact Bayes fusion.
//!
//! The filters in this crate represent beliefs over the 4 box coordinates as
//! Gaussians. The diagonal form [`GaussianState`] is the working currency of
//! the Bayes-family and end-to-end filters; [`FullGaussian`] supports general
//! covariances for callers that need them. Fusing a predicted prior `N(μ̂, Σ̂)`
//! with a measurement likelihood `N(x | μ, Σ)` is conjugate, with posterior
//!
//! ```text
//! Σ̃⁻¹ = Σ̂⁻¹ + Σ⁻¹
//! μ̃   = Σ̃ (Σ̂⁻¹ μ̂ + Σ⁻¹ μ)
//! ```
//!
//! which in the diagonal case reduces to per-coordinate precision addition.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::geom::Box;

/// Lower bound applied to every variance entry.
pub const VAR_FLOOR: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum GaussianError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("covariance is not symmetric")]
    NotSymmetric,
    #[error("covariance is not positive definite")]
    NotPositiveDefinite,
}

/// Diagonal Gaussian over `(left, top, width, height)`.
///
/// Variances are floored at [`VAR_FLOOR`] on construction, so a state can
/// always be fused or scored without degenerate precisions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianState {
    mean: [f64; 4],
    var: [f64; 4],
}

impl GaussianState {
    pub fn new(mean: [f64; 4], var: [f64; 4]) -> Self {
        let var = var.map(|v| v.max(VAR_FLOOR));
        Self { mean, var }
    }

    /// State centred on a box with per-coordinate variances.
    pub fn from_box(b: &Box, var: [f64; 4]) -> Self {
        Self::new(b.ltwh(), var)
    }

    pub fn mean(&self) -> [f64; 4] {
        self.mean
    }

    pub fn var(&self) -> [f64; 4] {
        self.var
    }

    /// Mean as a box (width/height clamped to zero if the mean drifted negative).
    pub fn mean_box(&self) -> Box {
        Box::from_ltwh(self.mean)
    }
}

/// Fuses a prior and a measurement in precision form, per coordinate.
pub fn fuse_diag(prior: &GaussianState, measurement: &GaussianState) -> GaussianState {
    let mut mean = [0.0; 4];
    let mut var = [0.0; 4];
    for i in 0..4 {
        let p_prior = 1.0 / prior.var[i];
        let p_meas = 1.0 / measurement.var[i];
        let p_post = p_prior + p_meas;
        var[i] = 1.0 / p_post;
        mean[i] = (p_meas * measurement.mean[i] + p_prior * prior.mean[i]) / p_post;
    }
    GaussianState::new(mean, var)
}

/// Gaussian with a full (symmetric positive definite) covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct FullGaussian {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl FullGaussian {
    /// Validates symmetry (tolerance `1e-9`) and positive definiteness.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self, GaussianError> {
        let n = mean.len();
        if cov.nrows() != n || cov.ncols() != n {
            return Err(GaussianError::DimensionMismatch { expected: n, got: cov.nrows() });
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if (cov[(i, j)] - cov[(j, i)]).abs() > 1e-9 {
                    return Err(GaussianError::NotSymmetric);
                }
            }
        }
        if cov.clone().cholesky().is_none() {
            return Err(GaussianError::NotPositiveDefinite);
        }
        Ok(Self { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }
}

/// Fuses two full Gaussians by factorize-and-solve (no explicit inverse).
///
/// Uses the gain form `K = Σ̂ (Σ̂ + Σ)⁻¹`, `μ̃ = μ̂ + K (μ − μ̂)`,
/// `Σ̃ = (I − K) Σ̂`, algebraically identical to precision addition. The result
/// covariance is re-symmetrized as `(M + Mᵀ) / 2` before validation.
pub fn fuse_full(
    prior: &FullGaussian,
    measurement: &FullGaussian,
) -> Result<FullGaussian, GaussianError> {
    let n = prior.dim();
    if measurement.dim() != n {
        return Err(GaussianError::DimensionMismatch { expected: n, got: measurement.dim() });
    }
    let sum = &prior.cov + &measurement.cov;
    let chol = sum.cholesky().ok_or(GaussianError::NotPositiveDefinite)?;
    // Kᵀ = (Σ̂ + Σ)⁻¹ Σ̂, so K = solve(Σ̂)ᵀ.
    let k = chol.solve(&prior.cov).transpose();
    let mean = &prior.mean + &k * (&measurement.mean - &prior.mean);
    let cov = (DMatrix::identity(n, n) - k) * &prior.cov;
    let cov = (&cov + cov.transpose()) * 0.5;
    FullGaussian::new(mean, cov)
}

/// Mean Gaussian negative log-likelihood over coordinates.
///
/// `½ (target − mean)² / var + ½ ln(2π var)` averaged over the slice, with
/// variances clamped at [`VAR_FLOOR`].
pub fn nll(target: &[f64], mean: &[f64], var: &[f64]) -> f64 {
    assert_eq!(target.len(), mean.len());
    assert_eq!(target.len(), var.len());
    let n = target.len();
    let mut total = 0.0;
    for i in 0..n {
        let v = var[i].max(VAR_FLOOR);
        let r = mean[i] - target[i];
        total += 0.5 * r * r / v + 0.5 * (2.0 * std::f64::consts::PI * v).ln();
    }
    total / n as f64
}

/// NLL parameterized by log-variance, as produced by model variance heads.
pub fn nll_from_logvar(target: &[f64], mean: &[f64], logvar: &[f64]) -> f64 {
    let var: Vec<f64> = logvar.iter().map(|s| s.exp()).collect();
    nll(target, mean, &var)
}

/// Gradient of [`nll_from_logvar`] with respect to the mean and log-variance.
///
/// Where the variance clamp is active the log-variance gradient is zero, in
/// keeping with the clamped forward value.
pub fn nll_grad_from_logvar(
    target: &[f64],
    mean: &[f64],
    logvar: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let n = target.len();
    let mut dmean = vec![0.0; n];
    let mut dlogvar = vec![0.0; n];
    for i in 0..n {
        let raw = logvar[i].exp();
        let v = raw.max(VAR_FLOOR);
        let r = mean[i] - target[i];
        dmean[i] = r / v / n as f64;
        if raw > VAR_FLOOR {
            dlogvar[i] = (0.5 - 0.5 * r * r / v) / n as f64;
        }
    }
    (dmean, dlogvar)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn fuse_diag_known_values() {
        let prior = GaussianState::new([1.0; 4], [0.04; 4]);
        let meas = GaussianState::new([2.0; 4], [0.01; 4]);
        let post = fuse_diag(&prior, &meas);
        for i in 0..4 {
            assert_relative_eq!(post.mean()[i], 1.8, max_relative = 1e-12);
            assert_relative_eq!(post.var()[i], 0.008, max_relative = 1e-12);
        }
    }

    #[test]
    fn variance_floor_applies() {
        let s = GaussianState::new([0.0; 4], [0.0, -1.0, 1e-9, 0.5]);
        assert_eq!(s.var()[0], VAR_FLOOR);
        assert_eq!(s.var()[1], VAR_FLOOR);
        assert_eq!(s.var()[2], VAR_FLOOR);
        assert_eq!(s.var()[3], 0.5);
    }

    #[test]
    fn fuse_full_known_2d() {
        let prior = FullGaussian::new(
            DVector::from_vec(vec![0.0, 0.0]),
            DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]),
        )
        .unwrap();
        let meas = FullGaussian::new(
            DVector::from_vec(vec![3.0, 0.0]),
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let post = fuse_full(&prior, &meas).unwrap();
        assert_relative_eq!(post.mean()[0], 15.0 / 8.0, max_relative = 1e-12);
        assert_relative_eq!(post.mean()[1], 3.0 / 8.0, max_relative = 1e-12);
        assert_relative_eq!(post.cov()[(0, 0)], 5.0 / 8.0, max_relative = 1e-12);
        assert_relative_eq!(post.cov()[(0, 1)], 1.0 / 8.0, max_relative = 1e-12);
        assert_relative_eq!(post.cov()[(1, 1)], 5.0 / 8.0, max_relative = 1e-12);
    }

    #[test]
    fn fuse_full_rejects_mismatch() {
        let a = FullGaussian::new(DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
        let b = FullGaussian::new(DVector::zeros(3), DMatrix::identity(3, 3)).unwrap();
        assert!(matches!(fuse_full(&a, &b), Err(GaussianError::DimensionMismatch { .. })));
    }

    #[test]
    fn full_gaussian_rejects_asymmetry_and_non_spd() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.2, 1.0]);
        assert_eq!(
            FullGaussian::new(DVector::zeros(2), asym).unwrap_err(),
            GaussianError::NotSymmetric
        );
        let indef = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert_eq!(
            FullGaussian::new(DVector::zeros(2), indef).unwrap_err(),
            GaussianError::NotPositiveDefinite
        );
    }

    #[test]
    fn nll_known_values() {
        let half_ln_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
        let v = nll(&[0.3; 4], &[0.3; 4], &[1.0; 4]);
        assert_relative_eq!(v, half_ln_2pi, max_relative = 1e-12);
        assert_relative_eq!(half_ln_2pi, 0.9189385332046727, max_relative = 1e-12);
        let single = nll(&[0.0], &[1.0], &[1.0]);
        assert_relative_eq!(single, 0.5 + half_ln_2pi, max_relative = 1e-12);
    }

    #[test]
    fn nll_clamps_tiny_variance() {
        let clamped = nll(&[0.0], &[0.0], &[1e-12]);
        let floored = nll(&[0.0], &[0.0], &[VAR_FLOOR]);
        assert_eq!(clamped, floored);
    }

    #[test]
    fn nll_grad_matches_finite_differences() {
        let target = [0.2, -0.4, 0.7, 0.05];
        let mean = [0.25, -0.3, 0.5, 0.0];
        let logvar = [-2.0, -1.0, 0.5, -3.0];
        let (dmean, dlogvar) = nll_grad_from_logvar(&target, &mean, &logvar);
        let h = 1e-4;
        for i in 0..4 {
            let mut mp = mean;
            let mut mm = mean;
            mp[i] += h;
            mm[i] -= h;
            let fd = (nll_from_logvar(&target, &mp, &logvar)
                - nll_from_logvar(&target, &mm, &logvar))
                / (2.0 * h);
            assert_relative_eq!(dmean[i], fd, max_relative = 1e-5);

            let mut lp = logvar;
            let mut lm = logvar;
            lp[i] += h;
            lm[i] -= h;
            let fd = (nll_from_logvar(&target, &mean, &lp)
                - nll_from_logvar(&target, &mean, &lm))
                / (2.0 * h);
            assert_relative_eq!(dlogvar[i], fd, max_relative = 1e-5);
        }
    }

    fn arb_state() -> impl Strategy<Value = GaussianState> {
        (
            proptest::array::uniform4(-2.0..2.0f64),
            proptest::array::uniform4(1e-4..2.0f64),
        )
            .prop_map(|(m, v)| GaussianState::new(m, v))
    }

    proptest! {
        #[test]
        fn fused_precision_dominates(a in arb_state(), b in arb_state()) {
            let f = fuse_diag(&a, &b);
            for i in 0..4 {
                prop_assert!(f.var()[i] <= a.var()[i] + 1e-15);
                prop_assert!(f.var()[i] <= b.var()[i] + 1e-15);
                let lo = a.mean()[i].min(b.mean()[i]) - 1e-12;
                let hi = a.mean()[i].max(b.mean()[i]) + 1e-12;
                prop_assert!(f.mean()[i] >= lo && f.mean()[i] <= hi);
            }
        }

        #[test]
        fn fuse_full_diagonal_matches_fuse_diag(a in arb_state(), b in arb_state()) {
            let lift = |s: &GaussianState| {
                FullGaussian::new(
                    DVector::from_row_slice(&s.mean()),
                    DMatrix::from_diagonal(&DVector::from_row_slice(&s.var())),
                ).unwrap()
            };
            let full = fuse_full(&lift(&a), &lift(&b)).unwrap();
            let diag = fuse_diag(&a, &b);
            for i in 0..4 {
                prop_assert!((full.mean()[i] - diag.mean()[i]).abs() < 1e-12);
                prop_assert!((full.cov()[(i, i)] - diag.var()[i]).abs() < 1e-12);
                for j in 0..4 {
                    if i != j {
                        prop_assert!(full.cov()[(i, j)].abs() < 1e-12);
                    }
                }
            }
        }
    }
}
