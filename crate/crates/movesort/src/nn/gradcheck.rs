//! Central finite-difference gradient checking.
//!
//! Used by the unit tests and the acceptance suite: every analytic backward
//! pass in this crate is validated against `(L(θ+h) − L(θ−h)) / 2h`.

use ndarray::{Array1, Array2};

use super::params::{Grads, ParamId, ParamStore};

pub const FD_STEP: f64 = 1e-5;
pub const FD_RTOL: f64 = 1e-4;
pub const FD_ATOL: f64 = 1e-7;

/// Central finite differences of `loss` with respect to every parameter.
pub fn central_diff_params(
    ps: &mut ParamStore,
    mut loss: impl FnMut(&ParamStore) -> f64,
    h: f64,
) -> Grads {
    let mut grads = ps.zero_grads();
    for idx in 0..ps.len() {
        let id = ParamId(idx);
        for i in 0..ps.tensor(id).len() {
            let saved = ps.tensor(id).as_slice()[i];
            ps.tensor_mut(id).as_slice_mut()[i] = saved + h;
            let plus = loss(ps);
            ps.tensor_mut(id).as_slice_mut()[i] = saved - h;
            let minus = loss(ps);
            ps.tensor_mut(id).as_slice_mut()[i] = saved;
            grads.tensor_mut(id).as_slice_mut()[i] = (plus - minus) / (2.0 * h);
        }
    }
    grads
}

/// Central finite differences of `loss` with respect to a vector input.
pub fn central_diff_input1(
    x: &Array1<f64>,
    mut loss: impl FnMut(&Array1<f64>) -> f64,
    h: f64,
) -> Array1<f64> {
    let mut grad = Array1::zeros(x.len());
    let mut probe = x.clone();
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let plus = loss(&probe);
        probe[i] = x[i] - h;
        let minus = loss(&probe);
        probe[i] = x[i];
        grad[i] = (plus - minus) / (2.0 * h);
    }
    grad
}

/// Central finite differences of `loss` with respect to a matrix input.
pub fn central_diff_input2(
    x: &Array2<f64>,
    mut loss: impl FnMut(&Array2<f64>) -> f64,
    h: f64,
) -> Array2<f64> {
    let mut grad = Array2::zeros(x.dim());
    let mut probe = x.clone();
    for idx in ndarray::indices(x.dim()) {
        probe[idx] = x[idx] + h;
        let plus = loss(&probe);
        probe[idx] = x[idx] - h;
        let minus = loss(&probe);
        probe[idx] = x[idx];
        grad[idx] = (plus - minus) / (2.0 * h);
    }
    grad
}

/// Compares two gradient values: `|a − n| ≤ atol + rtol · |n|`.
pub fn close(analytic: f64, numeric: f64, rtol: f64, atol: f64) -> bool {
    (analytic - numeric).abs() <= atol + rtol * numeric.abs().max(analytic.abs())
}

/// Asserts every parameter gradient matches its finite-difference estimate.
pub fn assert_param_grads_match(ps: &ParamStore, analytic: &Grads, numeric: &Grads) {
    for idx in 0..ps.len() {
        let id = ParamId(idx);
        let a = analytic.tensor(id).as_slice();
        let n = numeric.tensor(id).as_slice();
        for i in 0..a.len() {
            assert!(
                close(a[i], n[i], FD_RTOL, FD_ATOL),
                "gradient mismatch for {}[{}]: analytic {} vs numeric {}",
                ps.name(id),
                i,
                a[i],
                n[i]
            );
        }
    }
}

/// Slice-level comparison for input gradients.
pub fn assert_grads_close(analytic: &[f64], numeric: &[f64], what: &str) {
    assert_eq!(analytic.len(), numeric.len());
    for i in 0..analytic.len() {
        assert!(
            close(analytic[i], numeric[i], FD_RTOL, FD_ATOL),
            "{what}[{i}]: analytic {} vs numeric {}",
            analytic[i],
            numeric[i]
        );
    }
}
