//! Fixed-step classical Runge-Kutta integration with reverse-mode gradients.
//!
//! Latent dynamics are supplied through [`OdeField`]. Integration runs with a
//! fixed step (default 0.25); a shorter final step lands exactly on `t1`.
//! Gradients are obtained by backpropagating through the unrolled solver
//! steps, replaying the cached stage evaluations in reverse.

use ndarray::Array1;

use super::params::{Grads, ParamStore};

pub const RK4_STEP: f64 = 0.25;

/// A parameterized vector field `dz/dt = f(z, t)`.
pub trait OdeField {
    type Cache;

    fn eval(&self, ps: &ParamStore, z: &Array1<f64>, t: f64) -> Array1<f64>;

    fn eval_cached(&self, ps: &ParamStore, z: &Array1<f64>, t: f64) -> (Array1<f64>, Self::Cache);

    /// Backpropagates through one evaluation: accumulates parameter
    /// gradients and returns `∂L/∂z`.
    fn backward(
        &self,
        ps: &ParamStore,
        gs: &mut Grads,
        cache: &Self::Cache,
        dout: &Array1<f64>,
    ) -> Array1<f64>;
}

struct StepTape<C> {
    h: f64,
    stages: [C; 4],
}

/// Forward tape of one integration: per-step stage caches.
pub struct Rk4Tape<C> {
    steps: Vec<StepTape<C>>,
}

fn plan_steps(t0: f64, t1: f64, step: f64) -> Vec<(f64, f64)> {
    assert!(t1 >= t0, "rk4 integrates forward in time ({t0} > {t1})");
    assert!(step > 0.0, "rk4 step must be positive");
    let mut out = Vec::new();
    let mut t = t0;
    while t1 - t > 1e-12 {
        let h = step.min(t1 - t);
        out.push((t, h));
        t += h;
    }
    out
}

/// Integrates `z' = f(z, t)` from `t0` to `t1`, returning `z(t1)`.
pub fn rk4_integrate<F: OdeField>(
    f: &F,
    ps: &ParamStore,
    z0: &Array1<f64>,
    t0: f64,
    t1: f64,
    step: f64,
) -> Array1<f64> {
    let mut z = z0.clone();
    for (t, h) in plan_steps(t0, t1, step) {
        z = rk4_single_step(f, ps, &z, t, h);
    }
    z
}

fn rk4_single_step<F: OdeField>(
    f: &F,
    ps: &ParamStore,
    z: &Array1<f64>,
    t: f64,
    h: f64,
) -> Array1<f64> {
    let k1 = f.eval(ps, z, t);
    let k2 = f.eval(ps, &(z + &(&k1 * (h / 2.0))), t + h / 2.0);
    let k3 = f.eval(ps, &(z + &(&k2 * (h / 2.0))), t + h / 2.0);
    let k4 = f.eval(ps, &(z + &(&k3 * h)), t + h);
    z + &((k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

/// Like [`rk4_integrate`] but records the tape needed for the backward pass.
pub fn rk4_forward<F: OdeField>(
    f: &F,
    ps: &ParamStore,
    z0: &Array1<f64>,
    t0: f64,
    t1: f64,
    step: f64,
) -> (Array1<f64>, Rk4Tape<F::Cache>) {
    let mut z = z0.clone();
    let mut steps = Vec::new();
    for (t, h) in plan_steps(t0, t1, step) {
        let (k1, c1) = f.eval_cached(ps, &z, t);
        let (k2, c2) = f.eval_cached(ps, &(&z + &(&k1 * (h / 2.0))), t + h / 2.0);
        let (k3, c3) = f.eval_cached(ps, &(&z + &(&k2 * (h / 2.0))), t + h / 2.0);
        let (k4, c4) = f.eval_cached(ps, &(&z + &(&k3 * h)), t + h);
        z = &z + &((k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0));
        steps.push(StepTape { h, stages: [c1, c2, c3, c4] });
    }
    (z, Rk4Tape { steps })
}

/// Backpropagates `∂L/∂z(t1)` through the recorded tape, returning
/// `∂L/∂z(t0)` and accumulating parameter gradients.
pub fn rk4_backward<F: OdeField>(
    f: &F,
    ps: &ParamStore,
    gs: &mut Grads,
    tape: &Rk4Tape<F::Cache>,
    dz_end: &Array1<f64>,
) -> Array1<f64> {
    let mut dz = dz_end.clone();
    for step in tape.steps.iter().rev() {
        let h = step.h;
        let [c1, c2, c3, c4] = &step.stages;
        let mut dk1 = &dz * (h / 6.0);
        let mut dk2 = &dz * (h / 3.0);
        let mut dk3 = &dz * (h / 3.0);
        let dk4 = &dz * (h / 6.0);

        let g4 = f.backward(ps, gs, c4, &dk4);
        dk3 += &(&g4 * h);
        let g3 = f.backward(ps, gs, c3, &dk3);
        dk2 += &(&g3 * (h / 2.0));
        let g2 = f.backward(ps, gs, c2, &dk2);
        dk1 += &(&g2 * (h / 2.0));
        let g1 = f.backward(ps, gs, c1, &dk1);
        dz = dz + g1 + g2 + g3 + g4;
    }
    dz
}
