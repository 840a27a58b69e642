//! Layers with explicit forward and backward passes.
//!
//! Nothing here builds a computation graph. Each layer's forward pass can
//! record a cache (the forward tape); the matching backward pass consumes the
//! cache, accumulates parameter gradients into a [`Grads`] buffer and returns
//! the gradient with respect to its input.

use ndarray::{Array1, Array2, Axis};
use rand_chacha::ChaCha8Rng;

use super::params::{Grads, ParamId, ParamStore};

pub const LAYER_NORM_EPS: f64 = 1e-5;
pub const LEAKY_RELU_SLOPE: f64 = 0.01;

/// Affine layer `y = x Wᵀ + b`, weights shaped `(out, in)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dense {
    pub w: ParamId,
    pub b: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Dense {
    pub fn init(
        ps: &mut ParamStore,
        rng: &mut ChaCha8Rng,
        name: &str,
        in_dim: usize,
        out_dim: usize,
    ) -> Self {
        let w = ps.add_matrix(&format!("{name}.w"), out_dim, in_dim, in_dim, rng);
        let b = ps.add_vector(&format!("{name}.b"), out_dim, in_dim, rng);
        Self { w, b, in_dim, out_dim }
    }

    pub fn forward(&self, ps: &ParamStore, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&ps.mat(self.w).t()) + ps.vec(self.b)
    }

    /// Accumulates `∂L/∂W`, `∂L/∂b` and returns `∂L/∂x`.
    pub fn backward(
        &self,
        ps: &ParamStore,
        gs: &mut Grads,
        x: &Array2<f64>,
        dy: &Array2<f64>,
    ) -> Array2<f64> {
        *gs.mat_mut(self.w) += &dy.t().dot(x);
        *gs.vec_mut(self.b) += &dy.sum_axis(Axis(0));
        dy.dot(ps.mat(self.w))
    }

    pub fn forward1(&self, ps: &ParamStore, x: &Array1<f64>) -> Array1<f64> {
        ps.mat(self.w).dot(x) + ps.vec(self.b)
    }

    pub fn backward1(
        &self,
        ps: &ParamStore,
        gs: &mut Grads,
        x: &Array1<f64>,
        dy: &Array1<f64>,
    ) -> Array1<f64> {
        accumulate_outer(gs.mat_mut(self.w), dy, x);
        *gs.vec_mut(self.b) += dy;
        ps.mat(self.w).t().dot(dy)
    }
}

/// Layer normalization over the feature axis with learned gain and bias.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub bias: ParamId,
    pub dim: usize,
}

#[derive(Debug, Clone)]
pub struct LayerNormCache {
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
}

impl LayerNorm {
    pub fn init(ps: &mut ParamStore, name: &str, dim: usize) -> Self {
        let gain = ps.add_vector_const(&format!("{name}.g"), dim, 1.0);
        let bias = ps.add_vector_const(&format!("{name}.b"), dim, 0.0);
        Self { gain, bias, dim }
    }

    pub fn forward(&self, ps: &ParamStore, x: &Array2<f64>) -> Array2<f64> {
        self.forward_cached(ps, x).0
    }

    pub fn forward_cached(&self, ps: &ParamStore, x: &Array2<f64>) -> (Array2<f64>, LayerNormCache) {
        let n = x.ncols() as f64;
        let mean = x.mean_axis(Axis(1)).expect("nonempty rows");
        let mut xhat = x.clone();
        for (mut row, &m) in xhat.rows_mut().into_iter().zip(mean.iter()) {
            row -= m;
        }
        let var = xhat.mapv(|v| v * v).sum_axis(Axis(1)) / n;
        let inv_std = var.mapv(|v| 1.0 / (v + LAYER_NORM_EPS).sqrt());
        for (mut row, &s) in xhat.rows_mut().into_iter().zip(inv_std.iter()) {
            row *= s;
        }
        let mut y = xhat.clone();
        y *= ps.vec(self.gain);
        y += ps.vec(self.bias);
        (y, LayerNormCache { xhat, inv_std })
    }

    pub fn backward(
        &self,
        ps: &ParamStore,
        gs: &mut Grads,
        cache: &LayerNormCache,
        dy: &Array2<f64>,
    ) -> Array2<f64> {
        let n = dy.ncols() as f64;
        *gs.vec_mut(self.gain) += &(dy * &cache.xhat).sum_axis(Axis(0));
        *gs.vec_mut(self.bias) += &dy.sum_axis(Axis(0));
        let dxhat = dy * ps.vec(self.gain);
        let sum_dxhat = dxhat.sum_axis(Axis(1));
        let sum_dxhat_xhat = (&dxhat * &cache.xhat).sum_axis(Axis(1));
        let mut dx = dxhat * n;
        for ((mut row, (&s1, &s2)), (&inv, xhat_row)) in dx
            .rows_mut()
            .into_iter()
            .zip(sum_dxhat.iter().zip(sum_dxhat_xhat.iter()))
            .zip(cache.inv_std.iter().zip(cache.xhat.rows()))
        {
            for (d, &xh) in row.iter_mut().zip(xhat_row.iter()) {
                *d = (*d - s1 - xh * s2) * inv / n;
            }
        }
        dx
    }
}

pub fn leaky_relu(x: &Array2<f64>, slope: f64) -> Array2<f64> {
    x.mapv(|v| if v > 0.0 { v } else { slope * v })
}

pub fn leaky_relu_backward(x: &Array2<f64>, dy: &Array2<f64>, slope: f64) -> Array2<f64> {
    let mut dx = dy.clone();
    for (d, &v) in dx.iter_mut().zip(x.iter()) {
        if v <= 0.0 {
            *d *= slope;
        }
    }
    dx
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

fn accumulate_outer(target: &mut Array2<f64>, a: &Array1<f64>, b: &Array1<f64>) {
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0.0 {
            continue;
        }
        let mut row = target.row_mut(i);
        for (t, &bj) in row.iter_mut().zip(b.iter()) {
            *t += ai * bj;
        }
    }
}

/// Gated recurrent cell.
///
/// ```text
/// r  = σ(W_r x + U_r h + b_r)
/// u  = σ(W_u x + U_u h + b_u)
/// c  = tanh(W_c x + U_c (r ∘ h) + b_c)
/// h' = u ∘ h + (1 − u) ∘ c
/// ```
///
/// With the update gate saturated at 1 the cell copies its hidden state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GruCell {
    pub w_r: ParamId,
    pub u_r: ParamId,
    pub b_r: ParamId,
    pub w_u: ParamId,
    pub u_u: ParamId,
    pub b_u: ParamId,
    pub w_c: ParamId,
    pub u_c: ParamId,
    pub b_c: ParamId,
    pub in_dim: usize,
    pub hidden: usize,
}

#[derive(Debug, Clone)]
pub struct GruCache {
    x: Array1<f64>,
    h: Array1<f64>,
    r: Array1<f64>,
    u: Array1<f64>,
    c: Array1<f64>,
}

impl GruCell {
    pub fn init(
        ps: &mut ParamStore,
        rng: &mut ChaCha8Rng,
        name: &str,
        in_dim: usize,
        hidden: usize,
    ) -> Self {
        let mat = |ps: &mut ParamStore, rng: &mut ChaCha8Rng, suffix: &str, cols: usize| {
            ps.add_matrix(&format!("{name}.{suffix}"), hidden, cols, cols, rng)
        };
        let w_r = mat(ps, rng, "w_r", in_dim);
        let u_r = mat(ps, rng, "u_r", hidden);
        let w_u = mat(ps, rng, "w_u", in_dim);
        let u_u = mat(ps, rng, "u_u", hidden);
        let w_c = mat(ps, rng, "w_c", in_dim);
        let u_c = mat(ps, rng, "u_c", hidden);
        let b_r = ps.add_vector(&format!("{name}.b_r"), hidden, in_dim, rng);
        let b_u = ps.add_vector(&format!("{name}.b_u"), hidden, in_dim, rng);
        let b_c = ps.add_vector(&format!("{name}.b_c"), hidden, in_dim, rng);
        Self { w_r, u_r, b_r, w_u, u_u, b_u, w_c, u_c, b_c, in_dim, hidden }
    }

    pub fn step(&self, ps: &ParamStore, x: &Array1<f64>, h: &Array1<f64>) -> Array1<f64> {
        self.step_cached(ps, x, h).0
    }

    pub fn step_cached(
        &self,
        ps: &ParamStore,
        x: &Array1<f64>,
        h: &Array1<f64>,
    ) -> (Array1<f64>, GruCache) {
        let r = (ps.mat(self.w_r).dot(x) + ps.mat(self.u_r).dot(h) + ps.vec(self.b_r))
            .mapv(sigmoid);
        let u = (ps.mat(self.w_u).dot(x) + ps.mat(self.u_u).dot(h) + ps.vec(self.b_u))
            .mapv(sigmoid);
        let rh = &r * h;
        let c = (ps.mat(self.w_c).dot(x) + ps.mat(self.u_c).dot(&rh) + ps.vec(self.b_c))
            .mapv(f64::tanh);
        let h_new = &u * h + (1.0 - &u) * &c;
        (h_new, GruCache { x: x.clone(), h: h.clone(), r, u, c })
    }

    /// Returns `(∂L/∂x, ∂L/∂h)` and accumulates parameter gradients.
    pub fn backward(
        &self,
        ps: &ParamStore,
        gs: &mut Grads,
        cache: &GruCache,
        dh_new: &Array1<f64>,
    ) -> (Array1<f64>, Array1<f64>) {
        let GruCache { x, h, r, u, c } = cache;
        let du = dh_new * &(h - c);
        let mut dh = dh_new * u;
        let dc = dh_new * &(1.0 - u);

        let da_c = dc * &c.mapv(|v| 1.0 - v * v);
        let rh = r * h;
        accumulate_outer(gs.mat_mut(self.w_c), &da_c, x);
        accumulate_outer(gs.mat_mut(self.u_c), &da_c, &rh);
        *gs.vec_mut(self.b_c) += &da_c;
        let drh = ps.mat(self.u_c).t().dot(&da_c);
        let dr = &drh * h;
        dh += &(&drh * r);

        let da_u = du * u * &u.mapv(|v| 1.0 - v);
        accumulate_outer(gs.mat_mut(self.w_u), &da_u, x);
        accumulate_outer(gs.mat_mut(self.u_u), &da_u, h);
        *gs.vec_mut(self.b_u) += &da_u;
        dh += &ps.mat(self.u_u).t().dot(&da_u);

        let da_r = dr * r * &r.mapv(|v| 1.0 - v);
        accumulate_outer(gs.mat_mut(self.w_r), &da_r, x);
        accumulate_outer(gs.mat_mut(self.u_r), &da_r, h);
        *gs.vec_mut(self.b_r) += &da_r;
        dh += &ps.mat(self.u_r).t().dot(&da_r);

        let dx = ps.mat(self.w_c).t().dot(&da_c)
            + ps.mat(self.w_u).t().dot(&da_u)
            + ps.mat(self.w_r).t().dot(&da_r);
        (dx, dh)
    }
}

/// `Dense → LayerNorm → LeakyReLU` blocks with a plain linear output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub hidden: Vec<(Dense, LayerNorm)>,
    pub out: Dense,
}

#[derive(Debug, Clone)]
pub struct MlpCache {
    /// Input to each hidden dense layer, then the input to the output layer.
    inputs: Vec<Array2<f64>>,
    ln: Vec<(LayerNormCache, Array2<f64>)>,
}

impl Mlp {
    pub fn init(
        ps: &mut ParamStore,
        rng: &mut ChaCha8Rng,
        name: &str,
        in_dim: usize,
        hidden_dims: &[usize],
        out_dim: usize,
    ) -> Self {
        let mut hidden = Vec::new();
        let mut dim = in_dim;
        for (i, &hd) in hidden_dims.iter().enumerate() {
            let dense = Dense::init(ps, rng, &format!("{name}.h{i}"), dim, hd);
            let ln = LayerNorm::init(ps, &format!("{name}.ln{i}"), hd);
            hidden.push((dense, ln));
            dim = hd;
        }
        let out = Dense::init(ps, rng, &format!("{name}.out"), dim, out_dim);
        Self { hidden, out }
    }

    pub fn in_dim(&self) -> usize {
        self.hidden.first().map(|(d, _)| d.in_dim).unwrap_or(self.out.in_dim)
    }

    pub fn out_dim(&self) -> usize {
        self.out.out_dim
    }

    pub fn forward1(&self, ps: &ParamStore, x: &Array1<f64>) -> Array1<f64> {
        let x2 = x.clone().insert_axis(Axis(0));
        self.forward(ps, &x2).remove_axis(Axis(0))
    }

    pub fn forward(&self, ps: &ParamStore, x: &Array2<f64>) -> Array2<f64> {
        let mut cur = x.clone();
        for (dense, ln) in &self.hidden {
            let pre = dense.forward(ps, &cur);
            let normed = ln.forward(ps, &pre);
            cur = leaky_relu(&normed, LEAKY_RELU_SLOPE);
        }
        self.out.forward(ps, &cur)
    }

    pub fn forward_cached(&self, ps: &ParamStore, x: &Array2<f64>) -> (Array2<f64>, MlpCache) {
        let mut inputs = Vec::with_capacity(self.hidden.len() + 1);
        let mut ln = Vec::with_capacity(self.hidden.len());
        let mut cur = x.clone();
        for (dense, norm) in &self.hidden {
            inputs.push(cur.clone());
            let pre = dense.forward(ps, &cur);
            let (normed, cache) = norm.forward_cached(ps, &pre);
            ln.push((cache, normed.clone()));
            cur = leaky_relu(&normed, LEAKY_RELU_SLOPE);
        }
        inputs.push(cur.clone());
        (self.out.forward(ps, &cur), MlpCache { inputs, ln })
    }

    pub fn backward(
        &self,
        ps: &ParamStore,
        gs: &mut Grads,
        cache: &MlpCache,
        dy: &Array2<f64>,
    ) -> Array2<f64> {
        let mut grad = self.out.backward(ps, gs, cache.inputs.last().unwrap(), dy);
        for (i, (dense, norm)) in self.hidden.iter().enumerate().rev() {
            let (ln_cache, normed) = &cache.ln[i];
            let grad_normed = leaky_relu_backward(normed, &grad, LEAKY_RELU_SLOPE);
            let grad_pre = norm.backward(ps, gs, ln_cache, &grad_normed);
            grad = dense.backward(ps, gs, &cache.inputs[i], &grad_pre);
        }
        grad
    }

    pub fn forward1_cached(&self, ps: &ParamStore, x: &Array1<f64>) -> (Array1<f64>, MlpCache) {
        let x2 = x.clone().insert_axis(Axis(0));
        let (y, cache) = self.forward_cached(ps, &x2);
        (y.remove_axis(Axis(0)), cache)
    }

    pub fn backward1(
        &self,
        ps: &ParamStore,
        gs: &mut Grads,
        cache: &MlpCache,
        dy: &Array1<f64>,
    ) -> Array1<f64> {
        let dy2 = dy.clone().insert_axis(Axis(0));
        self.backward(ps, gs, cache, &dy2).remove_axis(Axis(0))
    }
}
