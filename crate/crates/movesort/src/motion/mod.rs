//! Probabilistic motion models over bounding-box trajectories.
//!
//! Three architectures share one contract: consume a window of observations,
//! produce a 4-dim Gaussian per requested future frame (means and variances in
//! absolute coordinates, decoded through the model's [`FeatureCodec`]).
//!
//! * `ArRnn` — a GRU summarizes the feature rows; a head predicts the next
//!   step. Multi-step prediction feeds predicted means back autoregressively.
//! * `RnnCnp` — an MLP encodes each feature row, a GRU aggregates the encoded
//!   rows into a context vector, and a decoder MLP answers each target time
//!   independently from `time ∥ context`.
//! * `RnnOde` — a GRU encodes the window into a latent state which is
//!   extrapolated to each target time with fixed-step RK4 over a learned
//!   vector field, then projected by a head.
//!
//! Heads emit 8 values: 4 feature-space means and 4 log-variances.

mod train;

pub use train::{augment_window, train, TrainConfig};
pub(crate) use train::{head_nll, noisy_box, pick_sigma};

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::features::{FeatureCodec, FeatureError, Observation};
use crate::gaussian::GaussianState;
use crate::nn::{
    rk4_integrate, Grads, GruCell, Mlp, MlpCache, OdeField, ParamStore, RK4_STEP,
};

#[derive(Debug, thiserror::Error)]
pub enum MotionError {
    #[error("history has {got} observations, need at least {needed}")]
    InsufficientHistory { needed: usize, got: usize },
    #[error("target times must be strictly increasing and after the last observation")]
    BadTargetTimes,
    #[error("dataset has no window of {needed} consecutive frames")]
    DatasetTooShort { needed: usize },
    #[error("invalid training config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// Motion model architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MotionArch {
    ArRnn,
    RnnCnp,
    RnnOde,
}

impl MotionArch {
    pub fn name(&self) -> &'static str {
        match self {
            MotionArch::ArRnn => "ar-rnn",
            MotionArch::RnnCnp => "rnn-cnp",
            MotionArch::RnnOde => "rnn-ode",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "ar-rnn" => Some(MotionArch::ArRnn),
            "rnn-cnp" => Some(MotionArch::RnnCnp),
            "rnn-ode" => Some(MotionArch::RnnOde),
            _ => None,
        }
    }
}

/// An MLP vector field `dz/dt = f(z ∥ t)` for latent ODE integration.
///
/// With `with_time` set the (unstandardized, window-relative) time is appended
/// to the latent as the last input component; its gradient is discarded on the
/// way back since integration time is not a learnable quantity.
#[derive(Debug, Clone)]
pub struct MlpOde {
    pub mlp: Mlp,
    pub with_time: bool,
}

impl MlpOde {
    pub fn new(mlp: Mlp, with_time: bool) -> Self {
        Self { mlp, with_time }
    }

    fn stack(&self, z: &Array1<f64>, t: f64) -> Array1<f64> {
        if self.with_time {
            let mut x = Array1::zeros(z.len() + 1);
            x.slice_mut(ndarray::s![..z.len()]).assign(z);
            x[z.len()] = t;
            x
        } else {
            z.clone()
        }
    }
}

impl OdeField for MlpOde {
    type Cache = MlpCache;

    fn eval(&self, ps: &ParamStore, z: &Array1<f64>, t: f64) -> Array1<f64> {
        self.mlp.forward1(ps, &self.stack(z, t))
    }

    fn eval_cached(&self, ps: &ParamStore, z: &Array1<f64>, t: f64) -> (Array1<f64>, MlpCache) {
        self.mlp.forward1_cached(ps, &self.stack(z, t))
    }

    fn backward(
        &self,
        ps: &ParamStore,
        gs: &mut Grads,
        cache: &MlpCache,
        dout: &Array1<f64>,
    ) -> Array1<f64> {
        let dx = self.mlp.backward1(ps, gs, cache, dout);
        if self.with_time {
            dx.slice(ndarray::s![..dx.len() - 1]).to_owned()
        } else {
            dx
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) enum MotionNet {
    ArRnn { gru: GruCell, head: Mlp },
    RnnCnp { enc: Mlp, agg: GruCell, dec: Mlp },
    RnnOde { enc: GruCell, field: MlpOde, head: Mlp },
}

/// A trained (or freshly initialized) probabilistic motion model.
#[derive(Debug, Clone)]
pub struct MotionModel {
    pub arch: MotionArch,
    pub params: ParamStore,
    pub codec: FeatureCodec,
    pub history_len: usize,
    pub hidden_dim: usize,
    /// Seed the parameters (and any training run) were derived from.
    pub seed: u64,
    /// Mean training loss of the final epoch; `NaN` until trained.
    pub final_loss: f64,
    net: MotionNet,
}

/// Feature rows carry 4 box features plus the time column.
pub const FEATURE_DIM: usize = 5;
/// Heads output 4 means followed by 4 log-variances.
pub const HEAD_DIM: usize = 8;

impl MotionModel {
    /// Builds an untrained model. Parameter creation order is canonical per
    /// architecture, so two models built from the same seed are identical.
    pub fn new(
        arch: MotionArch,
        codec: FeatureCodec,
        history_len: usize,
        hidden_dim: usize,
        seed: u64,
    ) -> Self {
        let mut ps = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = hidden_dim;
        let net = match arch {
            MotionArch::ArRnn => MotionNet::ArRnn {
                gru: GruCell::init(&mut ps, &mut rng, "gru", FEATURE_DIM, h),
                head: Mlp::init(&mut ps, &mut rng, "head", h, &[h], HEAD_DIM),
            },
            MotionArch::RnnCnp => MotionNet::RnnCnp {
                enc: Mlp::init(&mut ps, &mut rng, "enc", FEATURE_DIM, &[h], h),
                agg: GruCell::init(&mut ps, &mut rng, "agg", h, h),
                dec: Mlp::init(&mut ps, &mut rng, "dec", 1 + h, &[h], HEAD_DIM),
            },
            MotionArch::RnnOde => MotionNet::RnnOde {
                enc: GruCell::init(&mut ps, &mut rng, "enc", FEATURE_DIM, h),
                field: MlpOde::new(Mlp::init(&mut ps, &mut rng, "ode", h + 1, &[h], h), true),
                head: Mlp::init(&mut ps, &mut rng, "head", h, &[h], HEAD_DIM),
            },
        };
        Self {
            arch,
            params: ps,
            codec,
            history_len,
            hidden_dim,
            seed,
            final_loss: f64::NAN,
            net,
        }
    }

    fn check_query(
        &self,
        history: &[Observation],
        target_times: &[i64],
    ) -> Result<(), MotionError> {
        let needed = self.codec.min_observations();
        if history.len() < needed {
            return Err(MotionError::InsufficientHistory { needed, got: history.len() });
        }
        let last = history.last().unwrap().t;
        if target_times.is_empty()
            || target_times[0] <= last
            || target_times.windows(2).any(|p| p[1] <= p[0])
        {
            return Err(MotionError::BadTargetTimes);
        }
        Ok(())
    }

    /// Predicts a 4-dim Gaussian over the box at each target time.
    pub fn predict(
        &self,
        history: &[Observation],
        target_times: &[i64],
    ) -> Result<Vec<GaussianState>, MotionError> {
        self.check_query(history, target_times)?;
        let ps = &self.params;
        match &self.net {
            MotionNet::ArRnn { gru, head } => {
                let mut window = history.to_vec();
                let mut out = Vec::with_capacity(target_times.len());
                for &tt in target_times {
                    let rows = self.codec.encode(&window)?;
                    let mut h = Array1::zeros(self.hidden_dim);
                    for row in rows.rows() {
                        h = gru.step(ps, &row.to_owned(), &h);
                    }
                    let y = head.forward1(ps, &h);
                    let (mean, var) = split_head_row(&y);
                    let g = self.codec.decode(&window, &[tt], &mean, &var)?.remove(0);
                    window.push(Observation::new(tt, g.mean_box()));
                    out.push(g);
                }
                Ok(out)
            }
            MotionNet::RnnCnp { enc, agg, dec } => {
                let rows = self.codec.encode(history)?;
                let enc_rows = enc.forward(ps, &rows);
                let mut r = Array1::zeros(self.hidden_dim);
                for row in enc_rows.rows() {
                    r = agg.step(ps, &row.to_owned(), &r);
                }
                let t1 = history[0].t;
                let m = target_times.len();
                let mut mean = Array2::zeros((m, 4));
                let mut var = Array2::zeros((m, 4));
                for (j, &tt) in target_times.iter().enumerate() {
                    let y = dec.forward1(ps, &query_row(&r, self.codec.time_feature(t1, tt)));
                    let (mj, vj) = split_head_row(&y);
                    mean.row_mut(j).assign(&mj.row(0));
                    var.row_mut(j).assign(&vj.row(0));
                }
                Ok(self.codec.decode(history, target_times, &mean, &var)?)
            }
            MotionNet::RnnOde { enc, field, head } => {
                let rows = self.codec.encode(history)?;
                let mut z = Array1::zeros(self.hidden_dim);
                for row in rows.rows() {
                    z = enc.step(ps, &row.to_owned(), &z);
                }
                let t1 = history[0].t;
                let mut rel = (history.last().unwrap().t - t1 + 1) as f64;
                let m = target_times.len();
                let mut mean = Array2::zeros((m, 4));
                let mut var = Array2::zeros((m, 4));
                for (k, &tt) in target_times.iter().enumerate() {
                    let rel_next = (tt - t1 + 1) as f64;
                    z = rk4_integrate(field, ps, &z, rel, rel_next, RK4_STEP);
                    rel = rel_next;
                    let y = head.forward1(ps, &z);
                    let (mk, vk) = split_head_row(&y);
                    mean.row_mut(k).assign(&mk.row(0));
                    var.row_mut(k).assign(&vk.row(0));
                }
                Ok(self.codec.decode(history, target_times, &mean, &var)?)
            }
        }
    }

    pub(crate) fn net(&self) -> &MotionNet {
        &self.net
    }
}

/// Splits a head output into 1×4 mean and variance rows (`var = exp(logvar)`).
pub(crate) fn split_head_row(y: &Array1<f64>) -> (Array2<f64>, Array2<f64>) {
    let mut mean = Array2::zeros((1, 4));
    let mut var = Array2::zeros((1, 4));
    for j in 0..4 {
        mean[(0, j)] = y[j];
        var[(0, j)] = y[4 + j].exp();
    }
    (mean, var)
}

/// Decoder query: target time feature followed by the context vector.
pub(crate) fn query_row(r: &Array1<f64>, t_feat: f64) -> Array1<f64> {
    let mut q = Array1::zeros(1 + r.len());
    q[0] = t_feat;
    q.slice_mut(ndarray::s![1..]).assign(r);
    q
}

#[cfg(test)]
mod tests;
