//! Filters behind one uniform contract: init, predict, update, missing.
//!
//! Four kinds share the contract:
//!
//! * `Kalman` — the constant-velocity baseline from [`crate::kalman`].
//! * `Bayes` — a learned [`MotionModel`] supplies the prior; the posterior is
//!   the Gaussian fusion of that prior with the measurement under the
//!   width/height-scaled noise heuristic `diag((σ_m·ŵ)², (σ_m·ĥ)², ...)`
//!   built from the measured box.
//! * `RnnE2e` / `NodeE2e` — end-to-end filters whose latent state is replayed
//!   from the measurement buffer at every predict: starting from a zero
//!   latent, dynamics steps (a GRU conditioned on the time gap, or RK4 over a
//!   learned vector field) alternate with measurement-update GRU steps across
//!   the buffered rows, then a final dynamics leg reaches the query time.
//!   Separate dense heads project the latent to prior and posterior
//!   distributions; the posterior head consumes the latent after one more
//!   update step on the new measurement.
//!
//! Call ordering is enforced: after init, each predict must be followed by
//! exactly one update or missing before the next predict. Violations are
//! reported as errors, never absorbed.

mod train;

pub use train::{train_e2e, E2eEpochLoss, E2eStep, E2eWindow};

use ndarray::Array1;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::features::{FeatureCodec, FeatureError, MeasurementBuffer, Observation};
use crate::gaussian::{fuse_diag, GaussianState};
use crate::geom::Box;
use crate::kalman::{kf_init, kf_predict, kf_update, KalmanError, KalmanParams, KalmanState};
use crate::motion::{split_head_row, MlpOde, MotionError, MotionModel};
use crate::nn::{
    rk4_backward, rk4_forward, Dense, Grads, GruCache, GruCell, Mlp, MlpCache, ParamStore,
    Rk4Tape, RK4_STEP,
};

/// Variance scale used before a learned filter has enough history: the prior
/// is the last detection with standard deviation `0.05 · dimension`.
pub const COLD_START_SIGMA: f64 = 0.05;

/// Smallest `min_size` handed to measurement buffers of learned filters.
const MIN_BUFFER: usize = 5;

#[derive(Debug, thiserror::Error)]
pub enum FilterError {
    #[error("filter expected a call to {expected}")]
    OutOfOrder { expected: &'static str },
    #[error("prior does not match the one produced by the preceding predict")]
    StalePrior,
    #[error("predict time {requested} is not after the filter time {last}")]
    NonIncreasingTime { last: i64, requested: i64 },
    #[error("measurement noise sigma must be positive, got {0}")]
    SigmaOutOfRange(f64),
    #[error("filter state was created for a different filter kind")]
    KindMismatch,
    #[error(transparent)]
    Motion(#[from] MotionError),
    #[error(transparent)]
    Kalman(#[from] KalmanError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// End-to-end filter architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum E2eArch {
    RnnE2e,
    NodeE2e,
}

impl E2eArch {
    pub fn name(&self) -> &'static str {
        match self {
            E2eArch::RnnE2e => "rnn-e2e",
            E2eArch::NodeE2e => "node-e2e",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "rnn-e2e" => Some(E2eArch::RnnE2e),
            "node-e2e" => Some(E2eArch::NodeE2e),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) enum E2eDynamics {
    /// GRU step whose single input is the raw time gap.
    Rnn(GruCell),
    /// RK4 integration of a learned vector field over raw relative time.
    Node(MlpOde),
}

/// An end-to-end filter model: dynamics, measurement-update GRU, and the two
/// projection heads.
#[derive(Debug, Clone)]
pub struct E2eModel {
    pub arch: E2eArch,
    pub params: ParamStore,
    pub codec: FeatureCodec,
    pub history_len: usize,
    pub hidden_dim: usize,
    pub seed: u64,
    /// Mean training loss (prior + posterior) of the final epoch; `NaN`
    /// until trained.
    pub final_loss: f64,
    dynamics: E2eDynamics,
    update: GruCell,
    predict_head: Dense,
    update_head: Dense,
}

pub(crate) enum DynTape {
    Rnn(GruCache),
    Node(Rk4Tape<MlpCache>),
}

pub(crate) struct ReplayStep {
    dynamics: DynTape,
    update: GruCache,
}

/// Forward tape of one buffer replay plus the final dynamics leg.
pub(crate) struct ReplayTape {
    steps: Vec<ReplayStep>,
    final_dynamics: DynTape,
}

impl E2eModel {
    pub fn new(
        arch: E2eArch,
        codec: FeatureCodec,
        history_len: usize,
        hidden_dim: usize,
        seed: u64,
    ) -> Self {
        let mut ps = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = hidden_dim;
        let dynamics = match arch {
            E2eArch::RnnE2e => E2eDynamics::Rnn(GruCell::init(&mut ps, &mut rng, "dyn", 1, h)),
            E2eArch::NodeE2e => E2eDynamics::Node(MlpOde::new(
                Mlp::init(&mut ps, &mut rng, "ode", h + 1, &[h], h),
                true,
            )),
        };
        let update = GruCell::init(&mut ps, &mut rng, "upd", crate::motion::FEATURE_DIM, h);
        let predict_head = Dense::init(&mut ps, &mut rng, "predict_head", h, 8);
        let update_head = Dense::init(&mut ps, &mut rng, "update_head", h, 8);
        Self {
            arch,
            params: ps,
            codec,
            history_len,
            hidden_dim,
            seed,
            final_loss: f64::NAN,
            dynamics,
            update,
            predict_head,
            update_head,
        }
    }

    fn dynamics_forward(
        &self,
        ps: &ParamStore,
        z: &Array1<f64>,
        t0: f64,
        t1: f64,
    ) -> (Array1<f64>, DynTape) {
        match &self.dynamics {
            E2eDynamics::Rnn(gru) => {
                let input = ndarray::arr1(&[t1 - t0]);
                let (z_next, cache) = gru.step_cached(ps, &input, z);
                (z_next, DynTape::Rnn(cache))
            }
            E2eDynamics::Node(field) => {
                let (z_next, tape) = rk4_forward(field, ps, z, t0, t1, RK4_STEP);
                (z_next, DynTape::Node(tape))
            }
        }
    }

    fn dynamics_backward(
        &self,
        ps: &ParamStore,
        gs: &mut Grads,
        tape: &DynTape,
        dz: &Array1<f64>,
    ) -> Array1<f64> {
        match (&self.dynamics, tape) {
            (E2eDynamics::Rnn(gru), DynTape::Rnn(cache)) => gru.backward(ps, gs, cache, dz).1,
            (E2eDynamics::Node(field), DynTape::Node(tape)) => {
                rk4_backward(field, ps, gs, tape, dz)
            }
            _ => unreachable!("dynamics tape mismatch"),
        }
    }

    /// Replays the recursion over the buffered rows from a zero latent and
    /// integrates the final leg to `t_next`, returning the predicted latent.
    pub(crate) fn replay_forward(
        &self,
        ps: &ParamStore,
        entries: &[Observation],
        t_next: i64,
    ) -> Result<(Array1<f64>, ReplayTape), FilterError> {
        let rows = self.codec.encode_with_anchor_row(entries)?;
        let t1 = entries[0].t;
        let row_times: Vec<f64> = match self.codec.mode {
            crate::features::FeatureMode::Sfod => {
                entries[1..].iter().map(|o| (o.t - t1 + 1) as f64).collect()
            }
            _ => entries.iter().map(|o| (o.t - t1 + 1) as f64).collect(),
        };
        debug_assert_eq!(row_times.len(), rows.nrows());

        let mut z = Array1::zeros(self.hidden_dim);
        let mut prev_t = 0.0;
        let mut steps = Vec::with_capacity(rows.nrows());
        for (row, &rt) in rows.rows().into_iter().zip(&row_times) {
            let (z_pred, dyn_tape) = self.dynamics_forward(ps, &z, prev_t, rt);
            let (z_upd, upd_cache) = self.update.step_cached(ps, &row.to_owned(), &z_pred);
            steps.push(ReplayStep { dynamics: dyn_tape, update: upd_cache });
            z = z_upd;
            prev_t = rt;
        }
        let t_target = (t_next - t1 + 1) as f64;
        let (z_hat, final_dynamics) = self.dynamics_forward(ps, &z, prev_t, t_target);
        Ok((z_hat, ReplayTape { steps, final_dynamics }))
    }

    /// Backpropagates `∂L/∂ẑ` through a replay tape. The gradient at the
    /// zero initial latent is discarded.
    pub(crate) fn replay_backward(
        &self,
        ps: &ParamStore,
        gs: &mut Grads,
        tape: &ReplayTape,
        dz_hat: &Array1<f64>,
    ) {
        let mut dz = self.dynamics_backward(ps, gs, &tape.final_dynamics, dz_hat);
        for step in tape.steps.iter().rev() {
            let (_, dz_pred) = self.update.backward(ps, gs, &step.update, &dz);
            dz = self.dynamics_backward(ps, gs, &step.dynamics, &dz_pred);
        }
    }

}

/// Filter family plus its frozen models and hyperparameters.
#[derive(Debug, Clone)]
pub enum FilterKind {
    Kalman(KalmanParams),
    Bayes { model: MotionModel, sigma_m: f64 },
    RnnE2e(E2eModel),
    NodeE2e(E2eModel),
}

impl FilterKind {
    pub fn kalman() -> Self {
        FilterKind::Kalman(KalmanParams::default())
    }

    pub fn bayes(model: MotionModel, sigma_m: f64) -> Result<Self, FilterError> {
        if !(sigma_m > 0.0) {
            return Err(FilterError::SigmaOutOfRange(sigma_m));
        }
        Ok(FilterKind::Bayes { model, sigma_m })
    }

    /// Wraps an end-to-end model in the variant matching its architecture.
    pub fn e2e(model: E2eModel) -> Self {
        match model.arch {
            E2eArch::RnnE2e => FilterKind::RnnE2e(model),
            E2eArch::NodeE2e => FilterKind::NodeE2e(model),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FilterKind::Kalman(_) => "kalman",
            FilterKind::Bayes { .. } => "bayes",
            FilterKind::RnnE2e(_) => "rnn-e2e",
            FilterKind::NodeE2e(_) => "node-e2e",
        }
    }

    fn new_buffer(history_len: usize) -> MeasurementBuffer {
        MeasurementBuffer::new(history_len as i64, MIN_BUFFER.min(history_len))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Phase {
    AwaitingPredict,
    AwaitingObservation,
}

#[derive(Debug, Clone)]
enum Payload {
    Kalman(KalmanState),
    Buffer(MeasurementBuffer),
    Latent { buffer: MeasurementBuffer, latent: Array1<f64> },
}

#[derive(Debug, Clone)]
struct Pending {
    t: i64,
    prior: GaussianState,
    /// Predicted latent, present when the e2e replay ran (enough history).
    z_hat: Option<Array1<f64>>,
}

/// Per-track filter state. Construct with [`filter_init`]; advance only
/// through [`filter_predict`], [`filter_update`] and [`filter_missing`].
#[derive(Debug, Clone)]
pub struct FilterState {
    phase: Phase,
    last_t: i64,
    payload: Payload,
    pending: Option<Pending>,
}

impl FilterState {
    /// Buffered measurements (empty for the Kalman kind).
    pub fn buffer(&self) -> &[Observation] {
        match &self.payload {
            Payload::Kalman(_) => &[],
            Payload::Buffer(b) => b.entries(),
            Payload::Latent { buffer, .. } => buffer.entries(),
        }
    }

    pub fn last_time(&self) -> i64 {
        self.last_t
    }
}

/// Prior used before a learned filter has enough history: the last
/// measurement with `(0.05 · dimension)²` variances.
fn cold_start_prior(b: &Box) -> GaussianState {
    let sw = (COLD_START_SIGMA * b.width).powi(2);
    let sh = (COLD_START_SIGMA * b.height).powi(2);
    GaussianState::new([b.left, b.top, b.width, b.height], [sw, sh, sw, sh])
}

/// Measurement likelihood for the Bayes family: the measured box with
/// variances `(σ_m·ŵ)², (σ_m·ĥ)², (σ_m·ŵ)², (σ_m·ĥ)²`.
fn measurement_likelihood(meas: &Box, sigma_m: f64) -> GaussianState {
    let sw = (sigma_m * meas.width).powi(2);
    let sh = (sigma_m * meas.height).powi(2);
    GaussianState::new([meas.left, meas.top, meas.width, meas.height], [sw, sh, sw, sh])
}

/// Decodes an 8-value head output into an absolute-coordinate Gaussian,
/// anchored on the buffered history.
fn decode_head(
    codec: &FeatureCodec,
    entries: &[Observation],
    t_next: i64,
    y: &Array1<f64>,
) -> Result<GaussianState, FilterError> {
    let (mean, var) = split_head_row(y);
    Ok(codec.decode(entries, &[t_next], &mean, &var)?.remove(0))
}

/// Creates the filter state for a track spawned from its first detection.
pub fn filter_init(kind: &FilterKind, t0: i64, meas: &Box) -> FilterState {
    let payload = match kind {
        FilterKind::Kalman(params) => Payload::Kalman(kf_init(meas, params)),
        FilterKind::Bayes { model, .. } => {
            let mut buffer = FilterKind::new_buffer(model.history_len);
            buffer
                .push_and_trim(Observation::new(t0, *meas))
                .expect("first entry cannot violate monotonicity");
            Payload::Buffer(buffer)
        }
        FilterKind::RnnE2e(model) | FilterKind::NodeE2e(model) => {
            let mut buffer = FilterKind::new_buffer(model.history_len);
            buffer
                .push_and_trim(Observation::new(t0, *meas))
                .expect("first entry cannot violate monotonicity");
            Payload::Latent { buffer, latent: Array1::zeros(model.hidden_dim) }
        }
    };
    FilterState { phase: Phase::AwaitingPredict, last_t: t0, payload, pending: None }
}

/// Advances the filter to `t_next` and returns the prior.
pub fn filter_predict(
    kind: &FilterKind,
    state: &mut FilterState,
    t_next: i64,
) -> Result<GaussianState, FilterError> {
    if state.phase != Phase::AwaitingPredict {
        return Err(FilterError::OutOfOrder { expected: "update or missing" });
    }
    if t_next <= state.last_t {
        return Err(FilterError::NonIncreasingTime { last: state.last_t, requested: t_next });
    }
    let (prior, z_hat) = match (kind, &mut state.payload) {
        (FilterKind::Kalman(params), Payload::Kalman(ks)) => {
            let mut cur = ks.clone();
            let mut prior = cur.measurement_projection();
            for _ in state.last_t..t_next {
                let (next, projected) = kf_predict(&cur, params);
                cur = next;
                prior = projected;
            }
            *ks = cur;
            (prior, None)
        }
        (FilterKind::Bayes { model, .. }, Payload::Buffer(buffer)) => {
            let entries = buffer.entries();
            if entries.len() < model.codec.min_observations() {
                (cold_start_prior(&entries.last().unwrap().bbox), None)
            } else {
                (model.predict(entries, &[t_next])?.remove(0), None)
            }
        }
        (FilterKind::RnnE2e(model) | FilterKind::NodeE2e(model), Payload::Latent { buffer, .. }) => {
            let entries = buffer.entries();
            if entries.len() < model.codec.min_observations() {
                (cold_start_prior(&entries.last().unwrap().bbox), None)
            } else {
                let (z_hat, _) = model.replay_forward(&model.params, entries, t_next)?;
                let y = model.predict_head.forward1(&model.params, &z_hat);
                let prior = decode_head(&model.codec, entries, t_next, &y)?;
                (prior, Some(z_hat))
            }
        }
        _ => return Err(FilterError::KindMismatch),
    };
    state.pending = Some(Pending { t: t_next, prior: prior.clone(), z_hat });
    state.phase = Phase::AwaitingObservation;
    Ok(prior)
}

fn take_pending(state: &mut FilterState, prior: &GaussianState) -> Result<Pending, FilterError> {
    if state.phase != Phase::AwaitingObservation {
        return Err(FilterError::OutOfOrder { expected: "predict" });
    }
    let pending = state.pending.take().expect("pending set while awaiting observation");
    if pending.prior.mean() != prior.mean() || pending.prior.var() != prior.var() {
        state.pending = Some(pending);
        return Err(FilterError::StalePrior);
    }
    Ok(pending)
}

/// Folds the matched measurement into the filter and returns the posterior.
/// `prior` must be the value returned by the immediately preceding predict.
pub fn filter_update(
    kind: &FilterKind,
    state: &mut FilterState,
    prior: &GaussianState,
    meas: &Box,
) -> Result<GaussianState, FilterError> {
    let pending = take_pending(state, prior)?;
    let posterior = match (kind, &mut state.payload) {
        (FilterKind::Kalman(params), Payload::Kalman(ks)) => {
            *ks = kf_update(ks, meas, params)?;
            ks.measurement_projection()
        }
        (FilterKind::Bayes { sigma_m, .. }, Payload::Buffer(buffer)) => {
            let posterior = fuse_diag(&pending.prior, &measurement_likelihood(meas, *sigma_m));
            buffer.push_and_trim(Observation::new(pending.t, *meas))?;
            posterior
        }
        (FilterKind::RnnE2e(model) | FilterKind::NodeE2e(model), Payload::Latent { buffer, latent }) => {
            let obs = Observation::new(pending.t, *meas);
            let posterior = match &pending.z_hat {
                Some(z_hat) => {
                    let entries = buffer.entries();
                    let row = model.codec.encode_targets(entries, &[obs])?.row(0).to_owned();
                    let z_tilde = model.update.step(&model.params, &row, z_hat);
                    let y = model.update_head.forward1(&model.params, &z_tilde);
                    let posterior = decode_head(&model.codec, entries, pending.t, &y)?;
                    *latent = z_tilde;
                    posterior
                }
                None => cold_start_prior(meas),
            };
            buffer.push_and_trim(obs)?;
            posterior
        }
        _ => return Err(FilterError::KindMismatch),
    };
    state.last_t = pending.t;
    state.phase = Phase::AwaitingPredict;
    Ok(posterior)
}

/// Advances the filter past a frame with no matched measurement. The prior
/// doubles as the posterior; end-to-end kinds adopt the predicted latent.
pub fn filter_missing(
    kind: &FilterKind,
    state: &mut FilterState,
    prior: &GaussianState,
) -> Result<GaussianState, FilterError> {
    let pending = take_pending(state, prior)?;
    match (kind, &mut state.payload) {
        (FilterKind::Kalman(_), Payload::Kalman(_)) => {}
        (FilterKind::Bayes { .. }, Payload::Buffer(_)) => {}
        (FilterKind::RnnE2e(_) | FilterKind::NodeE2e(_), Payload::Latent { latent, .. }) => {
            if let Some(z_hat) = &pending.z_hat {
                *latent = z_hat.clone();
            }
        }
        _ => return Err(FilterError::KindMismatch),
    }
    state.last_t = pending.t;
    state.phase = Phase::AwaitingPredict;
    Ok(pending.prior)
}
