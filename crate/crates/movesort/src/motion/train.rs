//! Training harness: windowing, augmentation, NLL loss, AdamW updates.

use ndarray::{s, Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::features::{FeatureCodec, Observation};
use crate::gaussian::{nll_from_logvar, nll_grad_from_logvar};
use crate::geom::Box;
use crate::nn::{rk4_backward, rk4_forward, AdamW, AdamWConfig, Grads, ParamStore, RK4_STEP};

use super::{MotionArch, MotionError, MotionModel, MotionNet};

/// Hyperparameters for [`train`]. Targets beyond one step are weighted
/// equally in the loss; the horizon is drawn uniformly per window.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    /// `(probability, sigma)` rows; at most one row fires per window.
    pub noise_schedule: Vec<(f64, f64)>,
    /// Per-point removal probability.
    pub drop_prob: f64,
    /// Per-window probability of clipping the history from the left.
    pub shorten_prob: f64,
    pub seed: u64,
    pub history_len: usize,
    pub hidden_dim: usize,
    /// Maximum future steps per training window.
    pub horizon_max: usize,
    pub mode: crate::features::FeatureMode,
    pub standardize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            lr: 1e-3,
            weight_decay: 1e-4,
            batch_size: 256,
            noise_schedule: Self::default_noise_schedule(),
            drop_prob: 0.2,
            shorten_prob: 0.05,
            seed: 0,
            history_len: 8,
            hidden_dim: 32,
            horizon_max: 5,
            mode: crate::features::FeatureMode::Rloc,
            standardize: true,
        }
    }
}

impl TrainConfig {
    pub fn new(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    /// Default per-window noise selection: σ 0.05 / 0.10 / 0.25 with
    /// probabilities 0.20 / 0.05 / 0.01 (none otherwise).
    pub fn default_noise_schedule() -> Vec<(f64, f64)> {
        vec![(0.20, 0.05), (0.05, 0.10), (0.01, 0.25)]
    }

    /// Boosted probabilities (0.60 / 0.20 / 0.05) used when training
    /// end-to-end filters, which must learn to remove noise.
    pub fn boosted_noise_schedule() -> Vec<(f64, f64)> {
        vec![(0.60, 0.05), (0.20, 0.10), (0.05, 0.25)]
    }

    pub fn without_augmentation(mut self) -> Self {
        self.noise_schedule.clear();
        self.drop_prob = 0.0;
        self.shorten_prob = 0.0;
        self
    }

    pub fn with_boosted_noise(mut self) -> Self {
        self.noise_schedule = Self::boosted_noise_schedule();
        self
    }

    pub fn validate(&self) -> Result<(), MotionError> {
        let bad = |msg: &str| Err(MotionError::BadConfig(msg.to_string()));
        if self.epochs == 0 || self.batch_size == 0 || self.horizon_max == 0 {
            return bad("epochs, batch_size and horizon_max must be positive");
        }
        if self.history_len < 2 {
            return bad("history_len must be at least 2");
        }
        if self.hidden_dim == 0 {
            return bad("hidden_dim must be positive");
        }
        if !(self.lr > 0.0) || self.weight_decay < 0.0 {
            return bad("lr must be positive and weight_decay non-negative");
        }
        let mut total_p = 0.0;
        for &(p, sigma) in &self.noise_schedule {
            if !(0.0..=1.0).contains(&p) || !(sigma > 0.0) {
                return bad("noise_schedule entries need probability in [0,1] and sigma > 0");
            }
            total_p += p;
        }
        if total_p > 1.0 + 1e-12 {
            return bad("noise_schedule probabilities must sum to at most 1");
        }
        if !(0.0..=1.0).contains(&self.drop_prob) || !(0.0..=1.0).contains(&self.shorten_prob) {
            return bad("drop_prob and shorten_prob must lie in [0,1]");
        }
        Ok(())
    }
}

/// Draws one σ from a `(probability, sigma)` schedule, or `None` if the draw
/// falls past the cumulative probabilities.
pub(crate) fn pick_sigma(schedule: &[(f64, f64)], rng: &mut ChaCha8Rng) -> Option<f64> {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    for &(p, sigma) in schedule {
        cum += p;
        if u < cum {
            return Some(sigma);
        }
    }
    None
}

/// Perturbs a box with Gaussian noise scaled by its own width (x and w) and
/// height (y and h).
pub(crate) fn noisy_box(bbox: &Box, sigma: f64, rng: &mut ChaCha8Rng) -> Box {
    let [l, t, w, h] = bbox.ltwh();
    let e: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
    Box::new(
        l + e[0] * sigma * w,
        t + e[1] * sigma * h,
        w + e[2] * sigma * w,
        h + e[3] * sigma * h,
    )
}

/// Applies the observed-side augmentations: per-window Gaussian box noise
/// (σ scaled by each box's own width for x/w and height for y/h), independent
/// point removal, and left-shortening. The window never shrinks below two
/// points; if removal leaves fewer, the two newest points are kept instead.
pub fn augment_window(
    observed: &[Observation],
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<Observation> {
    let mut out = observed.to_vec();

    if !cfg.noise_schedule.is_empty() {
        if let Some(sigma) = pick_sigma(&cfg.noise_schedule, rng) {
            for obs in &mut out {
                obs.bbox = noisy_box(&obs.bbox, sigma, rng);
            }
        }
    }

    if cfg.drop_prob > 0.0 {
        let keep: Vec<bool> = out.iter().map(|_| rng.random::<f64>() >= cfg.drop_prob).collect();
        let kept: Vec<Observation> =
            out.iter().zip(&keep).filter(|(_, &k)| k).map(|(o, _)| *o).collect();
        out = if kept.len() >= 2 { kept } else { out[out.len() - 2..].to_vec() };
    }

    if cfg.shorten_prob > 0.0 && out.len() > 2 && rng.random::<f64>() < cfg.shorten_prob {
        let k = rng.random_range(1..=out.len() - 2);
        out.drain(..k);
    }

    out
}

/// Trains a motion model of the given architecture. Returns the model and
/// the mean loss per epoch. Deterministic for a fixed seed and dataset.
pub fn train(
    arch: MotionArch,
    dataset: &[Vec<Observation>],
    cfg: &TrainConfig,
) -> Result<(MotionModel, Vec<f64>), MotionError> {
    cfg.validate()?;
    let needed = cfg.history_len + cfg.horizon_max;
    let mut windows: Vec<(usize, usize)> = Vec::new();
    for (ti, traj) in dataset.iter().enumerate() {
        if traj.len() < needed {
            continue;
        }
        for s in 0..=traj.len() - needed {
            windows.push((ti, s));
        }
    }
    if windows.is_empty() {
        return Err(MotionError::DatasetTooShort { needed });
    }

    let mut codec = FeatureCodec::new(cfg.mode, cfg.standardize);
    if cfg.standardize {
        let mut blocks = Vec::with_capacity(2 * windows.len());
        for &(ti, s) in &windows {
            let observed = &dataset[ti][s..s + cfg.history_len];
            let targets = &dataset[ti][s + cfg.history_len..s + needed];
            blocks.push(codec.encode(observed)?);
            blocks.push(codec.encode_targets(observed, targets)?);
        }
        codec.fit_standardizer(&blocks);
    }

    let mut model = MotionModel::new(arch, codec, cfg.history_len, cfg.hidden_dim, cfg.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let adam_cfg = AdamWConfig {
        lr: cfg.lr,
        weight_decay: cfg.weight_decay,
        ..AdamWConfig::default()
    };
    let mut opt = AdamW::new(&model.params, adam_cfg);
    let mut grads = model.params.zero_grads();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        opt.begin_epoch(epoch);
        windows.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut n_windows = 0usize;
        for chunk in windows.chunks(cfg.batch_size) {
            grads.zero();
            for &(ti, s) in chunk {
                let horizon = rng.random_range(1..=cfg.horizon_max);
                let observed = &dataset[ti][s..s + cfg.history_len];
                let targets = &dataset[ti][s + cfg.history_len..s + cfg.history_len + horizon];
                let observed_aug = augment_window(observed, cfg, &mut rng);
                let loss =
                    model.window_loss_grad(&model.params, &mut grads, &observed_aug, targets)?;
                epoch_loss += loss;
                n_windows += 1;
            }
            grads.scale(1.0 / chunk.len() as f64);
            opt.step(&mut model.params, &grads);
        }
        epoch_losses.push(epoch_loss / n_windows as f64);
    }

    model.final_loss = *epoch_losses.last().unwrap();
    Ok((model, epoch_losses))
}

impl MotionModel {
    /// Window loss without gradient accumulation (finite-difference probes).
    #[cfg(test)]
    pub(crate) fn window_loss(
        &self,
        ps: &ParamStore,
        observed: &[Observation],
        targets: &[Observation],
    ) -> Result<f64, MotionError> {
        let mut scratch = ps.zero_grads();
        self.window_loss_grad(ps, &mut scratch, observed, targets)
    }

    /// Mean NLL over the target steps of one window, accumulating parameter
    /// gradients into `gs`. The forward pass mirrors [`MotionModel::predict`];
    /// the AR-RNN variant is teacher-forced (ground-truth feedback).
    pub(crate) fn window_loss_grad(
        &self,
        ps: &ParamStore,
        gs: &mut Grads,
        observed: &[Observation],
        targets: &[Observation],
    ) -> Result<f64, MotionError> {
        assert!(!targets.is_empty(), "training window needs at least one target");
        let horizon = targets.len();
        let scale = 1.0 / horizon as f64;
        match self.net() {
            MotionNet::ArRnn { gru, head } => {
                let mut window = observed.to_vec();
                let mut total = 0.0;
                for k in 0..horizon {
                    let rows = self.codec.encode(&window)?;
                    let mut h = Array1::zeros(self.hidden_dim);
                    let mut caches = Vec::with_capacity(rows.nrows());
                    for row in rows.rows() {
                        let (h_next, cache) = gru.step_cached(ps, &row.to_owned(), &h);
                        caches.push(cache);
                        h = h_next;
                    }
                    let (y, head_cache) = head.forward1_cached(ps, &h);
                    let t_row = self.codec.encode_targets(&window, &targets[k..k + 1])?;
                    let (loss, dy) = head_nll(&y, &t_row.row(0).to_owned(), scale);
                    total += loss;
                    let mut dh = head.backward1(ps, gs, &head_cache, &dy);
                    for cache in caches.iter().rev() {
                        let (_, dh_prev) = gru.backward(ps, gs, cache, &dh);
                        dh = dh_prev;
                    }
                    window.push(targets[k]);
                }
                Ok(total)
            }
            MotionNet::RnnCnp { enc, agg, dec } => {
                let rows = self.codec.encode(observed)?;
                let (enc_out, enc_cache) = enc.forward_cached(ps, &rows);
                let mut r = Array1::zeros(self.hidden_dim);
                let mut agg_caches = Vec::with_capacity(enc_out.nrows());
                for row in enc_out.rows() {
                    let (r_next, cache) = agg.step_cached(ps, &row.to_owned(), &r);
                    agg_caches.push(cache);
                    r = r_next;
                }
                let t1 = observed[0].t;
                let mut queries = Array2::zeros((horizon, 1 + self.hidden_dim));
                for (k, tgt) in targets.iter().enumerate() {
                    queries[(k, 0)] = self.codec.time_feature(t1, tgt.t);
                    queries.slice_mut(s![k, 1..]).assign(&r);
                }
                let (y, dec_cache) = dec.forward_cached(ps, &queries);
                let t_rows = self.codec.encode_targets(observed, targets)?;
                let mut total = 0.0;
                let mut dy = Array2::zeros((horizon, 8));
                for k in 0..horizon {
                    let (loss, dy_k) =
                        head_nll(&y.row(k).to_owned(), &t_rows.row(k).to_owned(), scale);
                    total += loss;
                    dy.row_mut(k).assign(&dy_k);
                }
                let dq = dec.backward(ps, gs, &dec_cache, &dy);
                let mut dh = Array1::zeros(self.hidden_dim);
                for k in 0..horizon {
                    dh += &dq.slice(s![k, 1..]);
                }
                let mut d_enc = Array2::zeros(enc_out.dim());
                for (i, cache) in agg_caches.iter().enumerate().rev() {
                    let (dx, dh_prev) = agg.backward(ps, gs, cache, &dh);
                    d_enc.row_mut(i).assign(&dx);
                    dh = dh_prev;
                }
                enc.backward(ps, gs, &enc_cache, &d_enc);
                Ok(total)
            }
            MotionNet::RnnOde { enc, field, head } => {
                let rows = self.codec.encode(observed)?;
                let mut z = Array1::zeros(self.hidden_dim);
                let mut enc_caches = Vec::with_capacity(rows.nrows());
                for row in rows.rows() {
                    let (z_next, cache) = enc.step_cached(ps, &row.to_owned(), &z);
                    enc_caches.push(cache);
                    z = z_next;
                }
                let t1 = observed[0].t;
                let mut rel = (observed.last().unwrap().t - t1 + 1) as f64;
                let t_rows = self.codec.encode_targets(observed, targets)?;
                let mut total = 0.0;
                let mut tapes = Vec::with_capacity(horizon);
                let mut head_caches = Vec::with_capacity(horizon);
                let mut dys = Vec::with_capacity(horizon);
                for (k, tgt) in targets.iter().enumerate() {
                    let rel_next = (tgt.t - t1 + 1) as f64;
                    let (z_next, tape) = rk4_forward(field, ps, &z, rel, rel_next, RK4_STEP);
                    z = z_next;
                    rel = rel_next;
                    let (y, head_cache) = head.forward1_cached(ps, &z);
                    let (loss, dy) = head_nll(&y, &t_rows.row(k).to_owned(), scale);
                    total += loss;
                    tapes.push(tape);
                    head_caches.push(head_cache);
                    dys.push(dy);
                }
                let mut dz = Array1::zeros(self.hidden_dim);
                for k in (0..horizon).rev() {
                    dz += &head.backward1(ps, gs, &head_caches[k], &dys[k]);
                    dz = rk4_backward(field, ps, gs, &tapes[k], &dz);
                }
                let mut dh = dz;
                for cache in enc_caches.iter().rev() {
                    let (_, dh_prev) = enc.backward(ps, gs, cache, &dh);
                    dh = dh_prev;
                }
                Ok(total)
            }
        }
    }
}

/// NLL of one 8-dim head output against a 5-column target row (box features
/// in the first 4 columns), with the loss and output gradient scaled.
pub(crate) fn head_nll(y: &Array1<f64>, target_row: &Array1<f64>, scale: f64) -> (f64, Array1<f64>) {
    let target: Vec<f64> = target_row.iter().take(4).copied().collect();
    let mean: Vec<f64> = (0..4).map(|j| y[j]).collect();
    let logvar: Vec<f64> = (0..4).map(|j| y[4 + j]).collect();
    let loss = nll_from_logvar(&target, &mean, &logvar) * scale;
    let (dm, dlv) = nll_grad_from_logvar(&target, &mean, &logvar);
    let mut dy = Array1::zeros(8);
    for j in 0..4 {
        dy[j] = dm[j] * scale;
        dy[4 + j] = dlv[j] * scale;
    }
    (loss, dy)
}
