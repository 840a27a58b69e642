//! End-to-end filter training: the predict/update/missing recursion is
//! unrolled over clip windows and both heads are trained jointly.
//!
//! Each window contributes `mean_i nll(prior_i) + mean_i nll(posterior_i)`
//! where the targets are the clean boxes and the filter consumes noisy ones
//! (a denoising task). Dropped points become missing steps inside the
//! unrolled recursion rather than disappearing from it, so the filter has to
//! learn to coast over gaps; the first two points of a window are always kept
//! as seeds.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::features::{FeatureCodec, MeasurementBuffer, Observation};
use crate::geom::Box;
use crate::motion::{head_nll, noisy_box, pick_sigma, MotionError, TrainConfig};
use crate::nn::{AdamW, AdamWConfig, Grads, ParamStore};

use super::{E2eArch, E2eModel, FilterError, MIN_BUFFER};

/// Mean per-window losses of one epoch, split by head.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct E2eEpochLoss {
    pub prior: f64,
    pub posterior: f64,
}

impl E2eEpochLoss {
    pub fn total(&self) -> f64 {
        self.prior + self.posterior
    }
}

/// One unrolled training window: two seed measurements followed by steps
/// that each carry a clean target and, unless dropped, a noisy measurement.
pub struct E2eWindow {
    pub seeds: [Observation; 2],
    pub steps: Vec<E2eStep>,
}

/// One step of an [`E2eWindow`].
pub struct E2eStep {
    pub t: i64,
    pub target: Box,
    pub meas: Option<Box>,
}

/// Builds a training window from a clean slice: optional left-shortening
/// (always keeping two seeds plus one step), one noise σ per window applied
/// to every measurement, and per-step dropping.
fn build_window(slice: &[Observation], cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> E2eWindow {
    let mut lo = 0;
    if cfg.shorten_prob > 0.0 && slice.len() > 3 && rng.random::<f64>() < cfg.shorten_prob {
        lo = rng.random_range(1..=slice.len() - 3);
    }
    let clean = &slice[lo..];

    let sigma = if cfg.noise_schedule.is_empty() {
        None
    } else {
        pick_sigma(&cfg.noise_schedule, rng)
    };
    let noisy: Vec<Box> = clean
        .iter()
        .map(|o| match sigma {
            Some(s) => noisy_box(&o.bbox, s, rng),
            None => o.bbox,
        })
        .collect();

    let steps = clean[2..]
        .iter()
        .zip(&noisy[2..])
        .map(|(c, n)| E2eStep {
            t: c.t,
            target: c.bbox,
            meas: if cfg.drop_prob > 0.0 && rng.random::<f64>() < cfg.drop_prob {
                None
            } else {
                Some(*n)
            },
        })
        .collect();

    E2eWindow {
        seeds: [
            Observation::new(clean[0].t, noisy[0]),
            Observation::new(clean[1].t, noisy[1]),
        ],
        steps,
    }
}

impl E2eModel {
    /// Window loss without gradient accumulation (finite-difference probes).
    pub fn window_loss(
        &self,
        ps: &ParamStore,
        window: &E2eWindow,
    ) -> Result<(f64, f64), FilterError> {
        let mut scratch = ps.zero_grads();
        self.window_loss_grad(ps, &mut scratch, window)
    }

    /// Mean prior and posterior NLL over the steps of one window, accumulating
    /// parameter gradients. The forward pass replays the buffer exactly as
    /// inference does; a missing step reuses the prior as posterior, which
    /// doubles that step's gradient through the predict head.
    pub fn window_loss_grad(
        &self,
        ps: &ParamStore,
        gs: &mut Grads,
        window: &E2eWindow,
    ) -> Result<(f64, f64), FilterError> {
        assert!(!window.steps.is_empty(), "training window needs at least one step");
        let scale = 1.0 / window.steps.len() as f64;
        let mut buffer = MeasurementBuffer::new(
            self.history_len as i64,
            MIN_BUFFER.min(self.history_len),
        );
        buffer.push_and_trim(window.seeds[0])?;
        buffer.push_and_trim(window.seeds[1])?;

        let mut prior_total = 0.0;
        let mut post_total = 0.0;
        for step in &window.steps {
            let entries = buffer.entries().to_vec();
            let (z_hat, tape) = self.replay_forward(ps, &entries, step.t)?;
            let y_prior = self.predict_head.forward1(ps, &z_hat);
            let target_row = self
                .codec
                .encode_targets(&entries, &[Observation::new(step.t, step.target)])?
                .row(0)
                .to_owned();
            let (prior_loss, dy_prior) = head_nll(&y_prior, &target_row, scale);
            prior_total += prior_loss;

            match &step.meas {
                Some(meas) => {
                    let obs = Observation::new(step.t, *meas);
                    let meas_row = self.codec.encode_targets(&entries, &[obs])?.row(0).to_owned();
                    let (z_tilde, upd_cache) = self.update.step_cached(ps, &meas_row, &z_hat);
                    let y_post = self.update_head.forward1(ps, &z_tilde);
                    let (post_loss, dy_post) = head_nll(&y_post, &target_row, scale);
                    post_total += post_loss;

                    let dz_tilde = self.update_head.backward1(ps, gs, &z_tilde, &dy_post);
                    let (_, mut dz_hat) = self.update.backward(ps, gs, &upd_cache, &dz_tilde);
                    dz_hat += &self.predict_head.backward1(ps, gs, &z_hat, &dy_prior);
                    self.replay_backward(ps, gs, &tape, &dz_hat);
                    buffer.push_and_trim(obs)?;
                }
                None => {
                    post_total += prior_loss;
                    let dy = &dy_prior * 2.0;
                    let dz_hat = self.predict_head.backward1(ps, gs, &z_hat, &dy);
                    self.replay_backward(ps, gs, &tape, &dz_hat);
                }
            }
        }
        Ok((prior_total, post_total))
    }
}

/// Trains an end-to-end filter of the given architecture. Returns the model
/// and the per-epoch losses. Deterministic for a fixed seed and dataset.
/// Pair with [`TrainConfig::with_boosted_noise`] so the filter sees enough
/// noisy windows to learn denoising.
pub fn train_e2e(
    arch: E2eArch,
    dataset: &[Vec<Observation>],
    cfg: &TrainConfig,
) -> Result<(E2eModel, Vec<E2eEpochLoss>), FilterError> {
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
        return Err(FilterError::Motion(MotionError::DatasetTooShort { needed }));
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

    let mut model = E2eModel::new(arch, codec, cfg.history_len, cfg.hidden_dim, cfg.seed);
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
        let mut prior_sum = 0.0;
        let mut post_sum = 0.0;
        let mut n_windows = 0usize;
        for chunk in windows.chunks(cfg.batch_size) {
            grads.zero();
            for &(ti, s) in chunk {
                let window = build_window(&dataset[ti][s..s + needed], cfg, &mut rng);
                let (prior, post) = model.window_loss_grad(&model.params, &mut grads, &window)?;
                prior_sum += prior;
                post_sum += post;
                n_windows += 1;
            }
            grads.scale(1.0 / chunk.len() as f64);
            opt.step(&mut model.params, &grads);
        }
        epoch_losses.push(E2eEpochLoss {
            prior: prior_sum / n_windows as f64,
            posterior: post_sum / n_windows as f64,
        });
    }

    model.final_loss = epoch_losses.last().unwrap().total();
    Ok((model, epoch_losses))
}
