//! Measurement buffers and trajectory feature codecs.
//!
//! Learned filters never consume raw pixel boxes. A [`MeasurementBuffer`]
//! keeps a sliding window of recent observations, and a [`FeatureCodec`]
//! turns the window into model features and model outputs back into absolute
//! boxes. Three transforms are supported:
//!
//! * `Absolute` — raw coordinates, one row per observation,
//! * `Sfod` — scaled first-order differences `Y_i = (X_{i+1} − X_i) / (t_{i+1} − t_i)`,
//! * `Rloc` — offsets relative to the last observation `Y_i = X_n − X_i`.
//!
//! Every row carries the window-relative time feature `T_i = t_i − t_1 + 1`
//! as a fifth column. Optional standardization applies per-column statistics
//! fitted on training data. Model outputs live in the same feature space;
//! [`FeatureCodec::decode`] de-standardizes and inverts the transform,
//! propagating variances (`Sfod` accumulates across steps, `Rloc` passes
//! through).

use ndarray::Array2;
use thiserror::Error;

use crate::gaussian::GaussianState;
use crate::geom::Box;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("timestamps must be strictly increasing (got {prev} then {next})")]
    NonMonotoneTimestamp { prev: i64, next: i64 },
    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },
    #[error("target times must be strictly increasing and later than the last observation")]
    BadTargetTimes,
}

/// A time-stamped box measurement. Frame indices are integers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub t: i64,
    pub bbox: Box,
}

impl Observation {
    pub fn new(t: i64, bbox: Box) -> Self {
        Self { t, bbox }
    }
}

/// Sliding window of recent measurements.
///
/// After every push the buffer keeps all entries inside
/// `[t_now − default_size, t_now]`; if fewer than `min_size` entries fall in
/// that window the newest `min_size` entries are retained instead.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementBuffer {
    entries: Vec<Observation>,
    default_size: i64,
    min_size: usize,
}

impl Default for MeasurementBuffer {
    fn default() -> Self {
        Self::new(30, 5)
    }
}

impl MeasurementBuffer {
    pub fn new(default_size: i64, min_size: usize) -> Self {
        Self { entries: Vec::new(), default_size, min_size }
    }

    pub fn default_size(&self) -> i64 {
        self.default_size
    }

    pub fn min_size(&self) -> usize {
        self.min_size
    }

    pub fn entries(&self) -> &[Observation] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn last(&self) -> Option<&Observation> {
        self.entries.last()
    }

    /// Appends an observation (timestamps must be strictly increasing) and
    /// trims the front according to the window rule.
    pub fn push_and_trim(&mut self, obs: Observation) -> Result<(), FeatureError> {
        if let Some(last) = self.entries.last() {
            if obs.t <= last.t {
                return Err(FeatureError::NonMonotoneTimestamp { prev: last.t, next: obs.t });
            }
        }
        self.entries.push(obs);
        let t_now = obs.t;
        let in_window =
            self.entries.iter().filter(|o| o.t >= t_now - self.default_size).count();
        let keep = in_window.max(self.min_size).min(self.entries.len());
        let drop = self.entries.len() - keep;
        self.entries.drain(..drop);
        Ok(())
    }
}

/// Feature transform applied to buffered boxes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureMode {
    Absolute,
    Sfod,
    Rloc,
}

impl FeatureMode {
    pub fn name(&self) -> &'static str {
        match self {
            FeatureMode::Absolute => "absolute",
            FeatureMode::Sfod => "sfod",
            FeatureMode::Rloc => "rloc",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "absolute" => Some(FeatureMode::Absolute),
            "sfod" => Some(FeatureMode::Sfod),
            "rloc" => Some(FeatureMode::Rloc),
            _ => None,
        }
    }
}

/// Encodes observation windows into 5-column feature rows and decodes model
/// outputs back to absolute-coordinate Gaussians.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureCodec {
    pub mode: FeatureMode,
    pub standardize: bool,
    pub mean: [f64; 5],
    pub std: [f64; 5],
}

impl FeatureCodec {
    pub fn new(mode: FeatureMode, standardize: bool) -> Self {
        Self { mode, standardize, mean: [0.0; 5], std: [1.0; 5] }
    }

    fn check_monotone(obs: &[Observation]) -> Result<(), FeatureError> {
        for pair in obs.windows(2) {
            if pair[1].t <= pair[0].t {
                return Err(FeatureError::NonMonotoneTimestamp {
                    prev: pair[0].t,
                    next: pair[1].t,
                });
            }
        }
        Ok(())
    }

    /// Minimum window length the mode can encode.
    pub fn min_observations(&self) -> usize {
        match self.mode {
            FeatureMode::Absolute => 1,
            FeatureMode::Sfod | FeatureMode::Rloc => 2,
        }
    }

    /// Encodes a window into feature rows (box features then the time column).
    ///
    /// `Absolute` yields one row per observation; the difference modes yield
    /// `n − 1` rows. `Sfod` rows are stamped with the time of their later
    /// endpoint, `Rloc` rows with their own observation time.
    pub fn encode(&self, obs: &[Observation]) -> Result<Array2<f64>, FeatureError> {
        self.encode_inner(obs, false)
    }

    /// Like [`encode`](Self::encode) but closes `Rloc` windows with the
    /// anchor's own (all-zero) row so the row sequence ends at the anchor
    /// time. Used by the end-to-end filters, whose recurrence consumes one
    /// row per buffered measurement.
    pub fn encode_with_anchor_row(&self, obs: &[Observation]) -> Result<Array2<f64>, FeatureError> {
        self.encode_inner(obs, true)
    }

    fn encode_inner(&self, obs: &[Observation], anchor_row: bool) -> Result<Array2<f64>, FeatureError> {
        let needed = self.min_observations();
        if obs.len() < needed {
            return Err(FeatureError::TooFewObservations { needed, got: obs.len() });
        }
        Self::check_monotone(obs)?;
        let t1 = obs[0].t;
        let mut rows: Vec<[f64; 5]> = Vec::new();
        match self.mode {
            FeatureMode::Absolute => {
                for o in obs {
                    let [l, t, w, h] = o.bbox.ltwh();
                    rows.push([l, t, w, h, (o.t - t1 + 1) as f64]);
                }
            }
            FeatureMode::Sfod => {
                for pair in obs.windows(2) {
                    let dt = (pair[1].t - pair[0].t) as f64;
                    let a = pair[0].bbox.ltwh();
                    let b = pair[1].bbox.ltwh();
                    rows.push([
                        (b[0] - a[0]) / dt,
                        (b[1] - a[1]) / dt,
                        (b[2] - a[2]) / dt,
                        (b[3] - a[3]) / dt,
                        (pair[1].t - t1 + 1) as f64,
                    ]);
                }
            }
            FeatureMode::Rloc => {
                let anchor = obs[obs.len() - 1].bbox.ltwh();
                let upto = if anchor_row { obs.len() } else { obs.len() - 1 };
                for o in &obs[..upto] {
                    let x = o.bbox.ltwh();
                    rows.push([
                        anchor[0] - x[0],
                        anchor[1] - x[1],
                        anchor[2] - x[2],
                        anchor[3] - x[3],
                        (o.t - t1 + 1) as f64,
                    ]);
                }
            }
        }
        let mut out = Array2::zeros((rows.len(), 5));
        for (i, row) in rows.iter().enumerate() {
            for j in 0..5 {
                out[(i, j)] = self.standardize_col(row[j], j);
            }
        }
        Ok(out)
    }

    /// Encodes future boxes into the feature space the model predicts in,
    /// anchored on the end of `history` (the inverse-transform convention:
    /// `Rloc` targets are `X − X_n`, `Sfod` targets chain consecutive
    /// differences starting from the anchor).
    pub fn encode_targets(
        &self,
        history: &[Observation],
        targets: &[Observation],
    ) -> Result<Array2<f64>, FeatureError> {
        let anchor = history.last().ok_or(FeatureError::TooFewObservations { needed: 1, got: 0 })?;
        Self::check_monotone(history)?;
        Self::check_monotone(targets)?;
        if targets.is_empty() || targets[0].t <= anchor.t {
            return Err(FeatureError::BadTargetTimes);
        }
        let t1 = history[0].t;
        let mut out = Array2::zeros((targets.len(), 5));
        let mut prev = *anchor;
        for (i, obs) in targets.iter().enumerate() {
            let x = obs.bbox.ltwh();
            let row = match self.mode {
                FeatureMode::Absolute => x,
                FeatureMode::Rloc => {
                    let a = anchor.bbox.ltwh();
                    [x[0] - a[0], x[1] - a[1], x[2] - a[2], x[3] - a[3]]
                }
                FeatureMode::Sfod => {
                    let dt = (obs.t - prev.t) as f64;
                    let p = prev.bbox.ltwh();
                    [(x[0] - p[0]) / dt, (x[1] - p[1]) / dt, (x[2] - p[2]) / dt, (x[3] - p[3]) / dt]
                }
            };
            for j in 0..4 {
                out[(i, j)] = self.standardize_col(row[j], j);
            }
            out[(i, 4)] = self.standardize_col((obs.t - t1 + 1) as f64, 4);
            prev = *obs;
        }
        Ok(out)
    }

    /// Inverts model outputs (standardized feature-space mean and variance
    /// rows, one per target time) into absolute-coordinate Gaussians.
    pub fn decode(
        &self,
        history: &[Observation],
        target_times: &[i64],
        mean: &Array2<f64>,
        var: &Array2<f64>,
    ) -> Result<Vec<GaussianState>, FeatureError> {
        let anchor = history.last().ok_or(FeatureError::TooFewObservations { needed: 1, got: 0 })?;
        if target_times.is_empty()
            || target_times[0] <= anchor.t
            || target_times.windows(2).any(|p| p[1] <= p[0])
        {
            return Err(FeatureError::BadTargetTimes);
        }
        assert_eq!(mean.nrows(), target_times.len());
        assert_eq!(var.nrows(), target_times.len());
        let a = anchor.bbox.ltwh();
        let mut out = Vec::with_capacity(target_times.len());
        // Sfod accumulates mean and variance across steps; the others are per-row.
        let mut acc_mean = [0.0; 4];
        let mut acc_var = [0.0; 4];
        let mut prev_t = anchor.t;
        for (i, &tt) in target_times.iter().enumerate() {
            let mut m = [0.0; 4];
            let mut v = [0.0; 4];
            for j in 0..4 {
                m[j] = self.destandardize_mean(mean[(i, j)], j);
                v[j] = self.destandardize_var(var[(i, j)], j);
            }
            let state = match self.mode {
                FeatureMode::Absolute => GaussianState::new(m, v),
                FeatureMode::Rloc => GaussianState::new(
                    [a[0] + m[0], a[1] + m[1], a[2] + m[2], a[3] + m[3]],
                    v,
                ),
                FeatureMode::Sfod => {
                    let dt = (tt - prev_t) as f64;
                    for j in 0..4 {
                        acc_mean[j] += m[j] * dt;
                        acc_var[j] += v[j] * dt * dt;
                    }
                    GaussianState::new(
                        [
                            a[0] + acc_mean[0],
                            a[1] + acc_mean[1],
                            a[2] + acc_mean[2],
                            a[3] + acc_mean[3],
                        ],
                        acc_var,
                    )
                }
            };
            out.push(state);
            prev_t = tt;
        }
        Ok(out)
    }

    /// Standardized time feature for a target frame, relative to the window.
    pub fn time_feature(&self, window_start: i64, t: i64) -> f64 {
        self.standardize_col((t - window_start + 1) as f64, 4)
    }

    fn standardize_col(&self, v: f64, col: usize) -> f64 {
        if self.standardize {
            (v - self.mean[col]) / self.std[col]
        } else {
            v
        }
    }

    fn destandardize_mean(&self, v: f64, col: usize) -> f64 {
        if self.standardize {
            v * self.std[col] + self.mean[col]
        } else {
            v
        }
    }

    fn destandardize_var(&self, v: f64, col: usize) -> f64 {
        if self.standardize {
            v * self.std[col] * self.std[col]
        } else {
            v
        }
    }

    /// Fits per-column mean and standard deviation (population statistics)
    /// over the pooled rows. Near-constant columns keep a scale of one, so
    /// that values a fitted column never showed (augmentation noise, missing
    /// frames) cannot be blown up by a microscopic divisor. Rows must be
    /// produced with standardization disabled; the fitted codec standardizes
    /// from then on.
    pub fn fit_standardizer(&mut self, row_blocks: &[Array2<f64>]) {
        let mut count = 0usize;
        let mut sum = [0.0; 5];
        for block in row_blocks {
            for row in block.rows() {
                for j in 0..5 {
                    sum[j] += row[j];
                }
                count += 1;
            }
        }
        if count == 0 {
            return;
        }
        let mean = sum.map(|s| s / count as f64);
        let mut sq = [0.0; 5];
        for block in row_blocks {
            for row in block.rows() {
                for j in 0..5 {
                    let d = row[j] - mean[j];
                    sq[j] += d * d;
                }
            }
        }
        self.mean = mean;
        self.std = sq.map(|s| {
            let std = (s / count as f64).sqrt();
            if std < 1e-6 {
                1.0
            } else {
                std
            }
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;
    use proptest::prelude::*;

    fn obs(t: i64, l: f64, top: f64, w: f64, h: f64) -> Observation {
        Observation::new(t, Box::new(l, top, w, h))
    }

    #[test]
    fn buffer_keeps_window_of_dense_frames() {
        let mut buf = MeasurementBuffer::default();
        for t in 1..=40 {
            buf.push_and_trim(obs(t, 0.0, 0.0, 0.1, 0.1)).unwrap();
        }
        assert_eq!(buf.len(), 31);
        assert_eq!(buf.entries()[0].t, 10);
        assert_eq!(buf.last().unwrap().t, 40);
    }

    #[test]
    fn buffer_extends_window_to_min_size() {
        let mut buf = MeasurementBuffer::new(30, 5);
        for t in [0, 40, 80, 120, 160, 200, 240] {
            buf.push_and_trim(obs(t, 0.0, 0.0, 0.1, 0.1)).unwrap();
        }
        assert_eq!(buf.len(), 5);
        assert_eq!(buf.entries()[0].t, 80);
    }

    #[test]
    fn buffer_rejects_non_increasing_time() {
        let mut buf = MeasurementBuffer::default();
        buf.push_and_trim(obs(5, 0.0, 0.0, 0.1, 0.1)).unwrap();
        let err = buf.push_and_trim(obs(5, 0.0, 0.0, 0.1, 0.1)).unwrap_err();
        assert_eq!(err, FeatureError::NonMonotoneTimestamp { prev: 5, next: 5 });
    }

    #[test]
    fn sfod_known_row() {
        let codec = FeatureCodec::new(FeatureMode::Sfod, false);
        let rows = codec
            .encode(&[obs(0, 0.0, 0.0, 1.0, 1.0), obs(2, 2.0, 0.0, 1.0, 1.0)])
            .unwrap();
        assert_eq!(rows.nrows(), 1);
        assert_eq!(rows.row(0).to_vec(), vec![1.0, 0.0, 0.0, 0.0, 3.0]);
    }

    #[test]
    fn rloc_known_rows() {
        let codec = FeatureCodec::new(FeatureMode::Rloc, false);
        let rows = codec
            .encode(&[
                obs(1, 0.0, 0.0, 1.0, 1.0),
                obs(2, 0.3, 0.1, 1.0, 1.0),
                obs(3, 0.5, 0.1, 1.2, 1.0),
            ])
            .unwrap();
        assert_eq!(rows.nrows(), 2);
        let r0 = rows.row(0).to_vec();
        assert_relative_eq!(r0[0], 0.5);
        assert_relative_eq!(r0[1], 0.1);
        assert_relative_eq!(r0[2], 0.2, max_relative = 1e-12);
        assert_relative_eq!(r0[3], 0.0);
        assert_relative_eq!(r0[4], 1.0);
        let r1 = rows.row(1).to_vec();
        assert_relative_eq!(r1[0], 0.2, max_relative = 1e-12);
        assert_relative_eq!(r1[4], 2.0);
    }

    #[test]
    fn rloc_anchor_row_closes_window() {
        let codec = FeatureCodec::new(FeatureMode::Rloc, false);
        let window = [obs(1, 0.0, 0.0, 1.0, 1.0), obs(3, 0.3, 0.1, 1.0, 1.0)];
        let rows = codec.encode_with_anchor_row(&window).unwrap();
        assert_eq!(rows.nrows(), 2);
        assert_eq!(rows.row(1).to_vec(), vec![0.0, 0.0, 0.0, 0.0, 3.0]);
    }

    #[test]
    fn encode_requires_enough_observations() {
        let codec = FeatureCodec::new(FeatureMode::Rloc, false);
        let err = codec.encode(&[obs(1, 0.0, 0.0, 1.0, 1.0)]).unwrap_err();
        assert_eq!(err, FeatureError::TooFewObservations { needed: 2, got: 1 });
        let absolute = FeatureCodec::new(FeatureMode::Absolute, false);
        assert!(absolute.encode(&[obs(1, 0.0, 0.0, 1.0, 1.0)]).is_ok());
    }

    #[test]
    fn sfod_decode_accumulates_mean_and_variance() {
        let codec = FeatureCodec::new(FeatureMode::Sfod, false);
        let history = [obs(1, 0.0, 0.0, 1.0, 1.0), obs(2, 0.1, 0.0, 1.0, 1.0)];
        let mean = array![[0.1, 0.0, 0.0, 0.0], [0.1, 0.0, 0.0, 0.0]];
        let var = array![[0.01, 0.01, 0.01, 0.01], [0.01, 0.01, 0.01, 0.01]];
        let states = codec.decode(&history, &[3, 4], &mean, &var).unwrap();
        assert_relative_eq!(states[1].mean()[0], 0.1 + 0.2, max_relative = 1e-12);
        assert_relative_eq!(states[1].var()[0], 0.02, max_relative = 1e-12);
        assert_relative_eq!(states[0].var()[0], 0.01, max_relative = 1e-12);
    }

    #[test]
    fn rloc_decode_passes_variance_through() {
        let codec = FeatureCodec::new(FeatureMode::Rloc, false);
        let history = [obs(1, 0.0, 0.0, 1.0, 1.0), obs(2, 0.4, 0.2, 1.0, 1.0)];
        let mean = array![[0.1, -0.1, 0.0, 0.0]];
        let var = array![[0.03, 0.04, 0.05, 0.06]];
        let states = codec.decode(&history, &[4], &mean, &var).unwrap();
        assert_relative_eq!(states[0].mean()[0], 0.5, max_relative = 1e-12);
        assert_relative_eq!(states[0].mean()[1], 0.1, max_relative = 1e-12);
        assert_eq!(states[0].var(), [0.03, 0.04, 0.05, 0.06]);
    }

    #[test]
    fn encode_decode_round_trip() {
        for mode in [FeatureMode::Absolute, FeatureMode::Sfod, FeatureMode::Rloc] {
            let mut codec = FeatureCodec::new(mode, true);
            let history: Vec<Observation> = (1..=6)
                .map(|t| obs(t, 0.1 * t as f64, 0.05 * t as f64, 0.2 + 0.01 * t as f64, 0.3))
                .collect();
            let targets: Vec<Observation> = (7..=9)
                .map(|t| obs(t, 0.1 * t as f64, 0.05 * t as f64, 0.2 + 0.01 * t as f64, 0.3))
                .collect();
            let raw = FeatureCodec::new(mode, false);
            codec.fit_standardizer(&[raw.encode(&history).unwrap()]);
            let encoded = codec.encode_targets(&history, &targets).unwrap();
            let mean = encoded.slice(ndarray::s![.., ..4]).to_owned();
            let var = Array2::zeros((3, 4));
            let times: Vec<i64> = targets.iter().map(|o| o.t).collect();
            let states = codec.decode(&history, &times, &mean, &var).unwrap();
            for (state, target) in states.iter().zip(&targets) {
                for j in 0..4 {
                    assert_relative_eq!(state.mean()[j], target.bbox.ltwh()[j], epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn standardizer_population_stats() {
        let mut codec = FeatureCodec::new(FeatureMode::Absolute, true);
        let rows = array![[0.0, 1.0, 0.0, 0.0, 1.0], [2.0, 4.0, 0.0, 0.0, 1.0]];
        codec.fit_standardizer(&[rows]);
        assert_relative_eq!(codec.mean[0], 1.0);
        assert_relative_eq!(codec.std[0], 1.0);
        assert_relative_eq!(codec.mean[1], 2.5);
        assert_relative_eq!(codec.std[1], 1.5);
    }

    #[test]
    fn standardizer_keeps_constant_columns_at_unit_scale() {
        let mut codec = FeatureCodec::new(FeatureMode::Rloc, true);
        let rows = array![[0.1, 0.0, 0.3, 0.3, 1.0], [0.3, 0.0, 0.3, 0.3, 2.0]];
        codec.fit_standardizer(&[rows]);
        for col in [1, 2, 3] {
            assert_eq!(codec.std[col], 1.0, "constant column {col} must not shrink");
        }
        assert!(codec.std[0] > 0.09 && codec.std[0] < 0.11);
    }

    proptest! {
        #[test]
        fn buffer_trim_invariant(times in proptest::collection::vec(1i64..200, 1..60)) {
            let mut sorted = times.clone();
            sorted.sort_unstable();
            sorted.dedup();
            let mut buf = MeasurementBuffer::new(20, 4);
            for &t in &sorted {
                buf.push_and_trim(obs(t, 0.0, 0.0, 0.1, 0.1)).unwrap();
                let t_now = buf.last().unwrap().t;
                let in_window = buf.entries().iter().filter(|o| o.t >= t_now - 20).count();
                prop_assert!(buf.len() == in_window || buf.len() == 4.min(buf.len()));
                prop_assert!(buf.len() >= in_window);
            }
        }

        #[test]
        fn difference_modes_translation_invariant(
            coords in proptest::collection::vec((0u32..1000, 0u32..1000, 1u32..300, 1u32..300), 3..12),
            shift in (0i32..16, 0i32..16),
        ) {
            // Dyadic inputs make the shifted differences exactly representable.
            let scale = 1.0 / 1024.0;
            let window: Vec<Observation> = coords.iter().enumerate().map(|(i, &(l, t, w, h))| {
                obs(i as i64 + 1, l as f64 * scale, t as f64 * scale, w as f64 * scale, h as f64 * scale)
            }).collect();
            let shifted: Vec<Observation> = window.iter().map(|o| {
                let [l, t, w, h] = o.bbox.ltwh();
                obs(o.t, l + shift.0 as f64 / 16.0, t + shift.1 as f64 / 16.0, w, h)
            }).collect();
            for mode in [FeatureMode::Sfod, FeatureMode::Rloc] {
                let codec = FeatureCodec::new(mode, false);
                let a = codec.encode(&window).unwrap();
                let b = codec.encode(&shifted).unwrap();
                prop_assert_eq!(a, b);
            }
        }
    }
}
