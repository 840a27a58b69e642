//! Track lifecycle: per-frame predict → associate → update/missing →
//! spawn/confirm/delete, with gap interpolation on re-identification and
//! output post-processing.
//!
//! Tracks start tentative and are confirmed after `init_hits` consecutive
//! matches; a tentative track missing a frame is deleted outright. Confirmed
//! tracks that miss a frame become lost but keep participating in association
//! until they have been unmatched for more than `t_lost` frames. A lost track
//! that matches again is re-identified: the gap is filled by per-coordinate
//! linear interpolation when it spans at most `interp_max_gap` frames.
//!
//! Boxes are emitted live only for confirmed tracks on their matched frames;
//! [`postprocess`] then drops short tracks and back-fills the tentative-period
//! boxes that preceded each confirmation.

use crate::assoc::{build_costs, solve_assignment, CostMode};
use crate::filters::{
    filter_init, filter_missing, filter_predict, filter_update, FilterError, FilterKind,
    FilterState,
};
use crate::gaussian::GaussianState;
use crate::geom::Box;

#[derive(Debug, thiserror::Error)]
pub enum TrackerError {
    #[error("frame {frame} is not after the last processed frame {last}")]
    NonMonotoneFrame { last: i64, frame: i64 },
    #[error("invalid tracker config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Filter(#[from] FilterError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Lost,
    Deleted,
}

/// Where an emitted history box came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoxSource {
    /// Posterior after folding in a matched detection.
    Detection,
    /// Prior carried through a frame with no matched detection.
    Prior,
    /// Linear interpolation inserted on re-identification.
    Interpolated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryEntry {
    pub frame: i64,
    pub bbox: Box,
    pub source: BoxSource,
}

/// One tracked object. Every frame the track was alive contributes exactly
/// one history entry.
#[derive(Debug, Clone)]
pub struct Track {
    pub id: u64,
    pub status: TrackStatus,
    pub consecutive_hits: u32,
    pub frames_since_update: u32,
    pub filter: FilterState,
    pub history: Vec<HistoryEntry>,
    ever_confirmed: bool,
}

impl Track {
    pub fn ever_confirmed(&self) -> bool {
        self.ever_confirmed
    }

    fn last_detection(&self) -> Option<&HistoryEntry> {
        self.history.iter().rev().find(|e| e.source == BoxSource::Detection)
    }
}

/// Tracker hyperparameters plus the filter family shared by all tracks.
#[derive(Debug, Clone)]
pub struct TrackerConfig {
    /// Frames a track may stay unmatched before deletion.
    pub t_lost: u32,
    /// Consecutive matches needed to confirm a tentative track.
    pub init_hits: u32,
    pub iou_min: f64,
    pub lambda: f64,
    /// Largest re-identification gap that gets interpolated.
    pub interp_max_gap: i64,
    /// Tracks with fewer emitted boxes are dropped in [`postprocess`].
    pub min_track_len: usize,
    pub cost_mode: CostMode,
    pub filter: FilterKind,
}

impl TrackerConfig {
    pub fn new(filter: FilterKind) -> Self {
        Self {
            t_lost: 30,
            init_hits: 3,
            iou_min: 0.25,
            lambda: 5.0,
            interp_max_gap: 5,
            min_track_len: 20,
            cost_mode: CostMode::Hybrid,
            filter,
        }
    }

    pub fn validate(&self) -> Result<(), TrackerError> {
        let bad = |msg: &str| Err(TrackerError::BadConfig(msg.to_string()));
        if self.t_lost == 0 || self.init_hits == 0 {
            return bad("t_lost and init_hits must be positive");
        }
        if self.interp_max_gap <= 0 || self.min_track_len == 0 {
            return bad("interp_max_gap and min_track_len must be positive");
        }
        if !(0.0..=1.0).contains(&self.iou_min) {
            return bad("iou_min must lie in [0,1]");
        }
        if !(self.lambda >= 0.0) {
            return bad("lambda must be non-negative");
        }
        Ok(())
    }
}

/// Per-coordinate linear interpolation between the track's last detection box
/// and the rediscovery box, one entry per missing frame. Empty when the gap
/// exceeds `max_gap` (or there is no gap).
pub fn interpolate_gap(
    track: &Track,
    rediscovery: (i64, Box),
    max_gap: i64,
) -> Vec<(i64, Box)> {
    let Some(last) = track.last_detection() else { return Vec::new() };
    let (f1, b1) = rediscovery;
    let (f0, b0) = (last.frame, last.bbox);
    let gap = f1 - f0 - 1;
    if gap < 1 || gap > max_gap {
        return Vec::new();
    }
    let a0 = b0.ltwh();
    let a1 = b1.ltwh();
    (1..=gap)
        .map(|k| {
            let alpha = k as f64 / (gap + 1) as f64;
            let c: [f64; 4] = std::array::from_fn(|j| a0[j] + alpha * (a1[j] - a0[j]));
            (f0 + k, Box::from_ltwh(c))
        })
        .collect()
}

/// A single-camera tracking run. Feed frames in strictly increasing order via
/// [`Tracker::step`]; finished and live tracks stay inspectable afterwards.
#[derive(Debug, Clone)]
pub struct Tracker {
    cfg: TrackerConfig,
    tracks: Vec<Track>,
    next_id: u64,
    last_frame: Option<i64>,
}

impl Tracker {
    pub fn new(cfg: TrackerConfig) -> Result<Self, TrackerError> {
        cfg.validate()?;
        Ok(Self { cfg, tracks: Vec::new(), next_id: 1, last_frame: None })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    /// All tracks ever created, including deleted ones.
    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    /// Runs one frame and returns `(id, posterior box, status)` for every
    /// confirmed track matched in this frame.
    pub fn step(
        &mut self,
        frame: i64,
        detections: &[Box],
    ) -> Result<Vec<(u64, Box, TrackStatus)>, TrackerError> {
        if let Some(last) = self.last_frame {
            if frame <= last {
                return Err(TrackerError::NonMonotoneFrame { last, frame });
            }
        }
        self.last_frame = Some(frame);
        let cfg = &self.cfg;
        let tracks = &mut self.tracks;

        let live: Vec<usize> =
            (0..tracks.len()).filter(|&i| tracks[i].status != TrackStatus::Deleted).collect();
        let mut priors: Vec<GaussianState> = Vec::with_capacity(live.len());
        for &ti in &live {
            priors.push(filter_predict(&cfg.filter, &mut tracks[ti].filter, frame)?);
        }

        let costs = build_costs(&priors, detections, cfg.lambda, cfg.iou_min, cfg.cost_mode);
        let assignment = solve_assignment(&costs);
        let mut matched_col: Vec<Option<usize>> = vec![None; live.len()];
        for &(r, c) in &assignment.matches {
            matched_col[r] = Some(c);
        }

        let mut outputs = Vec::new();
        for (r, &ti) in live.iter().enumerate() {
            let track = &mut tracks[ti];
            match matched_col[r] {
                Some(c) => {
                    let posterior =
                        filter_update(&cfg.filter, &mut track.filter, &priors[r], &detections[c])?;
                    let post_box = posterior.mean_box();
                    if track.status == TrackStatus::Lost {
                        let filled =
                            interpolate_gap(track, (frame, post_box), cfg.interp_max_gap);
                        if !filled.is_empty() {
                            let (lo, hi) = (filled[0].0, filled.last().unwrap().0);
                            track.history.retain(|e| {
                                e.source != BoxSource::Prior || e.frame < lo || e.frame > hi
                            });
                            track.history.extend(filled.into_iter().map(|(f, b)| HistoryEntry {
                                frame: f,
                                bbox: b,
                                source: BoxSource::Interpolated,
                            }));
                            track.history.sort_by_key(|e| e.frame);
                        }
                        track.status = TrackStatus::Confirmed;
                    }
                    track.consecutive_hits += 1;
                    track.frames_since_update = 0;
                    track.history.push(HistoryEntry {
                        frame,
                        bbox: post_box,
                        source: BoxSource::Detection,
                    });
                    if track.status == TrackStatus::Tentative
                        && track.consecutive_hits >= cfg.init_hits
                    {
                        track.status = TrackStatus::Confirmed;
                    }
                    if track.status == TrackStatus::Confirmed {
                        track.ever_confirmed = true;
                        outputs.push((track.id, post_box, track.status));
                    }
                }
                None => {
                    let posterior = filter_missing(&cfg.filter, &mut track.filter, &priors[r])?;
                    track.consecutive_hits = 0;
                    track.frames_since_update += 1;
                    track.history.push(HistoryEntry {
                        frame,
                        bbox: posterior.mean_box(),
                        source: BoxSource::Prior,
                    });
                    track.status = match track.status {
                        TrackStatus::Tentative => TrackStatus::Deleted,
                        TrackStatus::Confirmed | TrackStatus::Lost => TrackStatus::Lost,
                        TrackStatus::Deleted => unreachable!("deleted tracks are not live"),
                    };
                    if track.frames_since_update > cfg.t_lost {
                        track.status = TrackStatus::Deleted;
                    }
                }
            }
        }

        for &c in &assignment.unmatched_cols {
            let det = detections[c];
            let track = Track {
                id: self.next_id,
                status: TrackStatus::Tentative,
                consecutive_hits: 1,
                frames_since_update: 0,
                filter: filter_init(&cfg.filter, frame, &det),
                history: vec![HistoryEntry { frame, bbox: det, source: BoxSource::Detection }],
                ever_confirmed: false,
            };
            self.next_id += 1;
            tracks.push(track);
        }

        Ok(outputs)
    }

    /// Post-processed output rows for the whole run so far.
    pub fn postprocess(&self) -> Vec<OutputRow> {
        postprocess(&self.tracks, &self.cfg)
    }
}

/// One box of the final tracking output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputRow {
    pub id: u64,
    pub frame: i64,
    pub bbox: Box,
}

/// Final output assembly: keeps tracks that were confirmed at some point and
/// have at least `min_track_len` emitted boxes, back-fills their
/// tentative-period boxes, and keeps interpolated gap boxes. Rows are ordered
/// by `(id, frame)`.
pub fn postprocess(tracks: &[Track], cfg: &TrackerConfig) -> Vec<OutputRow> {
    let mut out = Vec::new();
    for track in tracks {
        if !track.ever_confirmed {
            continue;
        }
        let rows: Vec<OutputRow> = track
            .history
            .iter()
            .filter(|e| e.source != BoxSource::Prior)
            .map(|e| OutputRow { id: track.id, frame: e.frame, bbox: e.bbox })
            .collect();
        if rows.len() < cfg.min_track_len {
            continue;
        }
        out.extend(rows);
    }
    out.sort_by(|a, b| (a.id, a.frame).cmp(&(b.id, b.frame)));
    out
}

/// Post-processing over bare output rows (e.g. a MOT file produced without
/// post-processing): per-coordinate linear interpolation of frame gaps up to
/// `interp_max_gap`, removal of tracks with fewer than `min_track_len` rows,
/// and `(id, frame)` ordering. Unlike [`postprocess`] this cannot back-fill
/// the tentative period, which a row file does not record.
pub fn postprocess_rows(
    rows: &[OutputRow],
    min_track_len: usize,
    interp_max_gap: i64,
) -> Vec<OutputRow> {
    let mut by_id: std::collections::BTreeMap<u64, Vec<OutputRow>> = Default::default();
    for row in rows {
        by_id.entry(row.id).or_default().push(*row);
    }
    let mut out = Vec::new();
    for (id, mut rows) in by_id {
        rows.sort_by_key(|r| r.frame);
        rows.dedup_by_key(|r| r.frame);
        let mut filled = Vec::with_capacity(rows.len());
        for i in 0..rows.len() {
            if i > 0 {
                let (prev, next) = (&rows[i - 1], &rows[i]);
                let gap = next.frame - prev.frame - 1;
                if (1..=interp_max_gap).contains(&gap) {
                    let a0 = prev.bbox.ltwh();
                    let a1 = next.bbox.ltwh();
                    for k in 1..=gap {
                        let alpha = k as f64 / (gap + 1) as f64;
                        let c: [f64; 4] =
                            std::array::from_fn(|j| a0[j] + alpha * (a1[j] - a0[j]));
                        filled.push(OutputRow {
                            id,
                            frame: prev.frame + k,
                            bbox: Box::from_ltwh(c),
                        });
                    }
                }
            }
            filled.push(rows[i]);
        }
        if filled.len() >= min_track_len {
            out.extend(filled);
        }
    }
    out.sort_by(|a, b| (a.id, a.frame).cmp(&(b.id, b.frame)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(l: f64, t: f64, w: f64, h: f64) -> Box {
        Box::new(l, t, w, h)
    }

    fn kalman_cfg() -> TrackerConfig {
        TrackerConfig::new(FilterKind::kalman())
    }

    /// Linear path detection for one object.
    fn moving_box(frame: i64) -> Box {
        bx(0.1 + 0.005 * frame as f64, 0.2 + 0.002 * frame as f64, 0.2, 0.25)
    }

    #[test]
    fn single_object_confirms_at_init_hits_and_keeps_one_id() {
        let mut tracker = Tracker::new(kalman_cfg()).unwrap();
        let mut seen_ids = std::collections::BTreeSet::new();
        for frame in 1..=100 {
            let out = tracker.step(frame, &[moving_box(frame)]).unwrap();
            if frame < 3 {
                assert!(out.is_empty(), "no emission before confirmation");
            } else {
                assert_eq!(out.len(), 1);
                let (id, bbox, status) = out[0];
                seen_ids.insert(id);
                assert_eq!(status, TrackStatus::Confirmed);
                assert!(crate::geom::iou(&bbox, &moving_box(frame)) > 0.8);
            }
        }
        assert_eq!(seen_ids.len(), 1, "a single stable id over the whole run");
        assert_eq!(tracker.tracks().len(), 1);
    }

    #[test]
    fn track_is_deleted_exactly_after_t_lost_plus_one_misses() {
        let mut cfg = kalman_cfg();
        cfg.t_lost = 5;
        let mut tracker = Tracker::new(cfg).unwrap();
        for frame in 1..=5 {
            tracker.step(frame, &[moving_box(frame)]).unwrap();
        }
        for frame in 6..=10 {
            tracker.step(frame, &[]).unwrap();
            assert_eq!(tracker.tracks()[0].status, TrackStatus::Lost, "frame {frame}");
        }
        tracker.step(11, &[]).unwrap();
        assert_eq!(tracker.tracks()[0].status, TrackStatus::Deleted);
        assert_eq!(tracker.tracks()[0].frames_since_update, 6);
    }

    #[test]
    fn tentative_track_without_a_match_is_deleted_and_ids_are_not_reused() {
        let mut tracker = Tracker::new(kalman_cfg()).unwrap();
        tracker.step(1, &[bx(0.1, 0.1, 0.2, 0.2)]).unwrap();
        tracker.step(2, &[]).unwrap();
        assert_eq!(tracker.tracks()[0].status, TrackStatus::Deleted);
        tracker.step(3, &[bx(0.1, 0.1, 0.2, 0.2)]).unwrap();
        assert_eq!(tracker.tracks().len(), 2);
        assert_ne!(tracker.tracks()[1].id, tracker.tracks()[0].id);
    }

    #[test]
    fn lost_track_is_reidentified_and_the_gap_interpolated() {
        let mut tracker = Tracker::new(kalman_cfg()).unwrap();
        for frame in 1..=5 {
            tracker.step(frame, &[moving_box(frame)]).unwrap();
        }
        for frame in 6..=7 {
            tracker.step(frame, &[]).unwrap();
        }
        for frame in 8..=12 {
            let out = tracker.step(frame, &[moving_box(frame)]).unwrap();
            assert_eq!(out.len(), 1);
        }
        let track = &tracker.tracks()[0];
        assert_eq!(tracker.tracks().len(), 1, "the object kept its track");
        let interp: Vec<&HistoryEntry> =
            track.history.iter().filter(|e| e.source == BoxSource::Interpolated).collect();
        assert_eq!(interp.iter().map(|e| e.frame).collect::<Vec<_>>(), vec![6, 7]);
        // evenly spaced between the frame-5 and frame-8 boxes
        let b5 = track.history.iter().find(|e| e.frame == 5).unwrap().bbox;
        let b8 = track.history.iter().find(|e| e.frame == 8).unwrap().bbox;
        for (k, e) in interp.iter().enumerate() {
            let alpha = (k + 1) as f64 / 3.0;
            for j in 0..4 {
                let expect = b5.ltwh()[j] + alpha * (b8.ltwh()[j] - b5.ltwh()[j]);
                approx::assert_abs_diff_eq!(e.bbox.ltwh()[j], expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn gap_wider_than_the_cap_is_left_open() {
        let mut cfg = kalman_cfg();
        cfg.interp_max_gap = 2;
        let mut tracker = Tracker::new(cfg).unwrap();
        for frame in 1..=5 {
            tracker.step(frame, &[moving_box(frame)]).unwrap();
        }
        for frame in 6..=9 {
            tracker.step(frame, &[]).unwrap();
        }
        for frame in 10..=13 {
            tracker.step(frame, &[moving_box(frame)]).unwrap();
        }
        let track = &tracker.tracks()[0];
        assert_eq!(tracker.tracks().len(), 1);
        assert!(track.history.iter().all(|e| e.source != BoxSource::Interpolated));
        assert_eq!(track.status, TrackStatus::Confirmed);
    }

    #[test]
    fn interpolate_gap_hand_examples() {
        let track = Track {
            id: 1,
            status: TrackStatus::Lost,
            consecutive_hits: 0,
            frames_since_update: 2,
            filter: filter_init(&FilterKind::kalman(), 10, &bx(0.0, 0.0, 1.0, 1.0)),
            history: vec![HistoryEntry {
                frame: 10,
                bbox: bx(0.0, 0.0, 1.0, 1.0),
                source: BoxSource::Detection,
            }],
            ever_confirmed: true,
        };
        let mid = interpolate_gap(&track, (12, bx(0.2, 0.0, 1.0, 1.0)), 5);
        assert_eq!(mid.len(), 1);
        assert_eq!(mid[0].0, 11);
        approx::assert_abs_diff_eq!(mid[0].1.left, 0.1, epsilon = 1e-12);

        let three = interpolate_gap(&track, (14, bx(0.4, 0.4, 1.0, 1.0)), 5);
        assert_eq!(three.iter().map(|r| r.0).collect::<Vec<_>>(), vec![11, 12, 13]);
        for (k, (_, b)) in three.iter().enumerate() {
            approx::assert_abs_diff_eq!(b.left, 0.1 * (k + 1) as f64, epsilon = 1e-12);
            approx::assert_abs_diff_eq!(b.top, 0.1 * (k + 1) as f64, epsilon = 1e-12);
        }

        assert!(interpolate_gap(&track, (20, bx(1.0, 1.0, 1.0, 1.0)), 5).is_empty());
        assert!(interpolate_gap(&track, (11, bx(0.1, 0.0, 1.0, 1.0)), 5).is_empty());
    }

    #[test]
    fn postprocess_backfills_init_and_drops_short_tracks() {
        let mut cfg = kalman_cfg();
        cfg.min_track_len = 10;
        let mut tracker = Tracker::new(cfg.clone()).unwrap();
        // long track: 12 matched frames; short track: 4 matched frames
        for frame in 1..=12 {
            let mut dets = vec![moving_box(frame)];
            if (3..=6).contains(&frame) {
                dets.push(bx(0.7, 0.7, 0.1, 0.1));
            }
            tracker.step(frame, &dets).unwrap();
        }
        let rows = tracker.postprocess();
        let ids: std::collections::BTreeSet<u64> = rows.iter().map(|r| r.id).collect();
        assert_eq!(ids.len(), 1, "the 4-frame track is dropped");
        let frames: Vec<i64> = rows.iter().map(|r| r.frame).collect();
        assert_eq!(frames, (1..=12).collect::<Vec<_>>(), "init frames 1 and 2 are back-filled");
        // first two rows carry the tentative-period boxes
        assert_eq!(rows[0].bbox, moving_box(1));
        let sorted = {
            let mut s = rows.clone();
            s.sort_by(|a, b| (a.id, a.frame).cmp(&(b.id, b.frame)));
            s
        };
        assert_eq!(rows, sorted, "ordering is stable by (id, frame)");
    }

    #[test]
    fn two_clean_objects_keep_distinct_tracks() {
        let mut tracker = Tracker::new(kalman_cfg()).unwrap();
        for frame in 1..=30 {
            let a = bx(0.1 + 0.004 * frame as f64, 0.2, 0.15, 0.2);
            let b = bx(0.7 - 0.004 * frame as f64, 0.6, 0.15, 0.2);
            let out = tracker.step(frame, &[a, b]).unwrap();
            if frame >= 3 {
                assert_eq!(out.len(), 2);
                assert_ne!(out[0].0, out[1].0);
            }
        }
        assert_eq!(tracker.tracks().len(), 2);
    }

    #[test]
    fn non_monotone_frames_are_rejected() {
        let mut tracker = Tracker::new(kalman_cfg()).unwrap();
        tracker.step(5, &[bx(0.1, 0.1, 0.2, 0.2)]).unwrap();
        let err = tracker.step(5, &[]).unwrap_err();
        assert!(matches!(err, TrackerError::NonMonotoneFrame { last: 5, frame: 5 }));
        let err = Tracker::new(TrackerConfig { t_lost: 0, ..kalman_cfg() }).unwrap_err();
        assert!(matches!(err, TrackerError::BadConfig(_)));
    }

    #[test]
    fn row_postprocess_interpolates_and_filters() {
        let line = |id: u64, frame: i64| OutputRow {
            id,
            frame,
            bbox: bx(0.1 * frame as f64, 0.0, 1.0, 1.0),
        };
        // id 1: frames 1..=4 and 7..=10 (gap 2); id 2: frames 1..=3 only
        let mut rows: Vec<OutputRow> = (1..=4).chain(7..=10).map(|f| line(1, f)).collect();
        rows.extend((1..=3).map(|f| line(2, f)));
        let out = postprocess_rows(&rows, 5, 5);
        assert!(out.iter().all(|r| r.id == 1), "short track dropped");
        assert_eq!(out.iter().map(|r| r.frame).collect::<Vec<_>>(), (1..=10).collect::<Vec<_>>());
        let f5 = out.iter().find(|r| r.frame == 5).unwrap();
        approx::assert_abs_diff_eq!(f5.bbox.left, 0.5, epsilon = 1e-12);

        // gap above the cap is left open
        let sparse: Vec<OutputRow> = (1..=4).chain(9..=12).map(|f| line(3, f)).collect();
        let out = postprocess_rows(&sparse, 5, 3);
        assert_eq!(out.len(), 8);
    }

    #[test]
    fn reruns_are_deterministic() {
        let run = || {
            let mut tracker = Tracker::new(kalman_cfg()).unwrap();
            for frame in 1..=40 {
                let mut dets = vec![moving_box(frame)];
                if frame % 7 != 0 {
                    dets.push(bx(0.6, 0.5 + 0.003 * frame as f64, 0.18, 0.22));
                }
                tracker.step(frame, &dets).unwrap();
            }
            tracker.postprocess()
        };
        let a = run();
        let b = run();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.id, y.id);
            assert_eq!(x.frame, y.frame);
            assert_eq!(x.bbox.ltwh(), y.bbox.ltwh());
        }
    }
}
