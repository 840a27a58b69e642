//! Seeded synthetic scenes: ground-truth trajectories plus detector-style
//! corruption (per-box Gaussian noise scaled to box size, independent false
//! negatives).
//!
//! The four kinds cover the motion classes the filters are evaluated on:
//! `constant-velocity` (linear drift), `sinusoidal` (drift plus a periodic
//! perpendicular offset), `crossing-pair` (two straight paths meeting at a
//! configured frame) and `random-walk-turns` (piecewise-constant velocity
//! with occasional redraws, reflected at the frame border).

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::features::Observation;
use crate::geom::Box;
use crate::metrics::FrameAnnotations;
use crate::motion::noisy_box;

use super::mot::MotRow;
use super::IoError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneKind {
    ConstantVelocity,
    Sinusoidal,
    CrossingPair,
    RandomWalkTurns,
}

impl SceneKind {
    pub fn name(&self) -> &'static str {
        match self {
            SceneKind::ConstantVelocity => "constant-velocity",
            SceneKind::Sinusoidal => "sinusoidal",
            SceneKind::CrossingPair => "crossing-pair",
            SceneKind::RandomWalkTurns => "random-walk-turns",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "constant-velocity" => Some(SceneKind::ConstantVelocity),
            "sinusoidal" => Some(SceneKind::Sinusoidal),
            "crossing-pair" => Some(SceneKind::CrossingPair),
            "random-walk-turns" => Some(SceneKind::RandomWalkTurns),
            _ => None,
        }
    }
}

/// Scene recipe. Coordinates are normalized to a unit frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub kind: SceneKind,
    /// Ignored by `crossing-pair`, which always has two objects.
    pub n_objects: usize,
    pub n_frames: usize,
    /// Nominal per-frame drift magnitude.
    pub speed: f64,
    /// Sinusoidal offset amplitude.
    pub amplitude: f64,
    /// Sinusoidal period in frames.
    pub period: f64,
    /// Frame at which the crossing pair meets.
    pub cross_frame: i64,
    /// Detector noise scale σ of the (σ·w, σ·h, σ·w, σ·h) pattern.
    pub noise_sigma: f64,
    /// Independent per-box false-negative probability.
    pub fn_prob: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(kind: SceneKind) -> Self {
        Self {
            kind,
            n_objects: if kind == SceneKind::CrossingPair { 2 } else { 1 },
            n_frames: 100,
            speed: 0.005,
            amplitude: 0.1,
            period: 40.0,
            cross_frame: 50,
            noise_sigma: 0.0,
            fn_prob: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), IoError> {
        let bad = |msg: &str| Err(IoError::Config(format!("synthetic spec: {msg}")));
        if self.n_frames < 2 || self.n_objects == 0 {
            return bad("need at least 2 frames and 1 object");
        }
        if !(0.0..=1.0).contains(&self.fn_prob) {
            return bad("fn_prob must lie in [0,1]");
        }
        if !(self.noise_sigma >= 0.0) {
            return bad("noise_sigma must be non-negative");
        }
        if !(self.speed >= 0.0) || !(self.amplitude >= 0.0) || !(self.period > 0.0) {
            return bad("speed and amplitude must be non-negative, period positive");
        }
        if self.kind == SceneKind::CrossingPair
            && !(1..=self.n_frames as i64).contains(&self.cross_frame)
        {
            return bad("cross_frame must lie inside the frame range");
        }
        Ok(())
    }
}

/// Ground truth plus per-track detection streams (`None` marks a dropped
/// box). Track `i`'s detections align index-for-index with its observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub tracks: Vec<(u64, Vec<Observation>)>,
    pub detections: Vec<Vec<Option<Box>>>,
}

impl Scene {
    pub fn annotations(&self) -> FrameAnnotations {
        let mut ann = FrameAnnotations::new();
        for (id, obs) in &self.tracks {
            for o in obs {
                ann.insert(o.t, *id, o.bbox).expect("generated ids are unique per frame");
            }
        }
        ann
    }

    /// Detections grouped by frame, in track order within a frame.
    pub fn detection_frames(&self) -> BTreeMap<i64, Vec<Box>> {
        let mut frames: BTreeMap<i64, Vec<Box>> = BTreeMap::new();
        for (track, dets) in self.tracks.iter().zip(&self.detections) {
            for (o, det) in track.1.iter().zip(dets) {
                if let Some(b) = det {
                    frames.entry(o.t).or_default().push(*b);
                }
            }
        }
        frames
    }

    pub fn detection_mot_rows(&self) -> Vec<MotRow> {
        let mut rows = Vec::new();
        for (frame, boxes) in self.detection_frames() {
            for b in boxes {
                rows.push(MotRow {
                    frame,
                    id: -1,
                    left: b.left,
                    top: b.top,
                    width: b.width,
                    height: b.height,
                    conf: 1.0,
                });
            }
        }
        rows
    }

    pub fn gt_mot_rows(&self) -> Vec<MotRow> {
        let mut rows = Vec::new();
        for (id, obs) in &self.tracks {
            for o in obs {
                rows.push(MotRow {
                    frame: o.t,
                    id: *id as i64,
                    left: o.bbox.left,
                    top: o.bbox.top,
                    width: o.bbox.width,
                    height: o.bbox.height,
                    conf: 1.0,
                });
            }
        }
        rows.sort_by_key(|r| (r.frame, r.id));
        rows
    }

    pub fn n_detections(&self) -> usize {
        self.detections.iter().flatten().filter(|d| d.is_some()).count()
    }

    pub fn n_gt_boxes(&self) -> usize {
        self.tracks.iter().map(|(_, obs)| obs.len()).sum()
    }
}

fn box_at(cx: f64, cy: f64, w: f64, h: f64) -> Box {
    Box::new(cx - w / 2.0, cy - h / 2.0, w, h)
}

fn draw_size(rng: &mut ChaCha8Rng) -> (f64, f64) {
    (rng.random_range(0.08..0.16), rng.random_range(0.10..0.20))
}

fn constant_velocity_track(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Vec<Observation> {
    let (w, h) = draw_size(rng);
    let cx0 = rng.random_range(0.15..0.85);
    let cy0 = rng.random_range(0.15..0.85);
    let angle = rng.random_range(0.0..std::f64::consts::TAU);
    let mag = spec.speed * rng.random_range(0.5..1.5);
    (1..=spec.n_frames as i64)
        .map(|f| {
            let s = (f - 1) as f64;
            Observation::new(
                f,
                box_at(cx0 + mag * angle.cos() * s, cy0 + mag * angle.sin() * s, w, h),
            )
        })
        .collect()
}

fn sinusoidal_track(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Vec<Observation> {
    let (w, h) = draw_size(rng);
    let cx0 = rng.random_range(0.2..0.8);
    let cy0 = rng.random_range(0.2..0.8);
    let angle = rng.random_range(0.0..std::f64::consts::TAU);
    let mag = spec.speed * rng.random_range(0.5..1.5);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let (dx, dy) = (angle.cos(), angle.sin());
    (1..=spec.n_frames as i64)
        .map(|f| {
            let s = (f - 1) as f64;
            let offset =
                spec.amplitude * (std::f64::consts::TAU * s / spec.period + phase).sin();
            // sinusoid on the axis perpendicular to the drift
            let cx = cx0 + mag * dx * s - offset * dy;
            let cy = cy0 + mag * dy * s + offset * dx;
            Observation::new(f, box_at(cx, cy, w, h))
        })
        .collect()
}

fn crossing_pair_tracks(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Vec<Vec<Observation>> {
    let meet_x = rng.random_range(0.35..0.65);
    let meet_y = rng.random_range(0.35..0.65);
    let angle_a = rng.random_range(0.0..std::f64::consts::TAU);
    let angle_b = angle_a
        + rng.random_range(std::f64::consts::FRAC_PI_3..2.0 * std::f64::consts::FRAC_PI_3);
    let mut tracks = Vec::with_capacity(2);
    for angle in [angle_a, angle_b] {
        let (w, h) = draw_size(rng);
        let mag = spec.speed * rng.random_range(0.75..1.25);
        tracks.push(
            (1..=spec.n_frames as i64)
                .map(|f| {
                    let s = (f - spec.cross_frame) as f64;
                    Observation::new(
                        f,
                        box_at(
                            meet_x + mag * angle.cos() * s,
                            meet_y + mag * angle.sin() * s,
                            w,
                            h,
                        ),
                    )
                })
                .collect(),
        );
    }
    tracks
}

fn random_walk_track(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Vec<Observation> {
    let (w, h) = draw_size(rng);
    let mut cx = rng.random_range(0.2..0.8);
    let mut cy = rng.random_range(0.2..0.8);
    let draw_velocity = |rng: &mut ChaCha8Rng| {
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        let mag = spec.speed * rng.random_range(0.5..1.5);
        (mag * angle.cos(), mag * angle.sin())
    };
    let (mut vx, mut vy) = draw_velocity(rng);
    let mut countdown: u32 = rng.random_range(8..=20);
    let mut obs = Vec::with_capacity(spec.n_frames);
    for f in 1..=spec.n_frames as i64 {
        obs.push(Observation::new(f, box_at(cx, cy, w, h)));
        if countdown == 0 {
            (vx, vy) = draw_velocity(rng);
            countdown = rng.random_range(8..=20);
        } else {
            countdown -= 1;
        }
        cx += vx;
        cy += vy;
        if cx - w / 2.0 < 0.0 || cx + w / 2.0 > 1.0 {
            vx = -vx;
            cx = cx.clamp(w / 2.0, 1.0 - w / 2.0);
        }
        if cy - h / 2.0 < 0.0 || cy + h / 2.0 > 1.0 {
            vy = -vy;
            cy = cy.clamp(h / 2.0, 1.0 - h / 2.0);
        }
    }
    obs
}

/// Detector-style corruption of ground-truth observation sets: per-box noise
/// with the (σ·w, σ·h, σ·w, σ·h) pattern, then independent drops with
/// `fn_prob`. Sizes are floored at a tiny positive value so heavy noise
/// cannot produce invalid boxes.
pub fn corrupt(
    tracks: &[Vec<Observation>],
    noise_sigma: f64,
    fn_prob: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<Option<Box>>> {
    let mut detections = Vec::with_capacity(tracks.len());
    for obs in tracks {
        let mut dets = Vec::with_capacity(obs.len());
        for o in obs {
            let noisy = if noise_sigma > 0.0 {
                let b = noisy_box(&o.bbox, noise_sigma, rng);
                Box::new(b.left, b.top, b.width.max(1e-6), b.height.max(1e-6))
            } else {
                o.bbox
            };
            let dropped = fn_prob > 0.0 && rng.random::<f64>() < fn_prob;
            dets.push(if dropped { None } else { Some(noisy) });
        }
        detections.push(dets);
    }
    detections
}

/// Generates a scene: seeded ground truth corrupted via [`corrupt`].
pub fn generate(spec: &SyntheticSpec) -> Result<Scene, IoError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let gt: Vec<Vec<Observation>> = match spec.kind {
        SceneKind::ConstantVelocity => {
            (0..spec.n_objects).map(|_| constant_velocity_track(spec, &mut rng)).collect()
        }
        SceneKind::Sinusoidal => {
            (0..spec.n_objects).map(|_| sinusoidal_track(spec, &mut rng)).collect()
        }
        SceneKind::CrossingPair => crossing_pair_tracks(spec, &mut rng),
        SceneKind::RandomWalkTurns => {
            (0..spec.n_objects).map(|_| random_walk_track(spec, &mut rng)).collect()
        }
    };

    let detections = corrupt(&gt, spec.noise_sigma, spec.fn_prob, &mut rng);
    let tracks = gt.into_iter().enumerate().map(|(i, obs)| (i as u64 + 1, obs)).collect();
    Ok(Scene { tracks, detections })
}
