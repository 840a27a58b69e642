//! Step a learned Bayes filter through a noisy track by hand: predict a
//! Gaussian prior, fuse it with the measurement, and watch the uncertainty
//! grow while detections are missing.

use movesort::filters::{filter_init, filter_missing, filter_predict, filter_update, FilterKind};
use movesort::io::dataset::observation_sets;
use movesort::io::synth::{generate, SceneKind, SyntheticSpec};
use movesort::motion::{train, MotionArch, TrainConfig};

fn main() {
    let mut spec = SyntheticSpec::new(SceneKind::Sinusoidal);
    spec.n_objects = 3;
    spec.n_frames = 100;
    let train_tracks: Vec<_> = (0..10)
        .flat_map(|i| {
            let mut s = spec;
            s.seed = i;
            observation_sets(&generate(&s).expect("valid spec").tracks)
        })
        .collect();
    let mut cfg = TrainConfig::new(1);
    cfg.epochs = 3;
    cfg.hidden_dim = 16;
    let (model, _) = train(MotionArch::ArRnn, &train_tracks, &cfg).expect("training runs");
    println!("trained {}: final loss {:.4}\n", model.arch.name(), model.final_loss);

    let mut test_spec = spec;
    test_spec.n_objects = 1;
    test_spec.noise_sigma = 0.1;
    test_spec.fn_prob = 0.15;
    test_spec.seed = 99;
    let scene = generate(&test_spec).expect("valid spec");
    let (_, gt) = &scene.tracks[0];
    let dets = &scene.detections[0];

    let kind = FilterKind::bayes(model, 0.1).expect("fresh model");
    let first = dets.iter().position(|d| d.is_some()).expect("track has detections");
    let mut state = filter_init(&kind, gt[first].t, &dets[first].unwrap());

    println!("frame  prior spread   detected  posterior err");
    for k in first + 1..30 {
        let truth = &gt[k];
        let prior = filter_predict(&kind, &mut state, truth.t).expect("frames increase");
        let spread = prior.var().iter().sum::<f64>().sqrt();
        let (posterior, seen) = match &dets[k] {
            Some(meas) => (filter_update(&kind, &mut state, &prior, meas).unwrap(), "yes"),
            None => (filter_missing(&kind, &mut state, &prior).unwrap(), "no"),
        };
        let (px, py) = posterior.mean_box().center();
        let (tx, ty) = truth.bbox.center();
        let err = ((px - tx).powi(2) + (py - ty).powi(2)).sqrt();
        println!("{:>5}  {spread:>12.5}  {seen:>8}  {err:>13.5}", truth.t);
    }
    println!("\nthe prior spread widens over missed frames and snaps back on an update");
}
