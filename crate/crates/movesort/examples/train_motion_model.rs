//! Train a probabilistic motion model on sinusoidal trajectories and compare
//! its one-step prior against the constant-velocity Kalman prior.
//!
//! The Kalman filter assumes straight-line motion, so on curved tracks its
//! prior lags behind; a learned model picks up the curvature.

use movesort::eval::eval_filter_on_scenes;
use movesort::filters::FilterKind;
use movesort::io::dataset::observation_sets;
use movesort::io::synth::{generate, SceneKind, SyntheticSpec};
use movesort::motion::{train, MotionArch, TrainConfig};

fn scenes(first_seed: u64, n: usize, sigma: f64) -> Vec<movesort::io::Scene> {
    (0..n)
        .map(|i| {
            let mut spec = SyntheticSpec::new(SceneKind::Sinusoidal);
            spec.n_objects = 2;
            spec.n_frames = 100;
            spec.noise_sigma = sigma;
            spec.seed = first_seed + i as u64;
            generate(&spec).expect("valid spec")
        })
        .collect()
}

fn main() {
    let train_tracks: Vec<_> = scenes(0, 30, 0.0)
        .into_iter()
        .flat_map(|s| observation_sets(&s.tracks))
        .collect();

    let mut cfg = TrainConfig::new(7);
    cfg.epochs = 4;
    let (model, losses) = train(MotionArch::RnnCnp, &train_tracks, &cfg).expect("training runs");
    println!("trained {} for {} epochs", model.arch.name(), losses.len());
    println!("final loss: {:.4}", model.final_loss);

    let held_out = scenes(1000, 10, 0.05);
    let learned = FilterKind::bayes(model, 0.05).expect("fresh model");
    for (name, kind) in [("kalman", FilterKind::kalman()), ("rnn-cnp", learned)] {
        let summary = eval_filter_on_scenes(&kind, &held_out, true).expect("scenes have samples");
        println!("{name:8} prior IoU: {:.3}  posterior IoU: {:.3}",
            summary.prior_accuracy, summary.posterior_accuracy);
    }
}
