use std::time::Instant;

use movesort::eval::eval_filter_on_scenes;
use movesort::filters::{train_e2e, E2eArch, FilterKind};
use movesort::io::dataset::observation_sets;
use movesort::io::synth::{generate, SceneKind, SyntheticSpec};
use movesort::io::Scene;
use movesort::motion::{train, MotionArch, TrainConfig};

fn scenes(first_seed: u64, n: usize, sigma: f64) -> Vec<Scene> {
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
    let t0 = Instant::now();
    let train_tracks: Vec<_> =
        scenes(0, 40, 0.0).into_iter().flat_map(|s| observation_sets(&s.tracks)).collect();
    println!("training tracks: {} ({:?})", train_tracks.len(), t0.elapsed());

    let mut cfg = TrainConfig::new(7);
    cfg.epochs = 8;
    cfg.lr = 5e-3;

    let t = Instant::now();
    let (cnp, _) = train(MotionArch::RnnCnp, &train_tracks, &cfg).unwrap();
    println!("rnn-cnp trained: loss {:.4} ({:?})", cnp.final_loss, t.elapsed());

    let t = Instant::now();
    let (arnn_aug, _) = train(MotionArch::ArRnn, &train_tracks, &cfg).unwrap();
    println!("ar-rnn aug trained: loss {:.4} ({:?})", arnn_aug.final_loss, t.elapsed());

    let t = Instant::now();
    let cfg_naive = cfg.clone().without_augmentation();
    let (arnn_naive, _) = train(MotionArch::ArRnn, &train_tracks, &cfg_naive).unwrap();
    println!("ar-rnn naive trained: loss {:.4} ({:?})", arnn_naive.final_loss, t.elapsed());

    let t = Instant::now();
    let mut ode_cfg = cfg.clone();
    let (ode, _) = train(MotionArch::RnnOde, &train_tracks, &ode_cfg).unwrap();
    println!("rnn-ode trained: loss {:.4} ({:?})", ode.final_loss, t.elapsed());
    let _ = &mut ode_cfg;

    let t = Instant::now();
    let mut e2e_cfg = cfg.clone().with_boosted_noise();
    e2e_cfg.epochs = 6;
    let (e2e, _) = train_e2e(E2eArch::RnnE2e, &train_tracks, &e2e_cfg).unwrap();
    println!("rnn-e2e trained: loss {:.4} ({:?})", e2e.final_loss, t.elapsed());

    // criterion 8 shape: clean held-out prior accuracy vs kalman
    let t = Instant::now();
    let held = scenes(5000, 50, 0.0);
    let kf = eval_filter_on_scenes(&FilterKind::kalman(), &held, true).unwrap();
    let cnp_f = FilterKind::bayes(cnp, 0.05).unwrap();
    let cnp_s = eval_filter_on_scenes(&cnp_f, &held, true).unwrap();
    let ode_f = FilterKind::bayes(ode, 0.05).unwrap();
    let ode_s = eval_filter_on_scenes(&ode_f, &held, true).unwrap();
    println!(
        "c8 prior IoU at sigma=0: kalman {:.4}  rnn-cnp {:.4}  rnn-ode {:.4} ({:?})",
        kf.prior_accuracy, cnp_s.prior_accuracy, ode_s.prior_accuracy, t.elapsed()
    );

    // criterion 6 shape: aug vs naive prior across sigma
    let t = Instant::now();
    let aug_f = FilterKind::bayes(arnn_aug, 0.05).unwrap();
    let naive_f = FilterKind::bayes(arnn_naive, 0.05).unwrap();
    for sigma in [0.1, 0.2, 0.3] {
        let noisy = scenes(7000, 20, sigma);
        let a = eval_filter_on_scenes(&aug_f, &noisy, true).unwrap();
        let n = eval_filter_on_scenes(&naive_f, &noisy, true).unwrap();
        println!("c6 sigma={sigma}: aug prior {:.4}  naive prior {:.4}", a.prior_accuracy, n.prior_accuracy);
    }
    println!("c6 eval ({:?})", t.elapsed());

    // criterion 7 shape: e2e posterior vs bayes posterior
    let t = Instant::now();
    let e2e_f = FilterKind::e2e(e2e);
    for sigma in [0.15, 0.3] {
        let noisy = scenes(9000, 20, sigma);
        let b = eval_filter_on_scenes(&aug_f, &noisy, true).unwrap();
        let e = eval_filter_on_scenes(&e2e_f, &noisy, true).unwrap();
        println!("c7 sigma={sigma}: e2e post {:.4}  bayes post {:.4}", e.posterior_accuracy, b.posterior_accuracy);
    }
    println!("c7 eval ({:?})", t.elapsed());
    println!("total {:?}", t0.elapsed());
}
