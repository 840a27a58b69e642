//! Sweep detector noise and false-negative rate for the Kalman filter and
//! print the benchmark tables the `bench-noise` / `bench-fn` commands write.

use movesort::eval::{bench_fn, bench_noise};
use movesort::filters::FilterKind;
use movesort::io::synth::{SceneKind, SyntheticSpec};

fn main() {
    let mut spec = SyntheticSpec::new(SceneKind::Sinusoidal);
    spec.n_objects = 2;
    spec.n_frames = 80;
    spec.seed = 21;
    let filters = vec![("kalman".to_string(), FilterKind::kalman())];

    let noise = bench_noise(&filters, &spec, 5).expect("sweep runs");
    println!("prior/posterior mean IoU as detector noise grows:\n");
    print!("{}", noise.to_csv());

    let misses = bench_fn(&filters, &spec, 5).expect("sweep runs");
    println!("\nthe same at fixed σ = 0.05 with detections dropped at random:\n");
    print!("{}", misses.to_csv());
}
