//! End-to-end tests of the `movesort` binary: every subcommand, config/flag
//! precedence, manifests, determinism and error reporting.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Output;

use movesort::io::model::{load_model, ModelFile};
use movesort::io::mot::{denormalize_rows, read_mot, write_mot};

fn movesort(args: &[&str], dir: &Path) -> Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_movesort"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn movesort")
}

fn ok(args: &[&str], dir: &Path) -> String {
    let out = movesort(args, dir);
    assert!(
        out.status.success(),
        "movesort {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn parse_kv(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .filter_map(|l| l.split_once(','))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

#[test]
fn full_pipeline_runs_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let gen = [
        "gen", "--out", "data", "--kind", "sinusoidal", "--objects", "2", "--frames", "60",
        "--sigma", "0.02", "--seed", "9",
    ];
    ok(&gen, dir);
    for name in ["gt.txt", "dets.txt", "trajectories.txt", "trajectories.txt.manifest.toml"] {
        assert!(dir.join("data").join(name).exists(), "missing data/{name}");
    }

    let track = [
        "track", "--dets", "data/dets.txt", "--out", "tracks.txt", "--filter", "kalman",
        "--min-track-len", "10",
    ];
    ok(&track, dir);
    assert!(dir.join("tracks.txt.manifest.toml").exists());

    let scores = parse_kv(&ok(&["eval-mot", "--hyp", "tracks.txt", "--gt", "data/gt.txt"], dir));
    let mota: f64 = scores["mota"].parse().unwrap();
    let idsw: u64 = scores["idsw"].parse().unwrap();
    assert!(mota > 0.9, "near-clean detections should track well, mota = {mota}");
    assert_eq!(idsw, 0);

    ok(&["postprocess", "--input", "tracks.txt", "--out", "clean.txt", "--min-track-len", "10"],
        dir);
    assert!(dir.join("clean.txt").exists());

    let rerun = tempfile::tempdir().unwrap();
    ok(&gen, rerun.path());
    ok(&track, rerun.path());
    for name in ["data/dets.txt", "data/gt.txt", "tracks.txt"] {
        let a = std::fs::read(dir.join(name)).unwrap();
        let b = std::fs::read(rerun.path().join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn training_commands_write_loadable_models() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(&["gen", "--out", "data", "--kind", "constant-velocity", "--objects", "3", "--frames",
        "50", "--seed", "2"], dir);

    ok(&["train-motion", "--arch", "ar-rnn", "--data", "data/trajectories.txt", "--out",
        "ar.bin", "--epochs", "1", "--hidden", "8", "--seed", "3"], dir);
    match load_model(dir.join("ar.bin")).unwrap() {
        ModelFile::Motion(m) => assert_eq!(m.arch.name(), "ar-rnn"),
        ModelFile::E2e(_) => panic!("train-motion wrote an end-to-end model"),
    }
    let manifest = std::fs::read_to_string(dir.join("ar.bin.manifest.toml")).unwrap();
    assert!(manifest.contains("command = \"train-motion\""));
    assert!(manifest.contains("\"ar.bin\""), "manifest should hash the model file");

    ok(&["train-e2e", "--arch", "rnn-e2e", "--data", "data/trajectories.txt", "--out",
        "e2e.bin", "--epochs", "1", "--hidden", "8", "--seed", "3"], dir);
    match load_model(dir.join("e2e.bin")).unwrap() {
        ModelFile::E2e(m) => assert_eq!(m.arch.name(), "rnn-e2e"),
        ModelFile::Motion(_) => panic!("train-e2e wrote a motion model"),
    }
}

#[test]
fn eval_filter_reports_both_accuracy_series() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(&["gen", "--out", "data", "--kind", "sinusoidal", "--objects", "2", "--frames", "60",
        "--seed", "4"], dir);
    let report = parse_kv(&ok(&["eval-filter", "--data", "data/trajectories.txt", "--filter",
        "kalman", "--det-sigma", "0.1", "--det-fn", "0.2", "--seed", "5", "--out",
        "eval.csv"], dir));
    assert_eq!(report["filter"], "kalman");
    for key in ["prior-accuracy", "prior-mse", "posterior-accuracy", "posterior-mse"] {
        let v: f64 = report[key].parse().unwrap();
        assert!(v.is_finite() && v >= 0.0, "{key} = {v}");
    }
    let samples: usize = report["samples"].parse().unwrap();
    assert!(samples > 0);
    assert!(dir.join("eval.csv.manifest.toml").exists());
}

#[test]
fn bench_noise_emits_the_fixed_sigma_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(&["bench-noise", "--out", "bench.csv", "--scenes", "1", "--frames", "30", "--objects",
        "1", "--seed", "1"], dir);
    let csv = std::fs::read_to_string(dir.join("bench.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "filter,series,sigma=0,sigma=0.05,sigma=0.1,sigma=0.15,sigma=0.2,sigma=0.25,sigma=0.3"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2, "kalman contributes a prior and a posterior row");
    assert!(rows[0].starts_with("kalman,prior,"));
    assert!(rows[1].starts_with("kalman,posterior,"));
}

#[test]
fn flags_override_config_values() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(
        dir.join("run.toml"),
        "seed = 4\n[gen]\nkind = \"constant-velocity\"\nobjects = 1\nframes = 30\n",
    )
    .unwrap();
    ok(&["gen", "--out", "a", "--config", "run.toml"], dir);
    ok(&["gen", "--out", "b", "--config", "run.toml", "--frames", "10"], dir);
    let rows_a = read_mot(dir.join("a/gt.txt")).unwrap();
    let rows_b = read_mot(dir.join("b/gt.txt")).unwrap();
    assert_eq!(rows_a.len(), 30, "config frames apply");
    assert_eq!(rows_b.len(), 10, "flag frames win over config");
}

#[test]
fn image_section_maps_pixel_detections_to_pixel_tracks() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(&["gen", "--out", "data", "--kind", "constant-velocity", "--objects", "2", "--frames",
        "40", "--seed", "6"], dir);
    let (w, h) = (640.0, 480.0);
    for name in ["dets.txt", "gt.txt"] {
        let mut rows = read_mot(dir.join("data").join(name)).unwrap();
        denormalize_rows(&mut rows, w, h);
        write_mot(dir.join(name), &rows).unwrap();
    }
    std::fs::write(dir.join("run.toml"), "[image]\nwidth = 640.0\nheight = 480.0\n").unwrap();
    ok(&["track", "--dets", "dets.txt", "--out", "tracks.txt", "--config", "run.toml",
        "--filter", "kalman", "--min-track-len", "10"], dir);
    let tracks = read_mot(dir.join("tracks.txt")).unwrap();
    assert!(!tracks.is_empty());
    assert!(
        tracks.iter().any(|r| r.left > 1.0 && r.top > 1.0),
        "output should be back in pixel coordinates"
    );
    let scores = parse_kv(&ok(&["eval-mot", "--hyp", "tracks.txt", "--gt", "gt.txt"], dir));
    let mota: f64 = scores["mota"].parse().unwrap();
    assert!(mota > 0.9, "pixel-space tracking should stay accurate, mota = {mota}");
}

#[test]
fn failures_exit_nonzero_with_one_error_line() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cases: Vec<Vec<&str>> = vec![
        vec!["track", "--dets", "missing.txt", "--out", "o.txt"],
        vec!["track", "--dets", "missing.txt", "--out", "o.txt", "--model", "no.bin"],
        vec!["eval-filter", "--data", "missing.txt", "--filter", "bayes"],
        vec!["eval-filter", "--data", "missing.txt", "--filter", "warp"],
        vec!["gen", "--out", "d", "--kind", "mystery"],
        vec!["train-motion", "--arch", "mlp", "--data", "t.txt", "--out", "m.bin"],
    ];
    for args in cases {
        let out = movesort(&args, dir);
        assert!(!out.status.success(), "{args:?} should fail");
        let stderr = String::from_utf8(out.stderr).unwrap();
        assert_eq!(stderr.lines().count(), 1, "{args:?} stderr: {stderr}");
        assert!(stderr.starts_with("error: "), "{args:?} stderr: {stderr}");
    }
}
