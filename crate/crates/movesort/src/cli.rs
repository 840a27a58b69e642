//! Command-line surface: scene generation, model training, filter and
//! tracker evaluation, and the robustness sweeps.
//!
//! Every value can come from a `--config` TOML file (see [`crate::io::config`]
//! for the grammar); command-line flags override config values, which
//! override built-in defaults. Every run that writes files also writes a
//! `<out>.manifest.toml` recording the command, resolved seed, effective
//! configuration and SHA-256 hashes of model files, so runs are reproducible
//! from their manifests.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::assoc::CostMode;
use crate::eval::{self, eval_filter_on_track, EvalSamples};
use crate::features::FeatureMode;
use crate::filters::{train_e2e, E2eArch, FilterKind};
use crate::io::config::{
    FilterSection, GenSection, Manifest, RunConfig, TrackerSection, TrainSection,
};
use crate::io::model::{load_model, save_model, ModelFile};
use crate::io::mot::{
    annotations_from_rows, denormalize_rows, detections_by_frame, normalize_rows,
    output_from_rows, read_mot, rows_from_output, write_mot,
};
use crate::io::synth::{corrupt, generate, SceneKind, SyntheticSpec};
use crate::io::{dataset, read_trajectories, write_trajectories};
use crate::metrics::{mot_metrics, MotSummary};
use crate::motion::{train as train_motion, MotionArch, TrainConfig};
use crate::tracker::{postprocess_rows, Tracker, TrackerConfig};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

type CliResult = Result<(), String>;

#[derive(Parser)]
#[command(
    name = "movesort",
    version,
    about = "Tracking-by-detection with learnable probabilistic motion filters"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic scenes (ground truth, detections, trajectories)
    Gen(GenArgs),
    /// Train a probabilistic motion model (ar-rnn, rnn-cnp, rnn-ode)
    TrainMotion(TrainMotionArgs),
    /// Train an end-to-end filter (rnn-e2e, node-e2e)
    TrainE2e(TrainE2eArgs),
    /// Evaluate a filter's prior/posterior accuracy on trajectories
    EvalFilter(EvalFilterArgs),
    /// Sweep detector noise σ over {0, 0.05, …, 0.3}
    BenchNoise(BenchArgs),
    /// Sweep false-negative probability over {0, 0.2, …, 0.8} at σ = 0.05
    BenchFn(BenchArgs),
    /// Run the tracker over a detection file and write MOT rows
    Track(TrackArgs),
    /// Score a tracking output against ground truth (MOTA, IDF1, IDSW)
    EvalMot(EvalMotArgs),
    /// Post-process a MOT track file (interpolate gaps, drop short tracks)
    Postprocess(PostprocessArgs),
}

/// Entry point used by the `movesort` binary.
pub fn main() -> std::process::ExitCode {
    match run(Cli::parse()) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            std::process::ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Gen(args) => run_gen(args),
        Command::TrainMotion(args) => run_train_motion(args),
        Command::TrainE2e(args) => run_train_e2e(args),
        Command::EvalFilter(args) => run_eval_filter(args),
        Command::BenchNoise(args) => run_bench(args, Sweep::Noise),
        Command::BenchFn(args) => run_bench(args, Sweep::FalseNegatives),
        Command::Track(args) => run_track(args),
        Command::EvalMot(args) => run_eval_mot(args),
        Command::Postprocess(args) => run_postprocess(args),
    }
}

fn fail(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig, String> {
    match path {
        Some(p) => RunConfig::read(p).map_err(fail),
        None => Ok(RunConfig::default()),
    }
}

fn pick<T: Clone>(flag: &Option<T>, cfg: Option<&T>, default: T) -> T {
    flag.clone().or_else(|| cfg.cloned()).unwrap_or(default)
}

// ---------------------------------------------------------------- gen ----

#[derive(Args)]
struct GenArgs {
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// constant-velocity | sinusoidal | crossing-pair | random-walk-turns
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    objects: Option<usize>,
    #[arg(long)]
    frames: Option<usize>,
    /// Number of independent scenes (seeds seed, seed+1, …)
    #[arg(long)]
    scenes: Option<usize>,
    #[arg(long)]
    speed: Option<f64>,
    #[arg(long)]
    amplitude: Option<f64>,
    #[arg(long)]
    period: Option<f64>,
    #[arg(long)]
    cross_frame: Option<i64>,
    /// Detector noise σ
    #[arg(long)]
    sigma: Option<f64>,
    /// False-negative probability
    #[arg(long)]
    fn_prob: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

fn resolve_spec(
    gen: &GenSection,
    seed: u64,
) -> Result<(SyntheticSpec, usize), String> {
    let kind_name = gen.kind.clone().unwrap_or_else(|| "constant-velocity".to_string());
    let Some(kind) = SceneKind::from_name(&kind_name) else {
        return Err(format!("unknown scene kind '{kind_name}'"));
    };
    let mut spec = SyntheticSpec::new(kind);
    if let Some(v) = gen.objects {
        spec.n_objects = v;
    }
    if let Some(v) = gen.frames {
        spec.n_frames = v;
    }
    if let Some(v) = gen.speed {
        spec.speed = v;
    }
    if let Some(v) = gen.amplitude {
        spec.amplitude = v;
    }
    if let Some(v) = gen.period {
        spec.period = v;
    }
    if let Some(v) = gen.cross_frame {
        spec.cross_frame = v;
    }
    if let Some(v) = gen.sigma {
        spec.noise_sigma = v;
    }
    if let Some(v) = gen.fn_prob {
        spec.fn_prob = v;
    }
    spec.seed = seed;
    spec.validate().map_err(fail)?;
    Ok((spec, gen.scenes.unwrap_or(1)))
}

fn merge_gen_section(args: &GenArgs, cfg: &RunConfig) -> GenSection {
    let base = cfg.gen.clone().unwrap_or_default();
    GenSection {
        kind: args.kind.clone().or(base.kind),
        objects: args.objects.or(base.objects),
        frames: args.frames.or(base.frames),
        speed: args.speed.or(base.speed),
        amplitude: args.amplitude.or(base.amplitude),
        period: args.period.or(base.period),
        cross_frame: args.cross_frame.or(base.cross_frame),
        sigma: args.sigma.or(base.sigma),
        fn_prob: args.fn_prob.or(base.fn_prob),
        scenes: args.scenes.or(base.scenes),
    }
}

fn run_gen(args: GenArgs) -> CliResult {
    let cfg = load_config(&args.config)?;
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let gen = merge_gen_section(&args, &cfg);
    let (base_spec, n_scenes) = resolve_spec(&gen, seed)?;
    if n_scenes == 0 {
        return Err("scenes must be positive".to_string());
    }
    std::fs::create_dir_all(&args.out).map_err(|e| format!("{}: {e}", args.out.display()))?;

    let mut all_tracks = Vec::new();
    let mut id_offset = 0u64;
    for i in 0..n_scenes {
        let mut spec = base_spec;
        spec.seed = seed.wrapping_add(i as u64);
        let scene = generate(&spec).map_err(fail)?;
        let (gt_name, det_name) = if n_scenes == 1 {
            ("gt.txt".to_string(), "dets.txt".to_string())
        } else {
            (format!("gt_{i:03}.txt"), format!("dets_{i:03}.txt"))
        };
        write_mot(args.out.join(gt_name), &scene.gt_mot_rows()).map_err(fail)?;
        write_mot(args.out.join(det_name), &scene.detection_mot_rows()).map_err(fail)?;
        let top_id = scene.tracks.iter().map(|(id, _)| *id).max().unwrap_or(0);
        all_tracks
            .extend(scene.tracks.into_iter().map(|(id, obs)| (id + id_offset, obs)));
        id_offset += top_id;
    }
    let traj_path = args.out.join("trajectories.txt");
    write_trajectories(&traj_path, &all_tracks).map_err(fail)?;

    let snapshot = RunConfig { seed: Some(seed), gen: Some(gen), ..Default::default() };
    Manifest::new("gen", seed, snapshot).write_for(&traj_path).map_err(fail)?;
    println!(
        "wrote {n_scenes} scene(s), {} trajectories to {}",
        all_tracks.len(),
        args.out.display()
    );
    Ok(())
}

// -------------------------------------------------------------- train ----

#[derive(Args)]
struct TrainFlags {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    drop_prob: Option<f64>,
    #[arg(long)]
    shorten_prob: Option<f64>,
    /// History window length in frames
    #[arg(long)]
    history: Option<usize>,
    /// Hidden/latent width
    #[arg(long)]
    hidden: Option<usize>,
    /// Longest training horizon in frames
    #[arg(long)]
    horizon: Option<usize>,
    /// Feature mode: absolute | sfod | rloc
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    standardize: Option<bool>,
    /// Disable all training augmentations
    #[arg(long)]
    no_augment: bool,
    /// Use the boosted noise schedule (default for train-e2e)
    #[arg(long)]
    boosted_noise: bool,
    #[arg(long)]
    seed: Option<u64>,
}

fn resolve_train(
    flags: &TrainFlags,
    cfg: &RunConfig,
    boosted_default: bool,
) -> Result<(TrainConfig, u64, TrainSection), String> {
    let section = cfg.train.clone().unwrap_or_default();
    let seed = flags.seed.or(cfg.seed).unwrap_or(0);
    let mut tc = TrainConfig::new(seed);
    tc.epochs = pick(&flags.epochs, section.epochs.as_ref(), tc.epochs);
    tc.lr = pick(&flags.lr, section.lr.as_ref(), tc.lr);
    tc.weight_decay = pick(&flags.weight_decay, section.weight_decay.as_ref(), tc.weight_decay);
    tc.batch_size = pick(&flags.batch_size, section.batch_size.as_ref(), tc.batch_size);
    tc.drop_prob = pick(&flags.drop_prob, section.drop_prob.as_ref(), tc.drop_prob);
    tc.shorten_prob = pick(&flags.shorten_prob, section.shorten_prob.as_ref(), tc.shorten_prob);
    tc.history_len = pick(&flags.history, section.history.as_ref(), tc.history_len);
    tc.hidden_dim = pick(&flags.hidden, section.hidden.as_ref(), tc.hidden_dim);
    tc.horizon_max = pick(&flags.horizon, section.horizon.as_ref(), tc.horizon_max);
    tc.standardize = pick(&flags.standardize, section.standardize.as_ref(), tc.standardize);
    let mode_name = pick(&flags.mode, section.mode.as_ref(), "rloc".to_string());
    tc.mode = FeatureMode::from_name(&mode_name)
        .ok_or_else(|| format!("unknown feature mode '{mode_name}'"))?;
    if boosted_default || flags.boosted_noise {
        tc = tc.with_boosted_noise();
    }
    if flags.no_augment {
        tc = tc.without_augmentation();
    }
    let effective = TrainSection {
        epochs: Some(tc.epochs),
        lr: Some(tc.lr),
        weight_decay: Some(tc.weight_decay),
        batch_size: Some(tc.batch_size),
        drop_prob: Some(tc.drop_prob),
        shorten_prob: Some(tc.shorten_prob),
        history: Some(tc.history_len),
        hidden: Some(tc.hidden_dim),
        horizon: Some(tc.horizon_max),
        mode: Some(tc.mode.name().to_string()),
        standardize: Some(tc.standardize),
    };
    Ok((tc, seed, effective))
}

fn finish_training(
    command: &str,
    out: &Path,
    model: ModelFile,
    final_loss: f64,
    seed: u64,
    effective: TrainSection,
) -> CliResult {
    save_model(out, &model).map_err(fail)?;
    let snapshot =
        RunConfig { seed: Some(seed), train: Some(effective), ..Default::default() };
    let mut manifest = Manifest::new(command, seed, snapshot);
    manifest.add_file_hash(out).map_err(fail)?;
    manifest.write_for(out).map_err(fail)?;
    println!("trained {}: final loss {final_loss:.6} -> {}", model.kind_name(), out.display());
    Ok(())
}

#[derive(Args)]
struct TrainMotionArgs {
    /// ar-rnn | rnn-cnp | rnn-ode
    #[arg(long)]
    arch: String,
    /// Trajectory dataset file
    #[arg(long)]
    data: PathBuf,
    /// Output model file
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    flags: TrainFlags,
}

fn run_train_motion(args: TrainMotionArgs) -> CliResult {
    let Some(arch) = MotionArch::from_name(&args.arch) else {
        return Err(format!("unknown motion architecture '{}'", args.arch));
    };
    let cfg = load_config(&args.flags.config)?;
    let (tc, seed, effective) = resolve_train(&args.flags, &cfg, false)?;
    let tracks = read_trajectories(&args.data).map_err(fail)?;
    let dataset = dataset::observation_sets(&tracks);
    let (model, _) = train_motion(arch, &dataset, &tc).map_err(fail)?;
    let loss = model.final_loss;
    finish_training("train-motion", &args.out, ModelFile::Motion(model), loss, seed, effective)
}

#[derive(Args)]
struct TrainE2eArgs {
    /// rnn-e2e | node-e2e
    #[arg(long)]
    arch: String,
    /// Trajectory dataset file
    #[arg(long)]
    data: PathBuf,
    /// Output model file
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    flags: TrainFlags,
}

fn run_train_e2e(args: TrainE2eArgs) -> CliResult {
    let Some(arch) = E2eArch::from_name(&args.arch) else {
        return Err(format!("unknown end-to-end architecture '{}'", args.arch));
    };
    let cfg = load_config(&args.flags.config)?;
    // end-to-end filters default to the boosted noise schedule
    let (tc, seed, effective) = resolve_train(&args.flags, &cfg, !args.flags.no_augment)?;
    let tracks = read_trajectories(&args.data).map_err(fail)?;
    let dataset = dataset::observation_sets(&tracks);
    let (model, _) = train_e2e(arch, &dataset, &tc).map_err(fail)?;
    let loss = model.final_loss;
    finish_training("train-e2e", &args.out, ModelFile::E2e(model), loss, seed, effective)
}

// ------------------------------------------------------------- filter ----

/// Builds a [`FilterKind`] from a kind name, optional model path and σ_m.
fn resolve_filter(
    kind: Option<&str>,
    model_path: Option<&Path>,
    sigma_m: f64,
) -> Result<(String, FilterKind), String> {
    let model = match model_path {
        Some(p) => Some(load_model(p).map_err(fail)?),
        None => None,
    };
    let kind = match kind {
        Some(k) => k.to_string(),
        None => match &model {
            None => "kalman".to_string(),
            Some(ModelFile::Motion(_)) => "bayes".to_string(),
            Some(ModelFile::E2e(_)) => "e2e".to_string(),
        },
    };
    match (kind.as_str(), model) {
        ("kalman", None) => Ok(("kalman".to_string(), FilterKind::kalman())),
        ("kalman", Some(_)) => Err("kalman takes no model file".to_string()),
        ("bayes", Some(ModelFile::Motion(m))) => {
            let label = format!("bayes:{}", m.arch.name());
            Ok((label, FilterKind::bayes(m, sigma_m).map_err(fail)?))
        }
        ("bayes", Some(ModelFile::E2e(_))) => {
            Err("bayes needs a motion model, got an end-to-end model".to_string())
        }
        ("e2e", Some(ModelFile::E2e(m))) => {
            let label = format!("e2e:{}", m.arch.name());
            Ok((label, FilterKind::e2e(m)))
        }
        ("e2e", Some(ModelFile::Motion(_))) => {
            Err("e2e needs an end-to-end model, got a motion model".to_string())
        }
        ("bayes" | "e2e", None) => Err(format!("filter '{kind}' needs --model")),
        (other, _) => Err(format!("unknown filter '{other}' (kalman | bayes | e2e)")),
    }
}

#[derive(Args)]
struct EvalFilterArgs {
    /// Ground-truth trajectory dataset
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// kalman | bayes | e2e (inferred from --model when omitted)
    #[arg(long)]
    filter: Option<String>,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Measurement noise scale of the Bayes filter
    #[arg(long)]
    sigma_m: Option<f64>,
    /// Detector noise σ applied to the data
    #[arg(long)]
    det_sigma: Option<f64>,
    /// Detector false-negative probability applied to the data
    #[arg(long)]
    det_fn: Option<f64>,
    /// Keep frames inside ≥5-frame miss runs in the averages
    #[arg(long)]
    include_long_misses: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Results file (metric,value per line)
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run_eval_filter(args: EvalFilterArgs) -> CliResult {
    let cfg = load_config(&args.config)?;
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let fsec = cfg.filter.clone().unwrap_or_default();
    let sigma_m = pick(&args.sigma_m, fsec.sigma_m.as_ref(), 0.05);
    let model_path = args.model.clone().or(fsec.model.as_ref().map(PathBuf::from));
    let kind_name = args.filter.clone().or(fsec.kind.clone());
    let (label, kind) =
        resolve_filter(kind_name.as_deref(), model_path.as_deref(), sigma_m)?;

    let tracks = read_trajectories(&args.data).map_err(fail)?;
    let gt = dataset::observation_sets(&tracks);
    let det_sigma = args.det_sigma.unwrap_or(0.0);
    let det_fn = args.det_fn.unwrap_or(0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dets = corrupt(&gt, det_sigma, det_fn, &mut rng);

    let mut samples = EvalSamples::default();
    for (track, track_dets) in gt.iter().zip(&dets) {
        samples.extend(
            eval_filter_on_track(&kind, track, track_dets, !args.include_long_misses)
                .map_err(fail)?,
        );
    }
    let summary = samples.summarize().map_err(fail)?;

    let mut lines = String::new();
    lines.push_str(&format!("filter,{label}\n"));
    lines.push_str(&format!("prior-accuracy,{}\n", summary.prior_accuracy));
    lines.push_str(&format!("prior-mse,{}\n", summary.prior_mse));
    lines.push_str(&format!("posterior-accuracy,{}\n", summary.posterior_accuracy));
    lines.push_str(&format!("posterior-mse,{}\n", summary.posterior_mse));
    lines.push_str(&format!("samples,{}\n", summary.n_samples));
    print!("{lines}");
    if let Some(out) = &args.out {
        std::fs::write(out, &lines).map_err(|e| format!("{}: {e}", out.display()))?;
        let snapshot = RunConfig {
            seed: Some(seed),
            filter: Some(FilterSection {
                kind: Some(label),
                model: model_path.as_ref().map(|p| p.display().to_string()),
                sigma_m: Some(sigma_m),
            }),
            ..Default::default()
        };
        let mut manifest = Manifest::new("eval-filter", seed, snapshot);
        if let Some(p) = &model_path {
            manifest.add_file_hash(p).map_err(fail)?;
        }
        manifest.write_for(out).map_err(fail)?;
    }
    Ok(())
}

// -------------------------------------------------------------- bench ----

enum Sweep {
    Noise,
    FalseNegatives,
}

#[derive(Args)]
struct BenchArgs {
    /// Output CSV table
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scene kind to sweep on
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    scenes: Option<usize>,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    objects: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Exclude the Kalman baseline row
    #[arg(long)]
    no_kalman: bool,
    /// Motion model files to evaluate as Bayes filters
    #[arg(long)]
    bayes: Vec<PathBuf>,
    /// End-to-end model files to evaluate
    #[arg(long)]
    e2e: Vec<PathBuf>,
    /// Measurement noise scale of the Bayes filters
    #[arg(long)]
    sigma_m: Option<f64>,
}

fn run_bench(args: BenchArgs, sweep: Sweep) -> CliResult {
    let cfg = load_config(&args.config)?;
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let mut gen = cfg.gen.clone().unwrap_or_default();
    gen.kind = args.kind.clone().or(gen.kind).or(Some("sinusoidal".to_string()));
    gen.frames = args.frames.or(gen.frames);
    gen.objects = args.objects.or(gen.objects);
    gen.scenes = args.scenes.or(gen.scenes).or(Some(20));
    let (spec, n_scenes) = resolve_spec(&gen, seed)?;
    let sigma_m = pick(&args.sigma_m, None, 0.05);

    let mut filters: Vec<(String, FilterKind)> = Vec::new();
    if !args.no_kalman {
        filters.push(("kalman".to_string(), FilterKind::kalman()));
    }
    let mut model_paths = Vec::new();
    for path in &args.bayes {
        filters.push(resolve_filter(Some("bayes"), Some(path), sigma_m)?);
        model_paths.push(path.clone());
    }
    for path in &args.e2e {
        filters.push(resolve_filter(Some("e2e"), Some(path), sigma_m)?);
        model_paths.push(path.clone());
    }
    if filters.is_empty() {
        return Err("no filters selected".to_string());
    }

    let (command, table) = match sweep {
        Sweep::Noise => {
            ("bench-noise", eval::bench_noise(&filters, &spec, n_scenes).map_err(fail)?)
        }
        Sweep::FalseNegatives => {
            ("bench-fn", eval::bench_fn(&filters, &spec, n_scenes).map_err(fail)?)
        }
    };
    let csv = table.to_csv();
    std::fs::write(&args.out, &csv).map_err(|e| format!("{}: {e}", args.out.display()))?;
    print!("{csv}");

    let snapshot = RunConfig { seed: Some(seed), gen: Some(gen), ..Default::default() };
    let mut manifest = Manifest::new(command, seed, snapshot);
    for p in &model_paths {
        manifest.add_file_hash(p).map_err(fail)?;
    }
    manifest.write_for(&args.out).map_err(fail)?;
    Ok(())
}

// -------------------------------------------------------------- track ----

#[derive(Args)]
struct TrackArgs {
    /// Detection file (MOT rows, id ignored)
    #[arg(long)]
    dets: PathBuf,
    /// Output MOT track file
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// kalman | bayes | e2e (inferred from --model when omitted)
    #[arg(long)]
    filter: Option<String>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    sigma_m: Option<f64>,
    #[arg(long)]
    t_lost: Option<u32>,
    #[arg(long)]
    init_hits: Option<u32>,
    #[arg(long)]
    iou_min: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Association cost: hybrid | iou
    #[arg(long)]
    assoc: Option<String>,
    #[arg(long)]
    interp_max_gap: Option<i64>,
    #[arg(long)]
    min_track_len: Option<usize>,
    /// Write raw per-frame emissions instead of post-processed tracks
    #[arg(long)]
    raw: bool,
    #[arg(long)]
    seed: Option<u64>,
}

fn resolve_tracker(
    args: &TrackArgs,
    cfg: &RunConfig,
    filter: FilterKind,
) -> Result<(TrackerConfig, TrackerSection), String> {
    let section = cfg.tracker.clone().unwrap_or_default();
    let mut tc = TrackerConfig::new(filter);
    tc.t_lost = pick(&args.t_lost, section.t_lost.as_ref(), tc.t_lost);
    tc.init_hits = pick(&args.init_hits, section.init_hits.as_ref(), tc.init_hits);
    tc.iou_min = pick(&args.iou_min, section.iou_min.as_ref(), tc.iou_min);
    tc.lambda = pick(&args.lambda, section.lambda.as_ref(), tc.lambda);
    tc.interp_max_gap =
        pick(&args.interp_max_gap, section.interp_max_gap.as_ref(), tc.interp_max_gap);
    tc.min_track_len =
        pick(&args.min_track_len, section.min_track_len.as_ref(), tc.min_track_len);
    let assoc = pick(&args.assoc, section.assoc.as_ref(), "hybrid".to_string());
    tc.cost_mode = CostMode::from_name(&assoc)
        .ok_or_else(|| format!("unknown association cost '{assoc}' (hybrid | iou)"))?;
    let effective = TrackerSection {
        t_lost: Some(tc.t_lost),
        init_hits: Some(tc.init_hits),
        iou_min: Some(tc.iou_min),
        lambda: Some(tc.lambda),
        assoc: Some(assoc),
        interp_max_gap: Some(tc.interp_max_gap),
        min_track_len: Some(tc.min_track_len),
    };
    Ok((tc, effective))
}

fn run_track(args: TrackArgs) -> CliResult {
    let cfg = load_config(&args.config)?;
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let fsec = cfg.filter.clone().unwrap_or_default();
    let sigma_m = pick(&args.sigma_m, fsec.sigma_m.as_ref(), 0.05);
    let model_path = args.model.clone().or(fsec.model.as_ref().map(PathBuf::from));
    let kind_name = args.filter.clone().or(fsec.kind.clone());
    let (label, kind) =
        resolve_filter(kind_name.as_deref(), model_path.as_deref(), sigma_m)?;
    let (tracker_cfg, tracker_section) = resolve_tracker(&args, &cfg, kind)?;

    let mut det_rows = read_mot(&args.dets).map_err(fail)?;
    if let Some(image) = &cfg.image {
        normalize_rows(&mut det_rows, image.width, image.height);
    }
    let frames = detections_by_frame(&det_rows);
    let mut tracker = Tracker::new(tracker_cfg).map_err(fail)?;
    let mut raw_rows = Vec::new();
    if let (Some(&first), Some(&last)) = (frames.keys().next(), frames.keys().last()) {
        let empty = Vec::new();
        for frame in first..=last {
            let dets = frames.get(&frame).unwrap_or(&empty);
            for (id, bbox, _) in tracker.step(frame, dets).map_err(fail)? {
                raw_rows.push(crate::tracker::OutputRow { id, frame, bbox });
            }
        }
    }
    let out_rows = if args.raw { raw_rows } else { tracker.postprocess() };
    let mut mot_rows = rows_from_output(&out_rows);
    if let Some(image) = &cfg.image {
        denormalize_rows(&mut mot_rows, image.width, image.height);
    }
    write_mot(&args.out, &mot_rows).map_err(fail)?;

    let snapshot = RunConfig {
        seed: Some(seed),
        tracker: Some(tracker_section),
        filter: Some(FilterSection {
            kind: Some(label.clone()),
            model: model_path.as_ref().map(|p| p.display().to_string()),
            sigma_m: Some(sigma_m),
        }),
        image: cfg.image.clone(),
        ..Default::default()
    };
    let mut manifest = Manifest::new("track", seed, snapshot);
    if let Some(p) = &model_path {
        manifest.add_file_hash(p).map_err(fail)?;
    }
    manifest.write_for(&args.out).map_err(fail)?;
    println!("tracked {} frames with {label}: {} rows -> {}", frames.len(), mot_rows.len(),
        args.out.display());
    Ok(())
}

// ----------------------------------------------------------- eval-mot ----

#[derive(Args)]
struct EvalMotArgs {
    /// Hypothesis MOT file (tracker output)
    #[arg(long)]
    hyp: PathBuf,
    /// Ground-truth MOT file
    #[arg(long)]
    gt: PathBuf,
    /// Results file (metric,value per line)
    #[arg(long)]
    out: Option<PathBuf>,
}

fn summary_lines(m: &MotSummary) -> String {
    let mut lines = String::new();
    lines.push_str(&format!("mota,{}\n", m.mota));
    lines.push_str(&format!("idf1,{}\n", m.idf1));
    lines.push_str(&format!("idsw,{}\n", m.idsw));
    lines.push_str(&format!("fp,{}\n", m.fp));
    lines.push_str(&format!("fn,{}\n", m.fn_count));
    lines.push_str(&format!("idtp,{}\n", m.idtp));
    lines.push_str(&format!("gt-boxes,{}\n", m.gt_total));
    lines.push_str(&format!("hyp-boxes,{}\n", m.hyp_total));
    lines
}

fn run_eval_mot(args: EvalMotArgs) -> CliResult {
    let hyp_rows = read_mot(&args.hyp).map_err(fail)?;
    let hyp = output_from_rows(&hyp_rows, &args.hyp.display().to_string()).map_err(fail)?;
    let gt_rows = read_mot(&args.gt).map_err(fail)?;
    let gt = annotations_from_rows(&gt_rows, &args.gt.display().to_string()).map_err(fail)?;
    let summary = mot_metrics(&hyp, &gt);
    let lines = summary_lines(&summary);
    print!("{lines}");
    if let Some(out) = &args.out {
        std::fs::write(out, &lines).map_err(|e| format!("{}: {e}", out.display()))?;
        Manifest::new("eval-mot", 0, RunConfig::default()).write_for(out).map_err(fail)?;
    }
    Ok(())
}

// -------------------------------------------------------- postprocess ----

#[derive(Args)]
struct PostprocessArgs {
    /// Input MOT track file
    #[arg(long)]
    input: PathBuf,
    /// Output MOT track file
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    min_track_len: Option<usize>,
    #[arg(long)]
    interp_max_gap: Option<i64>,
}

fn run_postprocess(args: PostprocessArgs) -> CliResult {
    let cfg = load_config(&args.config)?;
    let section = cfg.tracker.clone().unwrap_or_default();
    let min_len = pick(&args.min_track_len, section.min_track_len.as_ref(), 20);
    let max_gap = pick(&args.interp_max_gap, section.interp_max_gap.as_ref(), 5);
    let rows = read_mot(&args.input).map_err(fail)?;
    let tracks = output_from_rows(&rows, &args.input.display().to_string()).map_err(fail)?;
    let cleaned = postprocess_rows(&tracks, min_len, max_gap);
    write_mot(&args.out, &rows_from_output(&cleaned)).map_err(fail)?;
    let snapshot = RunConfig {
        tracker: Some(TrackerSection {
            min_track_len: Some(min_len),
            interp_max_gap: Some(max_gap),
            ..Default::default()
        }),
        ..Default::default()
    };
    Manifest::new("postprocess", 0, snapshot).write_for(&args.out).map_err(fail)?;
    println!("{} rows in, {} rows out -> {}", rows.len(), cleaned.len(), args.out.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(line: &str) -> Cli {
        Cli::try_parse_from(line.split_whitespace()).expect(line)
    }

    #[test]
    fn all_nine_subcommands_parse() {
        parse("movesort gen --out d --kind sinusoidal --scenes 3 --sigma 0.1");
        parse("movesort train-motion --arch ar-rnn --data t.txt --out m.bin --epochs 2");
        parse("movesort train-e2e --arch rnn-e2e --data t.txt --out m.bin --no-augment");
        parse("movesort eval-filter --data t.txt --filter kalman --det-sigma 0.1");
        parse("movesort bench-noise --out t.csv --scenes 5 --bayes a.bin --e2e b.bin");
        parse("movesort bench-fn --out t.csv --no-kalman --bayes a.bin");
        parse("movesort track --dets d.txt --out o.txt --filter kalman --assoc iou");
        parse("movesort eval-mot --hyp o.txt --gt g.txt");
        parse("movesort postprocess --input o.txt --out p.txt --min-track-len 10");
    }

    #[test]
    fn unknown_flags_are_rejected() {
        assert!(Cli::try_parse_from("movesort gen --out d --bogus 1".split_whitespace())
            .is_err());
        assert!(Cli::try_parse_from("movesort nonsense".split_whitespace()).is_err());
    }

    #[test]
    fn filter_resolution_validates_combinations() {
        assert!(resolve_filter(Some("kalman"), None, 0.05).is_ok());
        assert!(resolve_filter(Some("bayes"), None, 0.05).is_err());
        assert!(resolve_filter(Some("e2e"), None, 0.05).is_err());
        assert!(resolve_filter(Some("warp"), None, 0.05).is_err());
        let err = resolve_filter(None, Some(Path::new("/nonexistent/m.bin")), 0.05)
            .unwrap_err();
        assert!(err.contains("m.bin"), "missing model file names the path: {err}");
    }
}
