//! Filter-level evaluation harness and the robustness sweeps.
//!
//! A filter runs along a single ground-truth trajectory fed by a detection
//! stream with holes: init on the first detection, then one predict per
//! frame followed by update (detection present) or missing (hole). Each
//! frame contributes one prior and one posterior sample scored against the
//! ground-truth box.
//!
//! Frames inside a run of [`EXCLUDE_MISS_RUN`] or more consecutive misses
//! are excluded from the averages; long blind stretches measure the
//! detector, not the filter.

use crate::features::Observation;
use crate::filters::{
    filter_init, filter_missing, filter_predict, filter_update, FilterError, FilterKind,
};
use crate::geom::Box;
use crate::io::synth::{generate, SyntheticSpec};
use crate::io::IoError;
use crate::metrics::filter_accuracy;

/// Threshold of the consecutive-miss exclusion rule.
pub const EXCLUDE_MISS_RUN: usize = 5;

/// Noise sweep grid for [`bench_noise`].
pub const NOISE_GRID: [f64; 7] = [0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3];
/// False-negative sweep grid for [`bench_fn`].
pub const FN_GRID: [f64; 5] = [0.0, 0.2, 0.4, 0.6, 0.8];
/// Noise level held fixed during the false-negative sweep.
pub const FN_SWEEP_SIGMA: f64 = 0.05;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("no samples to evaluate")]
    NoSamples,
}

/// Aligned (prior, posterior, ground truth) box triples from one or more
/// tracks, after exclusion.
#[derive(Debug, Clone, Default)]
pub struct EvalSamples {
    pub priors: Vec<Box>,
    pub posteriors: Vec<Box>,
    pub gts: Vec<Box>,
}

impl EvalSamples {
    pub fn extend(&mut self, other: EvalSamples) {
        self.priors.extend(other.priors);
        self.posteriors.extend(other.posteriors);
        self.gts.extend(other.gts);
    }

    pub fn len(&self) -> usize {
        self.gts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gts.is_empty()
    }
}

/// Mean IoU and MSE of the prior and posterior sequences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSummary {
    pub prior_accuracy: f64,
    pub prior_mse: f64,
    pub posterior_accuracy: f64,
    pub posterior_mse: f64,
    pub n_samples: usize,
}

impl EvalSamples {
    pub fn summarize(&self) -> Result<EvalSummary, EvalError> {
        if self.is_empty() {
            return Err(EvalError::NoSamples);
        }
        let (prior_accuracy, prior_mse) =
            filter_accuracy(&self.priors, &self.gts).expect("aligned lengths");
        let (posterior_accuracy, posterior_mse) =
            filter_accuracy(&self.posteriors, &self.gts).expect("aligned lengths");
        Ok(EvalSummary {
            prior_accuracy,
            prior_mse,
            posterior_accuracy,
            posterior_mse,
            n_samples: self.len(),
        })
    }
}

/// Marks frames belonging to a run of ≥ `threshold` consecutive misses.
fn excluded_mask(dets: &[Option<Box>], threshold: usize) -> Vec<bool> {
    let mut mask = vec![false; dets.len()];
    let mut i = 0;
    while i < dets.len() {
        if dets[i].is_none() {
            let start = i;
            while i < dets.len() && dets[i].is_none() {
                i += 1;
            }
            if i - start >= threshold {
                mask[start..i].iter_mut().for_each(|m| *m = true);
            }
        } else {
            i += 1;
        }
    }
    mask
}

/// Runs one filter along one track. `dets[i]` pairs with `gt[i]`; the filter
/// is initialized on the first present detection and scored on every later
/// frame that survives the exclusion rule.
pub fn eval_filter_on_track(
    kind: &FilterKind,
    gt: &[Observation],
    dets: &[Option<Box>],
    exclude_long_misses: bool,
) -> Result<EvalSamples, EvalError> {
    assert_eq!(gt.len(), dets.len(), "detections align with ground truth");
    let mut samples = EvalSamples::default();
    let Some(first) = dets.iter().position(Option::is_some) else {
        return Ok(samples);
    };
    let excluded = if exclude_long_misses {
        excluded_mask(dets, EXCLUDE_MISS_RUN)
    } else {
        vec![false; dets.len()]
    };

    let mut state = filter_init(kind, gt[first].t, dets[first].as_ref().unwrap());
    for i in first + 1..gt.len() {
        let prior = filter_predict(kind, &mut state, gt[i].t)?;
        let posterior = match &dets[i] {
            Some(det) => filter_update(kind, &mut state, &prior, det)?,
            None => filter_missing(kind, &mut state, &prior)?,
        };
        if !excluded[i] {
            samples.priors.push(prior.mean_box());
            samples.posteriors.push(posterior.mean_box());
            samples.gts.push(gt[i].bbox);
        }
    }
    Ok(samples)
}

/// Evaluates a filter over every track of the given scenes.
pub fn eval_filter_on_scenes(
    kind: &FilterKind,
    scenes: &[crate::io::Scene],
    exclude_long_misses: bool,
) -> Result<EvalSummary, EvalError> {
    let mut samples = EvalSamples::default();
    for scene in scenes {
        for (track, dets) in scene.tracks.iter().zip(&scene.detections) {
            samples.extend(eval_filter_on_track(kind, &track.1, dets, exclude_long_misses)?);
        }
    }
    samples.summarize()
}

/// One filter's accuracies across a sweep grid.
#[derive(Debug, Clone)]
pub struct BenchRow {
    pub filter: String,
    pub prior_accuracy: Vec<f64>,
    pub posterior_accuracy: Vec<f64>,
}

/// Sweep results: `grid[i]` labels the i-th column of every row.
#[derive(Debug, Clone)]
pub struct BenchTable {
    /// Swept quantity: `sigma` or `fn-prob`.
    pub sweep: String,
    pub grid: Vec<f64>,
    pub rows: Vec<BenchRow>,
}

impl BenchTable {
    /// Comma-separated table: `filter,series,<sweep>=v1,...` header, then a
    /// prior and a posterior row per filter.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("filter,series");
        for v in &self.grid {
            out.push_str(&format!(",{}={v}", self.sweep));
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!("{},prior", row.filter));
            for v in &row.prior_accuracy {
                out.push_str(&format!(",{v:.6}"));
            }
            out.push('\n');
            out.push_str(&format!("{},posterior", row.filter));
            for v in &row.posterior_accuracy {
                out.push_str(&format!(",{v:.6}"));
            }
            out.push('\n');
        }
        out
    }
}

fn sweep(
    filters: &[(String, FilterKind)],
    base: &SyntheticSpec,
    n_scenes: usize,
    sweep_name: &str,
    grid: &[f64],
    apply: impl Fn(&mut SyntheticSpec, f64),
) -> Result<BenchTable, EvalError> {
    let mut rows: Vec<BenchRow> = filters
        .iter()
        .map(|(name, _)| BenchRow {
            filter: name.clone(),
            prior_accuracy: Vec::with_capacity(grid.len()),
            posterior_accuracy: Vec::with_capacity(grid.len()),
        })
        .collect();
    for &value in grid {
        let scenes: Vec<crate::io::Scene> = (0..n_scenes)
            .map(|i| {
                let mut spec = *base;
                spec.seed = base.seed.wrapping_add(i as u64);
                apply(&mut spec, value);
                generate(&spec)
            })
            .collect::<Result<_, _>>()?;
        for ((_, kind), row) in filters.iter().zip(&mut rows) {
            let summary = eval_filter_on_scenes(kind, &scenes, true)?;
            row.prior_accuracy.push(summary.prior_accuracy);
            row.posterior_accuracy.push(summary.posterior_accuracy);
        }
    }
    Ok(BenchTable { sweep: sweep_name.to_string(), grid: grid.to_vec(), rows })
}

/// Detector-noise robustness sweep over σ ∈ {0, 0.05, …, 0.3}.
pub fn bench_noise(
    filters: &[(String, FilterKind)],
    base: &SyntheticSpec,
    n_scenes: usize,
) -> Result<BenchTable, EvalError> {
    sweep(filters, base, n_scenes, "sigma", &NOISE_GRID, |spec, v| spec.noise_sigma = v)
}

/// False-negative robustness sweep over fn ∈ {0, 0.2, …, 0.8} at σ = 0.05.
pub fn bench_fn(
    filters: &[(String, FilterKind)],
    base: &SyntheticSpec,
    n_scenes: usize,
) -> Result<BenchTable, EvalError> {
    sweep(filters, base, n_scenes, "fn-prob", &FN_GRID, |spec, v| {
        spec.noise_sigma = FN_SWEEP_SIGMA;
        spec.fn_prob = v;
    })
}
