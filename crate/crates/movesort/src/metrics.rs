//! Filter-level accuracy (mean IoU, MSE) and tracker-level CLEAR/ID metrics
//! (MOTA, IDF1, ID switches).
//!
//! Per-frame hypothesis↔ground-truth matching runs the same Hungarian solver
//! as the tracker on −IoU costs with a fixed 0.5 gate (the MOTChallenge
//! convention). An ID switch is counted when a ground-truth object is matched
//! to a hypothesis id that differs from the last id it was matched to. IDF1
//! uses a global bipartite matching of ground-truth tracks to hypothesis
//! tracks maximizing the number of overlapping frames.

use std::collections::BTreeMap;

use ndarray::Array2;

use crate::assoc::{solve_assignment, CostMatrix};
use crate::geom::{iou, Box};
use crate::tracker::OutputRow;

/// Matching gate for the MOT metrics; fixed to keep numbers comparable.
pub const MOT_IOU_GATE: f64 = 0.5;

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("prediction and ground-truth lengths differ ({predictions} vs {gts})")]
    LengthMismatch { predictions: usize, gts: usize },
    #[error("empty input")]
    Empty,
    #[error("duplicate ground-truth id {id} in frame {frame}")]
    DuplicateId { frame: i64, id: u64 },
}

/// Ground-truth boxes grouped by frame; ids are unique within a frame.
#[derive(Debug, Clone, Default)]
pub struct FrameAnnotations {
    frames: BTreeMap<i64, Vec<(u64, Box)>>,
}

impl FrameAnnotations {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, frame: i64, id: u64, bbox: Box) -> Result<(), MetricsError> {
        let entries = self.frames.entry(frame).or_default();
        if entries.iter().any(|&(existing, _)| existing == id) {
            return Err(MetricsError::DuplicateId { frame, id });
        }
        entries.push((id, bbox));
        Ok(())
    }

    pub fn from_rows(rows: &[OutputRow]) -> Result<Self, MetricsError> {
        let mut ann = Self::new();
        for row in rows {
            ann.insert(row.frame, row.id, row.bbox)?;
        }
        Ok(ann)
    }

    pub fn frames(&self) -> impl Iterator<Item = (i64, &[(u64, Box)])> {
        self.frames.iter().map(|(&f, v)| (f, v.as_slice()))
    }

    pub fn n_boxes(&self) -> usize {
        self.frames.values().map(Vec::len).sum()
    }
}

/// Mean IoU and mean squared coordinate error of aligned box sequences.
pub fn filter_accuracy(predictions: &[Box], gts: &[Box]) -> Result<(f64, f64), MetricsError> {
    if predictions.len() != gts.len() {
        return Err(MetricsError::LengthMismatch {
            predictions: predictions.len(),
            gts: gts.len(),
        });
    }
    if predictions.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut iou_sum = 0.0;
    let mut sq_sum = 0.0;
    for (p, g) in predictions.iter().zip(gts) {
        iou_sum += iou(p, g);
        for (a, b) in p.ltwh().iter().zip(g.ltwh()) {
            sq_sum += (a - b) * (a - b);
        }
    }
    let n = predictions.len() as f64;
    Ok((iou_sum / n, sq_sum / (4.0 * n)))
}

/// Tracker-level evaluation summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotSummary {
    pub mota: f64,
    pub idf1: f64,
    pub idsw: usize,
    pub fp: usize,
    pub fn_count: usize,
    pub idtp: usize,
    pub gt_total: usize,
    pub hyp_total: usize,
}

fn group_rows(rows: &[OutputRow]) -> BTreeMap<i64, Vec<(u64, Box)>> {
    let mut frames: BTreeMap<i64, Vec<(u64, Box)>> = BTreeMap::new();
    for row in rows {
        frames.entry(row.frame).or_default().push((row.id, row.bbox));
    }
    frames
}

fn match_boxes(gts: &[(u64, Box)], hyps: &[(u64, Box)]) -> Vec<(usize, usize)> {
    let mut costs = Array2::zeros((gts.len(), hyps.len()));
    let mut gate = Array2::from_elem((gts.len(), hyps.len()), false);
    for (i, &(_, g)) in gts.iter().enumerate() {
        for (j, &(_, h)) in hyps.iter().enumerate() {
            let overlap = iou(&g, &h);
            costs[(i, j)] = -overlap;
            gate[(i, j)] = overlap >= MOT_IOU_GATE;
        }
    }
    solve_assignment(&CostMatrix::new(costs, gate)).matches
}

/// MOTA, IDF1 and ID switches of a hypothesis row set against ground truth.
pub fn mot_metrics(hypotheses: &[OutputRow], gts: &FrameAnnotations) -> MotSummary {
    let hyp_frames = group_rows(hypotheses);
    let gt_total = gts.n_boxes();
    let hyp_total = hypotheses.len();

    let mut frames: Vec<i64> = gts.frames().map(|(f, _)| f).collect();
    frames.extend(hyp_frames.keys());
    frames.sort_unstable();
    frames.dedup();

    let empty: Vec<(u64, Box)> = Vec::new();
    let mut fp = 0;
    let mut fn_count = 0;
    let mut idsw = 0;
    let mut last_hyp: BTreeMap<u64, u64> = BTreeMap::new();
    // per (gt id, hyp id): number of frames where both boxes pass the gate
    let mut pair_overlap: BTreeMap<(u64, u64), usize> = BTreeMap::new();

    for frame in frames {
        let gt_boxes = gts
            .frames()
            .find(|&(f, _)| f == frame)
            .map(|(_, v)| v)
            .unwrap_or(&empty);
        let hyp_boxes = hyp_frames.get(&frame).map(Vec::as_slice).unwrap_or(&empty);

        for &(gid, g) in gt_boxes {
            for &(hid, h) in hyp_boxes {
                if iou(&g, &h) >= MOT_IOU_GATE {
                    *pair_overlap.entry((gid, hid)).or_insert(0) += 1;
                }
            }
        }

        let matches = match_boxes(gt_boxes, hyp_boxes);
        fn_count += gt_boxes.len() - matches.len();
        fp += hyp_boxes.len() - matches.len();
        for &(gi, hi) in &matches {
            let gid = gt_boxes[gi].0;
            let hid = hyp_boxes[hi].0;
            if let Some(&prev) = last_hyp.get(&gid) {
                if prev != hid {
                    idsw += 1;
                }
            }
            last_hyp.insert(gid, hid);
        }
    }

    let idtp = id_matching_total(&pair_overlap);
    let mota = if gt_total == 0 {
        if fp + idsw == 0 { 1.0 } else { f64::NEG_INFINITY }
    } else {
        1.0 - (fn_count + fp + idsw) as f64 / gt_total as f64
    };
    let idf_denom = gt_total + hyp_total;
    let idf1 = if idf_denom == 0 { 1.0 } else { 2.0 * idtp as f64 / idf_denom as f64 };

    MotSummary { mota, idf1, idsw, fp, fn_count, idtp, gt_total, hyp_total }
}

/// Maximum-weight one-to-one matching of gt tracks to hypothesis tracks,
/// where a pair's weight is its overlapping-frame count. Returns the matched
/// frame total (IDTP).
fn id_matching_total(pair_overlap: &BTreeMap<(u64, u64), usize>) -> usize {
    if pair_overlap.is_empty() {
        return 0;
    }
    let mut gt_ids: Vec<u64> = pair_overlap.keys().map(|&(g, _)| g).collect();
    let mut hyp_ids: Vec<u64> = pair_overlap.keys().map(|&(_, h)| h).collect();
    gt_ids.sort_unstable();
    gt_ids.dedup();
    hyp_ids.sort_unstable();
    hyp_ids.dedup();

    let mut costs = Array2::zeros((gt_ids.len(), hyp_ids.len()));
    let mut gate = Array2::from_elem((gt_ids.len(), hyp_ids.len()), false);
    for (&(g, h), &count) in pair_overlap {
        let i = gt_ids.binary_search(&g).unwrap();
        let j = hyp_ids.binary_search(&h).unwrap();
        costs[(i, j)] = -(count as f64);
        gate[(i, j)] = true;
    }
    let assignment = solve_assignment(&CostMatrix::new(costs, gate));
    assignment
        .matches
        .iter()
        .map(|&(i, j)| pair_overlap.get(&(gt_ids[i], hyp_ids[j])).copied().unwrap_or(0))
        .sum()
}
