//! Association: cost matrices over track priors and detections, IoU gating,
//! and minimum-cost linear assignment.
//!
//! Costs use prior means only, never the prior uncertainty. Two modes exist:
//! plain negative IoU and the hybrid cost `−IoU + λ·L1` whose distance term
//! separates nearby candidates once IoU alone is ambiguous. Cells that fail
//! the gate `IoU ≥ iou_min` can never be assigned.
//!
//! The solver is an O(n³) shortest-augmenting-path Hungarian over the matrix
//! padded to square with a sentinel cost; gated and padded cells are stripped
//! from the result. Among equal-cost optima the lexicographically smallest
//! matching (lowest row, then lowest column) is returned, which pins the
//! output down deterministically.

use ndarray::Array2;

use crate::gaussian::GaussianState;
use crate::geom::{iou, l1_distance, Box};

/// Cost construction mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostMode {
    Iou,
    Hybrid,
}

impl CostMode {
    pub fn name(&self) -> &'static str {
        match self {
            CostMode::Iou => "iou",
            CostMode::Hybrid => "hybrid",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "iou" => Some(CostMode::Iou),
            "hybrid" => Some(CostMode::Hybrid),
            _ => None,
        }
    }
}

/// Association costs: rows are track priors, columns are detections.
#[derive(Debug, Clone)]
pub struct CostMatrix {
    pub costs: Array2<f64>,
    /// `true` where the cell may be assigned (`IoU ≥ iou_min`).
    pub gate: Array2<bool>,
    sentinel: f64,
}

impl CostMatrix {
    /// Wraps externally built costs. The sentinel is derived from the largest
    /// non-gated magnitude so it strictly dominates every feasible cell.
    pub fn new(costs: Array2<f64>, gate: Array2<bool>) -> Self {
        assert_eq!(costs.dim(), gate.dim(), "costs and gate must have equal shape");
        let max_abs = max_gated_abs(&costs, &gate);
        let sentinel = 10.0 * (max_abs + 1.0);
        Self { costs, gate, sentinel }
    }

    pub fn n_rows(&self) -> usize {
        self.costs.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.costs.ncols()
    }

    /// Cost placed on gated-out and padded cells while solving.
    pub fn sentinel(&self) -> f64 {
        self.sentinel
    }
}

fn max_gated_abs(costs: &Array2<f64>, gate: &Array2<bool>) -> f64 {
    costs
        .iter()
        .zip(gate.iter())
        .filter(|(_, g)| **g)
        .map(|(c, _)| c.abs())
        .fold(0.0, f64::max)
}

/// Builds the association cost matrix between track priors and detections.
///
/// `iou` mode: cost = −IoU. `hybrid` mode: cost = −IoU + λ·L1 over the four
/// box coordinates (with λ = 0 the hybrid cost equals the IoU cost exactly).
/// A cell is gated in iff IoU ≥ `iou_min`.
pub fn build_costs(
    priors: &[GaussianState],
    dets: &[Box],
    lambda: f64,
    iou_min: f64,
    mode: CostMode,
) -> CostMatrix {
    assert!(lambda >= 0.0, "lambda must be non-negative");
    assert!((0.0..=1.0).contains(&iou_min), "iou_min must lie in [0,1]");
    let shape = (priors.len(), dets.len());
    let mut costs = Array2::zeros(shape);
    let mut gate = Array2::from_elem(shape, false);
    for (i, prior) in priors.iter().enumerate() {
        let pb = prior.mean_box();
        for (j, det) in dets.iter().enumerate() {
            let overlap = iou(&pb, det);
            let base = -overlap;
            costs[(i, j)] = match mode {
                CostMode::Iou => base,
                CostMode::Hybrid if lambda == 0.0 => base,
                CostMode::Hybrid => base + lambda * l1_distance(&pb, det),
            };
            gate[(i, j)] = overlap >= iou_min;
        }
    }
    // λ·4 bounds the L1 term for unit-normalized coordinates, keeping the
    // sentinel above any feasible cost even on degenerate inputs
    let sentinel = 10.0 * (max_gated_abs(&costs, &gate) + lambda * 4.0 + 1.0);
    CostMatrix { costs, gate, sentinel }
}

/// Result of one assignment: matched `(row, col)` pairs plus the leftovers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub matches: Vec<(usize, usize)>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_cols: Vec<usize>,
}

/// Minimum-total-cost matching over the non-gated cells.
///
/// Rectangular matrices are padded to square with the sentinel; pairs through
/// gated or padded cells are dropped from `matches` and reported as
/// unmatched. `matches` is sorted by row.
pub fn solve_assignment(m: &CostMatrix) -> Assignment {
    let (nr, nc) = m.costs.dim();
    if nr == 0 || nc == 0 {
        return Assignment {
            matches: Vec::new(),
            unmatched_rows: (0..nr).collect(),
            unmatched_cols: (0..nc).collect(),
        };
    }
    let n = nr.max(nc);
    let mut grid = Array2::from_elem((n, n), m.sentinel);
    for i in 0..nr {
        for j in 0..nc {
            if m.gate[(i, j)] {
                grid[(i, j)] = m.costs[(i, j)];
            }
        }
    }

    let (col_row, u, v) = hungarian(&grid);
    let mut row_col = vec![usize::MAX; n];
    for j in 1..=n {
        if col_row[j] != 0 {
            row_col[col_row[j] - 1] = j - 1;
        }
    }

    // Among co-optimal matchings, prefer low row and column indices: restrict
    // to cells made tight by the dual potentials and take the
    // lexicographically smallest perfect matching of that graph.
    let scale = 1.0 + grid.iter().fold(0.0f64, |a, c| a.max(c.abs()));
    let tol = 1e-9 * scale;
    let mut allowed = Array2::from_elem((n, n), false);
    for i in 0..n {
        for j in 0..n {
            allowed[(i, j)] =
                grid[(i, j)] - u[i + 1] - v[j + 1] <= tol || row_col[i] == j;
        }
    }
    let assignment = lex_min_perfect_matching(&allowed).unwrap_or(row_col);

    let mut matches = Vec::new();
    let mut col_matched = vec![false; nc];
    for (i, &j) in assignment.iter().enumerate().take(nr) {
        if j < nc && m.gate[(i, j)] {
            matches.push((i, j));
            col_matched[j] = true;
        }
    }
    let matched_rows: Vec<bool> = {
        let mut mr = vec![false; nr];
        for &(i, _) in &matches {
            mr[i] = true;
        }
        mr
    };
    Assignment {
        unmatched_rows: (0..nr).filter(|&i| !matched_rows[i]).collect(),
        unmatched_cols: (0..nc).filter(|&j| !col_matched[j]).collect(),
        matches,
    }
}

/// O(n³) Hungarian algorithm on a square matrix (shortest augmenting paths
/// with dual potentials). Returns 1-indexed `col -> row` plus the potentials
/// `u` (rows) and `v` (columns) witnessing optimality.
fn hungarian(grid: &Array2<f64>) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let n = grid.nrows();
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = grid[(i0 - 1, j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (p, u, v)
}

/// Lexicographically smallest (row-major) perfect matching of a bipartite
/// graph given as an adjacency matrix, if one exists.
fn lex_min_perfect_matching(allowed: &Array2<bool>) -> Option<Vec<usize>> {
    let n = allowed.nrows();
    let mut taken = vec![false; n];
    let mut out = vec![usize::MAX; n];
    for i in 0..n {
        let mut found = false;
        for j in 0..n {
            if taken[j] || !allowed[(i, j)] {
                continue;
            }
            taken[j] = true;
            if suffix_matchable(allowed, i + 1, &taken) {
                out[i] = j;
                found = true;
                break;
            }
            taken[j] = false;
        }
        if !found {
            return None;
        }
    }
    Some(out)
}

/// Kuhn's augmenting-path check that rows `start..n` can all be matched into
/// columns not yet taken.
fn suffix_matchable(allowed: &Array2<bool>, start: usize, taken: &[bool]) -> bool {
    fn augment(
        allowed: &Array2<bool>,
        taken: &[bool],
        col_row: &mut [usize],
        seen: &mut [bool],
        i: usize,
    ) -> bool {
        for j in 0..taken.len() {
            if taken[j] || seen[j] || !allowed[(i, j)] {
                continue;
            }
            seen[j] = true;
            if col_row[j] == usize::MAX || augment(allowed, taken, col_row, seen, col_row[j]) {
                col_row[j] = i;
                return true;
            }
        }
        false
    }

    let n = allowed.nrows();
    let mut col_row = vec![usize::MAX; n];
    for i in start..n {
        let mut seen = vec![false; n];
        if !augment(allowed, taken, &mut col_row, &mut seen, i) {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn bx(l: f64, t: f64, w: f64, h: f64) -> Box {
        Box::new(l, t, w, h)
    }

    fn gs(b: &Box) -> GaussianState {
        GaussianState::new(b.ltwh(), [1e-4; 4])
    }

    fn all_open(costs: Array2<f64>) -> CostMatrix {
        let gate = Array2::from_elem(costs.dim(), true);
        CostMatrix::new(costs, gate)
    }

    /// Brute-force optimum over every injective row→col mapping.
    fn brute_force_total(m: &CostMatrix) -> f64 {
        fn rec(m: &CostMatrix, row: usize, used: &mut Vec<bool>, pad: f64) -> f64 {
            let (nr, nc) = m.costs.dim();
            let n = nr.max(nc);
            if row == n {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            for j in 0..n {
                if used[j] {
                    continue;
                }
                let cell = if row < nr && j < nc && m.gate[(row, j)] {
                    m.costs[(row, j)]
                } else {
                    pad
                };
                used[j] = true;
                best = best.min(cell + rec(m, row + 1, used, pad));
                used[j] = false;
            }
            best
        }
        let n = m.n_rows().max(m.n_cols());
        rec(m, 0, &mut vec![false; n], m.sentinel())
    }

    fn solved_total(m: &CostMatrix) -> f64 {
        let a = solve_assignment(m);
        let n = m.n_rows().max(m.n_cols());
        let pad_cells = n - a.matches.len();
        a.matches.iter().map(|&(i, j)| m.costs[(i, j)]).sum::<f64>()
            + pad_cells as f64 * m.sentinel()
    }

    #[test]
    fn identical_box_costs_minus_one_and_is_gated_in() {
        let b = bx(0.2, 0.3, 0.4, 0.5);
        let m = build_costs(&[gs(&b)], &[b], 5.0, 0.25, CostMode::Hybrid);
        assert_eq!(m.costs[(0, 0)], -1.0);
        assert!(m.gate[(0, 0)]);
    }

    #[test]
    fn disjoint_pair_is_gated_out() {
        let a = bx(0.0, 0.0, 0.1, 0.1);
        let b = bx(0.8, 0.8, 0.1, 0.1);
        let m = build_costs(&[gs(&a)], &[b], 5.0, 0.25, CostMode::Hybrid);
        assert!(!m.gate[(0, 0)]);
        let sol = solve_assignment(&m);
        assert!(sol.matches.is_empty());
        assert_eq!(sol.unmatched_rows, vec![0]);
        assert_eq!(sol.unmatched_cols, vec![0]);
    }

    #[test]
    fn hybrid_cost_hand_example() {
        // overlap 0.1×0.1 on two 0.2×0.2 boxes: IoU = 1/7, L1 = 0.2
        let prior = bx(0.0, 0.0, 0.2, 0.2);
        let det = bx(0.1, 0.1, 0.2, 0.2);
        let m = build_costs(&[gs(&prior)], &[det], 5.0, 0.0, CostMode::Hybrid);
        approx::assert_abs_diff_eq!(m.costs[(0, 0)], -1.0 / 7.0 + 5.0 * 0.2, epsilon = 1e-12);
        approx::assert_abs_diff_eq!(m.costs[(0, 0)], 0.857143, epsilon = 5e-7);
    }

    #[test]
    fn lambda_zero_hybrid_equals_iou_bitwise() {
        let priors: Vec<GaussianState> = [
            bx(0.0, 0.0, 0.2, 0.2),
            bx(0.3, 0.4, 0.25, 0.2),
            bx(0.7, 0.1, 0.15, 0.3),
        ]
        .iter()
        .map(gs)
        .collect();
        let dets = [bx(0.02, 0.01, 0.2, 0.2), bx(0.31, 0.38, 0.25, 0.21), bx(0.9, 0.9, 0.1, 0.1)];
        let a = build_costs(&priors, &dets, 0.0, 0.25, CostMode::Hybrid);
        let b = build_costs(&priors, &dets, 0.0, 0.25, CostMode::Iou);
        for (x, y) in a.costs.iter().zip(b.costs.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert_eq!(a.gate, b.gate);
    }

    #[test]
    fn two_by_two_hand_example() {
        let m = all_open(ndarray::arr2(&[[1.0, 2.0], [2.0, 4.0]]));
        let sol = solve_assignment(&m);
        assert_eq!(sol.matches, vec![(0, 1), (1, 0)]);
        assert!(sol.unmatched_rows.is_empty());
        assert!(sol.unmatched_cols.is_empty());
    }

    #[test]
    fn diagonal_zero_matrix_yields_identity() {
        let m = all_open(ndarray::arr2(&[
            [0.0, 3.0, 5.0],
            [2.0, 0.0, 9.0],
            [7.0, 1.0, 0.0],
        ]));
        assert_eq!(solve_assignment(&m).matches, vec![(0, 0), (1, 1), (2, 2)]);
    }

    #[test]
    fn all_zero_matrix_breaks_ties_lexicographically() {
        let m = all_open(Array2::zeros((3, 3)));
        assert_eq!(solve_assignment(&m).matches, vec![(0, 0), (1, 1), (2, 2)]);
    }

    #[test]
    fn single_row_picks_its_minimum() {
        let m = all_open(ndarray::arr2(&[[5.0, 3.0]]));
        let sol = solve_assignment(&m);
        assert_eq!(sol.matches, vec![(0, 1)]);
        assert_eq!(sol.unmatched_cols, vec![0]);
        assert!(sol.unmatched_rows.is_empty());
    }

    #[test]
    fn rectangular_tall_matrix_reports_unmatched_rows() {
        let m = all_open(ndarray::arr2(&[[9.0], [1.0], [4.0]]));
        let sol = solve_assignment(&m);
        assert_eq!(sol.matches, vec![(1, 0)]);
        assert_eq!(sol.unmatched_rows, vec![0, 2]);
        assert!(sol.unmatched_cols.is_empty());
    }

    #[test]
    fn empty_inputs_yield_empty_matching() {
        let m = build_costs(&[], &[bx(0.1, 0.1, 0.2, 0.2)], 5.0, 0.25, CostMode::Iou);
        let sol = solve_assignment(&m);
        assert!(sol.matches.is_empty());
        assert_eq!(sol.unmatched_cols, vec![0]);
        let m = build_costs(&[gs(&bx(0.1, 0.1, 0.2, 0.2))], &[], 5.0, 0.25, CostMode::Iou);
        let sol = solve_assignment(&m);
        assert!(sol.matches.is_empty());
        assert_eq!(sol.unmatched_rows, vec![0]);
    }

    #[test]
    fn gating_is_sound_on_random_scenes() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        for _ in 0..50 {
            let nb = rng.random_range(1..6);
            let nd = rng.random_range(1..6);
            let mk = |rng: &mut rand_chacha::ChaCha8Rng| {
                bx(
                    rng.random_range(0.0..0.8),
                    rng.random_range(0.0..0.8),
                    rng.random_range(0.05..0.2),
                    rng.random_range(0.05..0.2),
                )
            };
            let priors: Vec<GaussianState> =
                (0..nb).map(|_| gs(&mk(&mut rng))).collect();
            let dets: Vec<Box> = (0..nd).map(|_| mk(&mut rng)).collect();
            let m = build_costs(&priors, &dets, 5.0, 0.25, CostMode::Hybrid);
            for &(i, j) in &solve_assignment(&m).matches {
                assert!(iou(&priors[i].mean_box(), &dets[j]) >= 0.25);
            }
        }
    }

    proptest! {
        #[test]
        fn matches_brute_force_up_to_7x7(
            nr in 1usize..=7,
            nc in 1usize..=7,
            seed in 0u64..1000,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let costs = Array2::from_shape_fn((nr, nc), |_| rng.random_range(-1.0..4.0));
            let gate = Array2::from_shape_fn((nr, nc), |_| rng.random::<f64>() < 0.8);
            let m = CostMatrix::new(costs, gate);
            let ours = solved_total(&m);
            let brute = brute_force_total(&m);
            prop_assert!((ours - brute).abs() <= 1e-9 * (1.0 + brute.abs()),
                "ours {ours} vs brute {brute}");
        }

        #[test]
        fn constant_shift_keeps_the_matching(seed in 0u64..300) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(2usize..6);
            let costs = Array2::from_shape_fn((n, n), |_| rng.random_range(-2.0..2.0));
            let shift = rng.random_range(-3.0..3.0);
            let base = all_open(costs.clone());
            let shifted = all_open(costs + shift);
            prop_assert_eq!(solve_assignment(&base).matches, solve_assignment(&shifted).matches);
        }
    }
}
