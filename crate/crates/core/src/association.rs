//! Track-to-detection costs and the optimal one-to-one assignment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Location;

/// Appearance descriptor of one observation. Always non-empty with a finite,
/// positive norm.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub const DEFAULT_DIM: usize = 2048;

    pub fn new(values: Vec<f64>) -> Result<Self> {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if values.is_empty() || !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::ZeroNormEmbedding);
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn normalized(&self) -> Embedding {
        let n = self.norm();
        Embedding(self.0.iter().map(|v| v / n).collect())
    }

    /// `beta · self + (1 − beta) · other`, both taken at unit norm.
    pub fn blend(&self, other: &Embedding, beta: f64) -> Result<Embedding> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(self.dim(), other.dim()));
        }
        let (a, b) = (self.normalized(), other.normalized());
        let mixed = a.0.iter().zip(&b.0).map(|(x, y)| beta * x + (1.0 - beta) * y).collect();
        Embedding::new(mixed)
    }
}

impl<'de> Deserialize<'de> for Embedding {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let values = Vec::<f64>::deserialize(d)?;
        Embedding::new(values).map_err(serde::de::Error::custom)
    }
}

/// One minus the cosine similarity. In `[0, 2]`; in `[0, 1]` when both
/// vectors are componentwise nonnegative.
pub fn appearance_cost(a: &Embedding, b: &Embedding) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.values().iter().zip(b.values()) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if !(na > 0.0 && nb > 0.0) {
        return Err(Error::ZeroNormEmbedding);
    }
    Ok(1.0 - dot / (na.sqrt() * nb.sqrt()))
}

/// `1 − exp(−d² / H²)` for ground-plane distance `d` and stature `H`. In `[0, 1)`.
pub fn trajectory_cost(predicted: &Location, detected: &Location, body_height_m: f64) -> f64 {
    let d2 = predicted.distance_sq(detected);
    -(-d2 / (body_height_m * body_height_m)).exp_m1()
}

/// Which cues enter the association cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostMode {
    /// Trajectory plus appearance, unweighted.
    #[default]
    Combined,
    /// Trajectory alone (appearance ablation).
    TrajectoryOnly,
}

/// Location and appearance of one side of a potential match.
#[derive(Debug, Clone, Copy)]
pub struct Cue<'a> {
    pub location: Location,
    pub embedding: &'a Embedding,
}

/// Dense row-major cost matrix; rows are tracks, columns detections.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::CostShape { rows, cols, len: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Trajectory plus appearance cost for every track/detection pair.
pub fn build_cost_matrix(
    tracks: &[Cue<'_>],
    detections: &[Cue<'_>],
    body_height_m: f64,
    mode: CostMode,
) -> Result<CostMatrix> {
    let mut data = Vec::with_capacity(tracks.len() * detections.len());
    for t in tracks {
        for d in detections {
            let traj = trajectory_cost(&t.location, &d.location, body_height_m);
            let app = match mode {
                CostMode::Combined => appearance_cost(t.embedding, d.embedding)?,
                CostMode::TrajectoryOnly => 0.0,
            };
            data.push(traj + app);
        }
    }
    CostMatrix::new(tracks.len(), detections.len(), data)
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Assignment {
    /// `(row, col)` pairs sorted by row.
    pub matches: Vec<(usize, usize)>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_cols: Vec<usize>,
}

impl Assignment {
    pub fn total_cost(&self, costs: &CostMatrix) -> f64 {
        self.matches.iter().map(|&(i, j)| costs.get(i, j)).sum()
    }

    pub fn col_for_row(&self, row: usize) -> Option<usize> {
        self.matches.iter().find(|m| m.0 == row).map(|m| m.1)
    }
}

/// Value of the dummy rows/columns added to square up a rectangular problem.
/// Any constant gives the same optimum; this one sits above every admissible
/// tracker cost (at most 3).
pub const PADDING_COST: f64 = 10.0;

/// Minimum-cost assignment matching `min(rows, cols)` pairs (Hungarian method
/// with row/column potentials, O(n³) on the padded square matrix).
pub fn solve_assignment(costs: &CostMatrix) -> Result<Assignment> {
    for (idx, c) in costs.data.iter().enumerate() {
        if !c.is_finite() {
            return Err(Error::NonFiniteCost { row: idx / costs.cols, col: idx % costs.cols });
        }
    }
    let (rows, cols) = (costs.rows, costs.cols);
    let n = rows.max(cols);
    if n == 0 {
        return Ok(Assignment::default());
    }
    let cost = |i: usize, j: usize| {
        if i < rows && j < cols {
            costs.get(i, j)
        } else {
            PADDING_COST
        }
    };

    // 1-based potentials; column 0 is a sentinel holding the row being inserted.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of_col = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of_col[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of_col[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
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
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of_col[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut col_of_row = vec![usize::MAX; rows];
    for (j, &i) in row_of_col.iter().enumerate().skip(1) {
        if i >= 1 && i <= rows && j <= cols {
            col_of_row[i - 1] = j - 1;
        }
    }
    let mut out = Assignment::default();
    let mut col_used = vec![false; cols];
    for (i, &j) in col_of_row.iter().enumerate() {
        if j == usize::MAX {
            out.unmatched_rows.push(i);
        } else {
            out.matches.push((i, j));
            col_used[j] = true;
        }
    }
    out.unmatched_cols = (0..cols).filter(|&j| !col_used[j]).collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Exhaustive minimum over all injections of the smaller side into the larger.
    fn brute_force_min(c: &CostMatrix) -> f64 {
        fn rec(c: &CostMatrix, row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
            if row == c.rows() {
                *best = best.min(acc);
                return;
            }
            for j in 0..c.cols() {
                if !used[j] {
                    used[j] = true;
                    rec(c, row + 1, used, acc + c.get(row, j), best);
                    used[j] = false;
                }
            }
        }
        let t;
        let c = if c.rows() > c.cols() {
            t = CostMatrix::from_fn(c.cols(), c.rows(), |i, j| c.get(j, i));
            &t
        } else {
            c
        };
        let mut best = f64::INFINITY;
        rec(c, 0, &mut vec![false; c.cols()], 0.0, &mut best);
        best
    }

    fn emb(v: &[f64]) -> Embedding {
        Embedding::new(v.to_vec()).unwrap()
    }

    #[test]
    fn appearance_spot_values() {
        let a = emb(&[0.3, -1.2, 4.0]);
        assert!(appearance_cost(&a, &a).unwrap().abs() < 1e-12);
        assert!((appearance_cost(&emb(&[1.0, 0.0]), &emb(&[0.0, 2.0])).unwrap() - 1.0).abs() < 1e-12);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let c = appearance_cost(&emb(&[1.0, 0.0]), &emb(&[h, h])).unwrap();
        assert!((c - (1.0 - h)).abs() < 1e-12);
        assert!((c - 0.29289).abs() < 1e-5);
        let opposite = appearance_cost(&emb(&[1.0, 1.0]), &emb(&[-2.0, -2.0])).unwrap();
        assert!((opposite - 2.0).abs() < 1e-12);
    }

    #[test]
    fn appearance_errors() {
        assert_eq!(appearance_cost(&emb(&[1.0]), &emb(&[1.0, 0.0])), Err(Error::DimensionMismatch(1, 2)));
        assert_eq!(Embedding::new(vec![0.0, 0.0]), Err(Error::ZeroNormEmbedding));
        assert_eq!(Embedding::new(vec![]), Err(Error::ZeroNormEmbedding));
        assert!(serde_json::from_str::<Embedding>("[0.0, 0.0]").is_err());
        assert_eq!(serde_json::from_str::<Embedding>("[1.0, 2.0]").unwrap().dim(), 2);
    }

    #[test]
    fn trajectory_spot_values() {
        let p = Location::new(1.0, 2.0);
        assert_eq!(trajectory_cost(&p, &p, 1.7), 0.0);
        let q = Location::new(1.0 + 1.7, 2.0);
        assert!((trajectory_cost(&p, &q, 1.7) - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
        assert!((trajectory_cost(&p, &q, 1.7) - 0.63212).abs() < 1e-5);
        let far = Location::new(1.0, 2.0 + 170.0);
        assert!((trajectory_cost(&p, &far, 1.7) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cost_matrix_hand_values() {
        let h = 1.7;
        let (e1, e2) = (emb(&[1.0, 0.0]), emb(&[0.0, 1.0]));
        let e3 = emb(&[1.0, 1.0]);
        let tracks = [
            Cue { location: Location::new(0.0, 5.0), embedding: &e1 },
            Cue { location: Location::new(3.0, 5.0), embedding: &e2 },
        ];
        let dets = [
            Cue { location: Location::new(0.0, 5.0 + 1.7), embedding: &e3 },
            Cue { location: Location::new(3.0, 5.0), embedding: &e2 },
        ];
        let c = build_cost_matrix(&tracks, &dets, h, CostMode::Combined).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let e = |d2: f64| 1.0 - (-d2 / (h * h)).exp();
        // (0,0): distance H, 45 degrees apart
        assert!((c.get(0, 0) - (e(h * h) + 1.0 - r)).abs() < 1e-12);
        // (0,1): distance 3, orthogonal
        assert!((c.get(0, 1) - (e(9.0) + 1.0)).abs() < 1e-12);
        // (1,0): dx 3, dz 1.7
        assert!((c.get(1, 0) - (e(9.0 + h * h) + 1.0 - r)).abs() < 1e-12);
        assert!(c.get(1, 1).abs() < 1e-12);

        let only = build_cost_matrix(&tracks, &dets, h, CostMode::TrajectoryOnly).unwrap();
        assert!((only.get(0, 1) - e(9.0)).abs() < 1e-12);
    }

    #[test]
    fn cost_matrix_empty_and_perfect() {
        let e = emb(&[1.0, 2.0]);
        let dets = vec![Cue { location: Location::new(1.0, 1.0), embedding: &e }; 3];
        let c = build_cost_matrix(&[], &dets, 1.7, CostMode::Combined).unwrap();
        assert_eq!((c.rows(), c.cols()), (0, 3));
        let a = solve_assignment(&c).unwrap();
        assert_eq!(a.unmatched_cols, vec![0, 1, 2]);

        let one = build_cost_matrix(&dets[..1], &dets[..1], 1.7, CostMode::Combined).unwrap();
        assert!(one.get(0, 0).abs() < 1e-12);
    }

    #[test]
    fn solve_diagonal() {
        let c = CostMatrix::new(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let a = solve_assignment(&c).unwrap();
        assert_eq!(a.matches, vec![(0, 0), (1, 1)]);
        assert_eq!(a.total_cost(&c), 0.0);
    }

    #[test]
    fn solve_rectangular_both_ways() {
        let c = CostMatrix::new(2, 3, vec![5.0, 1.0, 9.0, 2.0, 8.0, 0.5]).unwrap();
        let a = solve_assignment(&c).unwrap();
        assert_eq!(a.matches, vec![(0, 1), (1, 2)]);
        assert_eq!(a.unmatched_cols, vec![0]);
        assert!(a.unmatched_rows.is_empty());

        let t = CostMatrix::from_fn(3, 2, |i, j| c.get(j, i));
        let b = solve_assignment(&t).unwrap();
        assert_eq!(b.matches, vec![(1, 0), (2, 1)]);
        assert_eq!(b.unmatched_rows, vec![0]);
    }

    #[test]
    fn solve_rejects_non_finite() {
        let c = CostMatrix::new(1, 2, vec![0.0, f64::NAN]).unwrap();
        assert_eq!(solve_assignment(&c), Err(Error::NonFiniteCost { row: 0, col: 1 }));
        assert!(CostMatrix::new(2, 2, vec![0.0]).is_err());
    }

    fn matrix() -> impl Strategy<Value = CostMatrix> {
        (1usize..=6, 1usize..=6).prop_flat_map(|(r, c)| {
            prop::collection::vec(0.0f64..2.0, r * c).prop_map(move |d| CostMatrix::new(r, c, d).unwrap())
        })
    }

    proptest! {
        #[test]
        fn solver_matches_brute_force(c in matrix()) {
            let a = solve_assignment(&c).unwrap();
            prop_assert_eq!(a.matches.len(), c.rows().min(c.cols()));
            prop_assert_eq!(a.matches.len() + a.unmatched_rows.len(), c.rows());
            prop_assert_eq!(a.matches.len() + a.unmatched_cols.len(), c.cols());
            let mut cols: Vec<_> = a.matches.iter().map(|m| m.1).collect();
            cols.sort();
            cols.dedup();
            prop_assert_eq!(cols.len(), a.matches.len());
            prop_assert!((a.total_cost(&c) - brute_force_min(&c)).abs() < 1e-12);
        }

        #[test]
        fn shift_invariance_on_square(n in 1usize..=6, shift in 0.0f64..5.0, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let c = CostMatrix::from_fn(n, n, |_, _| rng.random_range(0.0..2.0));
            let shifted = CostMatrix::from_fn(n, n, |i, j| c.get(i, j) + shift);
            let a = solve_assignment(&c).unwrap();
            let b = solve_assignment(&shifted).unwrap();
            prop_assert!((a.total_cost(&c) - b.total_cost(&c)).abs() < 1e-9);
        }

        #[test]
        fn appearance_scale_invariant(
            v in prop::collection::vec(-5.0f64..5.0, 1..12),
            w_seed in any::<u64>(),
            l in 0.01f64..100.0,
            m in 0.01f64..100.0,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(w_seed);
            let w: Vec<f64> = v.iter().map(|_| rng.random_range(-5.0..5.0)).collect();
            prop_assume!(v.iter().any(|x| x.abs() > 1e-3) && w.iter().any(|x| x.abs() > 1e-3));
            let (a, b) = (emb(&v), emb(&w));
            let sa = emb(&v.iter().map(|x| x * l).collect::<Vec<_>>());
            let sb = emb(&w.iter().map(|x| x * m).collect::<Vec<_>>());
            let base = appearance_cost(&a, &b).unwrap();
            prop_assert!((base - appearance_cost(&b, &a).unwrap()).abs() < 1e-12);
            prop_assert!((base - appearance_cost(&sa, &sb).unwrap()).abs() < 1e-12);
            prop_assert!((-1e-12..=2.0 + 1e-12).contains(&base));
        }

        #[test]
        fn trajectory_symmetric_and_monotone(
            x in -20.0f64..20.0, z in -20.0f64..20.0,
            angle in 0.0f64..std::f64::consts::TAU, d1 in 0.0f64..3.0, extra in 0.001f64..2.0,
        ) {
            let p = Location::new(x, z);
            let at = |d: f64| Location::new(x + d * angle.cos(), z + d * angle.sin());
            let (q1, q2) = (at(d1), at(d1 + extra));
            let c1 = trajectory_cost(&p, &q1, 1.7);
            prop_assert_eq!(c1, trajectory_cost(&q1, &p, 1.7));
            prop_assert!((0.0..1.0).contains(&c1));
            let c2 = trajectory_cost(&p, &q2, 1.7);
            prop_assert!(c2 > c1);
        }
    }
}
