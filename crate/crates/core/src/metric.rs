//! Finite metric spaces and the k-median risk functionals over center sets.
//!
//! Every comparison on distances is exact: ties are broken by [`PointId`],
//! which is the index of the point in the original dataset ordering (never
//! the stream order).

use std::cmp::Ordering;
use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest size for which the triangle inequality of a distance matrix is
/// checked over every triple.
pub const EXHAUSTIVE_TRIANGLE_LIMIT: usize = 200;
/// Number of random triples checked above [`EXHAUSTIVE_TRIANGLE_LIMIT`].
pub const SAMPLED_TRIANGLES: usize = 10_000;

/// Index of a point in the dataset's original ordering.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PointId(pub usize);

impl PointId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for PointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Converts a slice of raw indices to point ids.
pub fn ids(raw: &[usize]) -> Vec<PointId> {
    raw.iter().copied().map(PointId).collect()
}

#[derive(Clone, Debug, PartialEq)]
enum Storage {
    /// Row-major coordinates, `dim` values per point.
    Euclidean { dim: usize, coords: Vec<f64> },
    /// Row-major `n * n` distance matrix.
    Matrix { dist: Vec<f64> },
}

/// An ordered finite metric space.
///
/// Either a set of points in Euclidean space or an explicit distance matrix.
/// Immutable after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    n: usize,
    storage: Storage,
}

impl Dataset {
    /// Builds a Euclidean dataset from coordinate rows.
    pub fn from_points(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(Error::InvalidDataset("dataset has no points".into()));
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::InvalidDataset("points have no coordinates".into()));
        }
        let mut coords = Vec::with_capacity(n * dim);
        for (i, p) in points.into_iter().enumerate() {
            if p.len() != dim {
                return Err(Error::InvalidDataset(format!(
                    "point {i} has {} coordinates, expected {dim}",
                    p.len()
                )));
            }
            if let Some(v) = p.iter().find(|v| !v.is_finite()) {
                return Err(Error::InvalidDataset(format!("point {i} has non-finite coordinate {v}")));
            }
            coords.extend(p);
        }
        Ok(Self { n, storage: Storage::Euclidean { dim, coords } })
    }

    /// Builds a dataset from a square distance matrix, verifying the metric axioms.
    ///
    /// The triangle inequality is checked on every triple for `n <= 200` and on
    /// 10⁴ random triples above that. It is checked with a relative slack of
    /// 10⁻⁹ so that matrices written from floating-point Euclidean distances
    /// are accepted.
    pub fn from_matrix(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidDataset("distance matrix is empty".into()));
        }
        let mut dist = Vec::with_capacity(n * n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidDataset(format!(
                    "matrix row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            dist.extend(row);
        }
        for i in 0..n {
            if dist[i * n + i] != 0.0 {
                return Err(Error::InvalidDataset(format!("d({i},{i}) is not zero")));
            }
            for j in 0..n {
                let d = dist[i * n + j];
                if !d.is_finite() || d < 0.0 {
                    return Err(Error::InvalidDataset(format!("d({i},{j}) = {d} is not a finite non-negative distance")));
                }
                if d != dist[j * n + i] {
                    return Err(Error::InvalidDataset(format!("d({i},{j}) != d({j},{i})")));
                }
            }
        }
        let violates = |i: usize, j: usize, k: usize| {
            let lhs = dist[i * n + k];
            let rhs = dist[i * n + j] + dist[j * n + k];
            lhs > rhs + 1e-9 * lhs.max(rhs)
        };
        if n <= EXHAUSTIVE_TRIANGLE_LIMIT {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        if violates(i, j, k) {
                            return Err(Error::InvalidDataset(format!(
                                "triangle inequality fails for ({i},{j},{k})"
                            )));
                        }
                    }
                }
            }
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(0x7472_6961_6e67_6c65);
            for _ in 0..SAMPLED_TRIANGLES {
                let (i, j, k) = (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n));
                if violates(i, j, k) {
                    return Err(Error::InvalidDataset(format!("triangle inequality fails for ({i},{j},{k})")));
                }
            }
        }
        Ok(Self { n, storage: Storage::Matrix { dist } })
    }

    /// Number of points.
    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    /// Always false; a dataset holds at least one point.
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Coordinate dimension, or `None` for matrix datasets.
    pub fn dim(&self) -> Option<usize> {
        match &self.storage {
            Storage::Euclidean { dim, .. } => Some(*dim),
            Storage::Matrix { .. } => None,
        }
    }

    pub fn is_matrix(&self) -> bool {
        matches!(self.storage, Storage::Matrix { .. })
    }

    /// Coordinates of a point (Euclidean mode only).
    pub fn coords(&self, p: PointId) -> Option<&[f64]> {
        match &self.storage {
            Storage::Euclidean { dim, coords } => Some(&coords[p.0 * dim..(p.0 + 1) * dim]),
            Storage::Matrix { .. } => None,
        }
    }

    /// Row `p` of the distance matrix (matrix mode only).
    pub fn matrix_row(&self, p: PointId) -> Option<&[f64]> {
        match &self.storage {
            Storage::Matrix { dist } => Some(&dist[p.0 * self.n..(p.0 + 1) * self.n]),
            Storage::Euclidean { .. } => None,
        }
    }

    /// All point ids in dataset order.
    pub fn point_ids(&self) -> Vec<PointId> {
        (0..self.n).map(PointId).collect()
    }

    /// Checks that a point id is valid for this dataset.
    pub fn check(&self, p: PointId) -> Result<()> {
        if p.0 < self.n {
            Ok(())
        } else {
            Err(Error::PointOutOfRange { index: p.0, n: self.n })
        }
    }

    /// Distance between two points. Panics on out-of-range ids.
    #[inline]
    pub fn dist(&self, a: PointId, b: PointId) -> f64 {
        match &self.storage {
            Storage::Euclidean { dim, coords } => {
                let x = &coords[a.0 * dim..(a.0 + 1) * dim];
                let y = &coords[b.0 * dim..(b.0 + 1) * dim];
                x.iter().zip(y).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
            }
            Storage::Matrix { dist } => dist[a.0 * self.n + b.0],
        }
    }
}

/// A deduplicated, sorted set of centers.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CenterSet {
    ids: Vec<PointId>,
}

impl CenterSet {
    pub fn new(mut ids: Vec<PointId>) -> Self {
        ids.sort_unstable();
        ids.dedup();
        Self { ids }
    }

    /// Builds a center set and checks that every id is valid for `data`.
    pub fn checked(ids: Vec<PointId>, data: &Dataset) -> Result<Self> {
        for &p in &ids {
            data.check(p)?;
        }
        Ok(Self::new(ids))
    }

    #[inline]
    pub fn ids(&self) -> &[PointId] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, p: PointId) -> bool {
        self.ids.binary_search(&p).is_ok()
    }

    /// Set union.
    pub fn union(&self, other: &CenterSet) -> CenterSet {
        CenterSet::new(self.ids.iter().chain(other.ids.iter()).copied().collect())
    }

    pub fn into_vec(self) -> Vec<PointId> {
        self.ids
    }
}

impl FromIterator<PointId> for CenterSet {
    fn from_iter<I: IntoIterator<Item = PointId>>(iter: I) -> Self {
        CenterSet::new(iter.into_iter().collect())
    }
}

/// Nearest center to `x` and its distance; equal distances resolve to the
/// smallest center id.
pub fn nearest_center(x: PointId, centers: &CenterSet, data: &Dataset) -> Result<(PointId, f64)> {
    nearest_in(x, centers.ids(), data).ok_or(Error::EmptyCenters)
}

/// Position within `centers` of the nearest center, with its distance.
/// `centers` must be sorted for the smallest-id tie-break to hold.
#[inline]
pub(crate) fn nearest_position(x: PointId, centers: &[PointId], data: &Dataset) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (pos, &c) in centers.iter().enumerate() {
        let d = data.dist(x, c);
        match best {
            Some((_, bd)) if d >= bd => {}
            _ => best = Some((pos, d)),
        }
    }
    best
}

#[inline]
fn nearest_in(x: PointId, centers: &[PointId], data: &Dataset) -> Option<(PointId, f64)> {
    nearest_position(x, centers, data).map(|(pos, d)| (centers[pos], d))
}

/// Distance from `x` to its nearest center.
pub fn dist_to_set(x: PointId, centers: &CenterSet, data: &Dataset) -> Result<f64> {
    nearest_center(x, centers, data).map(|(_, d)| d)
}

/// k-median risk: the sum over `points` of the distance to the nearest center,
/// accumulated in the order of `points`.
pub fn risk(points: &[PointId], centers: &CenterSet, data: &Dataset) -> Result<f64> {
    if centers.is_empty() {
        return Err(Error::EmptyCenters);
    }
    Ok(points
        .iter()
        .map(|&x| nearest_in(x, centers.ids(), data).map_or(0.0, |(_, d)| d))
        .fold(0.0, |acc, d| acc + d))
}

/// Ordering used to rank points by how far they are: larger distance first,
/// then smaller id.
#[inline]
pub(crate) fn far_order(a: (PointId, f64), b: (PointId, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// Points of `points` sorted from farthest to nearest with their distances.
pub fn by_descending_distance(points: &[PointId], centers: &CenterSet, data: &Dataset) -> Result<Vec<(PointId, f64)>> {
    if centers.is_empty() {
        return Err(Error::EmptyCenters);
    }
    let mut scored: Vec<(PointId, f64)> = points
        .iter()
        .map(|&x| (x, nearest_in(x, centers.ids(), data).map_or(0.0, |(_, d)| d)))
        .collect();
    scored.sort_by(|&a, &b| far_order(a, b));
    Ok(scored)
}

/// The `r` points of `points` farthest from `centers`, farthest first.
///
/// When `r >= |points|` every point is returned (the trivial far set).
pub fn far_r(points: &[PointId], centers: &CenterSet, r: usize, data: &Dataset) -> Result<Vec<PointId>> {
    let scored = by_descending_distance(points, centers, data)?;
    Ok(scored.into_iter().take(r).map(|(p, _)| p).collect())
}

/// Risk of `centers` on `points` after discarding the `r` farthest points.
///
/// The remaining distances are summed in the order of `points`.
pub fn truncated_risk(points: &[PointId], centers: &CenterSet, r: usize, data: &Dataset) -> Result<f64> {
    if r == 0 {
        return risk(points, centers, data);
    }
    let far = far_r(points, centers, r, data)?;
    let mut far_sorted = far;
    far_sorted.sort_unstable();
    let kept: Vec<PointId> = points.iter().copied().filter(|p| far_sorted.binary_search(p).is_err()).collect();
    risk(&kept, centers, data)
}

/// Sum of `values` after discarding the `r` largest, accumulated in input
/// order. Equal values are discarded earliest-position first.
pub fn truncated_sum(values: &[f64], r: usize) -> f64 {
    if r == 0 {
        return values.iter().fold(0.0, |acc, v| acc + v);
    }
    if r >= values.len() {
        return 0.0;
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let mut dropped = vec![false; values.len()];
    for &i in &order[..r] {
        dropped[i] = true;
    }
    values.iter().zip(&dropped).filter(|(_, &d)| !d).fold(0.0, |acc, (v, _)| acc + v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn line(xs: &[f64]) -> Dataset {
        Dataset::from_points(xs.iter().map(|&x| vec![x]).collect()).unwrap()
    }

    fn random_points(n: usize, dim: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Dataset::from_points((0..n).map(|_| (0..dim).map(|_| rng.gen_range(-10.0..10.0)).collect()).collect()).unwrap()
    }

    fn cs(raw: &[usize]) -> CenterSet {
        CenterSet::new(ids(raw))
    }

    #[test]
    fn nearest_center_of_member_is_itself() {
        let d = line(&[0.0, 1.0, 2.0]);
        assert_eq!(nearest_center(PointId(2), &cs(&[0, 2]), &d).unwrap(), (PointId(2), 0.0));
    }

    #[test]
    fn nearest_center_tie_prefers_smaller_id() {
        let d = line(&[0.0, 1.0, 2.0]);
        assert_eq!(nearest_center(PointId(1), &cs(&[2, 0]), &d).unwrap(), (PointId(0), 1.0));
    }

    #[test]
    fn nearest_center_matches_linear_scan() {
        let d = random_points(20, 3, 7);
        let t = cs(&[3, 11, 17]);
        for x in d.point_ids() {
            let mut best = (PointId(usize::MAX), f64::INFINITY);
            for &c in &[3usize, 11, 17] {
                let dist = d.dist(x, PointId(c));
                if dist < best.1 {
                    best = (PointId(c), dist);
                }
            }
            assert_eq!(nearest_center(x, &t, &d).unwrap(), best);
        }
    }

    #[test]
    fn empty_sums_are_positive_zero() {
        let d = Dataset::from_points(vec![vec![0.0], vec![3.0]]).unwrap();
        let t = CenterSet::new(ids(&[0]));
        assert_eq!(risk(&[], &t, &d).unwrap().to_bits(), 0f64.to_bits());
        assert_eq!(truncated_risk(&d.point_ids(), &t, 5, &d).unwrap().to_bits(), 0f64.to_bits());
        assert_eq!(truncated_sum(&[], 0).to_bits(), 0f64.to_bits());
    }

    #[test]
    fn empty_centers_is_an_error() {
        let d = line(&[0.0, 1.0]);
        assert!(matches!(nearest_center(PointId(0), &CenterSet::new(vec![]), &d), Err(Error::EmptyCenters)));
        assert!(risk(&ids(&[0]), &CenterSet::new(vec![]), &d).is_err());
    }

    #[test]
    fn risk_examples() {
        let d = line(&[0.0, 1.0, 2.0]);
        assert_eq!(risk(&ids(&[0, 1, 2]), &cs(&[0, 1, 2]), &d).unwrap(), 0.0);
        assert_eq!(risk(&ids(&[0, 1, 2]), &cs(&[0]), &d).unwrap(), 3.0);
        assert_eq!(risk(&[], &cs(&[0]), &d).unwrap(), 0.0);
    }

    #[test]
    fn risk_matches_double_loop() {
        let d = random_points(10, 2, 3);
        let t = cs(&[1, 6]);
        let mut total = 0.0;
        for i in 0..10 {
            let mut m = f64::INFINITY;
            for c in [1usize, 6] {
                m = m.min(d.dist(PointId(i), PointId(c)));
            }
            total += m;
        }
        assert_eq!(risk(&d.point_ids(), &t, &d).unwrap(), total);
    }

    #[test]
    fn far_r_examples() {
        let d = line(&[0.0, 1.0, 5.0, 9.0]);
        let all = d.point_ids();
        let t = cs(&[0]);
        assert!(far_r(&all, &t, 0, &d).unwrap().is_empty());
        assert_eq!(far_r(&all, &t, 2, &d).unwrap(), ids(&[3, 2]));
        let trivial = far_r(&all, &t, all.len() + 3, &d).unwrap();
        assert_eq!(CenterSet::new(trivial), CenterSet::new(all));
    }

    #[test]
    fn far_r_tie_prefers_smaller_id() {
        let d = line(&[0.0, 2.0, -2.0, 1.0]);
        assert_eq!(far_r(&ids(&[3, 2, 1]), &cs(&[0]), 1, &d).unwrap(), ids(&[1]));
    }

    #[test]
    fn truncated_risk_examples() {
        let d = line(&[0.0, 1.0, 5.0, 9.0]);
        let all = d.point_ids();
        let t = cs(&[0]);
        assert_eq!(truncated_risk(&all, &t, 0, &d).unwrap(), risk(&all, &t, &d).unwrap());
        assert_eq!(truncated_risk(&all, &t, 2, &d).unwrap(), 1.0);
        assert_eq!(truncated_risk(&all, &t, 4, &d).unwrap(), 0.0);
    }

    #[test]
    fn truncated_risk_matches_sort_oracle() {
        let d = random_points(30, 2, 11);
        let t = cs(&[0, 9, 21]);
        let all = d.point_ids();
        let mut dists: Vec<f64> = all.iter().map(|&x| dist_to_set(x, &t, &d).unwrap()).collect();
        dists.sort_by(|a, b| a.total_cmp(b));
        let oracle: f64 = dists[..30 - 7].iter().sum();
        let got = truncated_risk(&all, &t, 7, &d).unwrap();
        assert!((got - oracle).abs() <= 1e-12 * oracle);
    }

    #[test]
    fn truncated_sum_drops_largest() {
        assert_eq!(truncated_sum(&[1.0, 5.0, 2.0, 5.0], 2), 3.0);
        assert_eq!(truncated_sum(&[1.0, 2.0], 0), 3.0);
        assert_eq!(truncated_sum(&[1.0, 2.0], 2), 0.0);
    }

    #[test]
    fn matrix_mode_validates_axioms() {
        let ok = Dataset::from_matrix(vec![vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 1.0], vec![2.0, 1.0, 0.0]]).unwrap();
        assert_eq!(ok.dist(PointId(0), PointId(2)), 2.0);
        assert!(Dataset::from_matrix(vec![vec![0.0, 1.0], vec![2.0, 0.0]]).is_err());
        assert!(Dataset::from_matrix(vec![vec![1.0]]).is_err());
        let bad_triangle = vec![vec![0.0, 1.0, 5.0], vec![1.0, 0.0, 1.0], vec![5.0, 1.0, 0.0]];
        assert!(Dataset::from_matrix(bad_triangle).is_err());
        assert!(Dataset::from_points(vec![vec![f64::NAN]]).is_err());
        assert!(Dataset::from_points(vec![]).is_err());
    }

    proptest! {
        #[test]
        fn risk_monotone_and_antitone(seed in 0u64..1000, cut in 1usize..15, extra in 0usize..15) {
            let d = random_points(15, 2, seed);
            let all = d.point_ids();
            let t = cs(&[0, 5]);
            let bigger = cs(&[0, 5, extra]);
            let sub = &all[..cut];
            prop_assert!(risk(sub, &t, &d).unwrap() <= risk(&all, &t, &d).unwrap());
            prop_assert!(risk(&all, &bigger, &d).unwrap() <= risk(&all, &t, &d).unwrap());
        }

        #[test]
        fn truncation_is_monotone_and_far_sets_nest(seed in 0u64..1000, r in 0usize..20) {
            let d = random_points(18, 2, seed);
            let all = d.point_ids();
            let t = cs(&[2, 9]);
            prop_assert!(truncated_risk(&all, &t, r + 1, &d).unwrap() <= truncated_risk(&all, &t, r, &d).unwrap());
            let small = far_r(&all, &t, r, &d).unwrap();
            let large = far_r(&all, &t, r + 1, &d).unwrap();
            prop_assert!(small.iter().all(|p| large.contains(p)));
            prop_assert_eq!(small.len(), r.min(all.len()));
            prop_assert_eq!(nearest_center(all[r % 18], &t, &d).unwrap(), nearest_center(all[r % 18], &t, &d).unwrap());
        }
    }
}
