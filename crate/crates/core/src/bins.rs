//! Linear bin divisions and the representation predicates built on them.
//!
//! A z-linear bin division orders a point set by decreasing distance to a
//! reference clustering and cuts it into bins whose sizes grow linearly:
//!
//! 1. `|B(i)| >= z (i+1) / 2` for every bin (unless the division is trivial),
//! 2. `|B(1)| <= 5z/2`,
//! 3. `|B(i+1)| / |B(i)| <= 3/2`,
//! 4. every point of `B(i)` is at least as far as every point of `B(i+1)`.
//!
//! Inputs smaller than `z` get the trivial division with a single bin.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{by_descending_distance, dist_to_set, risk, CenterSet, Dataset, PointId};

/// An ordered partition of a point set into linearly growing bins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinDivision {
    pub bins: Vec<Vec<PointId>>,
    pub z: usize,
    pub reference: CenterSet,
    pub trivial: bool,
}

/// A failed bin-division property.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BinViolation {
    NotAPartition,
    /// 1-based bin index below `z (i+1) / 2`.
    TooSmall { bin: usize, size: usize },
    FirstTooLarge { size: usize },
    RatioTooLarge { bin: usize },
    OutOfOrder { bin: usize },
}

/// Bin sizes for a non-trivial division of `size` points, or `None` when no
/// integer sizes satisfy properties 1 to 3.
///
/// Targets follow the real-valued construction `z (i+1)/2 + (|W| - B)/L` with
/// `L` the largest count such that `B = sum z (i+1)/2 <= |W|`. A memoised
/// depth-first search picks, bin by bin, the admissible integer nearest the
/// target, backtracking when the remaining points cannot be placed.
pub fn bin_sizes(size: usize, z: usize) -> Option<Vec<usize>> {
    assert!(z >= 1 && size >= z);
    // sum_{i<=L} z(i+1)/2 = z L (L+3) / 4
    let mut levels = 1usize;
    while z * (levels + 1) * (levels + 4) <= 4 * size {
        levels += 1;
    }
    let base = (z * levels * (levels + 3)) as f64 / 4.0;
    let spread = (size as f64 - base) / levels as f64;

    struct Search {
        z: usize,
        spread: f64,
        dead: HashSet<(usize, usize, usize)>,
        sizes: Vec<usize>,
    }
    impl Search {
        fn go(&mut self, bin: usize, prev: usize, rest: usize) -> bool {
            if rest == 0 {
                return true;
            }
            if self.dead.contains(&(bin, prev, rest)) {
                return false;
            }
            let lo = (self.z * (bin + 1)).div_ceil(2);
            let hi = rest.min(if prev == 0 { 5 * self.z / 2 } else { 3 * prev / 2 });
            if lo <= hi {
                let target = (self.z * (bin + 1)) as f64 / 2.0 + self.spread;
                let start = (target.round().max(lo as f64) as usize).min(hi);
                // Visit candidates outward from the target.
                let mut order = Vec::with_capacity(hi - lo + 1);
                order.push(start);
                let (mut down, mut up) = (start, start);
                while down > lo || up < hi {
                    let next_up = (up < hi).then_some(up + 1);
                    let next_down = (down > lo).then(|| down - 1);
                    match (next_down, next_up) {
                        (Some(d), Some(u)) => {
                            if target - d as f64 <= u as f64 - target {
                                order.push(d);
                                order.push(u);
                            } else {
                                order.push(u);
                                order.push(d);
                            }
                            down = d;
                            up = u;
                        }
                        (Some(d), None) => {
                            order.push(d);
                            down = d;
                        }
                        (None, Some(u)) => {
                            order.push(u);
                            up = u;
                        }
                        (None, None) => break,
                    }
                }
                for b in order {
                    self.sizes.push(b);
                    if self.go(bin + 1, b, rest - b) {
                        return true;
                    }
                    self.sizes.pop();
                }
            }
            self.dead.insert((bin, prev, rest));
            false
        }
    }

    let mut search = Search { z, spread, dead: HashSet::new(), sizes: Vec::with_capacity(levels + 1) };
    search.go(1, 0, size).then_some(search.sizes)
}

/// Builds a z-linear bin division of `points` with respect to `reference`.
///
/// Points are allocated by decreasing distance to `reference`, ties by
/// increasing id. Fails with [`Error::NoLinearDivision`] for the sizes where
/// no integer division exists (odd `z` with `|W| = (5z+1)/2`).
pub fn build_division(points: &[PointId], reference: &CenterSet, z: usize, data: &Dataset) -> Result<BinDivision> {
    if points.is_empty() {
        return Err(Error::Precondition("cannot divide an empty set".into()));
    }
    if z == 0 {
        return Err(Error::InvalidParameter("z must be positive".into()));
    }
    let ordered: Vec<PointId> = by_descending_distance(points, reference, data)?.into_iter().map(|(p, _)| p).collect();
    let division = if ordered.len() < z {
        BinDivision { bins: vec![ordered], z, reference: reference.clone(), trivial: true }
    } else {
        let sizes = bin_sizes(ordered.len(), z).ok_or(Error::NoLinearDivision { size: ordered.len(), z })?;
        let mut bins = Vec::with_capacity(sizes.len());
        let mut rest = ordered.as_slice();
        for s in sizes {
            let (head, tail) = rest.split_at(s);
            bins.push(head.to_vec());
            rest = tail;
        }
        BinDivision { bins, z, reference: reference.clone(), trivial: false }
    };
    division
        .validate(points, data)
        .map_err(|v| Error::ContractViolation(format!("bin division failed validation: {v:?}")))?;
    Ok(division)
}

impl BinDivision {
    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    /// Checks the partition and the four defining properties against `points`.
    pub fn validate(&self, points: &[PointId], data: &Dataset) -> std::result::Result<(), BinViolation> {
        let mut seen: Vec<PointId> = self.bins.iter().flatten().copied().collect();
        let mut expected = points.to_vec();
        seen.sort_unstable();
        expected.sort_unstable();
        expected.dedup();
        if seen != expected || self.bins.iter().any(Vec::is_empty) {
            return Err(BinViolation::NotAPartition);
        }
        let z = self.z;
        if self.trivial {
            return if self.bins.len() == 1 && expected.len() < z { Ok(()) } else { Err(BinViolation::NotAPartition) };
        }
        for (i, bin) in self.bins.iter().enumerate() {
            // 2|B(i)| >= z (i+1), exact in integers; bins are 1-based.
            if 2 * bin.len() < z * (i + 2) {
                return Err(BinViolation::TooSmall { bin: i + 1, size: bin.len() });
            }
        }
        if 2 * self.bins[0].len() > 5 * z {
            return Err(BinViolation::FirstTooLarge { size: self.bins[0].len() });
        }
        for i in 0..self.bins.len() - 1 {
            if 2 * self.bins[i + 1].len() > 3 * self.bins[i].len() {
                return Err(BinViolation::RatioTooLarge { bin: i + 1 });
            }
            let nearest_here = self.bins[i]
                .iter()
                .map(|&p| dist_to_set(p, &self.reference, data).unwrap_or(f64::NAN))
                .fold(f64::INFINITY, f64::min);
            let farthest_next = self.bins[i + 1]
                .iter()
                .map(|&p| dist_to_set(p, &self.reference, data).unwrap_or(f64::NAN))
                .fold(f64::NEG_INFINITY, f64::max);
            if nearest_here.is_nan() || farthest_next.is_nan() || nearest_here < farthest_next {
                return Err(BinViolation::OutOfOrder { bin: i + 1 });
            }
        }
        Ok(())
    }
}

/// Whether `subset` is well-represented in `sample` for `universe`:
/// `|subset ∩ sample| / |subset|` lies in `[r/2, 3r/2]` with
/// `r = |sample| / |universe|`. Compared exactly in integers.
pub fn check_well_represented(subset: &[PointId], sample: &[PointId], universe: &[PointId]) -> Result<bool> {
    if subset.is_empty() {
        return Err(Error::ContractViolation("well-representedness needs a non-empty subset".into()));
    }
    let universe: HashSet<PointId> = universe.iter().copied().collect();
    let sample: HashSet<PointId> = sample.iter().copied().collect();
    let subset: HashSet<PointId> = subset.iter().copied().collect();
    if !subset.is_subset(&universe) || !sample.is_subset(&universe) {
        return Err(Error::Precondition("subset and sample must lie in the universe".into()));
    }
    let overlap = subset.intersection(&sample).count() as u128;
    let (b, a, w) = (subset.len() as u128, sample.len() as u128, universe.len() as u128);
    // overlap/b in [a/(2w), 3a/(2w)]
    Ok(2 * overlap * w >= a * b && 2 * overlap * w <= 3 * a * b)
}

/// Relative slack applied to the tail-risk inequality.
pub const TAIL_RISK_SLACK: f64 = 1e-9;

/// Checks `R(A \ B(1), T) <= (3/2) r R(W, T)` for a division of `W`.
///
/// Requires `A ⊆ W` and `|B(i) ∩ A| <= r |B(i)|` for every bin; a violated
/// premise is reported as an error rather than `false`.
pub fn tail_risk_bound_holds(division: &BinDivision, sample: &[PointId], r: f64, data: &Dataset) -> Result<bool> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::InvalidParameter(format!("r must lie in (0,1), got {r}")));
    }
    let sample_set: HashSet<PointId> = sample.iter().copied().collect();
    let universe: Vec<PointId> = division.bins.iter().flatten().copied().collect();
    let universe_set: HashSet<PointId> = universe.iter().copied().collect();
    if !sample_set.is_subset(&universe_set) {
        return Err(Error::Precondition("sample must lie inside the divided set".into()));
    }
    for (i, bin) in division.bins.iter().enumerate() {
        let hits = bin.iter().filter(|p| sample_set.contains(p)).count();
        if hits as f64 > r * bin.len() as f64 {
            return Err(Error::Precondition(format!(
                "bin {} holds {hits} of {} sampled points, above r = {r}",
                i + 1,
                bin.len()
            )));
        }
    }
    let first: HashSet<PointId> = division.bins[0].iter().copied().collect();
    let tail: Vec<PointId> = sample.iter().copied().filter(|p| !first.contains(p)).collect();
    let lhs = risk(&tail, &division.reference, data)?;
    let rhs = 1.5 * r * risk(&universe, &division.reference, data)?;
    Ok(lhs <= rhs * (1.0 + TAIL_RISK_SLACK))
}
