//! Offline k-median solvers used as the black box inside the streaming
//! procedure and as ground truth.
//!
//! Every solver draws its centers from the input subset and returns at most
//! `k` of them.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{CenterSet, Dataset, PointId};

/// Largest number of candidate subsets the exhaustive solver will enumerate.
pub const EXHAUSTIVE_BUDGET: u128 = 1_000_000;

/// Relative decrease a swap must achieve to be accepted.
pub const SWAP_TOLERANCE: f64 = 1e-12;

/// An offline k-median algorithm with a declared approximation factor.
pub trait KMedianSolver: Send + Sync {
    fn name(&self) -> &'static str;

    /// Approximation factor relative to the best centers-from-input solution.
    fn beta(&self) -> f64;

    fn solve(&self, points: &[PointId], k: usize, data: &Dataset) -> Result<CenterSet>;
}

/// Selects a solver by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Exhaustive,
    LocalSearch,
}

impl SolverKind {
    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "exhaustive" => Some(Self::Exhaustive),
            "local-search" => Some(Self::LocalSearch),
            _ => None,
        }
    }

    pub fn build(self, seed: u64) -> Box<dyn KMedianSolver> {
        match self {
            Self::Exhaustive => Box::new(Exhaustive),
            Self::LocalSearch => Box::new(LocalSearch::new(seed)),
        }
    }
}

fn distinct_sorted(points: &[PointId], data: &Dataset) -> Result<Vec<PointId>> {
    if points.is_empty() {
        return Err(Error::Precondition("solver input is empty".into()));
    }
    let mut pts = points.to_vec();
    for &p in &pts {
        data.check(p)?;
    }
    pts.sort_unstable();
    pts.dedup();
    Ok(pts)
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        Err(Error::InvalidParameter("k must be positive".into()))
    } else {
        Ok(())
    }
}

/// `C(n, m)`, or `None` once it exceeds `cap`.
pub fn binomial_capped(n: usize, m: usize, cap: u128) -> Option<u128> {
    let m = m.min(n - m);
    let mut acc: u128 = 1;
    for i in 0..m {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > cap {
            return None;
        }
    }
    Some(acc)
}

/// Exact solver: enumerates every `min(k, |S|)`-subset of `S` in
/// lexicographic id order and keeps the first one of minimum risk.
#[derive(Clone, Copy, Debug, Default)]
pub struct Exhaustive;

impl Exhaustive {
    /// Number of subsets enumerated for `(|S|, k)`, or a budget error.
    pub fn subsets(size: usize, k: usize) -> Result<u128> {
        let m = k.min(size);
        binomial_capped(size, m, EXHAUSTIVE_BUDGET).ok_or(Error::BudgetExceeded {
            subsets: binomial_capped(size, m, u128::MAX >> 32).unwrap_or(u128::MAX),
            budget: EXHAUSTIVE_BUDGET,
        })
    }
}

struct Enumeration<'a> {
    size: usize,
    m: usize,
    dist: &'a dyn Fn(usize, usize) -> f64,
    chosen: Vec<usize>,
    best: Option<(f64, Vec<usize>)>,
}

impl Enumeration<'_> {
    fn descend(&mut self, start: usize, mins: &[f64]) {
        if self.chosen.len() == self.m {
            let total: f64 = mins.iter().sum();
            if self.best.as_ref().is_none_or(|(b, _)| total < *b) {
                self.best = Some((total, self.chosen.clone()));
            }
            return;
        }
        let remaining = self.m - self.chosen.len();
        let mut next = vec![0.0; self.size];
        for c in start..=self.size - remaining {
            for (p, slot) in next.iter_mut().enumerate() {
                *slot = mins[p].min((self.dist)(p, c));
            }
            self.chosen.push(c);
            self.descend(c + 1, &next);
            self.chosen.pop();
        }
    }
}

impl KMedianSolver for Exhaustive {
    fn name(&self) -> &'static str {
        "exhaustive"
    }

    fn beta(&self) -> f64 {
        1.0
    }

    fn solve(&self, points: &[PointId], k: usize, data: &Dataset) -> Result<CenterSet> {
        check_k(k)?;
        let pts = distinct_sorted(points, data)?;
        if k >= pts.len() {
            return Ok(CenterSet::new(pts));
        }
        Self::subsets(pts.len(), k)?;
        let size = pts.len();
        // Cache pairwise distances unless the table would be large.
        let table: Option<Vec<f64>> = (size <= 3000).then(|| {
            let mut t = vec![0.0; size * size];
            for i in 0..size {
                for j in 0..size {
                    t[i * size + j] = data.dist(pts[i], pts[j]);
                }
            }
            t
        });
        let lookup = |p: usize, c: usize| match &table {
            Some(t) => t[p * size + c],
            None => data.dist(pts[p], pts[c]),
        };
        let mut search = Enumeration { size, m: k, dist: &lookup, chosen: Vec::with_capacity(k), best: None };
        search.descend(0, &vec![f64::INFINITY; size]);
        let (_, chosen) = search.best.expect("at least one subset is enumerated");
        Ok(CenterSet::new(chosen.into_iter().map(|i| pts[i]).collect()))
    }
}

/// Single-swap local search, a 5-approximation at local optima.
///
/// Starts from a greedy farthest-point seeding rooted at the smallest id, then
/// repeatedly applies the first improving swap found while scanning candidate
/// points in a seed-shuffled order. Stops at a local optimum or after
/// `max_iters` swaps.
#[derive(Clone, Copy, Debug)]
pub struct LocalSearch {
    pub max_iters: usize,
    pub seed: u64,
}

impl LocalSearch {
    pub const DEFAULT_MAX_ITERS: usize = 10_000;

    pub fn new(seed: u64) -> Self {
        Self { max_iters: Self::DEFAULT_MAX_ITERS, seed }
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    /// Runs the search and returns the centers with the risk after each
    /// accepted swap (the initial seeding's risk first).
    pub fn solve_traced(&self, points: &[PointId], k: usize, data: &Dataset) -> Result<(CenterSet, Vec<f64>)> {
        check_k(k)?;
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be positive".into()));
        }
        let pts = distinct_sorted(points, data)?;
        if k >= pts.len() {
            return Ok((CenterSet::new(pts), vec![0.0]));
        }
        let mut state = SwapState::new(&pts, farthest_first(&pts, k, data), data);
        let mut trace = vec![state.risk];
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut candidates: Vec<usize> = (0..pts.len()).collect();
        let mut swaps = 0;
        'search: while swaps < self.max_iters {
            candidates.shuffle(&mut rng);
            for &x in &candidates {
                if state.is_center[x] {
                    continue;
                }
                let Some(slot) = state.best_removal(x) else { continue };
                if state.try_swap(slot, x) {
                    swaps += 1;
                    trace.push(state.risk);
                    continue 'search;
                }
            }
            break;
        }
        Ok((CenterSet::new(state.centers.iter().map(|&c| pts[c]).collect()), trace))
    }
}

impl KMedianSolver for LocalSearch {
    fn name(&self) -> &'static str {
        "local-search"
    }

    fn beta(&self) -> f64 {
        5.0
    }

    fn solve(&self, points: &[PointId], k: usize, data: &Dataset) -> Result<CenterSet> {
        self.solve_traced(points, k, data).map(|(c, _)| c)
    }
}

/// Greedy farthest-point seeding over positions of `pts`, starting at position 0.
fn farthest_first(pts: &[PointId], k: usize, data: &Dataset) -> Vec<usize> {
    let mut centers = vec![0usize];
    let mut gap: Vec<f64> = pts.iter().map(|&p| data.dist(p, pts[0])).collect();
    while centers.len() < k {
        let mut far = 0;
        for i in 1..pts.len() {
            if gap[i] > gap[far] {
                far = i;
            }
        }
        if gap[far] == 0.0 && centers.contains(&far) {
            // Only duplicates remain; fill with the smallest unused positions.
            let Some(free) = (0..pts.len()).find(|i| !centers.contains(i)) else { break };
            far = free;
        }
        centers.push(far);
        for (i, g) in gap.iter_mut().enumerate() {
            *g = g.min(data.dist(pts[i], pts[far]));
        }
    }
    centers
}

struct SwapState<'a> {
    pts: &'a [PointId],
    data: &'a Dataset,
    centers: Vec<usize>,
    is_center: Vec<bool>,
    nearest: Vec<usize>,
    d1: Vec<f64>,
    d2: Vec<f64>,
    risk: f64,
}

impl<'a> SwapState<'a> {
    fn new(pts: &'a [PointId], centers: Vec<usize>, data: &'a Dataset) -> Self {
        let n = pts.len();
        let mut is_center = vec![false; n];
        for &c in &centers {
            is_center[c] = true;
        }
        let mut s = Self {
            pts,
            data,
            centers,
            is_center,
            nearest: vec![0; n],
            d1: vec![0.0; n],
            d2: vec![0.0; n],
            risk: 0.0,
        };
        s.risk = s.refresh(&s.centers.clone(), true);
        s
    }

    /// Recomputes nearest/second-nearest caches for `centers` and returns the
    /// risk. Caches are only written when `commit` is set.
    fn refresh(&mut self, centers: &[usize], commit: bool) -> f64 {
        let mut total = 0.0;
        for p in 0..self.pts.len() {
            let (mut slot, mut best, mut second) = (0, f64::INFINITY, f64::INFINITY);
            for (s, &c) in centers.iter().enumerate() {
                let d = self.data.dist(self.pts[p], self.pts[c]);
                if d < best {
                    second = best;
                    best = d;
                    slot = s;
                } else if d < second {
                    second = d;
                }
            }
            total += best;
            if commit {
                self.nearest[p] = slot;
                self.d1[p] = best;
                self.d2[p] = second;
            }
        }
        total
    }

    /// Best center slot to trade for candidate `x`, if the swap is predicted
    /// to lower the risk.
    fn best_removal(&self, x: usize) -> Option<usize> {
        let mut shared = 0.0;
        let mut per_slot = vec![0.0; self.centers.len()];
        for p in 0..self.pts.len() {
            let dx = self.data.dist(self.pts[p], self.pts[x]);
            if dx < self.d1[p] {
                shared += dx - self.d1[p];
            } else {
                per_slot[self.nearest[p]] += self.d2[p].min(dx) - self.d1[p];
            }
        }
        let (slot, gain) = per_slot
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (s, &g)| if g < acc.1 { (s, g) } else { acc });
        (shared + gain < -SWAP_TOLERANCE * self.risk).then_some(slot)
    }

    /// Applies the swap when the recomputed risk strictly improves.
    fn try_swap(&mut self, slot: usize, x: usize) -> bool {
        let mut next = self.centers.clone();
        next[slot] = x;
        let new_risk = self.refresh(&next, false);
        if new_risk >= self.risk * (1.0 - SWAP_TOLERANCE) {
            return false;
        }
        self.is_center[self.centers[slot]] = false;
        self.is_center[x] = true;
        self.centers = next;
        self.risk = self.refresh(&self.centers.clone(), true);
        true
    }
}
