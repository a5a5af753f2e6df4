//! Multiscale orchestration of selection-procedure copies.
//!
//! Copy `i` reads phases of `s_i = 2^(i-1) s_1` points each for its first two
//! phases and `2 s_i` points for its selection phase, so the span it observes
//! coincides with the first two phases of copy `i+1`. The last copy selects
//! over the rest of the stream with a larger quota. Every stream point is fed
//! to every copy; a point selected by any copy is a center.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{CenterSet, Dataset, PointId};
use crate::params::{self, ceil_snap, Profile};
use crate::select_proc::{Decision, SelectProc, SelectProcConfig, SelectProcReport};
use crate::solver::KMedianSolver;

/// Configurations of all copies plus the quantities they share.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub k: usize,
    pub n: usize,
    pub delta: f64,
    pub profile: Profile,
    pub copies: Vec<SelectProcConfig>,
    /// Number of doublings `I`; there are `I + 1` copies.
    pub doublings: usize,
    pub delta_prime: f64,
    /// Phase-one length of the first copy.
    pub s1: usize,
    /// Shared `tau = phi_{alpha_{I+1}}` computed with `delta'`.
    pub tau: f64,
    pub clamped: bool,
    pub warnings: Vec<String>,
}

/// Builds the copy schedule for a stream of `n` points.
pub fn compute_schedule(k: usize, delta: f64, n: usize, profile: Profile) -> Result<Schedule> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("k must be at least 2, got {k}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0,1), got {delta}")));
    }
    if n < 4 {
        return Err(Error::InvalidParameter(format!("stream of {n} points is too short; need at least 4")));
    }
    profile.validate()?;

    let alpha1 = params::alpha_one(k, delta);
    let doublings = params::doublings(alpha1);
    let delta_prime = params::delta_prime(delta, doublings);
    let alpha_last = alpha1 * 2f64.powi(doublings as i32);
    let tau = params::phi_alpha(k, delta_prime, alpha_last, &profile);
    let last_quota = params::quota(params::k_plus(k, delta_prime, &profile), delta_prime);

    let s1 = (ceil_snap(alpha1 * n as f64) as usize).max(1);
    let half = n / 2;
    let mut clamped = false;
    let mut copies = Vec::with_capacity(doublings + 1);
    for i in 0..=doublings {
        let last = i == doublings;
        let alpha = alpha1 * 2f64.powi(i as i32);
        let s = s1 << i;
        let p1_end = if s > half {
            clamped = true;
            half
        } else {
            s
        };
        let p2_end = 2 * p1_end;
        let p3_end = if last {
            n
        } else if 4 * s > n {
            clamped = true;
            n
        } else {
            4 * s
        };
        copies.push(SelectProcConfig {
            k,
            n,
            delta: delta_prime,
            alpha,
            gamma: if last { 1.0 - 2.0 * alpha } else { 2.0 * alpha },
            m: if last { last_quota } else { 1 },
            tau,
            profile,
            p1_end,
            p2_end,
            p3_end,
        });
    }
    for c in &copies {
        c.validate()?;
    }
    let mut warnings = Vec::new();
    if clamped {
        warnings.push(format!(
            "schedule clamped for n = {n}: doubled phase lengths exceed the stream, phases no longer overlap exactly"
        ));
    }
    Ok(Schedule { k, n, delta, profile, copies, doublings, delta_prime, s1, tau, clamped, warnings })
}

impl Schedule {
    pub fn num_copies(&self) -> usize {
        self.copies.len()
    }

    /// Index of the copy whose selection phase contains stream index `t`, if any.
    pub fn selecting_copy(&self, t: usize) -> Option<usize> {
        self.copies.iter().position(|c| c.p2_end <= t && t < c.p3_end)
    }

    /// Copies whose selection phase contains `t`.
    pub fn selecting_copies(&self, t: usize) -> Vec<usize> {
        (0..self.copies.len()).filter(|&i| self.copies[i].p2_end <= t && t < self.copies[i].p3_end).collect()
    }
}

/// Decision for one stream point across all copies.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepDecision {
    pub index: usize,
    pub point: PointId,
    pub selected: bool,
    /// Decision of each copy, in copy order.
    pub per_copy: Vec<Decision>,
}

/// Result of a complete run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MunscResult {
    pub centers: CenterSet,
    /// Selected points in the order they were selected.
    pub selection_order: Vec<PointId>,
    pub copies: Vec<SelectProcReport>,
}

/// Streaming runner holding one state per copy.
pub struct Munsc<'a> {
    schedule: Schedule,
    data: &'a Dataset,
    solver: &'a dyn KMedianSolver,
    copies: Vec<SelectProc>,
    cursor: usize,
    selection_order: Vec<PointId>,
    chosen: Vec<bool>,
}

impl<'a> Munsc<'a> {
    pub fn new(schedule: Schedule, data: &'a Dataset, solver: &'a dyn KMedianSolver) -> Result<Self> {
        if schedule.n != data.len() {
            return Err(Error::InvalidParameter(format!(
                "schedule is for {} points, dataset has {}",
                schedule.n,
                data.len()
            )));
        }
        let copies = schedule.copies.iter().cloned().map(SelectProc::new).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            chosen: vec![false; data.len()],
            schedule,
            data,
            solver,
            copies,
            cursor: 0,
            selection_order: Vec::new(),
        })
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    /// Feeds the next stream point to every copy, first copy first.
    pub fn observe(&mut self, x: PointId) -> Result<StepDecision> {
        let per_copy = self
            .copies
            .iter_mut()
            .map(|c| c.observe(x, self.data, self.solver))
            .collect::<Result<Vec<_>>>()?;
        let selected = per_copy.iter().any(|d| d.is_selected());
        if selected && !self.chosen[x.0] {
            self.chosen[x.0] = true;
            self.selection_order.push(x);
        }
        let index = self.cursor;
        self.cursor += 1;
        Ok(StepDecision { index, point: x, selected, per_copy })
    }

    /// Current union of selections.
    pub fn selected(&self) -> &[PointId] {
        &self.selection_order
    }

    pub fn copies(&self) -> &[SelectProc] {
        &self.copies
    }

    pub fn finish(self) -> Result<MunscResult> {
        if self.cursor != self.schedule.n {
            return Err(Error::ContractViolation(format!(
                "run finished after {} of {} points",
                self.cursor, self.schedule.n
            )));
        }
        let copies = self.copies.iter().map(SelectProc::finish).collect::<Result<Vec<_>>>()?;
        Ok(MunscResult { centers: CenterSet::new(self.selection_order.clone()), selection_order: self.selection_order, copies })
    }
}

/// Runs all copies over `stream`, which must be a permutation of the dataset.
pub fn run_stream(stream: &[PointId], schedule: &Schedule, data: &Dataset, solver: &dyn KMedianSolver) -> Result<MunscResult> {
    check_permutation(stream, data.len())?;
    let mut runner = Munsc::new(schedule.clone(), data, solver)?;
    for &x in stream {
        runner.observe(x)?;
    }
    runner.finish()
}

/// Errors unless `stream` is a permutation of `0..n`.
pub fn check_permutation(stream: &[PointId], n: usize) -> Result<()> {
    if stream.len() != n {
        return Err(Error::InvalidParameter(format!("stream has {} points, expected {n}", stream.len())));
    }
    let mut seen = vec![false; n];
    for &p in stream {
        if p.0 >= n || std::mem::replace(&mut seen[p.0], true) {
            return Err(Error::InvalidParameter(format!("stream is not a permutation: {p} repeated or out of range")));
        }
    }
    Ok(())
}
