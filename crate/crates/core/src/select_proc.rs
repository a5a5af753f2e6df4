//! The three-phase selection procedure.
//!
//! One instance consumes the stream one point at a time:
//!
//! * phase one buffers points and, on its last point, computes a reference
//!   clustering `T_alpha` with `k+` centers using the offline black box;
//! * phase two records each point's distance to `T_alpha` and, on its last
//!   point, computes the outlier-truncated risk estimate `psi`;
//! * phase three decides for each point, before the next one is read, whether
//!   it becomes a center. A point is taken when it lies farther than
//!   `psi / (k tau)` from its nearest reference center, when that center has
//!   fewer than `M` observed phase-three points, or when no selected point
//!   lies within the threshold of that center yet.
//!
//! Points after the third phase are ignored.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{nearest_position, truncated_sum, CenterSet, Dataset, PointId};
pub use crate::params::{derive_parameters, DerivedParameters, Profile};
use crate::params::{psi_from_truncated, psi_truncation, selection_threshold};
use crate::solver::KMedianSolver;

/// Parameters of one procedure copy. Phase boundaries are stream indices:
/// phase one is `[0, p1_end)`, phase two `[p1_end, p2_end)`, phase three
/// `[p2_end, p3_end)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectProcConfig {
    pub k: usize,
    pub n: usize,
    pub delta: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub m: usize,
    pub tau: f64,
    pub profile: Profile,
    pub p1_end: usize,
    pub p2_end: usize,
    pub p3_end: usize,
}

impl SelectProcConfig {
    /// A standalone copy reading the whole stream: `gamma = 1 - 2 alpha`,
    /// `tau = phi_alpha`, the default quota, and `p1_end = ceil(alpha n)`.
    pub fn standalone(k: usize, n: usize, delta: f64, alpha: f64, profile: Profile) -> Result<Self> {
        let derived = derive_parameters(k, delta, alpha, &profile)?;
        let p1_end = (crate::params::ceil_snap(alpha * n as f64) as usize).clamp(1, n / 2);
        let config = Self {
            k,
            n,
            delta,
            alpha,
            gamma: 1.0 - 2.0 * alpha,
            m: derived.m_default,
            tau: derived.phi_alpha,
            profile,
            p1_end,
            p2_end: 2 * p1_end,
            p3_end: n,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.k == 0 || self.n == 0 {
            return bad("k and n must be positive".into());
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0,1), got {}", self.delta));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0 / 6.0 + 1e-12) {
            return bad(format!("alpha must lie in (0,1/6], got {}", self.alpha));
        }
        if !(self.gamma > self.alpha && self.gamma <= 1.0 - 2.0 * self.alpha + 1e-12) {
            return bad(format!("gamma must lie in (alpha, 1-2alpha], got {}", self.gamma));
        }
        if self.m == 0 || self.tau.is_nan() || self.tau <= 0.0 {
            return bad("M and tau must be positive".into());
        }
        self.profile.validate()?;
        if !(0 < self.p1_end && self.p1_end <= self.p2_end && self.p2_end <= self.p3_end && self.p3_end <= self.n) {
            return bad(format!(
                "phase boundaries must satisfy 0 < p1 <= p2 <= p3 <= n, got {} {} {} (n = {})",
                self.p1_end, self.p2_end, self.p3_end, self.n
            ));
        }
        if self.p2_end - self.p1_end != self.p1_end {
            return bad("the first two phases must have equal length".into());
        }
        Ok(())
    }

    pub fn derived(&self) -> DerivedParameters {
        derive_parameters(self.k, self.delta, self.alpha, &self.profile).expect("validated configuration")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    One,
    Two,
    Three,
    Done,
}

/// Which selection condition fired first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reason {
    /// Farther than the threshold from its reference center.
    Far,
    /// Its reference center had fewer than `M` observed points.
    Quota,
    /// No nearby point had been selected for its reference center.
    NearFlag,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Selected(Reason),
    NotSelected,
    Ignored,
}

impl Decision {
    pub fn is_selected(self) -> bool {
        matches!(self, Decision::Selected(_))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasonCounts {
    pub far: usize,
    pub quota: usize,
    pub near_flag: usize,
}

impl ReasonCounts {
    pub fn total(&self) -> usize {
        self.far + self.quota + self.near_flag
    }

    fn bump(&mut self, reason: Reason) {
        match reason {
            Reason::Far => self.far += 1,
            Reason::Quota => self.quota += 1,
            Reason::NearFlag => self.near_flag += 1,
        }
    }
}

/// Per reference center tallies over phase three.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CenterTally {
    pub center: PointId,
    pub observed: usize,
    pub selected: usize,
    pub near: bool,
}

/// Summary of a finished procedure copy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectProcReport {
    pub config: SelectProcConfig,
    pub derived: DerivedParameters,
    /// Selected points in selection order.
    pub selected: Vec<PointId>,
    pub psi: Option<f64>,
    pub threshold: Option<f64>,
    pub psi_truncation: usize,
    pub t_alpha: Vec<PointId>,
    pub reasons: ReasonCounts,
    pub tallies: Vec<CenterTally>,
    pub warnings: Vec<String>,
}

/// Incremental state of one procedure copy.
#[derive(Clone, Debug)]
pub struct SelectProc {
    config: SelectProcConfig,
    derived: DerivedParameters,
    cursor: usize,
    buffer: Vec<PointId>,
    p2_dists: Vec<f64>,
    t_alpha: Option<CenterSet>,
    psi: Option<f64>,
    threshold: f64,
    near: Vec<bool>,
    observed: Vec<usize>,
    selected_per_center: Vec<usize>,
    selected: Vec<PointId>,
    reasons: ReasonCounts,
}

impl SelectProc {
    pub fn new(config: SelectProcConfig) -> Result<Self> {
        config.validate()?;
        let derived = config.derived();
        Ok(Self {
            buffer: Vec::with_capacity(config.p1_end),
            p2_dists: Vec::with_capacity(config.p2_end - config.p1_end),
            config,
            derived,
            cursor: 0,
            t_alpha: None,
            psi: None,
            threshold: 0.0,
            near: Vec::new(),
            observed: Vec::new(),
            selected_per_center: Vec::new(),
            selected: Vec::new(),
            reasons: ReasonCounts::default(),
        })
    }

    pub fn config(&self) -> &SelectProcConfig {
        &self.config
    }

    pub fn derived(&self) -> DerivedParameters {
        self.derived
    }

    /// Number of stream points consumed so far.
    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn phase(&self) -> Phase {
        let c = &self.config;
        match self.cursor {
            t if t < c.p1_end => Phase::One,
            t if t < c.p2_end => Phase::Two,
            t if t < c.p3_end => Phase::Three,
            _ => Phase::Done,
        }
    }

    /// Reference clustering, available once phase one has ended.
    pub fn reference(&self) -> Option<&CenterSet> {
        self.t_alpha.as_ref()
    }

    /// Risk estimate, available once phase two has ended.
    pub fn psi(&self) -> Option<f64> {
        self.psi
    }

    /// `psi / (k tau)`; zero until phase two has ended.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn selected(&self) -> &[PointId] {
        &self.selected
    }

    /// Number of phase-two distances discarded before estimating `psi`.
    pub fn psi_truncation(&self) -> usize {
        psi_truncation(self.config.k, self.config.alpha, self.derived.phi_alpha)
    }

    /// Feeds the next stream point.
    pub fn observe(&mut self, x: PointId, data: &Dataset, solver: &dyn KMedianSolver) -> Result<Decision> {
        if self.cursor >= self.config.n {
            return Err(Error::ContractViolation(format!("stream of length {} already consumed", self.config.n)));
        }
        data.check(x)?;
        let t = self.cursor;
        let c = &self.config;
        let decision = if t < c.p1_end {
            self.buffer.push(x);
            if t + 1 == c.p1_end {
                let buffer = std::mem::take(&mut self.buffer);
                let reference = solver.solve(&buffer, self.derived.k_plus, data)?;
                if reference.is_empty() || reference.len() > self.derived.k_plus {
                    return Err(Error::ContractViolation(format!(
                        "solver returned {} centers for k+ = {}",
                        reference.len(),
                        self.derived.k_plus
                    )));
                }
                let size = reference.len();
                self.near = vec![false; size];
                self.observed = vec![0; size];
                self.selected_per_center = vec![0; size];
                self.t_alpha = Some(reference);
            }
            Decision::NotSelected
        } else if t < c.p2_end {
            let reference = self.t_alpha.as_ref().expect("reference set at end of phase one");
            let (_, d) = nearest_position(x, reference.ids(), data).ok_or(Error::EmptyCenters)?;
            self.p2_dists.push(d);
            if t + 1 == c.p2_end {
                self.finish_phase_two();
            }
            Decision::NotSelected
        } else if t < c.p3_end {
            self.decide(x, data)?
        } else {
            Decision::Ignored
        };
        self.cursor += 1;
        Ok(decision)
    }

    fn finish_phase_two(&mut self) {
        let dists = std::mem::take(&mut self.p2_dists);
        let kept = truncated_sum(&dists, self.psi_truncation());
        let psi = psi_from_truncated(kept, self.config.alpha, &self.config.profile);
        self.psi = Some(psi);
        self.threshold = selection_threshold(psi, self.config.k, self.config.tau);
    }

    fn decide(&mut self, x: PointId, data: &Dataset) -> Result<Decision> {
        let reference = self.t_alpha.as_ref().expect("reference set at end of phase one");
        let (i, d) = nearest_position(x, reference.ids(), data).ok_or(Error::EmptyCenters)?;
        let seen_before = self.observed[i];
        self.observed[i] += 1;
        let reason = if d > self.threshold {
            Some(Reason::Far)
        } else if seen_before < self.config.m {
            Some(Reason::Quota)
        } else if !self.near[i] {
            Some(Reason::NearFlag)
        } else {
            None
        };
        Ok(match reason {
            Some(reason) => {
                if d <= self.threshold {
                    self.near[i] = true;
                }
                self.selected.push(x);
                self.selected_per_center[i] += 1;
                self.reasons.bump(reason);
                Decision::Selected(reason)
            }
            None => Decision::NotSelected,
        })
    }

    /// Summarizes the run. Every index up to `p3_end` must have been consumed.
    pub fn finish(&self) -> Result<SelectProcReport> {
        if self.cursor < self.config.p3_end {
            return Err(Error::ContractViolation(format!(
                "finish called after {} of {} assigned stream points",
                self.cursor, self.config.p3_end
            )));
        }
        let mut warnings = Vec::new();
        if self.psi == Some(0.0) {
            warnings.push(format!(
                "psi = 0: truncation of {} covers all {} phase-two points; every point at positive distance is selected",
                self.psi_truncation(),
                self.config.p2_end - self.config.p1_end
            ));
        }
        let tallies = self
            .t_alpha
            .as_ref()
            .map(|t| {
                t.ids()
                    .iter()
                    .enumerate()
                    .map(|(i, &center)| CenterTally {
                        center,
                        observed: self.observed[i],
                        selected: self.selected_per_center[i],
                        near: self.near[i],
                    })
                    .collect()
            })
            .unwrap_or_default();
        Ok(SelectProcReport {
            config: self.config.clone(),
            derived: self.derived,
            selected: self.selected.clone(),
            psi: self.psi,
            threshold: self.psi.map(|_| self.threshold),
            psi_truncation: self.psi_truncation(),
            t_alpha: self.t_alpha.as_ref().map(|t| t.ids().to_vec()).unwrap_or_default(),
            reasons: self.reasons,
            tallies,
            warnings,
        })
    }
}

impl SelectProcReport {
    /// Reference centers with at least `M` observed phase-three points but
    /// fewer than `M` selected among them.
    pub fn quota_shortfalls(&self) -> Vec<PointId> {
        let m = self.config.m;
        self.tallies.iter().filter(|t| t.observed >= m && t.selected < m).map(|t| t.center).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{dist_to_set, ids, truncated_risk};
    use crate::solver::{Exhaustive, LocalSearch};
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn config(n: usize, p1: usize, m: usize, tau: f64) -> SelectProcConfig {
        SelectProcConfig {
            k: 2,
            n,
            delta: 0.1,
            alpha: 1.0 / 6.0,
            gamma: 1.0 / 6.0 + 0.01,
            m,
            tau,
            profile: Profile::DESK,
            p1_end: p1,
            p2_end: 2 * p1,
            p3_end: n,
        }
    }

    /// Two tight clusters near 0 and 100 plus a far point at 10⁴.
    fn clusters() -> Dataset {
        let mut pts: Vec<Vec<f64>> = Vec::new();
        for i in 0..20 {
            pts.push(vec![i as f64 * 0.01]);
            pts.push(vec![100.0 + i as f64 * 0.01]);
        }
        pts.push(vec![10_000.0]);
        Dataset::from_points(pts).unwrap()
    }

    #[test]
    fn phases_one_and_two_never_select() {
        let d = clusters();
        let mut sp = SelectProc::new(config(d.len(), 8, 1, 1.0)).unwrap();
        for t in 0..16 {
            assert_eq!(sp.observe(PointId(t), &d, &Exhaustive).unwrap(), Decision::NotSelected);
        }
        assert!(sp.reference().is_some());
        assert!(sp.psi().is_some());
        assert_eq!(sp.phase(), Phase::Three);
    }

    #[test]
    fn phase_three_conditions() {
        let d = clusters();
        // Phase one sees both clusters; k+ exceeds 8 so T_alpha is all of P1.
        let order: Vec<PointId> = ids(&[0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15]);
        let mut sp = SelectProc::new(config(d.len(), 8, 1, 1.0)).unwrap();
        for &p in &order {
            sp.observe(p, &d, &Exhaustive).unwrap();
        }
        let threshold = sp.threshold();
        assert!(threshold >= 0.0);
        // The far point is selected for distance.
        assert_eq!(sp.observe(PointId(40), &d, &Exhaustive).unwrap(), Decision::Selected(Reason::Far));
        // Drain the rest; every decision is consistent with the three conditions.
        for t in 16..40 {
            sp.observe(PointId(t), &d, &Exhaustive).unwrap();
        }
        let report = sp.finish().unwrap();
        assert_eq!(report.reasons.total(), report.selected.len());
        assert!(report.quota_shortfalls().is_empty());
    }

    #[test]
    fn saturated_center_rejects_close_points() {
        let d = Dataset::from_points(vec![vec![0.0], vec![0.0], vec![1.0], vec![1.0], vec![0.5], vec![0.5], vec![0.5]]).unwrap();
        let mut cfg = config(7, 1, 1, 1.0);
        cfg.p3_end = 5;
        let mut sp = SelectProc::new(cfg).unwrap();
        sp.observe(PointId(0), &d, &Exhaustive).unwrap();
        sp.observe(PointId(2), &d, &Exhaustive).unwrap();
        // The truncation count exceeds |P2| = 1, so psi = 0.
        assert_eq!(sp.psi(), Some(0.0));
        // First phase-three point at distance 0: quota.
        assert_eq!(sp.observe(PointId(1), &d, &Exhaustive).unwrap(), Decision::Selected(Reason::Quota));
        // Second at distance 0: quota full, near flag set, within threshold 0.
        assert_eq!(sp.observe(PointId(1), &d, &Exhaustive).unwrap(), Decision::NotSelected);
        // Positive distance with psi = 0 is far.
        assert_eq!(sp.observe(PointId(4), &d, &Exhaustive).unwrap(), Decision::Selected(Reason::Far));
        assert_eq!(sp.finish().unwrap().warnings.len(), 1);
    }

    #[test]
    fn observe_after_end_and_early_finish_are_errors() {
        let d = Dataset::from_points(vec![vec![0.0], vec![1.0]]).unwrap();
        let mut cfg = config(2, 1, 1, 1.0);
        cfg.p3_end = 2;
        let mut sp = SelectProc::new(cfg).unwrap();
        sp.observe(PointId(0), &d, &Exhaustive).unwrap();
        assert!(sp.finish().is_err());
        sp.observe(PointId(1), &d, &Exhaustive).unwrap();
        assert!(sp.finish().is_ok());
        assert!(matches!(sp.observe(PointId(0), &d, &Exhaustive), Err(Error::ContractViolation(_))));
    }

    #[test]
    fn suffix_is_ignored() {
        let d = clusters();
        let mut cfg = config(d.len(), 4, 1, 1.0);
        cfg.p3_end = 12;
        let mut sp = SelectProc::new(cfg).unwrap();
        for t in 0..12 {
            sp.observe(PointId(t), &d, &Exhaustive).unwrap();
        }
        assert_eq!(sp.observe(PointId(12), &d, &Exhaustive).unwrap(), Decision::Ignored);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = config(10, 2, 1, 1.0);
        cfg.p2_end = 5;
        assert!(SelectProc::new(cfg).is_err());
        let mut cfg = config(10, 2, 1, 1.0);
        cfg.alpha = 0.3;
        assert!(SelectProc::new(cfg).is_err());
        let mut cfg = config(10, 2, 1, 1.0);
        cfg.p3_end = 11;
        assert!(SelectProc::new(cfg).is_err());
    }

    fn blobs(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Dataset::from_points(
            (0..n)
                .map(|i| {
                    let c = if i % 2 == 0 { 0.0 } else { 50.0 };
                    vec![c + rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]
                })
                .collect(),
        )
        .unwrap()
    }

    fn run(d: &Dataset, order: &[PointId], cfg: SelectProcConfig) -> (SelectProcReport, Vec<f64>) {
        let solver = LocalSearch::new(1);
        let mut sp = SelectProc::new(cfg).unwrap();
        let mut slack = Vec::new();
        for &x in order {
            let before = sp.phase();
            let decision = sp.observe(x, d, &solver).unwrap();
            if before == Phase::Three {
                // Distance of x to the selections so far (x included when selected).
                let sel = CenterSet::new(sp.selected().to_vec());
                let dist = if decision.is_selected() { 0.0 } else { dist_to_set(x, &sel, d).unwrap_or(f64::INFINITY) };
                slack.push(dist - 2.0 * sp.threshold());
            }
        }
        (sp.finish().unwrap(), slack)
    }

    #[test]
    fn two_clusters_each_get_a_selection() {
        let d = blobs(600, 5);
        let mut order = d.point_ids();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(9));
        let cfg = SelectProcConfig::standalone(2, 600, 0.2, 1.0 / 6.0, Profile::DESK).unwrap();
        let (report, _) = run(&d, &order, cfg);
        for side in [0.0, 50.0] {
            let hit = report.selected.iter().any(|&p| (d.coords(p).unwrap()[0] - side).abs() < 5.0);
            assert!(hit, "no selection near {side}");
        }
    }

    #[test]
    fn psi_matches_offline_recomputation() {
        let d = blobs(3000, 2);
        let mut order = d.point_ids();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(4));
        let cfg = SelectProcConfig::standalone(2, 3000, 0.2, 1.0 / 6.0, Profile::DESK).unwrap();
        let (p1, p2) = (cfg.p1_end, cfg.p2_end);
        let alpha = cfg.alpha;
        let (report, _) = run(&d, &order, cfg);
        let reference = CenterSet::new(report.t_alpha.clone());
        let offline = truncated_risk(&order[p1..p2], &reference, report.psi_truncation, &d).unwrap() / (3.0 * alpha);
        let psi = report.psi.unwrap();
        assert!(psi > 0.0);
        assert!((psi - offline).abs() <= 1e-12 * offline, "{psi} vs {offline}");
    }

    #[test]
    fn every_phase_three_point_is_covered_and_runs_are_deterministic() {
        for seed in 0..5 {
            let d = blobs(400, seed);
            let mut order = d.point_ids();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed + 100));
            let cfg = SelectProcConfig::standalone(2, 400, 0.3, 0.1, Profile::DESK).unwrap();
            let (a, slack) = run(&d, &order, cfg.clone());
            assert!(slack.iter().all(|&s| s <= 1e-9), "coverage bound broken");
            assert!(a.quota_shortfalls().is_empty());
            let (b, _) = run(&d, &order, cfg);
            assert_eq!(a, b);
        }
    }
}
