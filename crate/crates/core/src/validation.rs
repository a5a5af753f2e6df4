//! The acceptance suite: ten pass/fail criteria with pinned tolerances and
//! runtime budgets.
//!
//! Criteria 1 and 7 aggregate over every instrumented run performed by the
//! other criteria, so [`run_all`] evaluates them last while reporting in id
//! order.

use std::sync::Mutex;
use std::time::Instant;

use rand::seq::{index::sample, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bins::{build_division, check_well_represented, tail_risk_bound_holds};
use crate::error::{Error, Result};
use crate::harness::bench::{bench_mixture, center_statistic, last_copy_sandwich_setup, mixture_experiment};
use crate::harness::experiment::{ExperimentReport, OracleChoice};
use crate::harness::stream::{random_permutation, InstrumentedStream};
use crate::metric::{far_r, risk, truncated_risk, CenterSet, Dataset, PointId};
use crate::munsc::compute_schedule;
use crate::oracle::{naive, psi_sandwich_frequency};
use crate::params::{ratio_ceiling, Profile};
use crate::solver::LocalSearch;

/// Seed of every randomized criterion.
pub const SUITE_SEED: u64 = 20_240_601;

pub const MIN_OBSERVE_CALLS: usize = 10_000;
pub const METRIC_INSTANCES: usize = 500;
pub const DIVISION_CASES: usize = 1000;
pub const TAIL_RISK_INSTANCES: usize = 500;
pub const WELL_REPRESENTED_DRAWS: usize = 10_000;
pub const WELL_REPRESENTED_MAX_FAILURE: f64 = 0.01;
pub const SANDWICH_TRIALS: usize = 200;
pub const RATIO_INSTANCES: usize = 30;
pub const RATIO_SOFT_MEDIAN: f64 = 3.0;
pub const RATIO_SOFT_MAX: f64 = 8.0;
pub const SCALING_SEEDS: usize = 10;
pub const SCALING_N: usize = 20_000;
pub const SCALING_DELTA: f64 = 0.2;
pub const SCALING_MAX_GROWTH: f64 = 2.0;
pub const FLOAT_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub elapsed_secs: f64,
    pub budget_secs: f64,
}

impl CriterionOutcome {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} [{}] {} ({:.2}s of {:.0}s): {}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.elapsed_secs,
            self.budget_secs,
            self.detail
        )
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamTotals {
    pub runs: usize,
    pub observe_calls: usize,
    pub decisions_logged: usize,
    pub violations: usize,
    pub quota_copies: usize,
    pub quota_shortfalls: usize,
}

/// Shared accumulator for instrumented runs.
#[derive(Debug, Default)]
pub struct Suite {
    totals: Mutex<StreamTotals>,
}

impl Suite {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn totals(&self) -> StreamTotals {
        *self.totals.lock().expect("totals lock")
    }

    pub fn record(&self, report: &ExperimentReport) {
        let mut t = self.totals.lock().expect("totals lock");
        t.runs += 1;
        t.observe_calls += report.observe_calls;
        t.decisions_logged += report.decisions_logged;
        t.violations += report.stream_violations;
        t.quota_copies += report.copies.len();
        t.quota_shortfalls += report.quota_shortfalls();
    }
}

fn timed(id: u8, name: &str, budget_secs: f64, body: impl FnOnce() -> Result<(bool, String)>) -> CriterionOutcome {
    let start = Instant::now();
    let (ok, detail) = match body() {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    let elapsed_secs = start.elapsed().as_secs_f64();
    let in_time = elapsed_secs < budget_secs;
    let detail = if in_time { detail } else { format!("{detail}; exceeded runtime budget") };
    CriterionOutcome { id, name: name.into(), passed: ok && in_time, detail, elapsed_secs, budget_secs }
}

fn map_par<T: Send>(count: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..count).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count).map(f).collect()
    }
}

/// Criterion 1: no instrumented stream in the suite ever revealed a point
/// early, over at least [`MIN_OBSERVE_CALLS`] observe calls.
pub fn no_substitution(suite: &Suite) -> CriterionOutcome {
    timed(1, "no-substitution contract", 60.0, || {
        let reports = map_par(8, |t| mixture_experiment(600, 3, 0.2, SUITE_SEED + t as u64, OracleChoice::None))?;
        for r in &reports {
            suite.record(r);
        }
        let mut probe = InstrumentedStream::new(random_permutation(4, SUITE_SEED));
        probe.next_point()?;
        let enforced = matches!(probe.next_point(), Err(Error::StreamViolation(_)));
        let t = suite.totals();
        let ok = enforced && t.violations == 0 && t.observe_calls >= MIN_OBSERVE_CALLS;
        Ok((
            ok,
            format!(
                "{} runs, {} observe calls, {} decisions, {} violations; out-of-order probe rejected: {enforced}",
                t.runs, t.observe_calls, t.decisions_logged, t.violations
            ),
        ))
    })
}

fn random_instance(rng: &mut ChaCha8Rng, max_n: usize) -> Result<Dataset> {
    let n = rng.gen_range(1..=max_n);
    let dim = rng.gen_range(1..=3);
    let lattice = rng.gen_bool(0.4);
    let points = (0..n)
        .map(|_| {
            (0..dim)
                .map(|_| if lattice { rng.gen_range(0..5) as f64 } else { rng.gen_range(-10.0..10.0) })
                .collect()
        })
        .collect();
    Dataset::from_points(points)
}

fn random_centers(rng: &mut ChaCha8Rng, n: usize, max: usize) -> CenterSet {
    let size = rng.gen_range(1..=n.min(max));
    CenterSet::new(sample(rng, n, size).into_iter().map(PointId).collect())
}

/// Criterion 2: the metric functionals agree bit for bit with the naive
/// re-implementations.
pub fn metric_equivalence() -> CriterionOutcome {
    timed(2, "core-metric oracle equivalence", 30.0, || {
        let mut rng = ChaCha8Rng::seed_from_u64(SUITE_SEED);
        let mut mismatches = Vec::new();
        for i in 0..METRIC_INSTANCES {
            let data = random_instance(&mut rng, 50)?;
            let n = data.len();
            let size = rng.gen_range(1..=n);
            let mut subset: Vec<PointId> = sample(&mut rng, n, size).into_iter().map(PointId).collect();
            subset.shuffle(&mut rng);
            let centers = random_centers(&mut rng, n, 5);
            let r = rng.gen_range(0..=n + 1);
            let same_risk = risk(&subset, &centers, &data)?.to_bits() == naive::risk(&subset, &centers, &data).to_bits();
            let same_far = far_r(&subset, &centers, r, &data)? == naive::far_r(&subset, &centers, r, &data);
            let same_trunc = truncated_risk(&subset, &centers, r, &data)?.to_bits()
                == naive::truncated_risk(&subset, &centers, r, &data).to_bits();
            if !(same_risk && same_far && same_trunc) {
                mismatches.push(i);
            }
        }
        Ok((mismatches.is_empty(), format!("{} of {METRIC_INSTANCES} instances mismatched {:?}", mismatches.len(), mismatches)))
    })
}

/// Criterion 3: every randomized `(|W|, z)` case yields a valid linear
/// division. Infeasible size pairs count as failures.
pub fn linear_divisions() -> CriterionOutcome {
    timed(3, "linear bin division", 30.0, || {
        let mut rng = ChaCha8Rng::seed_from_u64(SUITE_SEED);
        let mut failures = Vec::new();
        for _ in 0..DIVISION_CASES {
            let size = rng.gen_range(1..=500);
            let z = rng.gen_range(1..=50);
            let lattice = rng.gen_bool(0.3);
            let points: Vec<Vec<f64>> = (0..size)
                .map(|_| vec![if lattice { rng.gen_range(0..20) as f64 } else { rng.gen_range(0.0..100.0) }])
                .collect();
            let data = Dataset::from_points(points)?;
            let reference = random_centers(&mut rng, size, 3);
            let all = data.point_ids();
            match build_division(&all, &reference, z, &data) {
                Ok(div) if div.validate(&all, &data).is_ok() => {}
                Ok(_) => failures.push(format!("({size},{z}) invalid")),
                Err(e) => failures.push(format!("({size},{z}) {e}")),
            }
        }
        Ok((failures.is_empty(), format!("{} of {DIVISION_CASES} cases failed {failures:?}", failures.len())))
    })
}

/// Criterion 4: the tail-risk inequality on premise-satisfying samples.
pub fn tail_risk() -> CriterionOutcome {
    timed(4, "tail-risk bound", 60.0, || {
        let mut rng = ChaCha8Rng::seed_from_u64(SUITE_SEED);
        let mut violations = 0;
        let mut checked = 0;
        while checked < TAIL_RISK_INSTANCES {
            let size = rng.gen_range(20..=300);
            let points = (0..size).map(|_| vec![rng.gen_range(0.0..50.0), rng.gen_range(0.0..50.0)]).collect();
            let data = Dataset::from_points(points)?;
            let reference = random_centers(&mut rng, size, 4);
            let z = rng.gen_range(1..=20);
            let all = data.point_ids();
            let division = match build_division(&all, &reference, z, &data) {
                Ok(d) => d,
                Err(Error::NoLinearDivision { .. }) => continue,
                Err(e) => return Err(e),
            };
            let r = rng.gen_range(0.05..0.95);
            let mut drawn = Vec::new();
            for bin in &division.bins {
                let cap = (r * bin.len() as f64).floor() as usize;
                let take = rng.gen_range(0..=cap);
                drawn.extend(sample(&mut rng, bin.len(), take).into_iter().map(|i| bin[i]));
            }
            if !tail_risk_bound_holds(&division, &drawn, r, &data)? {
                violations += 1;
            }
            checked += 1;
        }
        Ok((violations == 0, format!("{violations} of {checked} instances violated the bound")))
    })
}

/// Criterion 5: a fixed 200-point subset is well-represented in uniform
/// samples of 30% of a 1000-point universe.
pub fn well_represented() -> CriterionOutcome {
    timed(5, "well-representedness concentration", 60.0, || {
        let universe: Vec<PointId> = (0..1000).map(PointId).collect();
        let subset = &universe[..200];
        let failures: usize = map_par(WELL_REPRESENTED_DRAWS, |t| {
            let mut rng = ChaCha8Rng::seed_from_u64(SUITE_SEED.wrapping_add(t as u64));
            let drawn: Vec<PointId> = sample(&mut rng, 1000, 300).into_iter().map(PointId).collect();
            Ok(usize::from(!check_well_represented(subset, &drawn, &universe)?))
        })?
        .into_iter()
        .sum();
        let rate = failures as f64 / WELL_REPRESENTED_DRAWS as f64;
        Ok((rate <= WELL_REPRESENTED_MAX_FAILURE, format!("failure rate {rate:.4} over {WELL_REPRESENTED_DRAWS} draws")))
    })
}

/// Criterion 6: the upper risk-estimate bound holds in at least `1 - δ` of
/// the permutations.
pub fn psi_upper_bound() -> CriterionOutcome {
    timed(6, "psi upper bound", 300.0, || {
        let (k, delta) = (2, 0.2);
        let data = bench_mixture(SCALING_N, k, SUITE_SEED)?;
        let setup = last_copy_sandwich_setup(k, delta, SCALING_N, Profile::DESK, SANDWICH_TRIALS, SUITE_SEED)?;
        let rates = psi_sandwich_frequency(&data, &setup, &LocalSearch::new(SUITE_SEED))?;
        let zero = rates.trials.iter().filter(|t| t.psi == 0.0).count();
        Ok((
            rates.upper_ok_rate >= 1.0 - delta,
            format!(
                "upper rate {:.3} (need >= {:.1}), lower rate {:.3} (report only), alpha {}, delta' {:.4}, psi = 0 in {zero} trials",
                rates.upper_ok_rate,
                1.0 - delta,
                rates.lower_ok_rate,
                setup.alpha,
                setup.delta
            ),
        ))
    })
}

/// Criterion 7: every copy of every instrumented run selected its quota from
/// each reference center that received enough phase-three points.
pub fn quota_selection(suite: &Suite) -> CriterionOutcome {
    timed(7, "quota selection", 60.0, || {
        let t = suite.totals();
        Ok((
            t.runs > 0 && t.quota_shortfalls == 0,
            format!("{} shortfalls across {} copies of {} runs", t.quota_shortfalls, t.quota_copies, t.runs),
        ))
    })
}

/// Criterion 8: ratio against the exact optimum on small mixtures stays below
/// the hard ceiling; median and maximum are reported against soft targets.
pub fn tiny_ratio(suite: &Suite) -> CriterionOutcome {
    timed(8, "exact-vs-approx ratio", 300.0, || {
        let reports = map_par(RATIO_INSTANCES, |t| mixture_experiment(240, 2, 0.2, SUITE_SEED + t as u64, OracleChoice::Exact))?;
        let ceiling = ratio_ceiling(5.0)?;
        let mut ratios = Vec::with_capacity(reports.len());
        for r in &reports {
            suite.record(r);
            ratios.push(r.ratio.unwrap_or(f64::INFINITY));
        }
        ratios.sort_by(f64::total_cmp);
        let median = (ratios[(ratios.len() - 1) / 2] + ratios[ratios.len() / 2]) / 2.0;
        let max = ratios[ratios.len() - 1];
        let centers: Vec<usize> = reports.iter().map(|r| r.num_centers).collect();
        Ok((
            max <= ceiling,
            format!(
                "max ratio {max:.3} vs ceiling {ceiling}; soft targets median {median:.3} <= {RATIO_SOFT_MEDIAN} ({}), max <= {RATIO_SOFT_MAX} ({}); centers {}..{}",
                if median <= RATIO_SOFT_MEDIAN { "met" } else { "missed" },
                if max <= RATIO_SOFT_MAX { "met" } else { "missed" },
                centers.iter().min().unwrap_or(&0),
                centers.iter().max().unwrap_or(&0),
            ),
        ))
    })
}

/// Criterion 9: center counts stay below `n/4` and grow quasi-linearly in `k`.
pub fn center_scaling(suite: &Suite) -> CriterionOutcome {
    timed(9, "center-count scaling", 600.0, || {
        let ks = [2usize, 4, 8];
        let cases: Vec<(usize, u64)> = ks.iter().flat_map(|&k| (0..SCALING_SEEDS as u64).map(move |s| (k, SUITE_SEED + s))).collect();
        let reports = map_par(cases.len(), |i| {
            let (k, seed) = cases[i];
            mixture_experiment(SCALING_N, k, SCALING_DELTA, seed, OracleChoice::None)
        })?;
        let mut means = Vec::new();
        let mut all_small = true;
        for &k in &ks {
            let counts: Vec<usize> = reports.iter().filter(|r| r.config.k == k).map(|r| r.num_centers).collect();
            all_small &= counts.iter().all(|&c| 4 * c < SCALING_N);
            let mean = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
            means.push((k, mean, center_statistic(mean, k, SCALING_DELTA)));
        }
        for r in &reports {
            suite.record(r);
        }
        let growth = means[2].2 / means[0].2;
        let summary: Vec<String> = means.iter().map(|(k, m, s)| format!("k={k}: mean {m:.1}, stat {s:.3}")).collect();
        Ok((
            all_small && growth <= SCALING_MAX_GROWTH,
            format!("{}; stat(8)/stat(2) = {growth:.3} (limit {SCALING_MAX_GROWTH}); all below n/4: {all_small}", summary.join(", ")),
        ))
    })
}

/// Criterion 10: the worked schedule examples.
pub fn schedule_examples() -> CriterionOutcome {
    timed(10, "schedule arithmetic", 1.0, || {
        let close = |a: f64, b: f64| (a - b).abs() <= FLOAT_TOLERANCE;
        let mut problems = Vec::new();
        let s = compute_schedule(2, 0.1, 1200, Profile::DESK)?;
        if s.doublings != 3 || s.num_copies() != 4 {
            problems.push(format!("I = {}, copies = {}", s.doublings, s.num_copies()));
        }
        if !close(s.copies[0].alpha, 0.0125) || !close(s.copies[3].alpha, 0.1) || !close(s.delta_prime, 0.025) {
            problems.push("alpha or delta' mismatch".into());
        }
        let phases: Vec<[usize; 3]> = s.copies.iter().map(|c| [c.p1_end, c.p2_end, c.p3_end]).collect();
        if phases != [[15, 30, 60], [30, 60, 120], [60, 120, 240], [120, 240, 1200]] {
            problems.push(format!("phases {phases:?}"));
        }
        let single = compute_schedule(2, 0.9, 1200, Profile::DESK)?;
        if single.doublings != 0 || single.num_copies() != 1 || single.copies[0].p3_end != 1200 {
            problems.push(format!("single-copy case gave {} copies", single.num_copies()));
        }
        Ok((problems.is_empty(), if problems.is_empty() { "all three examples reproduced".into() } else { problems.join("; ") }))
    })
}

/// Runs every criterion and returns the outcomes sorted by id.
pub fn run_all() -> Vec<CriterionOutcome> {
    run_with(|_| {})
}

/// As [`run_all`], calling `progress` as each criterion completes.
pub fn run_with(mut progress: impl FnMut(&CriterionOutcome)) -> Vec<CriterionOutcome> {
    let suite = Suite::new();
    let mut out = Vec::with_capacity(10);
    let mut push = |o: CriterionOutcome| {
        progress(&o);
        out.push(o);
    };
    push(schedule_examples());
    push(metric_equivalence());
    push(linear_divisions());
    push(tail_risk());
    push(well_represented());
    push(psi_upper_bound());
    push(tiny_ratio(&suite));
    push(center_scaling(&suite));
    push(no_substitution(&suite));
    push(quota_selection(&suite));
    out.sort_by_key(|o| o.id);
    out
}
