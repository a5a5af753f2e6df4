//! End-to-end runs over an instrumented stream, summarized as a report.

use std::time::Instant;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::harness::stream::{random_permutation, InstrumentedStream};
use crate::metric::{risk, Dataset, PointId};
use crate::munsc::{compute_schedule, Munsc};
use crate::oracle::exact_opt;
use crate::params::{ratio_ceiling, Profile};
use crate::select_proc::{ReasonCounts, SelectProcReport};
use crate::solver::{Exhaustive, KMedianSolver, LocalSearch, SolverKind};

pub const SCHEMA_VERSION: u32 = 1;

/// Reference solution the achieved risk is compared with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleChoice {
    /// Exact when the enumeration fits the budget, local search otherwise.
    Auto,
    Exact,
    LocalSearch,
    None,
}

impl OracleChoice {
    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "auto" => Some(Self::Auto),
            "exact" => Some(Self::Exact),
            "local-search" => Some(Self::LocalSearch),
            "none" => Some(Self::None),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub k: usize,
    pub delta: f64,
    pub profile: Profile,
    pub solver: SolverKind,
    pub solver_seed: u64,
    pub perm_seed: u64,
    pub oracle: OracleChoice,
    /// Seed the dataset was generated from, echoed for replay.
    pub dataset_seed: Option<u64>,
}

impl ExperimentConfig {
    pub fn new(k: usize, delta: f64, profile: Profile, solver: SolverKind) -> Self {
        Self { k, delta, profile, solver, solver_seed: 0, perm_seed: 0, oracle: OracleChoice::Auto, dataset_seed: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleRisk {
    pub label: String,
    pub exact: bool,
    pub beta: f64,
    pub risk: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CopySummary {
    pub copy: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub quota: usize,
    pub phases: [usize; 3],
    pub k_plus: usize,
    pub phi_alpha: f64,
    pub psi: Option<f64>,
    pub threshold: Option<f64>,
    pub selected: usize,
    pub reasons: ReasonCounts,
    pub quota_shortfalls: Vec<PointId>,
}

impl CopySummary {
    fn from_report(copy: usize, r: &SelectProcReport) -> Self {
        Self {
            copy,
            alpha: r.config.alpha,
            gamma: r.config.gamma,
            quota: r.config.m,
            phases: [r.config.p1_end, r.config.p2_end, r.config.p3_end],
            k_plus: r.derived.k_plus,
            phi_alpha: r.derived.phi_alpha,
            psi: r.psi,
            threshold: r.threshold,
            selected: r.selected.len(),
            reasons: r.reasons,
            quota_shortfalls: r.quota_shortfalls(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub n: usize,
    pub num_centers: usize,
    pub centers: Vec<PointId>,
    pub risk: f64,
    pub oracle: Option<OracleRisk>,
    /// Achieved over oracle risk; infinite when only the oracle risk is zero.
    #[serde(serialize_with = "ser_ratio", deserialize_with = "de_ratio")]
    pub ratio: Option<f64>,
    pub solver_beta: f64,
    pub ratio_ceiling: f64,
    pub doublings: usize,
    pub delta_prime: f64,
    pub tau: f64,
    pub clamped: bool,
    pub copies: Vec<CopySummary>,
    pub warnings: Vec<String>,
    pub decisions_logged: usize,
    pub observe_calls: usize,
    pub stream_violations: usize,
    pub wall_time_secs: f64,
}

impl ExperimentReport {
    pub fn within_ceiling(&self) -> Option<bool> {
        self.ratio.map(|r| r <= self.ratio_ceiling)
    }

    pub fn quota_shortfalls(&self) -> usize {
        self.copies.iter().map(|c| c.quota_shortfalls.len()).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RatioRepr {
    Finite(f64),
    Text(String),
}

fn ser_ratio<S: Serializer>(ratio: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match ratio {
        None => s.serialize_none(),
        Some(r) if r.is_finite() => s.serialize_some(&RatioRepr::Finite(*r)),
        Some(_) => s.serialize_some(&RatioRepr::Text("inf".into())),
    }
}

fn de_ratio<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<f64>, D::Error> {
    match Option::<RatioRepr>::deserialize(d)? {
        None => Ok(None),
        Some(RatioRepr::Finite(r)) => Ok(Some(r)),
        Some(RatioRepr::Text(t)) if t == "inf" => Ok(Some(f64::INFINITY)),
        Some(RatioRepr::Text(t)) => Err(serde::de::Error::custom(format!("unexpected ratio {t:?}"))),
    }
}

/// Ratio convention: `0/0 = 1`, `x/0 = inf` for `x > 0`.
pub fn risk_ratio(achieved: f64, reference: f64) -> f64 {
    if reference > 0.0 {
        achieved / reference
    } else if achieved > 0.0 {
        f64::INFINITY
    } else {
        1.0
    }
}

/// Computes the reference risk on the whole dataset.
pub fn oracle_risk(data: &Dataset, k: usize, choice: OracleChoice, seed: u64) -> Result<Option<OracleRisk>> {
    let exact_fits = Exhaustive::subsets(data.len(), k).is_ok();
    let use_exact = match choice {
        OracleChoice::None => return Ok(None),
        OracleChoice::Exact => true,
        OracleChoice::LocalSearch => false,
        OracleChoice::Auto => exact_fits,
    };
    if use_exact {
        let opt = exact_opt(data, k)?;
        return Ok(Some(OracleRisk { label: "exact optimum".into(), exact: true, beta: 1.0, risk: opt.risk }));
    }
    let all = data.point_ids();
    let ls = LocalSearch::new(seed);
    let centers = ls.solve(&all, k, data)?;
    Ok(Some(OracleRisk {
        label: "local search (beta=5 reference)".into(),
        exact: false,
        beta: ls.beta(),
        risk: risk(&all, &centers, data)?,
    }))
}

/// Runs the full multiscale procedure over the permutation drawn from
/// `config.perm_seed`, one instrumented read and logged decision per point.
pub fn run_experiment(data: &Dataset, config: &ExperimentConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let n = data.len();
    let schedule = compute_schedule(config.k, config.delta, n, config.profile)?;
    let solver = config.solver.build(config.solver_seed);
    let mut stream = InstrumentedStream::new(random_permutation(n, config.perm_seed));
    let mut runner = Munsc::new(schedule.clone(), data, solver.as_ref())?;
    while let Some((t, x)) = stream.next_point()? {
        let step = runner.observe(x)?;
        stream.log_decision(t, step.selected)?;
    }
    if !stream.is_complete() || stream.decision_log().len() != n {
        return Err(Error::StreamViolation("stream ended before every point was decided".into()));
    }
    let result = runner.finish()?;

    let all = data.point_ids();
    let achieved = risk(&all, &result.centers, data)?;
    let oracle = oracle_risk(data, config.k, config.oracle, config.solver_seed)?;
    let mut warnings = schedule.warnings.clone();
    for (i, r) in result.copies.iter().enumerate() {
        warnings.extend(r.warnings.iter().map(|w| format!("copy {}: {w}", i + 1)));
    }
    let ratio = oracle.as_ref().map(|o| risk_ratio(achieved, o.risk));
    if ratio == Some(f64::INFINITY) {
        warnings.push("oracle risk is zero while achieved risk is positive; ratio is infinite".into());
    }
    let copies = result.copies.iter().enumerate().map(|(i, r)| CopySummary::from_report(i + 1, r)).collect();
    Ok(ExperimentReport {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        n,
        num_centers: result.centers.len(),
        centers: result.centers.ids().to_vec(),
        risk: achieved,
        oracle,
        ratio,
        solver_beta: solver.beta(),
        ratio_ceiling: ratio_ceiling(solver.beta())?,
        doublings: schedule.doublings,
        delta_prime: schedule.delta_prime,
        tau: schedule.tau,
        clamped: schedule.clamped,
        copies,
        warnings,
        decisions_logged: stream.decision_log().len(),
        observe_calls: n * schedule.num_copies(),
        stream_violations: stream.violations(),
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::generate::{generate_gaussian_mixture, MixtureSpec};

    fn mixture(n: usize, seed: u64) -> Dataset {
        let spec = MixtureSpec { n, k_true: 2, dim: 2, separation: 20.0, outlier_fraction: 0.02, seed };
        generate_gaussian_mixture(&spec).unwrap().dataset
    }

    #[test]
    fn ratio_conventions() {
        assert_eq!(risk_ratio(0.0, 0.0), 1.0);
        assert_eq!(risk_ratio(1.0, 0.0), f64::INFINITY);
        assert_eq!(risk_ratio(3.0, 2.0), 1.5);
    }

    #[test]
    fn degenerate_instance_reports_unit_ratio() {
        let d = Dataset::from_points((0..6).map(|i| vec![i as f64]).collect()).unwrap();
        let config = ExperimentConfig { oracle: OracleChoice::Exact, ..ExperimentConfig::new(6, 0.5, Profile::DESK, SolverKind::Exhaustive) };
        let report = run_experiment(&d, &config).unwrap();
        assert_eq!(report.oracle.as_ref().unwrap().risk, 0.0);
        let expected = if report.risk == 0.0 { 1.0 } else { f64::INFINITY };
        assert_eq!(report.ratio, Some(expected));
        assert_eq!(report.decisions_logged, 6);
    }

    #[test]
    fn tiny_instance_against_exact_optimum() {
        let d = mixture(240, 1);
        let config = ExperimentConfig {
            perm_seed: 4,
            oracle: OracleChoice::Auto,
            ..ExperimentConfig::new(2, 0.2, Profile::DESK, SolverKind::LocalSearch)
        };
        let report = run_experiment(&d, &config).unwrap();
        let oracle = report.oracle.as_ref().unwrap();
        assert!(oracle.exact);
        assert!(report.ratio.unwrap() <= report.ratio_ceiling);
        assert_eq!(report.ratio_ceiling, 2801.0);
        assert_eq!(report.decisions_logged, 240);
        assert_eq!(report.stream_violations, 0);
        assert_eq!(report.quota_shortfalls(), 0);
    }

    #[test]
    fn replay_is_bit_exact_and_json_round_trips() {
        let d = mixture(400, 2);
        let config = ExperimentConfig { perm_seed: 9, solver_seed: 3, ..ExperimentConfig::new(3, 0.2, Profile::DESK, SolverKind::LocalSearch) };
        let mut a = run_experiment(&d, &config).unwrap();
        let mut b = run_experiment(&d, &config).unwrap();
        a.wall_time_secs = 0.0;
        b.wall_time_secs = 0.0;
        assert_eq!(a, b);
        let back = ExperimentReport::from_json(&a.to_json().unwrap()).unwrap();
        assert_eq!(back, a);
        assert_eq!(back.ratio.unwrap().to_bits(), a.ratio.unwrap().to_bits());
    }

    #[test]
    fn infinite_ratio_serializes_as_text() {
        let d = mixture(100, 3);
        let config = ExperimentConfig { oracle: OracleChoice::LocalSearch, ..ExperimentConfig::new(2, 0.2, Profile::DESK, SolverKind::LocalSearch) };
        let mut report = run_experiment(&d, &config).unwrap();
        assert!(report.oracle.as_ref().unwrap().label.contains("beta=5"));
        report.ratio = Some(f64::INFINITY);
        let json = report.to_json().unwrap();
        assert!(json.contains("\"ratio\": \"inf\""));
        assert_eq!(ExperimentReport::from_json(&json).unwrap().ratio, Some(f64::INFINITY));
    }
}
