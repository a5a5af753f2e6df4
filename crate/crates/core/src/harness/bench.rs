//! Repeated-trial benchmark suites producing flat CSV rows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::experiment::{run_experiment, ExperimentConfig, ExperimentReport, OracleChoice};
use crate::harness::generate::{generate_gaussian_mixture, MixtureSpec};
use crate::metric::Dataset;
use crate::munsc::compute_schedule;
use crate::oracle::{psi_sandwich_trial, SandwichSetup};
use crate::params::Profile;
use crate::solver::{LocalSearch, SolverKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchSuite {
    /// Approximation ratio against the exact optimum on small mixtures.
    Ratio,
    /// Number of selected centers as `k` grows.
    Centers,
    /// Monte-Carlo check of the two-sided risk-estimate bound.
    Lemmas,
}

impl BenchSuite {
    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "ratio" => Some(Self::Ratio),
            "centers" => Some(Self::Centers),
            "lemmas" => Some(Self::Lemmas),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Ratio => "ratio",
            Self::Centers => "centers",
            Self::Lemmas => "lemmas",
        }
    }

    pub fn default_n(self) -> usize {
        match self {
            Self::Ratio => 240,
            Self::Centers | Self::Lemmas => 20_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchSettings {
    pub suite: BenchSuite,
    pub trials: usize,
    pub seed: u64,
    pub n: usize,
    pub delta: f64,
}

impl BenchSettings {
    pub fn new(suite: BenchSuite, trials: usize, seed: u64) -> Self {
        Self { suite, trials, seed, n: suite.default_n(), delta: 0.2 }
    }
}

/// One CSV row; columns a suite does not use are left empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub suite: String,
    pub case: String,
    pub trial: usize,
    pub seed: u64,
    pub n: usize,
    pub k: usize,
    pub delta: f64,
    pub centers: Option<usize>,
    pub risk: Option<f64>,
    pub oracle_risk: Option<f64>,
    pub ratio: Option<f64>,
    pub statistic: Option<f64>,
    pub passed: Option<bool>,
}

impl BenchRow {
    fn new(suite: BenchSuite, case: impl Into<String>, trial: usize, seed: u64, n: usize, k: usize, delta: f64) -> Self {
        Self {
            suite: suite.name().into(),
            case: case.into(),
            trial,
            seed,
            n,
            k,
            delta,
            centers: None,
            risk: None,
            oracle_risk: None,
            ratio: None,
            statistic: None,
            passed: None,
        }
    }
}

/// Gaussian mixture used by every suite: `k_true` blobs at separation 20 in
/// the plane with 2% outliers.
pub fn bench_mixture(n: usize, k_true: usize, seed: u64) -> Result<Dataset> {
    let spec = MixtureSpec { n, k_true, dim: 2, separation: 20.0, outlier_fraction: 0.02, seed };
    Ok(generate_gaussian_mixture(&spec)?.dataset)
}

/// `|T_out| / (k ln²(k/δ))`.
pub fn center_statistic(centers: f64, k: usize, delta: f64) -> f64 {
    let l = (k as f64 / delta).ln();
    centers / (k as f64 * l * l)
}

/// Sandwich settings matching the last copy of the schedule for `(k, δ, n)`:
/// its `alpha` and the reduced confidence `δ'`.
pub fn last_copy_sandwich_setup(k: usize, delta: f64, n: usize, profile: Profile, trials: usize, seed: u64) -> Result<SandwichSetup> {
    let schedule = compute_schedule(k, delta, n, profile)?;
    let last = schedule.copies.last().ok_or_else(|| Error::ContractViolation("empty schedule".into()))?;
    Ok(SandwichSetup { k, delta: schedule.delta_prime, alpha: last.alpha, profile, trials, seed })
}

/// Runs a local-search experiment on a fresh mixture with seed `seed`.
pub fn mixture_experiment(n: usize, k: usize, delta: f64, seed: u64, oracle: OracleChoice) -> Result<ExperimentReport> {
    let data = bench_mixture(n, k, seed)?;
    let config = ExperimentConfig {
        solver_seed: seed,
        perm_seed: seed,
        oracle,
        dataset_seed: Some(seed),
        ..ExperimentConfig::new(k, delta, Profile::DESK, SolverKind::LocalSearch)
    };
    run_experiment(&data, &config)
}

fn map_trials<T: Send>(count: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
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

/// Runs a suite. Trials execute concurrently in the ambient thread pool and
/// rows come back in trial order.
pub fn run_bench(settings: &BenchSettings) -> Result<Vec<BenchRow>> {
    let BenchSettings { suite, trials, seed, n, delta } = *settings;
    match suite {
        BenchSuite::Ratio => {
            let k = 2;
            map_trials(trials, |t| {
                let s = seed.wrapping_add(t as u64);
                let report = mixture_experiment(n, k, delta, s, OracleChoice::Auto)?;
                let mut row = BenchRow::new(suite, "k=2", t, s, n, k, delta);
                row.centers = Some(report.num_centers);
                row.risk = Some(report.risk);
                row.oracle_risk = report.oracle.as_ref().map(|o| o.risk);
                row.ratio = report.ratio;
                row.passed = report.within_ceiling();
                Ok(row)
            })
        }
        BenchSuite::Centers => {
            let cases: Vec<(usize, usize)> = [2usize, 4, 8].iter().flat_map(|&k| (0..trials).map(move |t| (k, t))).collect();
            map_trials(cases.len(), |i| {
                let (k, t) = cases[i];
                let s = seed.wrapping_add(t as u64);
                let report = mixture_experiment(n, k, delta, s, OracleChoice::None)?;
                let mut row = BenchRow::new(suite, format!("k={k}"), t, s, n, k, delta);
                row.centers = Some(report.num_centers);
                row.risk = Some(report.risk);
                row.statistic = Some(center_statistic(report.num_centers as f64, k, delta));
                row.passed = Some(4 * report.num_centers < n);
                Ok(row)
            })
        }
        BenchSuite::Lemmas => {
            let k = 2;
            let data = bench_mixture(n, k, seed)?;
            let setup = last_copy_sandwich_setup(k, delta, n, Profile::DESK, trials, seed)?;
            let solver = LocalSearch::new(seed);
            let per_trial = map_trials(trials, |t| psi_sandwich_trial(&data, &setup, t, &solver))?;
            let mut rows = Vec::with_capacity(2 * trials);
            for (t, trial) in per_trial.into_iter().enumerate() {
                let s = seed.wrapping_add(t as u64);
                let mut upper = BenchRow::new(suite, "psi-upper", t, s, n, k, delta);
                upper.statistic = Some(trial.psi);
                upper.risk = Some(trial.upper);
                upper.passed = Some(trial.upper_ok());
                let mut lower = BenchRow::new(suite, "psi-lower", t, s, n, k, delta);
                lower.statistic = Some(trial.psi);
                lower.risk = Some(trial.lower);
                lower.passed = Some(trial.lower_ok());
                rows.push(upper);
                rows.push(lower);
            }
            Ok(rows)
        }
    }
}

pub fn rows_to_csv(rows: &[BenchRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidDataset(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn statistic_formula() {
        let s = center_statistic(100.0, 2, 0.2);
        assert!((s - 100.0 / (2.0 * 10f64.ln().powi(2))).abs() < 1e-12);
    }

    #[test]
    fn sandwich_setup_uses_last_copy() {
        let setup = last_copy_sandwich_setup(2, 0.2, 20_000, Profile::DESK, 5, 0).unwrap();
        assert!((setup.alpha - 0.1).abs() < 1e-12);
        assert!((setup.delta - 0.2 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn small_ratio_suite_writes_csv() {
        let settings = BenchSettings { n: 120, ..BenchSettings::new(BenchSuite::Ratio, 2, 11) };
        let rows = run_bench(&settings).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.passed == Some(true)));
        let csv = rows_to_csv(&rows).unwrap();
        assert!(csv.starts_with("suite,case,trial,seed,n,k,delta,centers,risk,oracle_risk,ratio,statistic,passed\n"));
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn small_lemma_suite() {
        let settings = BenchSettings { n: 2000, ..BenchSettings::new(BenchSuite::Lemmas, 3, 1) };
        let rows = run_bench(&settings).unwrap();
        assert_eq!(rows.len(), 6);
        assert!(rows.iter().filter(|r| r.case == "psi-upper").all(|r| r.risk.is_some()));
    }
}
