//! Ground truth: exact optima on small instances, naive re-implementations of
//! the risk functionals, and Monte-Carlo checks of the risk-estimate bounds.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::metric::{nearest_center, risk, truncated_risk, CenterSet, Dataset, PointId};
use crate::params::{ceil_snap, floor_snap, Profile};
use crate::select_proc::{SelectProc, SelectProcConfig};
use crate::solver::{Exhaustive, KMedianSolver};

/// An optimal k-median solution with centers drawn from the dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimalSolution {
    pub centers: CenterSet,
    pub risk: f64,
    /// Nearest optimal center of every point, in dataset order.
    pub assignment: Vec<PointId>,
}

impl OptimalSolution {
    /// The optimal clusters, one per center in center order.
    pub fn clusters(&self) -> Vec<Vec<PointId>> {
        self.centers
            .ids()
            .iter()
            .map(|&c| (0..self.assignment.len()).filter(|&i| self.assignment[i] == c).map(PointId).collect())
            .collect()
    }
}

/// Exact optimum over all center sets of at most `k` dataset points.
pub fn exact_opt(data: &Dataset, k: usize) -> Result<OptimalSolution> {
    let all = data.point_ids();
    let centers = Exhaustive.solve(&all, k, data)?;
    let assignment = all.iter().map(|&x| nearest_center(x, &centers, data).map(|(c, _)| c)).collect::<Result<Vec<_>>>()?;
    let risk = risk(&all, &centers, data)?;
    Ok(OptimalSolution { centers, risk, assignment })
}

/// Straightforward re-implementations used to cross-check the metric module.
pub mod naive {
    use crate::metric::{CenterSet, Dataset, PointId};

    /// Minimum over a double loop, no tie handling beyond `<`.
    pub fn dist_to_set(x: PointId, centers: &CenterSet, data: &Dataset) -> f64 {
        let mut best = f64::INFINITY;
        for &c in centers.ids() {
            let d = data.dist(x, c);
            if d < best {
                best = d;
            }
        }
        best
    }

    pub fn risk(points: &[PointId], centers: &CenterSet, data: &Dataset) -> f64 {
        let mut total = 0.0;
        for &x in points {
            total += dist_to_set(x, centers, data);
        }
        total
    }

    /// Far set via a full sort of (distance, id) pairs.
    pub fn far_r(points: &[PointId], centers: &CenterSet, r: usize, data: &Dataset) -> Vec<PointId> {
        let mut pairs: Vec<(f64, PointId)> = points.iter().map(|&x| (dist_to_set(x, centers, data), x)).collect();
        pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        pairs.into_iter().take(r).map(|(_, x)| x).collect()
    }

    /// Truncated risk by ranking: a point is discarded when fewer than `r`
    /// points outrank it. Remaining distances are summed in input order.
    pub fn truncated_risk(points: &[PointId], centers: &CenterSet, r: usize, data: &Dataset) -> f64 {
        let dists: Vec<f64> = points.iter().map(|&x| dist_to_set(x, centers, data)).collect();
        let mut total = 0.0;
        for (i, &x) in points.iter().enumerate() {
            let outranked_by = points
                .iter()
                .enumerate()
                .filter(|&(j, &y)| dists[j] > dists[i] || (dists[j] == dists[i] && y < x))
                .count();
            if outranked_by >= r {
                total += dists[i];
            }
        }
        total
    }
}

/// Settings for [`psi_sandwich_frequency`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichSetup {
    pub k: usize,
    pub delta: f64,
    pub alpha: f64,
    pub profile: Profile,
    pub trials: usize,
    pub seed: u64,
}

/// Outcome of one trial.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichTrial {
    pub psi: f64,
    /// `R_{k phi}(X, T_alpha)`.
    pub upper: f64,
    /// `(1/9) R_{5(k+1) phi}(X \ P1, T_alpha)`.
    pub lower: f64,
}

impl SandwichTrial {
    pub fn upper_ok(&self) -> bool {
        self.psi <= self.upper
    }

    pub fn lower_ok(&self) -> bool {
        self.lower <= self.psi
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichRates {
    pub upper_ok_rate: f64,
    pub lower_ok_rate: f64,
    pub trials: Vec<SandwichTrial>,
}

/// Runs one trial: a fresh permutation, one procedure copy through phase two,
/// then both bounds evaluated on the full dataset.
///
/// Truncation counts are rounded in the strict direction: `ceil(k phi)` for
/// the upper bound, `floor(5 (k+1) phi)` for the lower.
pub fn psi_sandwich_trial(data: &Dataset, setup: &SandwichSetup, trial: usize, solver: &dyn KMedianSolver) -> Result<SandwichTrial> {
    let n = data.len();
    let config = SelectProcConfig::standalone(setup.k, n, setup.delta, setup.alpha, setup.profile)?;
    let mut stream = data.point_ids();
    let mut rng = ChaCha8Rng::seed_from_u64(setup.seed.wrapping_add(trial as u64));
    stream.shuffle(&mut rng);
    let mut proc = SelectProc::new(config.clone())?;
    for &x in &stream[..config.p2_end] {
        proc.observe(x, data, solver)?;
    }
    let reference = proc.reference().expect("phase one finished").clone();
    let psi = proc.psi().expect("phase two finished");
    let phi = proc.derived().phi_alpha;
    let k = setup.k as f64;
    let upper = truncated_risk(&stream, &reference, ceil_snap(k * phi) as usize, data)?;
    let lower = truncated_risk(&stream[config.p1_end..], &reference, floor_snap(5.0 * (k + 1.0) * phi) as usize, data)? / 9.0;
    Ok(SandwichTrial { psi, upper, lower })
}

/// Empirical pass rates of both risk-estimate bounds over `setup.trials`
/// random permutations.
pub fn psi_sandwich_frequency(data: &Dataset, setup: &SandwichSetup, solver: &dyn KMedianSolver) -> Result<SandwichRates> {
    let run = |t: usize| psi_sandwich_trial(data, setup, t, solver);
    #[cfg(feature = "parallel")]
    let trials: Vec<SandwichTrial> = {
        use rayon::prelude::*;
        (0..setup.trials).into_par_iter().map(run).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let trials: Vec<SandwichTrial> = (0..setup.trials).map(run).collect::<Result<_>>()?;
    let count = trials.len().max(1) as f64;
    Ok(SandwichRates {
        upper_ok_rate: trials.iter().filter(|t| t.upper_ok()).count() as f64 / count,
        lower_ok_rate: trials.iter().filter(|t| t.lower_ok()).count() as f64 / count,
        trials,
    })
}
