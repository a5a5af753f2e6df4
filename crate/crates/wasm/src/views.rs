use munsc_core::bins::build_division;
use munsc_core::harness::random_permutation;
use munsc_core::metric::risk;
use munsc_core::select_proc::{Decision, Reason};
use munsc_core::{compute_schedule, CenterSet, Dataset, Error, LocalSearch, Munsc, PointId, Profile, Result};
use serde::Serialize;

fn profile(name: &str) -> Result<Profile> {
    Profile::by_name(name).ok_or_else(|| Error::InvalidParameter(format!("unknown profile {name}")))
}

#[derive(Serialize)]
pub struct Selection {
    pub point: PointId,
    pub index: usize,
    /// First copy (0-based) that selected the point.
    pub copy: usize,
    pub reason: Reason,
}

#[derive(Serialize)]
pub struct CopyRun {
    pub alpha: f64,
    pub phases: [usize; 3],
    pub psi: Option<f64>,
    pub threshold: Option<f64>,
    pub t_alpha: Vec<PointId>,
    pub selected: usize,
}

#[derive(Serialize)]
pub struct RunView {
    pub centers: Vec<PointId>,
    pub selections: Vec<Selection>,
    pub risk: f64,
    pub copies: Vec<CopyRun>,
}

#[derive(Serialize)]
pub struct CopyPlan {
    pub alpha: f64,
    pub gamma: f64,
    pub phases: [usize; 3],
    pub quota: usize,
    pub k_plus: usize,
}

#[derive(Serialize)]
pub struct ScheduleView {
    pub doublings: usize,
    pub delta_prime: f64,
    pub tau: f64,
    pub warnings: Vec<String>,
    pub copies: Vec<CopyPlan>,
}

pub fn flat_points(data: &Dataset) -> Vec<f64> {
    data.point_ids().iter().flat_map(|&p| data.coords(p).unwrap_or(&[]).iter().copied()).collect()
}

pub fn run_view(data: &Dataset, k: usize, delta: f64, profile_name: &str, perm_seed: u64) -> Result<RunView> {
    let schedule = compute_schedule(k, delta, data.len(), profile(profile_name)?)?;
    let solver = LocalSearch::new(perm_seed);
    let mut runner = Munsc::new(schedule, data, &solver)?;
    let mut selections = Vec::new();
    for x in random_permutation(data.len(), perm_seed) {
        let step = runner.observe(x)?;
        let first = step.per_copy.iter().enumerate().find_map(|(copy, d)| match d {
            Decision::Selected(reason) => Some((copy, *reason)),
            _ => None,
        });
        if let Some((copy, reason)) = first {
            selections.push(Selection { point: x, index: step.index, copy, reason });
        }
    }
    let result = runner.finish()?;
    let copies = result
        .copies
        .iter()
        .map(|r| CopyRun {
            alpha: r.config.alpha,
            phases: [r.config.p1_end, r.config.p2_end, r.config.p3_end],
            psi: r.psi,
            threshold: r.threshold,
            t_alpha: r.t_alpha.clone(),
            selected: r.selected.len(),
        })
        .collect();
    Ok(RunView {
        risk: risk(&data.point_ids(), &result.centers, data)?,
        centers: result.centers.into_vec(),
        selections,
        copies,
    })
}

pub fn run_json(data: &Dataset, k: usize, delta: f64, profile_name: &str, perm_seed: u64) -> Result<String> {
    Ok(serde_json::to_string(&run_view(data, k, delta, profile_name, perm_seed)?)?)
}

pub fn bins_json(data: &Dataset, centers: &[u32], z: usize) -> Result<String> {
    let reference = CenterSet::checked(centers.iter().map(|&c| PointId(c as usize)).collect(), data)?;
    let division = build_division(&data.point_ids(), &reference, z, data)?;
    Ok(serde_json::to_string(&division.bins)?)
}

pub fn schedule_view(k: usize, delta: f64, n: usize, profile_name: &str) -> Result<ScheduleView> {
    let s = compute_schedule(k, delta, n, profile(profile_name)?)?;
    let copies = s
        .copies
        .iter()
        .map(|c| CopyPlan {
            alpha: c.alpha,
            gamma: c.gamma,
            phases: [c.p1_end, c.p2_end, c.p3_end],
            quota: c.m,
            k_plus: c.derived().k_plus,
        })
        .collect();
    Ok(ScheduleView { doublings: s.doublings, delta_prime: s.delta_prime, tau: s.tau, warnings: s.warnings, copies })
}

pub fn schedule_json(k: usize, delta: f64, n: usize, profile_name: &str) -> Result<String> {
    Ok(serde_json::to_string(&schedule_view(k, delta, n, profile_name)?)?)
}
