//! Closed-form quantities used by the algorithms.
//!
//! Each formula lives here exactly once. `ln` is the natural logarithm; the
//! quota `M` uses base 2.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Constants of the size threshold `phi`, the enlarged solution size `k+` and
/// the denominator of the risk estimate `psi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub c_phi: f64,
    pub c_kplus: f64,
    pub c_psi_denom: f64,
}

impl Profile {
    /// The constants under which the approximation guarantee is proved.
    pub const PAPER: Profile = Profile { c_phi: 150.0, c_kplus: 38.0, c_psi_denom: 3.0 };
    /// Scaled-down constants that keep thresholds meaningful for `n <= 10⁴`-ish streams.
    pub const DESK: Profile = Profile { c_phi: 5.0, c_kplus: 2.0, c_psi_denom: 3.0 };

    pub fn by_name(name: &str) -> Option<Profile> {
        match name {
            "paper" => Some(Self::PAPER),
            "desk" => Some(Self::DESK),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        if *self == Self::PAPER {
            "paper"
        } else if *self == Self::DESK {
            "desk"
        } else {
            "custom"
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all_positive = [self.c_phi, self.c_kplus, self.c_psi_denom].iter().all(|v| v.is_finite() && *v > 0.0);
        if all_positive {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("profile constants must be positive: {self:?}")))
        }
    }
}

/// Per-copy quantities derived from `(k, delta, alpha)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedParameters {
    pub phi_alpha: f64,
    pub k_plus: usize,
    pub m_default: usize,
}

const SNAP: f64 = 1e-9;

/// Floor that treats values within 10⁻⁹ (relative) of an integer as that integer.
pub fn floor_snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= SNAP * x.abs().max(1.0) {
        r
    } else {
        x.floor()
    }
}

/// Ceiling that treats values within 10⁻⁹ (relative) of an integer as that integer.
pub fn ceil_snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= SNAP * x.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

fn check_k_delta(k: usize, delta: f64) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0,1), got {delta}")));
    }
    Ok(())
}

/// `ln(32k/delta)`, the logarithm shared by `phi` and `k+`.
pub fn log_term(k: usize, delta: f64) -> f64 {
    (32.0 * k as f64 / delta).ln()
}

/// Cluster-size threshold `phi_alpha = c_phi * ln(32k/delta) / alpha`.
pub fn phi_alpha(k: usize, delta: f64, alpha: f64, profile: &Profile) -> f64 {
    profile.c_phi * log_term(k, delta) / alpha
}

/// Size of the reference clustering, `k + ceil(c_kplus * ln(32k/delta))`.
pub fn k_plus(k: usize, delta: f64, profile: &Profile) -> usize {
    k + ceil_snap(profile.c_kplus * log_term(k, delta)) as usize
}

/// Default per-center quota, `ceil(log2(8 k+ / delta))`.
pub fn quota(k_plus: usize, delta: f64) -> usize {
    ceil_snap((8.0 * k_plus as f64 / delta).log2()).max(1.0) as usize
}

/// Computes `phi_alpha`, `k+` and the default quota for one procedure copy.
pub fn derive_parameters(k: usize, delta: f64, alpha: f64, profile: &Profile) -> Result<DerivedParameters> {
    check_k_delta(k, delta)?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0,1], got {alpha}")));
    }
    profile.validate()?;
    let k_plus = k_plus(k, delta, profile);
    Ok(DerivedParameters { phi_alpha: phi_alpha(k, delta, alpha, profile), k_plus, m_default: quota(k_plus, delta) })
}

/// Number of phase-two distances discarded before estimating `psi`:
/// `floor(2 alpha (k+1) phi_alpha)`.
pub fn psi_truncation(k: usize, alpha: f64, phi_alpha: f64) -> usize {
    floor_snap(2.0 * alpha * (k as f64 + 1.0) * phi_alpha).max(0.0) as usize
}

/// `psi = truncated_sum / (c_psi_denom * alpha)`.
pub fn psi_from_truncated(truncated_sum: f64, alpha: f64, profile: &Profile) -> f64 {
    truncated_sum / (profile.c_psi_denom * alpha)
}

/// Phase-three distance threshold `psi / (k tau)`.
pub fn selection_threshold(psi: f64, k: usize, tau: f64) -> f64 {
    psi / (k as f64 * tau)
}

/// Phase fraction of the first procedure copy, `delta / (4k)`.
pub fn alpha_one(k: usize, delta: f64) -> f64 {
    delta / (4.0 * k as f64)
}

/// Number of doublings `I`: the largest integer with `alpha_1 2^I <= 1/6`,
/// equal to `floor(log2(1/(6 alpha_1)))` and zero when `alpha_1 > 1/12`.
pub fn doublings(alpha_one: f64) -> usize {
    let mut i = 0usize;
    while 6.0 * alpha_one * 2f64.powi(i as i32 + 1) <= 1.0 + SNAP {
        i += 1;
    }
    i
}

/// Per-copy confidence `delta' = delta / (I + 1)`.
pub fn delta_prime(delta: f64, doublings: usize) -> f64 {
    delta / (doublings as f64 + 1.0)
}

/// Coefficients of the risk bounds, as functions of the black box's `beta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremConstants {
    pub beta: f64,
    /// Small optimal clusters: `36 beta + 20`.
    pub small_cluster_coeff: f64,
    /// Large optimal clusters: `468 beta + 260`.
    pub large_cluster_coeff: f64,
    /// `1 + small + large = 504 beta + 281`.
    pub combined_ceiling: f64,
}

impl TheoremConstants {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta >= 1.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be at least 1, got {beta}")));
        }
        let small = 36.0 * beta + 20.0;
        let large = 468.0 * beta + 260.0;
        Ok(Self { beta, small_cluster_coeff: small, large_cluster_coeff: large, combined_ceiling: 1.0 + small + large })
    }
}

/// Hard ceiling on any measured approximation ratio: `504 beta + 281`.
pub fn ratio_ceiling(beta: f64) -> Result<f64> {
    TheoremConstants::new(beta).map(|c| c.combined_ceiling)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_profile_parameters() {
        // 150 ln(640) / 0.1 and 2 + ceil(38 ln 640), evaluated independently.
        let expected_phi = 150.0 * 640f64.ln() / 0.1;
        assert!((expected_phi - 9692.2).abs() < 0.05);
        let p = derive_parameters(2, 0.1, 0.1, &Profile::PAPER).unwrap();
        assert!((p.phi_alpha - expected_phi).abs() < 1e-9);
        assert_eq!(p.k_plus, 248);
        // ceil(log2(19840)) = ceil(14.276)
        assert_eq!(p.m_default, 15);
    }

    #[test]
    fn alpha_one_cancels_division() {
        let p = derive_parameters(3, 0.2, 1.0, &Profile::PAPER).unwrap();
        assert_eq!(p.phi_alpha, 150.0 * (32.0f64 * 3.0 / 0.2).ln());
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(derive_parameters(0, 0.1, 0.1, &Profile::DESK).is_err());
        assert!(derive_parameters(2, 1.0, 0.1, &Profile::DESK).is_err());
        assert!(derive_parameters(2, 0.1, 0.0, &Profile::DESK).is_err());
        let bad = Profile { c_phi: -1.0, ..Profile::DESK };
        assert!(derive_parameters(2, 0.1, 0.1, &bad).is_err());
        assert!(ratio_ceiling(0.5).is_err());
    }

    #[test]
    fn ratio_ceiling_values() {
        assert_eq!(ratio_ceiling(1.0).unwrap(), 785.0);
        assert_eq!(ratio_ceiling(5.0).unwrap(), 2801.0);
        for b in [1.0, 2.5, 7.0] {
            assert_eq!(ratio_ceiling(b + 1.0).unwrap() - ratio_ceiling(b).unwrap(), 504.0);
        }
    }

    #[test]
    fn doubling_count() {
        assert_eq!(doublings(0.0125), 3);
        assert_eq!(doublings(0.1125), 0);
        assert_eq!(doublings(1.0 / 48.0), 3);
        assert_eq!(doublings(1.0 / 12.0), 1);
        let a = 0.0125 * 8.0;
        assert!(a > 1.0 / 12.0 && a <= 1.0 / 6.0);
    }

    #[test]
    fn snapping() {
        assert_eq!(ceil_snap(0.0125 * 1200.0), 15.0);
        assert_eq!(ceil_snap(15.2), 16.0);
        assert_eq!(floor_snap(193.99999999999997), 194.0);
        assert_eq!(floor_snap(193.5), 193.0);
    }

    #[test]
    fn profiles_by_name() {
        assert_eq!(Profile::by_name("desk"), Some(Profile::DESK));
        assert_eq!(Profile::PAPER.name(), "paper");
        assert!(Profile::by_name("x").is_none());
    }
}
