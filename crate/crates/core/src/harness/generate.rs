//! Synthetic Gaussian mixtures with uniform outliers.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::Dataset;

/// Inlier offsets are resampled until they lie within this many standard
/// deviations of their blob mean.
pub const BLOB_RADIUS: f64 = 6.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub n: usize,
    pub k_true: usize,
    pub dim: usize,
    /// Minimum pairwise distance between blob means, in units of sigma = 1.
    pub separation: f64,
    pub outlier_fraction: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mixture {
    pub dataset: Dataset,
    /// Generating blob of each point; `None` for outliers.
    pub labels: Vec<Option<usize>>,
    pub means: Vec<Vec<f64>>,
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Draws `k_true` unit-variance isotropic blobs with pairwise mean distance at
/// least `separation`, then replaces `round(outlier_fraction * n)` points by
/// uniform draws from the means' bounding box enlarged on every side.
pub fn generate_gaussian_mixture(spec: &MixtureSpec) -> Result<Mixture> {
    let MixtureSpec { n, k_true, dim, separation, outlier_fraction, seed } = *spec;
    if n == 0 || k_true == 0 || dim == 0 {
        return Err(Error::InvalidParameter("n, k_true and dim must be positive".into()));
    }
    if !(separation.is_finite() && separation >= 0.0) {
        return Err(Error::InvalidParameter(format!("separation must be finite and non-negative, got {separation}")));
    }
    if !(0.0..=0.2).contains(&outlier_fraction) {
        return Err(Error::InvalidParameter(format!("outlier fraction must lie in [0, 0.2], got {outlier_fraction}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let per_axis = (k_true as f64).powf(1.0 / dim as f64).ceil().max(2.0);
    let side = separation.max(1.0) * per_axis * 2.0;
    let mut means: Vec<Vec<f64>> = Vec::with_capacity(k_true);
    for i in 0..k_true {
        let mut placed = None;
        for _ in 0..1000 {
            let m: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..side)).collect();
            if means.iter().all(|o| distance(o, &m) >= separation) {
                placed = Some(m);
                break;
            }
        }
        // Fall back to evenly spaced means along the first axis.
        let m = placed.unwrap_or_else(|| {
            let mut m = vec![0.0; dim];
            m[0] = i as f64 * separation + side * 4.0;
            m
        });
        means.push(m);
    }
    if means.iter().enumerate().any(|(i, a)| means[..i].iter().any(|b| distance(a, b) < separation)) {
        means = (0..k_true)
            .map(|i| {
                let mut m = vec![0.0; dim];
                m[0] = i as f64 * separation;
                m
            })
            .collect();
    }

    let outliers = ((outlier_fraction * n as f64).round() as usize).min(n);
    let inliers = n - outliers;
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..inliers {
        let blob = i % k_true;
        let offset: Vec<f64> = loop {
            let v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            if v.iter().map(|x| x * x).sum::<f64>().sqrt() <= BLOB_RADIUS {
                break v;
            }
        };
        points.push(means[blob].iter().zip(&offset).map(|(m, o)| m + o).collect::<Vec<f64>>());
        labels.push(Some(blob));
    }
    if outliers > 0 {
        let lo: Vec<f64> = (0..dim).map(|a| means.iter().map(|m| m[a]).fold(f64::INFINITY, f64::min)).collect();
        let hi: Vec<f64> = (0..dim).map(|a| means.iter().map(|m| m[a]).fold(f64::NEG_INFINITY, f64::max)).collect();
        for _ in 0..outliers {
            let p: Vec<f64> = (0..dim)
                .map(|a| {
                    let pad = (hi[a] - lo[a]).max(separation) + BLOB_RADIUS;
                    rng.gen_range(lo[a] - pad..=hi[a] + pad)
                })
                .collect();
            points.push(p);
            labels.push(None);
        }
    }
    Ok(Mixture { dataset: Dataset::from_points(points)?, labels, means })
}
