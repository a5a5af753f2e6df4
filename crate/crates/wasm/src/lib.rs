//! Browser playground that streams a generated mixture through the
//! multiscale procedure and shows the resulting bin divisions and schedules.
//!
//! The JSON-producing functions in [`views`] are plain Rust; the
//! `wasm_bindgen` wrappers only convert errors.

use munsc_core::harness::{generate_gaussian_mixture, MixtureSpec};
use munsc_core::Dataset;
use wasm_bindgen::prelude::*;

pub mod views;

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// A 2-D dataset held on the Rust side.
#[wasm_bindgen]
pub struct Playground {
    data: Dataset,
    labels: Vec<i32>,
}

impl Playground {
    pub fn generate(n: usize, k_true: usize, separation: f64, outliers: f64, seed: u64) -> munsc_core::Result<Self> {
        let spec = MixtureSpec { n, k_true, dim: 2, separation, outlier_fraction: outliers, seed };
        let m = generate_gaussian_mixture(&spec)?;
        let labels = m.labels.iter().map(|l| l.map_or(-1, |v| v as i32)).collect();
        Ok(Playground { data: m.dataset, labels })
    }

    pub fn dataset(&self) -> &Dataset {
        &self.data
    }
}

#[wasm_bindgen]
impl Playground {
    /// Generates `n` points in `k_true` unit-variance blobs in the plane.
    #[wasm_bindgen(constructor)]
    pub fn new(n: usize, k_true: usize, separation: f64, outliers: f64, seed: u64) -> Result<Playground, JsError> {
        Self::generate(n, k_true, separation, outliers, seed).map_err(js_err)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Coordinates flattened as `x0, y0, x1, y1, ...`.
    pub fn points(&self) -> Vec<f64> {
        views::flat_points(&self.data)
    }

    /// Generating blob per point, `-1` for outliers.
    pub fn labels(&self) -> Vec<i32> {
        self.labels.clone()
    }

    /// Streams the points in the order drawn from `perm_seed`; JSON result.
    pub fn run(&self, k: usize, delta: f64, profile: &str, perm_seed: u64) -> Result<String, JsError> {
        views::run_json(&self.data, k, delta, profile, perm_seed).map_err(js_err)
    }

    /// Linear bin division of all points around `centers`; JSON array of bins.
    pub fn bins(&self, centers: Vec<u32>, z: usize) -> Result<String, JsError> {
        views::bins_json(&self.data, &centers, z).map_err(js_err)
    }
}

/// Copy schedule for a stream of `n` points, as JSON.
#[wasm_bindgen]
pub fn schedule(k: usize, delta: f64, n: usize, profile: &str) -> Result<String, JsError> {
    views::schedule_json(k, delta, n, profile).map_err(js_err)
}
