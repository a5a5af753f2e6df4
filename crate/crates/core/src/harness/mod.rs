//! Experiment plumbing around the streaming algorithm.

pub mod bench;
pub mod experiment;
pub mod generate;
pub mod stream;

pub use bench::{run_bench, BenchRow, BenchSettings, BenchSuite};
pub use experiment::{run_experiment, ExperimentConfig, ExperimentReport, OracleChoice};
pub use generate::{generate_gaussian_mixture, Mixture, MixtureSpec};
pub use stream::{random_permutation, InstrumentedStream};
