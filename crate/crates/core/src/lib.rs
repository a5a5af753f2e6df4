//! Sequential k-median clustering without substitution under random arrival
//! order.
//!
//! Points arrive one at a time in a uniformly random order and each must be
//! accepted as a center or rejected on the spot. [`munsc::Munsc`] runs a
//! multiscale family of [`select_proc::SelectProc`] copies whose union of
//! selections is the output. Offline solvers live in [`solver`] and exact
//! reference answers in [`oracle`].

pub mod bins;
pub mod error;
pub mod harness;
pub mod io;
pub mod metric;
pub mod munsc;
pub mod oracle;
pub mod params;
pub mod select_proc;
pub mod solver;
pub mod validation;

pub use error::{Error, Result};
pub use metric::{CenterSet, Dataset, PointId};
pub use munsc::{compute_schedule, run_stream, Munsc, MunscResult, Schedule};
pub use params::Profile;
pub use select_proc::{SelectProc, SelectProcConfig};
pub use solver::{Exhaustive, KMedianSolver, LocalSearch, SolverKind};
