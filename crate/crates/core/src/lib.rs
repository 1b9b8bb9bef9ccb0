//! Locally differentially private partitioning regression and classification.
//!
//! Each individual quantises their feature vector onto an origin-anchored cubic
//! lattice, then releases Laplace-perturbed occupancy indicators and truncated
//! responses for every cell that meets a ball around the origin. The collector
//! averages those releases into a publishable per-cell table, from which a
//! thresholded regressogram and a sign-based classifier are built.
//!
//! Module map:
//!
//! - [`partition`]: the lattice, quantiser and cell enumeration.
//! - [`mechanism`]: calibration, truncation, Laplace noise, per-record
//!   privatisation and the exact privacy-loss auditor.
//! - [`collector`]: aggregation (faithful and fast paths) and the published
//!   CSV + JSON format.
//! - [`estimator`]: the private regression estimate, the non-private
//!   baseline, the private classifier and parameter schedules.
//! - [`synthdata`]: synthetic scenarios with known regression functions.
//! - [`evaluate`]: Monte-Carlo risk, tail-bound and variance checks, and the
//!   consistency sweep driver.
//! - [`cli`]: configuration and subcommands behind the `ldp-partition` binary.

pub mod cli;
pub mod collector;
pub mod error;
pub mod estimator;
pub mod evaluate;
pub mod mechanism;
pub mod partition;
pub mod rng;
pub mod synthdata;

mod numfmt;

pub use collector::{aggregate_fast, aggregate_faithful, load, publish, Mode, PrivateAggregate};
pub use error::{Error, Result};
pub use estimator::{
    classify, fit_nonprivate_baseline, fit_private_regression, schedules, Label,
    PrivateClassifier, RegressionEstimate, ScheduleReport,
};
pub use mechanism::{calibrate, privatize_record, sample_unit_laplace, truncate, PrivacyParams, PrivateRecord};
pub use partition::{CellId, Partition, PartitionSpec};
pub use rng::SeedStream;
pub use synthdata::{make_scenario, Observation, Scenario, ScenarioParams};
