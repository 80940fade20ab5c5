//! Configuration, Monte Carlo experiments, end-to-end estimation and CSV
//! reports behind the command-line tool.

pub mod config;
pub mod estimate;
pub mod experiment;
pub mod report;

pub use config::{BandwidthMethod, ExperimentConfig, Scenario};
pub use estimate::{estimate_cmd, BandwidthChoice, EstimateOptions, EstimateOutput};
pub use experiment::{run_mase, run_volvol, MaseSamples, VolVolSamples};
pub use report::ExperimentReport;
