//! Experiment orchestration: single rounds, configured sweeps and reports.

pub mod config;
pub mod round;
pub mod sweep;

pub use config::{AxisConfig, AxisName, CentroidSpec, ExperimentConfig, Method, SourceConfig, SyntheticSource};
pub use round::{run_federated_round, FraReport, RoundParams};
pub use sweep::{run_experiment_sweep, synthetic_clients, SweepReport, SweepRow, TrialRecord};
