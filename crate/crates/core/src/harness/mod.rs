//! Rate sweeps over noise level and Hurst index, and the consolidated
//! property checks.

mod config;
mod experiment;
mod fit;
mod validation;

pub use config::{EstimatorConfig, ExperimentConfig, Tolerances, ValidationOptions};
pub use experiment::{run_rate_experiment, Cell, Check, ControlCell, Failure, FitRecord, HurstSummary, Measurement, RateReport, Status};
pub use fit::{fit_named, fit_slope, RateFit, MIN_FIT_POINTS};
pub use validation::{run_validation_suite, ValidationCheck, ValidationReport};
