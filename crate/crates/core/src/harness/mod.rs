//! Experiment harness: TOML configs, run directories with a JSON record and
//! tables, verification of finished runs, and the validation suite.

pub mod config;
pub mod run;
pub mod suite;

pub use config::{seed_override, ExperimentConfig, ExperimentKind, Plan};
pub use run::{report, run_experiment, verify, RunRecord, Summary, VerifyReport};
pub use suite::{run_all, run_criterion, CriterionResult, SuiteCheck, SuiteOptions, ValidationSummary};
