//! Scenario catalog, Monte Carlo runner and result files.

pub mod catalog;
pub mod output;
pub mod runner;
pub mod seed;
pub mod verify;

pub use catalog::{catalog, find_scenario, scenario_ids, ScenarioConfig, ScenarioKind, Series, Sweep};
pub use output::{emit_analytic, emit_csv, read_csv, RunManifest};
pub use runner::{default_workers, run_scenario, RunOutput};
