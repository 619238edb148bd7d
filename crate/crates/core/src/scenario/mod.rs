//! Declarative experiment runner: TOML scenario in, result bundle out.

pub mod bundle;
pub mod config;
mod experiments;
mod run;

pub use bundle::{emit, to_json, Check, Format, Metadata, Payload, ResultBundle, Table, Value};
pub use config::{Experiment, ScenarioConfig};
pub use run::{config_hash, run_scenario, RunSettings};
