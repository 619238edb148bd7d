use std::time::Instant;

use sha2::{Digest, Sha256};

use super::bundle::{Metadata, Payload, ResultBundle};
use super::config::ScenarioConfig;
use super::experiments;
use crate::error::{Error, Result};

/// Execution settings that do not change results.
#[derive(Clone, Copy, Debug, Default)]
pub struct RunSettings {
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

/// SHA-256 of the canonical (re-serialized) configuration.
pub fn config_hash(config: &ScenarioConfig) -> String {
    let canonical = serde_json::to_vec(config).expect("configuration serializes");
    Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect()
}

/// Validates and runs a scenario. Results depend only on the configuration
/// (including its seed), never on the thread count.
pub fn run_scenario(config: &ScenarioConfig, settings: RunSettings) -> Result<ResultBundle> {
    config.validate()?;
    let start = Instant::now();
    let (output, threads) = match settings.threads {
        Some(n) => {
            if n == 0 {
                return Err(Error::validation("threads", "must be at least 1"));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Configuration(format!("cannot start {n} worker threads: {e}")))?;
            (pool.install(|| experiments::run(config))?, n)
        }
        None => (experiments::run(config)?, rayon::current_num_threads()),
    };
    let mut tables = output.tables;
    let wanted = &config.scenario.outputs;
    if !wanted.is_empty() {
        if let Some(missing) = wanted.iter().find(|w| !tables.contains_key(w.as_str())) {
            let known: Vec<&str> = tables.keys().map(String::as_str).collect();
            return Err(Error::validation(
                "scenario.outputs",
                format!("experiment {} has no table `{missing}` (available: {})", config.experiment(), known.join(", ")),
            ));
        }
        tables.retain(|k, _| wanted.contains(k));
    }
    let payload = Payload {
        name: config.scenario.name.clone(),
        experiment: config.experiment(),
        seed: config.scenario.seed,
        tables,
        summary: output.summary,
        checks: output.checks,
    };
    let metadata = Metadata {
        config_hash: config_hash(config),
        seed: config.scenario.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        threads,
    };
    Ok(ResultBundle { payload, metadata })
}
