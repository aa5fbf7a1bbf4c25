//! One-parameter sweeps over the suggester.

use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::scenario::{run_scenario_with, ScenarioConfig, ScenarioSummary};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::policy::AlphaVectorPolicy;
use crate::suggestion::SuggestionTables;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    Reception,
    Randomness,
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reception" | "reception_rate" => Ok(SweepAxis::Reception),
            "randomness" => Ok(SweepAxis::Randomness),
            other => Err(Error::Config(format!("unknown sweep axis {other:?}"))),
        }
    }
}

impl SweepAxis {
    pub fn apply(self, cfg: &mut ScenarioConfig, value: f64) {
        match self {
            SweepAxis::Reception => cfg.suggester.reception_rate = value,
            SweepAxis::Randomness => cfg.suggester.randomness = value,
        }
    }
}

/// Runs `base` once per value. Every point reuses the base seed, so the
/// points share random numbers episode by episode.
pub fn run_sweep(
    base: &ScenarioConfig,
    axis: SweepAxis,
    values: &[f64],
    env: Arc<Environment>,
    policy: Arc<AlphaVectorPolicy>,
    tables: Option<Arc<SuggestionTables>>,
) -> Result<Vec<ScenarioSummary>> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let mut tables = tables;
    let mut out = Vec::with_capacity(values.len());
    for &v in values {
        let mut cfg = base.clone();
        axis.apply(&mut cfg, v);
        if tables.is_none() {
            let rt = cfg.runtime(env.clone(), policy.clone(), None)?;
            tables = Some(rt.tables);
        }
        out.push(run_scenario_with(&cfg, env.clone(), policy.clone(), tables.clone())?.summary);
    }
    Ok(out)
}
