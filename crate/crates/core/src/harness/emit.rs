//! CSV and markdown output.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::scenario::ScenarioSummary;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Markdown,
}

/// One CSV line. The leading columns are fixed; the rest follow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub scenario_id: String,
    pub agent_kind: String,
    pub param: String,
    pub env: String,
    pub episodes: usize,
    pub mean_reward: f64,
    pub reward_ci95: f64,
    pub mean_suggestions: f64,
    pub suggestions_ci95: f64,
    pub mean_steps: f64,
    pub seed: u64,
    pub reception_rate: f64,
    pub randomness: f64,
    pub suggestions_per_step: f64,
    pub undiscounted_reward: f64,
    pub undiscounted_ci95: f64,
    pub ci_undefined: bool,
    pub aborted_episodes: usize,
}

pub const CSV_HEADER: [&str; 18] = [
    "scenario_id",
    "agent_kind",
    "param",
    "env",
    "episodes",
    "mean_reward",
    "reward_ci95",
    "mean_suggestions",
    "suggestions_ci95",
    "mean_steps",
    "seed",
    "reception_rate",
    "randomness",
    "suggestions_per_step",
    "undiscounted_reward",
    "undiscounted_ci95",
    "ci_undefined",
    "aborted_episodes",
];

impl From<&ScenarioSummary> for CsvRow {
    fn from(s: &ScenarioSummary) -> Self {
        Self {
            scenario_id: s.scenario_id.clone(),
            agent_kind: s.agent_kind.clone(),
            param: s.param.clone(),
            env: s.env.clone(),
            episodes: s.episodes,
            mean_reward: s.mean_reward,
            reward_ci95: s.reward_ci95,
            mean_suggestions: s.mean_differing_suggestions,
            suggestions_ci95: s.suggestions_ci95,
            mean_steps: s.mean_steps,
            seed: s.seed,
            reception_rate: s.reception_rate,
            randomness: s.randomness,
            suggestions_per_step: s.suggestions_per_step,
            undiscounted_reward: s.mean_undiscounted_reward,
            undiscounted_ci95: s.undiscounted_ci95,
            ci_undefined: s.ci_undefined,
            aborted_episodes: s.aborted_episodes,
        }
    }
}

pub fn write_csv(summaries: &[ScenarioSummary], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    // Written explicitly so an empty list still gets a header.
    w.write_record(CSV_HEADER)?;
    let mut w = {
        let inner = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
        csv::WriterBuilder::new().has_headers(false).from_writer(inner)
    };
    for s in summaries {
        w.serialize(CsvRow::from(s))?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

pub fn read_csv(input: impl std::io::Read) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

fn agent_label(s: &ScenarioSummary) -> String {
    let mut name = match s.agent_kind.as_str() {
        "normal" => "Normal".to_string(),
        "perfect" => "Perfect".into(),
        "random" => "Random".into(),
        "naive" => "Naive".into(),
        "scaled" => "Scaled".into(),
        "noisy" => "Noisy".into(),
        other => other.into(),
    };
    if !s.param.is_empty() {
        let p = s
            .param
            .replace("nu=", "ν = ")
            .replace("tau=", "τ = ")
            .replace("lambda=", "λ = ");
        name.push_str(&format!(" ({p})"));
    }
    name
}

/// Agents as rows, one reward and one suggestion column per environment.
pub fn write_markdown(summaries: &[ScenarioSummary], mut out: impl Write) -> std::io::Result<()> {
    let mut envs: Vec<&str> = Vec::new();
    let mut rows: Vec<String> = Vec::new();
    for s in summaries {
        if !envs.contains(&s.env.as_str()) {
            envs.push(&s.env);
        }
        let label = agent_label(s);
        if !rows.contains(&label) {
            rows.push(label);
        }
    }
    write!(out, "| Agent |")?;
    for e in &envs {
        write!(out, " {e} reward | {e} suggestions |")?;
    }
    writeln!(out)?;
    write!(out, "|---|")?;
    for _ in &envs {
        write!(out, "---|---|")?;
    }
    writeln!(out)?;
    for label in &rows {
        write!(out, "| {label} |")?;
        for e in &envs {
            match summaries
                .iter()
                .find(|s| s.env == *e && agent_label(s) == *label)
            {
                Some(s) => {
                    let sugg = if s.agent_kind == "normal" || s.agent_kind == "perfect" {
                        "-".to_string()
                    } else {
                        format!("{:.1} ± {:.1}", s.mean_differing_suggestions, s.suggestions_ci95)
                    };
                    write!(out, " {:.1} ± {:.1} | {sugg} |", s.mean_reward, s.reward_ci95)?;
                }
                None => write!(out, " | |")?,
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn emit_results(summaries: &[ScenarioSummary], format: Format, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    match format {
        Format::Csv => write_csv(summaries, file).map_err(|e| match e {
            Error::Csv(c) if c.is_io_error() => Error::io(path, std::io::Error::other(c.to_string())),
            other => other,
        }),
        Format::Markdown => write_markdown(summaries, file).map_err(|e| Error::io(path, e)),
    }
}
