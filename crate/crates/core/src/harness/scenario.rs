//! Monte-Carlo scenario runs.

use std::path::PathBuf;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::mean_ci95;
use crate::agents::{run_step, AgentConfig, AgentRuntime, Episode, Suggester, SuggesterConfig};
use crate::env::{BeliefInit, EnvSpec, Environment};
use crate::error::{Error, Result};
use crate::policy::AlphaVectorPolicy;
use crate::suggestion::SuggestionTables;

fn default_episodes() -> usize {
    2_000
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Free-form label; derived from env and agent when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub env: EnvSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<PathBuf>,
    pub agent: AgentConfig,
    #[serde(default)]
    pub suggester: SuggesterConfig,
    #[serde(default = "default_episodes")]
    pub episodes: usize,
    #[serde(default)]
    pub seed: u64,
    /// Defaults to the environment's own limit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub belief_init: Option<BeliefInit>,
    #[serde(default = "yes")]
    pub skip_equal: bool,
}

impl ScenarioConfig {
    pub fn new(env: EnvSpec, agent: AgentConfig) -> Self {
        Self {
            id: None,
            env,
            policy: None,
            agent,
            suggester: SuggesterConfig::default(),
            episodes: default_episodes(),
            seed: 0,
            max_steps: None,
            belief_init: None,
            skip_equal: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::Config("episodes must be at least 1".into()));
        }
        if self.max_steps == Some(0) {
            return Err(Error::Config("max_steps must be positive".into()));
        }
        self.agent.validate()?;
        self.suggester.validate()
    }

    pub fn scenario_id(&self) -> String {
        self.id.clone().unwrap_or_else(|| {
            let param = self.agent.param_label();
            let mut id = format!("{}/{}", self.env.name(), self.agent.kind());
            if !param.is_empty() {
                id.push('/');
                id.push_str(&param);
            }
            id
        })
    }

    /// Runtime for this scenario over an already built environment and policy.
    pub fn runtime(
        &self,
        env: Arc<Environment>,
        policy: Arc<AlphaVectorPolicy>,
        tables: Option<Arc<SuggestionTables>>,
    ) -> Result<AgentRuntime> {
        self.validate()?;
        policy
            .check_model(env.model())
            .map_err(|e| Error::Config(format!("policy does not match environment: {e}")))?;
        let mut rt = match tables {
            Some(t) => {
                if matches!(self.agent, AgentConfig::Noisy { .. }) && t.q(0, 0).is_none() {
                    return Err(Error::Config("noisy agent needs tables with Q values".into()));
                }
                AgentRuntime {
                    env: env.clone(),
                    policy,
                    tables: t,
                    agent: self.agent,
                    skip_equal: true,
                    max_steps: env.default_max_steps(),
                    belief_init: env.default_belief_init(),
                }
            }
            None => AgentRuntime::new(env, policy, self.agent)?,
        };
        rt.skip_equal = self.skip_equal;
        if let Some(m) = self.max_steps {
            rt.max_steps = m;
        }
        if let Some(init) = self.belief_init {
            rt.belief_init = init;
        }
        if rt.agent.uses_belief() {
            rt.env.initial_belief(rt.belief_init)?;
        }
        Ok(rt)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeRecord {
    pub episode: u64,
    /// Discounted return.
    pub reward: f64,
    pub undiscounted_reward: f64,
    pub steps: usize,
    pub differing_suggestions: usize,
    pub delivered_suggestions: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aborted: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub scenario_id: String,
    pub agent_kind: String,
    pub param: String,
    pub env: String,
    pub episodes: usize,
    pub seed: u64,
    pub reception_rate: f64,
    pub randomness: f64,
    pub mean_reward: f64,
    pub reward_ci95: f64,
    pub mean_differing_suggestions: f64,
    pub suggestions_ci95: f64,
    pub mean_steps: f64,
    /// Mean over episodes of differing suggestions per step.
    pub suggestions_per_step: f64,
    pub mean_undiscounted_reward: f64,
    pub undiscounted_ci95: f64,
    /// Set when there are too few episodes for a confidence interval.
    pub ci_undefined: bool,
    pub aborted_episodes: usize,
}

impl ScenarioSummary {
    pub fn reward(&self) -> (f64, f64) {
        (self.mean_reward, self.reward_ci95)
    }

    pub fn suggestions(&self) -> (f64, f64) {
        (self.mean_differing_suggestions, self.suggestions_ci95)
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub summary: ScenarioSummary,
    pub records: Vec<EpisodeRecord>,
}

/// Loads the environment and the policy file named in the config, then runs it.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioResult> {
    cfg.validate()?;
    let path = cfg
        .policy
        .as_ref()
        .ok_or_else(|| Error::Config("scenario has no policy path".into()))?;
    let policy = AlphaVectorPolicy::load(path)?;
    let env = Environment::new(cfg.env.clone()).map_err(|e| Error::Config(e.to_string()))?;
    run_scenario_with(cfg, Arc::new(env), Arc::new(policy), None)
}

/// Runs a scenario over prebuilt shared pieces. Episodes run in parallel;
/// results do not depend on scheduling.
pub fn run_scenario_with(
    cfg: &ScenarioConfig,
    env: Arc<Environment>,
    policy: Arc<AlphaVectorPolicy>,
    tables: Option<Arc<SuggestionTables>>,
) -> Result<ScenarioResult> {
    let rt = cfg.runtime(env, policy, tables)?;
    let records = (0..cfg.episodes as u64)
        .into_par_iter()
        .map(|i| run_episode(&rt, &cfg.suggester, cfg.seed, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScenarioResult {
        summary: summarize(cfg, &records),
        records,
    })
}

/// One episode with a simulated suggester.
pub fn run_episode(
    rt: &AgentRuntime,
    suggester: &SuggesterConfig,
    seed: u64,
    index: u64,
) -> Result<EpisodeRecord> {
    let mut ep = Episode::new(rt.clone(), seed, index)?;
    let mut source = Suggester::new(*suggester, &ep, seed)?;
    let mut aborted = None;
    while !ep.is_done() {
        match run_step(&mut ep, &mut source) {
            Ok(_) => {}
            Err(e @ Error::ImpossibleObservation { .. }) => {
                aborted = Some(e.to_string());
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(EpisodeRecord {
        episode: index,
        reward: ep.discounted_return(),
        undiscounted_reward: ep.total_reward(),
        steps: ep.step_index(),
        differing_suggestions: ep.differing_suggestions(),
        delivered_suggestions: ep.delivered_suggestions(),
        aborted,
    })
}

pub fn summarize(cfg: &ScenarioConfig, records: &[EpisodeRecord]) -> ScenarioSummary {
    let col = |f: &dyn Fn(&EpisodeRecord) -> f64| records.iter().map(f).collect::<Vec<f64>>();
    let (mean_reward, reward_ci) = mean_ci95(&col(&|r| r.reward));
    let (mean_undisc, undisc_ci) = mean_ci95(&col(&|r| r.undiscounted_reward));
    let (mean_sugg, sugg_ci) = mean_ci95(&col(&|r| r.differing_suggestions as f64));
    let (mean_steps, _) = mean_ci95(&col(&|r| r.steps as f64));
    let (per_step, _) = mean_ci95(&col(&|r| {
        if r.steps == 0 {
            0.0
        } else {
            r.differing_suggestions as f64 / r.steps as f64
        }
    }));
    ScenarioSummary {
        scenario_id: cfg.scenario_id(),
        agent_kind: cfg.agent.kind().into(),
        param: cfg.agent.param_label(),
        env: cfg.env.name(),
        episodes: records.len(),
        seed: cfg.seed,
        reception_rate: cfg.suggester.reception_rate,
        randomness: cfg.suggester.randomness,
        mean_reward,
        reward_ci95: reward_ci.unwrap_or(0.0),
        mean_differing_suggestions: mean_sugg,
        suggestions_ci95: sugg_ci.unwrap_or(0.0),
        mean_steps,
        suggestions_per_step: per_step,
        mean_undiscounted_reward: mean_undisc,
        undiscounted_ci95: undisc_ci.unwrap_or(0.0),
        ci_undefined: reward_ci.is_none(),
        aborted_episodes: records.iter().filter(|r| r.aborted.is_some()).count(),
    }
}
