//! JSON messages exchanged with the suggester console.

use serde::{Deserialize, Serialize};

use actsug_core::agents::{AgentConfig, StepTrace};
use actsug_core::env::BeliefInit;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ClientMessage {
    Create {
        scenario: SessionScenario,
    },
    Suggest {
        session: String,
        action: Option<usize>,
        /// Step the suggestion is meant for; a mismatch is rejected.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        step: Option<usize>,
    },
    Reset {
        session: String,
    },
    /// Current frame without stepping.
    Get {
        session: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Each step waits for a submission.
    #[default]
    Paused,
    /// Steps every `dwell_ms`, using a suggestion submitted during the dwell.
    Auto,
}

fn default_dwell() -> u64 {
    1_000
}

fn yes() -> bool {
    true
}

/// What a console asks for; the environment and policy are the server's.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionScenario {
    pub agent: AgentConfig,
    /// Must name the served environment when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub env: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub episode: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub belief_init: Option<BeliefInit>,
    #[serde(default = "yes")]
    pub skip_equal: bool,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default = "default_dwell")]
    pub dwell_ms: u64,
    /// Include the true hidden state in frames.
    #[serde(default)]
    pub debug: bool,
}

impl SessionScenario {
    pub fn new(agent: AgentConfig) -> Self {
        Self {
            agent,
            env: None,
            seed: 0,
            episode: 0,
            max_steps: None,
            belief_init: None,
            skip_equal: true,
            mode: Mode::Paused,
            dwell_ms: default_dwell(),
            debug: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptor {
    pub env: String,
    /// Tag cells or every RockSample grid cell, as `[x, y]`.
    pub cells: Vec<(i32, i32)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rocks: Option<Vec<(i32, i32)>>,
    pub action_labels: Vec<String>,
    pub agent: AgentConfig,
    pub mode: Mode,
    pub max_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub session: String,
    pub step: usize,
    pub agent_pos: (i32, i32),
    pub belief_marginal: Vec<f64>,
    pub planned_action: usize,
    pub applied: bool,
    pub differed: bool,
    pub reward_total: f64,
    pub done: bool,
    pub discounted_reward: f64,
    pub differing_suggestions: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub descriptor: Option<Descriptor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_trace: Option<TraceView>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_state: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

/// The wire view of a [`StepTrace`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceView {
    pub step: usize,
    pub planned_action: usize,
    pub delivered_suggestion: Option<usize>,
    pub suggestion_differed: bool,
    pub applied: bool,
    pub executed_action: usize,
    pub reward: f64,
    pub observation: usize,
}

impl From<&StepTrace> for TraceView {
    fn from(t: &StepTrace) -> Self {
        Self {
            step: t.step,
            planned_action: t.planned_action,
            delivered_suggestion: t.delivered_suggestion,
            suggestion_differed: t.suggestion_differed,
            applied: t.applied,
            executed_action: t.executed_action,
            reward: t.reward,
            observation: t.observation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ServerMessage {
    Frame(Frame),
    Error { code: String, message: String },
}

impl ServerMessage {
    pub fn error(code: &str, message: impl Into<String>) -> Self {
        ServerMessage::Error {
            code: code.into(),
            message: message.into(),
        }
    }
}
