//! Agent and suggester variants and the per-step interaction protocol.
//!
//! Step order:
//! 1. the suggester draws a suggestion from its own knowledge,
//! 2. a delivery coin with probability `reception_rate` decides whether it arrives,
//! 3. the agent picks an action (possibly folding the suggestion into its belief),
//! 4. the environment samples `s'`, the reward and `o`,
//! 5. the agent filters its belief with `(action, o)`,
//! 6. a partial-knowledge suggester filters its own belief with `(action, o)`.
//!
//! A suggestion counts as differing when it is delivered and differs from
//! the action the agent planned before seeing it.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{BeliefInit, Environment, RockSampleSpec};
use crate::error::{check_index, Error, Result};
use crate::policy::AlphaVectorPolicy;
use crate::pomdp::Belief;
use crate::rng::{stream_rng, Stream};
use crate::suggestion::{incorporate, SuggestionModel, SuggestionTables};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AgentConfig {
    /// Follows the policy and ignores suggestions.
    Normal,
    /// Acts on the true state.
    Perfect,
    /// Uniformly random actions.
    Random,
    /// Executes a differing suggestion with probability `nu`, never touching its belief.
    Naive { nu: f64 },
    Scaled { tau: f64 },
    Noisy { lambda: f64 },
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        match *self {
            AgentConfig::Naive { nu } if !(0.0..=1.0).contains(&nu) => {
                Err(Error::Config(format!("nu {nu} not in [0, 1]")))
            }
            _ => match self.suggestion_model() {
                Some(sm) => sm.validate().map_err(|e| Error::Config(e.to_string())),
                None => Ok(()),
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            AgentConfig::Normal => "normal",
            AgentConfig::Perfect => "perfect",
            AgentConfig::Random => "random",
            AgentConfig::Naive { .. } => "naive",
            AgentConfig::Scaled { .. } => "scaled",
            AgentConfig::Noisy { .. } => "noisy",
        }
    }

    pub fn param_label(&self) -> String {
        match self {
            AgentConfig::Naive { nu } => format!("nu={nu}"),
            AgentConfig::Scaled { tau } => format!("tau={tau}"),
            AgentConfig::Noisy { lambda } => format!("lambda={lambda}"),
            _ => String::new(),
        }
    }

    pub fn suggestion_model(&self) -> Option<SuggestionModel> {
        match *self {
            AgentConfig::Scaled { tau } => Some(SuggestionModel::Scaled { tau }),
            AgentConfig::Noisy { lambda } => Some(SuggestionModel::Noisy { lambda }),
            _ => None,
        }
    }

    /// Whether the agent maintains a belief at all.
    pub fn uses_belief(&self) -> bool {
        !matches!(self, AgentConfig::Perfect | AgentConfig::Random)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Knowledge {
    /// Applies the policy to the true state.
    TrueState,
    /// Keeps a rock belief initialized from `(good | bad)`.
    Partial { good: f64, bad: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuggesterConfig {
    #[serde(default)]
    pub randomness: f64,
    #[serde(default = "one")]
    pub reception_rate: f64,
    #[serde(default = "true_state")]
    pub knowledge: Knowledge,
}

fn one() -> f64 {
    1.0
}

fn true_state() -> Knowledge {
    Knowledge::TrueState
}

impl Default for SuggesterConfig {
    fn default() -> Self {
        Self {
            randomness: 0.0,
            reception_rate: 1.0,
            knowledge: Knowledge::TrueState,
        }
    }
}

impl SuggesterConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, x: f64| {
            if (0.0..=1.0).contains(&x) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} {x} not in [0, 1]")))
            }
        };
        unit("randomness", self.randomness)?;
        unit("reception_rate", self.reception_rate)?;
        if let Knowledge::Partial { good, bad } = self.knowledge {
            unit("G", good)?;
            unit("B", bad)?;
        }
        Ok(())
    }
}

/// One executed step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepTrace {
    pub step: usize,
    pub planned_action: usize,
    pub delivered_suggestion: Option<usize>,
    pub suggestion_differed: bool,
    pub applied: bool,
    pub executed_action: usize,
    pub reward: f64,
    pub observation: usize,
    pub state: usize,
    pub next_state: usize,
    #[serde(skip)]
    pub post_belief: Option<Belief>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

/// Distribution over rock-quality vectors (bit `i` set = rock `i` good):
/// each rock is independently believed good with probability `good` if it
/// truly is, `bad` if it is not.
pub fn rock_vector_distribution(true_rocks: &[bool], good: f64, bad: f64) -> Vec<f64> {
    let k = true_rocks.len();
    (0..1usize << k)
        .map(|bits| {
            true_rocks
                .iter()
                .enumerate()
                .map(|(i, &truth)| {
                    let p_good = if truth { good } else { bad };
                    if bits & (1 << i) != 0 {
                        p_good
                    } else {
                        1.0 - p_good
                    }
                })
                .product()
        })
        .collect()
}

/// Partial-knowledge belief over full RockSample states: robot position
/// known, rocks from [`rock_vector_distribution`].
pub fn partial_rock_belief(
    spec: &RockSampleSpec,
    num_states: usize,
    true_state: usize,
    good: f64,
    bad: f64,
) -> Result<Belief> {
    if !(0.0..=1.0).contains(&good) || !(0.0..=1.0).contains(&bad) {
        return Err(Error::InvalidArgument("G and B must lie in [0, 1]".into()));
    }
    let (pos, bits) = spec
        .decode(true_state)
        .ok_or_else(|| Error::InvalidArgument("terminal state has no rocks".into()))?;
    let truth: Vec<bool> = (0..spec.k).map(|i| bits & (1 << i) != 0).collect();
    let dist = rock_vector_distribution(&truth, good, bad);
    let mut probs = vec![0.0; num_states];
    for (v, p) in dist.into_iter().enumerate() {
        probs[spec.state(pos, v)] = p;
    }
    Belief::from_weights(probs)
}

/// Suggestion rule: uniformly random with probability `randomness`, else the
/// policy applied to the true state or to the suggester's own belief.
pub fn suggest(
    cfg: &SuggesterConfig,
    true_state: usize,
    suggester_belief: Option<&Belief>,
    policy: &AlphaVectorPolicy,
    rng: &mut impl Rng,
) -> Result<usize> {
    let u: f64 = rng.gen();
    if u < cfg.randomness {
        return Ok(rng.gen_range(0..policy.num_actions()));
    }
    match cfg.knowledge {
        Knowledge::TrueState => policy.state_action(true_state),
        Knowledge::Partial { .. } => {
            let b = suggester_belief.ok_or_else(|| {
                Error::InvalidArgument("partial-knowledge suggester needs a belief".into())
            })?;
            policy.action(b)
        }
    }
}

/// Outcome of the agent's decision for one step, before the environment moves.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentDecision {
    pub planned: usize,
    pub executed: usize,
    /// Belief after any suggestion update (pre-transition).
    pub belief: Option<Belief>,
    pub applied: bool,
    pub differed: bool,
    pub diagnostic: Option<String>,
}

/// Agent decision rule for one step.
#[allow(clippy::too_many_arguments)]
pub fn agent_step(
    agent: &AgentConfig,
    policy: &AlphaVectorPolicy,
    tables: &SuggestionTables,
    belief: Option<&Belief>,
    true_state: usize,
    delivered: Option<usize>,
    skip_equal: bool,
    rng: &mut impl Rng,
) -> Result<AgentDecision> {
    if let Some(a) = delivered {
        check_index("action", a, policy.num_actions())?;
    }
    let need_belief = || {
        belief.ok_or_else(|| Error::InvalidArgument(format!("{} agent needs a belief", agent.kind())))
    };
    let differs = |planned: usize| delivered.is_some_and(|d| d != planned);
    let decision = match *agent {
        AgentConfig::Perfect => {
            let planned = tables.state_actions()[true_state];
            AgentDecision {
                planned,
                executed: planned,
                belief: None,
                applied: false,
                differed: differs(planned),
                diagnostic: None,
            }
        }
        AgentConfig::Random => {
            let planned = rng.gen_range(0..policy.num_actions());
            AgentDecision {
                planned,
                executed: planned,
                belief: None,
                applied: false,
                differed: differs(planned),
                diagnostic: None,
            }
        }
        AgentConfig::Normal => {
            let b = need_belief()?;
            let planned = policy.action(b)?;
            AgentDecision {
                planned,
                executed: planned,
                belief: Some(b.clone()),
                applied: false,
                differed: differs(planned),
                diagnostic: None,
            }
        }
        AgentConfig::Naive { nu } => {
            let b = need_belief()?;
            let planned = policy.action(b)?;
            let executed = match delivered {
                Some(d) if d != planned && rng.gen::<f64>() < nu => d,
                _ => planned,
            };
            AgentDecision {
                planned,
                executed,
                belief: Some(b.clone()),
                applied: false,
                differed: differs(planned),
                diagnostic: None,
            }
        }
        AgentConfig::Scaled { .. } | AgentConfig::Noisy { .. } => {
            let b = need_belief()?;
            let sm = agent.suggestion_model().expect("suggestion agent");
            match delivered {
                Some(d) => {
                    let inc = incorporate(policy, tables, b, d, &sm, skip_equal)?;
                    AgentDecision {
                        planned: inc.planned,
                        executed: inc.action,
                        differed: d != inc.planned,
                        belief: Some(inc.belief),
                        applied: inc.applied,
                        diagnostic: inc.diagnostic,
                    }
                }
                None => {
                    let planned = policy.action(b)?;
                    AgentDecision {
                        planned,
                        executed: planned,
                        belief: Some(b.clone()),
                        applied: false,
                        differed: false,
                        diagnostic: None,
                    }
                }
            }
        }
    };
    Ok(decision)
}

/// Shared, immutable pieces an episode needs.
#[derive(Debug, Clone)]
pub struct AgentRuntime {
    pub env: Arc<Environment>,
    pub policy: Arc<AlphaVectorPolicy>,
    pub tables: Arc<SuggestionTables>,
    pub agent: AgentConfig,
    pub skip_equal: bool,
    pub max_steps: usize,
    pub belief_init: BeliefInit,
}

impl AgentRuntime {
    pub fn new(
        env: Arc<Environment>,
        policy: Arc<AlphaVectorPolicy>,
        agent: AgentConfig,
    ) -> Result<Self> {
        agent.validate()?;
        let tables = SuggestionTables::new(
            env.model(),
            &policy,
            matches!(agent, AgentConfig::Noisy { .. }),
        )?;
        Ok(Self {
            max_steps: env.default_max_steps(),
            belief_init: env.default_belief_init(),
            env,
            policy,
            tables: Arc::new(tables),
            agent,
            skip_equal: true,
        })
    }

    pub fn with_tables(mut self, tables: Arc<SuggestionTables>) -> Self {
        self.tables = tables;
        self
    }
}

fn sample(rng: &mut impl Rng, dist: &[(usize, f64)]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for &(i, p) in dist {
        acc += p;
        if u < acc {
            return i;
        }
    }
    dist.last().expect("non-empty distribution").0
}

/// A single running episode.
#[derive(Debug, Clone)]
pub struct Episode {
    rt: AgentRuntime,
    index: u64,
    state: usize,
    belief: Option<Belief>,
    env_rng: ChaCha8Rng,
    agent_rng: ChaCha8Rng,
    step: usize,
    discounted_return: f64,
    total_reward: f64,
    discount_weight: f64,
    differing: usize,
    delivered: usize,
    applied: usize,
    done: bool,
    aborted: Option<String>,
}

impl Episode {
    pub fn new(rt: AgentRuntime, seed: u64, index: u64) -> Result<Self> {
        let mut env_rng = stream_rng(seed, index, Stream::Environment);
        let start = rt.env.start_distribution().support();
        let state = sample(&mut env_rng, &start);
        let belief = if rt.agent.uses_belief() {
            Some(rt.env.initial_belief(rt.belief_init)?)
        } else {
            None
        };
        Ok(Self {
            index,
            state,
            belief,
            env_rng,
            agent_rng: stream_rng(seed, index, Stream::Agent),
            step: 0,
            discounted_return: 0.0,
            total_reward: 0.0,
            discount_weight: 1.0,
            differing: 0,
            delivered: 0,
            applied: 0,
            done: false,
            aborted: None,
            rt,
        })
    }

    pub fn runtime(&self) -> &AgentRuntime {
        &self.rt
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn state(&self) -> usize {
        self.state
    }

    pub fn belief(&self) -> Option<&Belief> {
        self.belief.as_ref()
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn aborted(&self) -> Option<&str> {
        self.aborted.as_deref()
    }

    pub fn discounted_return(&self) -> f64 {
        self.discounted_return
    }

    pub fn total_reward(&self) -> f64 {
        self.total_reward
    }

    pub fn differing_suggestions(&self) -> usize {
        self.differing
    }

    pub fn delivered_suggestions(&self) -> usize {
        self.delivered
    }

    pub fn applied_suggestions(&self) -> usize {
        self.applied
    }

    /// Action the agent would take now without a suggestion.
    pub fn planned_action(&self) -> Result<usize> {
        match (&self.rt.agent, &self.belief) {
            (AgentConfig::Perfect, _) => Ok(self.rt.tables.state_actions()[self.state]),
            (_, Some(b)) => self.rt.policy.action(b),
            _ => Err(Error::InvalidArgument(format!(
                "{} agent has no planned action",
                self.rt.agent.kind()
            ))),
        }
    }

    /// Runs steps 3–5 of the protocol with an already delivered suggestion.
    pub fn step(&mut self, delivered: Option<usize>) -> Result<StepTrace> {
        if self.done {
            return Err(Error::InvalidArgument("episode already finished".into()));
        }
        let rt = &self.rt;
        let decision = agent_step(
            &rt.agent,
            &rt.policy,
            &rt.tables,
            self.belief.as_ref(),
            self.state,
            delivered,
            rt.skip_equal,
            &mut self.agent_rng,
        )?;
        let model = rt.env.model();
        let a = decision.executed;
        let s = self.state;
        let reward = model.reward(s, a);
        let next = sample(&mut self.env_rng, model.transition_row(s, a));
        let o = sample(&mut self.env_rng, model.observation_row(next, a));

        self.total_reward += reward;
        self.discounted_return += self.discount_weight * reward;
        self.discount_weight *= model.discount();
        if delivered.is_some() {
            self.delivered += 1;
        }
        if decision.differed {
            self.differing += 1;
        }
        if decision.applied {
            self.applied += 1;
        }
        self.step += 1;
        self.state = next;
        let post = match decision.belief {
            Some(b) => match model.belief_update(&b, a, o) {
                Ok(b) => Some(b),
                Err(e) => {
                    self.done = true;
                    self.aborted = Some(e.to_string());
                    return Err(e);
                }
            },
            None => None,
        };
        self.belief = post.clone();
        self.done = model.is_terminal(next) || self.step >= rt.max_steps;
        Ok(StepTrace {
            step: self.step - 1,
            planned_action: decision.planned,
            delivered_suggestion: delivered,
            suggestion_differed: decision.differed,
            applied: decision.applied,
            executed_action: a,
            reward,
            observation: o,
            state: s,
            next_state: next,
            post_belief: post,
            diagnostic: decision.diagnostic,
        })
    }
}

/// Where an episode's suggestions come from.
pub trait SuggestionSource {
    /// Steps 1–2: the delivered suggestion for this step, if any.
    fn next_suggestion(&mut self, episode: &Episode) -> Result<Option<usize>>;

    /// Step 6: sees the executed action and resulting observation.
    fn observe(&mut self, _episode: &Episode, _trace: &StepTrace) {}
}

/// Simulated suggester with its own random streams.
#[derive(Debug, Clone)]
pub struct Suggester {
    config: SuggesterConfig,
    belief: Option<Belief>,
    rng: ChaCha8Rng,
    delivery_rng: ChaCha8Rng,
    ignored_observations: usize,
}

impl Suggester {
    pub fn new(config: SuggesterConfig, episode: &Episode, seed: u64) -> Result<Self> {
        config.validate()?;
        let env = &episode.runtime().env;
        let belief = match config.knowledge {
            Knowledge::TrueState => None,
            Knowledge::Partial { good, bad } => {
                let spec = env.rocksample_spec().ok_or_else(|| {
                    Error::Config("partial-knowledge suggesters need a rocksample environment".into())
                })?;
                Some(partial_rock_belief(
                    spec,
                    env.model().num_states(),
                    episode.state(),
                    good,
                    bad,
                )?)
            }
        };
        Ok(Self {
            config,
            belief,
            rng: stream_rng(seed, episode.index(), Stream::Suggester),
            delivery_rng: stream_rng(seed, episode.index(), Stream::Delivery),
            ignored_observations: 0,
        })
    }

    pub fn belief(&self) -> Option<&Belief> {
        self.belief.as_ref()
    }

    /// Observations the suggester's own belief could not explain (kept its prior).
    pub fn ignored_observations(&self) -> usize {
        self.ignored_observations
    }
}

impl SuggestionSource for Suggester {
    fn next_suggestion(&mut self, episode: &Episode) -> Result<Option<usize>> {
        let suggestion = suggest(
            &self.config,
            episode.state(),
            self.belief.as_ref(),
            &episode.runtime().policy,
            &mut self.rng,
        )?;
        let delivered = self.delivery_rng.gen::<f64>() < self.config.reception_rate;
        Ok(delivered.then_some(suggestion))
    }

    fn observe(&mut self, episode: &Episode, trace: &StepTrace) {
        if let Some(b) = &self.belief {
            match episode
                .runtime()
                .env
                .model()
                .belief_update(b, trace.executed_action, trace.observation)
            {
                Ok(next) => self.belief = Some(next),
                Err(_) => self.ignored_observations += 1,
            }
        }
    }
}

/// Replays a fixed list of deliveries; `None` once exhausted.
#[derive(Debug, Clone, Default)]
pub struct ScriptedSuggester {
    script: VecDeque<Option<usize>>,
}

impl ScriptedSuggester {
    pub fn new(script: impl IntoIterator<Item = Option<usize>>) -> Self {
        Self {
            script: script.into_iter().collect(),
        }
    }
}

impl SuggestionSource for ScriptedSuggester {
    fn next_suggestion(&mut self, _episode: &Episode) -> Result<Option<usize>> {
        Ok(self.script.pop_front().flatten())
    }
}

/// One full protocol step.
pub fn run_step(episode: &mut Episode, source: &mut impl SuggestionSource) -> Result<StepTrace> {
    let delivered = source.next_suggestion(episode)?;
    let trace = episode.step(delivered)?;
    source.observe(episode, &trace);
    Ok(trace)
}
