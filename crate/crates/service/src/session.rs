//! Session bookkeeping, independent of any transport.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use actsug_core::agents::{run_step, AgentConfig, AgentRuntime, Episode, ScriptedSuggester, StepTrace};
use actsug_core::env::Environment;
use actsug_core::policy::AlphaVectorPolicy;
use actsug_core::suggestion::SuggestionTables;
use actsug_core::Error as CoreError;

use crate::protocol::{Descriptor, Frame, Mode, ServerMessage, SessionScenario, TraceView};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceError {
    pub code: &'static str,
    pub message: String,
}

impl ServiceError {
    fn new(code: &'static str, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for ServiceError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for ServiceError {}

impl From<ServiceError> for ServerMessage {
    fn from(e: ServiceError) -> Self {
        ServerMessage::error(e.code, e.message)
    }
}

pub type ServiceResult<T> = Result<T, ServiceError>;

struct Session {
    id: String,
    scenario: SessionScenario,
    runtime: AgentRuntime,
    episode: Episode,
    last_trace: Option<StepTrace>,
    /// Suggestion queued for the next automatic step (`Some(None)` = explicit skip).
    pending: Option<Option<usize>>,
    last_pos: (i32, i32),
    last_marginal: Vec<f64>,
    diagnostic: Option<String>,
}

impl Session {
    fn new(id: String, scenario: SessionScenario, runtime: AgentRuntime) -> ServiceResult<Self> {
        let episode = Episode::new(runtime.clone(), scenario.seed, scenario.episode)
            .map_err(|e| ServiceError::new("invalid_scenario", e.to_string()))?;
        let env = &runtime.env;
        let last_pos = env.agent_position(episode.state()).unwrap_or((0, 0));
        let last_marginal = episode
            .belief()
            .map(|b| env.belief_marginal(b))
            .unwrap_or_default();
        Ok(Self {
            id,
            scenario,
            runtime,
            episode,
            last_trace: None,
            pending: None,
            last_pos,
            last_marginal,
            diagnostic: None,
        })
    }

    fn descriptor(&self) -> Descriptor {
        let env = &self.runtime.env;
        Descriptor {
            env: env.name(),
            cells: env.cells(),
            rocks: env.rock_positions(),
            action_labels: env.model().action_labels().to_vec(),
            agent: self.scenario.agent,
            mode: self.scenario.mode,
            max_steps: self.runtime.max_steps,
        }
    }

    fn frame(&mut self, with_descriptor: bool) -> Frame {
        let env = self.runtime.env.clone();
        if let Some(pos) = env.agent_position(self.episode.state()) {
            self.last_pos = pos;
        }
        if let Some(b) = self.episode.belief() {
            let m = env.belief_marginal(b);
            // A terminal belief has no marginal; keep the last one.
            if m.iter().sum::<f64>() > 0.0 {
                self.last_marginal = m;
            }
        }
        let planned_action = match (&self.last_trace, self.episode.is_done()) {
            (Some(t), true) => t.executed_action,
            _ => self.episode.planned_action().unwrap_or(0),
        };
        Frame {
            session: self.id.clone(),
            step: self.episode.step_index(),
            agent_pos: self.last_pos,
            belief_marginal: self.last_marginal.clone(),
            planned_action,
            applied: self.last_trace.as_ref().is_some_and(|t| t.applied),
            differed: self.last_trace.as_ref().is_some_and(|t| t.suggestion_differed),
            reward_total: self.episode.total_reward(),
            done: self.episode.is_done(),
            discounted_reward: self.episode.discounted_return(),
            differing_suggestions: self.episode.differing_suggestions(),
            descriptor: with_descriptor.then(|| self.descriptor()),
            last_trace: self.last_trace.as_ref().map(TraceView::from),
            true_state: self.scenario.debug.then(|| self.episode.state()),
            diagnostic: self.diagnostic.clone(),
        }
    }

    fn step(&mut self, delivered: Option<usize>) -> ServiceResult<()> {
        let mut source = ScriptedSuggester::new([delivered]);
        match run_step(&mut self.episode, &mut source) {
            Ok(trace) => {
                self.diagnostic = trace.diagnostic.clone();
                self.last_trace = Some(trace);
                Ok(())
            }
            Err(e @ CoreError::ImpossibleObservation { .. }) => {
                self.diagnostic = Some(format!("episode aborted: {e}"));
                Ok(())
            }
            Err(e) => Err(ServiceError::new("internal", e.to_string())),
        }
    }

    fn check_open(&self) -> ServiceResult<()> {
        if self.episode.is_done() {
            Err(ServiceError::new("episode_done", "the episode has finished; reset to start over"))
        } else {
            Ok(())
        }
    }
}

/// All live sessions over one environment and policy.
pub struct SessionManager {
    env: Arc<Environment>,
    policy: Arc<AlphaVectorPolicy>,
    tables: Arc<SuggestionTables>,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
}

impl SessionManager {
    pub fn new(env: Arc<Environment>, policy: Arc<AlphaVectorPolicy>) -> actsug_core::Result<Self> {
        let tables = Arc::new(SuggestionTables::new(env.model(), &policy, true)?);
        Ok(Self::with_tables(env, policy, tables))
    }

    /// `tables` must have been built with Q values for noisy agents to work.
    pub fn with_tables(
        env: Arc<Environment>,
        policy: Arc<AlphaVectorPolicy>,
        tables: Arc<SuggestionTables>,
    ) -> Self {
        Self {
            env,
            policy,
            tables,
            sessions: Mutex::new(HashMap::new()),
        }
    }

    pub fn environment(&self) -> &Arc<Environment> {
        &self.env
    }

    fn session(&self, id: &str) -> ServiceResult<Arc<Mutex<Session>>> {
        self.sessions
            .lock()
            .expect("session table poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::new("not_found", format!("no session {id}")))
    }

    fn runtime(&self, scenario: &SessionScenario) -> ServiceResult<AgentRuntime> {
        let invalid = |m: String| ServiceError::new("invalid_scenario", m);
        if !matches!(
            scenario.agent,
            AgentConfig::Scaled { .. } | AgentConfig::Noisy { .. } | AgentConfig::Naive { .. }
        ) {
            return Err(invalid(format!(
                "agent kind {} ignores suggestions; use scaled, noisy or naive",
                scenario.agent.kind()
            )));
        }
        scenario.agent.validate().map_err(|e| invalid(e.to_string()))?;
        if let Some(name) = &scenario.env {
            if *name != self.env.name() && *name != self.env.spec().name() {
                return Err(invalid(format!("this server runs {}, not {name}", self.env.name())));
            }
        }
        if scenario.max_steps == Some(0) {
            return Err(invalid("max_steps must be positive".into()));
        }
        if scenario.mode == Mode::Auto && scenario.dwell_ms == 0 {
            return Err(invalid("dwell_ms must be positive in auto mode".into()));
        }
        let belief_init = scenario.belief_init.unwrap_or(self.env.default_belief_init());
        self.env
            .initial_belief(belief_init)
            .map_err(|e| invalid(e.to_string()))?;
        Ok(AgentRuntime {
            env: self.env.clone(),
            policy: self.policy.clone(),
            tables: self.tables.clone(),
            agent: scenario.agent,
            skip_equal: scenario.skip_equal,
            max_steps: scenario.max_steps.unwrap_or(self.env.default_max_steps()),
            belief_init,
        })
    }

    /// Starts a session; the returned frame carries the descriptor.
    pub fn create(&self, scenario: SessionScenario) -> ServiceResult<Frame> {
        let runtime = self.runtime(&scenario)?;
        let id = uuid::Uuid::new_v4().to_string();
        let mut session = Session::new(id.clone(), scenario, runtime)?;
        let frame = session.frame(true);
        self.sessions
            .lock()
            .expect("session table poisoned")
            .insert(id, Arc::new(Mutex::new(session)));
        Ok(frame)
    }

    pub fn get(&self, id: &str) -> ServiceResult<Frame> {
        let s = self.session(id)?;
        let mut s = s.lock().expect("session poisoned");
        Ok(s.frame(false))
    }

    pub fn mode(&self, id: &str) -> ServiceResult<(Mode, u64)> {
        let s = self.session(id)?;
        let s = s.lock().expect("session poisoned");
        Ok((s.scenario.mode, s.scenario.dwell_ms))
    }

    /// Paused sessions step immediately; auto sessions queue the suggestion
    /// for the next tick. At most one suggestion per step either way.
    pub fn suggest(&self, id: &str, action: Option<usize>, step: Option<usize>) -> ServiceResult<Frame> {
        let s = self.session(id)?;
        let mut s = s.lock().expect("session poisoned");
        s.check_open()?;
        if let Some(k) = step {
            if k != s.episode.step_index() {
                return Err(ServiceError::new(
                    "stale_step",
                    format!(
                        "suggestion for step {k} but the session is at step {}; one suggestion per step",
                        s.episode.step_index()
                    ),
                ));
            }
        }
        if let Some(a) = action {
            let n = self.env.model().num_actions();
            if a >= n {
                return Err(ServiceError::new(
                    "invalid_action",
                    format!("action {a} out of range (0..{n})"),
                ));
            }
        }
        match s.scenario.mode {
            Mode::Paused => {
                s.step(action)?;
                Ok(s.frame(false))
            }
            Mode::Auto => {
                if s.pending.is_some() {
                    return Err(ServiceError::new(
                        "duplicate_suggestion",
                        "a suggestion is already queued for this step",
                    ));
                }
                s.pending = Some(action);
                Ok(s.frame(false))
            }
        }
    }

    /// One automatic step. `None` when the session is paused or finished.
    pub fn tick(&self, id: &str) -> ServiceResult<Option<Frame>> {
        let s = self.session(id)?;
        let mut s = s.lock().expect("session poisoned");
        if s.scenario.mode != Mode::Auto || s.episode.is_done() {
            return Ok(None);
        }
        let delivered = s.pending.take().flatten();
        s.step(delivered)?;
        Ok(Some(s.frame(false)))
    }

    /// Restarts the episode with the session's seeds.
    pub fn reset(&self, id: &str) -> ServiceResult<Frame> {
        let s = self.session(id)?;
        let mut s = s.lock().expect("session poisoned");
        let fresh = Session::new(s.id.clone(), s.scenario.clone(), s.runtime.clone())?;
        *s = fresh;
        Ok(s.frame(true))
    }

    pub fn remove(&self, id: &str) {
        self.sessions.lock().expect("session table poisoned").remove(id);
    }
}
