#![allow(dead_code)]

use std::sync::{Arc, OnceLock};

use actsug_core::env::{EnvSpec, Environment, RockSampleSpec, TagSpec};
use actsug_core::solver::{self, SolverParams};
use actsug_core::AlphaVectorPolicy;
use actsug_service::SessionManager;

pub const NORTH: usize = 0;
pub const WEST: usize = 3;
pub const TAG: usize = 4;

/// Classic Tag with a quick, coarse policy. Good enough to drive sessions.
pub fn tag() -> &'static (Arc<Environment>, Arc<AlphaVectorPolicy>) {
    static CELL: OnceLock<(Arc<Environment>, Arc<AlphaVectorPolicy>)> = OnceLock::new();
    CELL.get_or_init(|| {
        let env = Environment::new(EnvSpec::Tag(TagSpec::default())).unwrap();
        let b = env.initial_belief(env.default_belief_init()).unwrap();
        let params = SolverParams {
            max_belief_points: 60,
            expansion_rounds: 3,
            max_iterations: 30,
            bellman_epsilon: 1e-2,
            state_corners: false,
            action_class_seeds: false,
            ..SolverParams::default()
        };
        let policy = solver::solve(env.model(), &b, &params).unwrap();
        (Arc::new(env), Arc::new(policy))
    })
}

pub fn tag_manager() -> SessionManager {
    let (env, policy) = tag();
    SessionManager::new(env.clone(), policy.clone()).unwrap()
}

/// RockSample(8, 4) served with the blind policy; only the layout matters.
pub fn rocksample_manager() -> SessionManager {
    let env = Environment::new(EnvSpec::RockSample(RockSampleSpec::new(8, 4, 10.0, -10.0))).unwrap();
    let m = env.model();
    let vectors = solver::blind_policy_vectors(m);
    let policy = AlphaVectorPolicy::new(m.num_states(), m.num_actions(), m.discount(), vectors).unwrap();
    SessionManager::new(Arc::new(env), Arc::new(policy)).unwrap()
}
