//! Action suggestions as observations of the state.
//!
//! A suggested action `o^s` is treated as evidence about the current state
//! through a likelihood `p(o^s | s)` derived from the agent's own policy:
//!
//! * scaled rational: `τ` when `o^s = π(s)`, otherwise `(1 − τ) / (|A| − 1)`;
//! * noisy rational: `softmax_a(λ Q(s, a))[o^s]` with `Q(s, a)` the one-step
//!   lookahead of the policy from the point belief on `s`.
//!
//! The likelihood then multiplies into the belief ([`suggestion_update`]).

use serde::{Deserialize, Serialize};

use crate::error::{check_index, Error, Result};
use crate::policy::AlphaVectorPolicy;
use crate::pomdp::{suggestion_update, Belief, DiscretePomdp};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SuggestionModel {
    Scaled { tau: f64 },
    Noisy { lambda: f64 },
}

impl SuggestionModel {
    pub fn scaled(tau: f64) -> Result<Self> {
        let m = SuggestionModel::Scaled { tau };
        m.validate()?;
        Ok(m)
    }

    pub fn noisy(lambda: f64) -> Result<Self> {
        let m = SuggestionModel::Noisy { lambda };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SuggestionModel::Scaled { tau } if !(tau > 0.0 && tau <= 1.0) => {
                Err(Error::InvalidArgument(format!("tau {tau} not in (0, 1]")))
            }
            SuggestionModel::Noisy { lambda } if !(lambda >= 0.0 && lambda.is_finite()) => {
                Err(Error::InvalidArgument(format!("lambda {lambda} must be >= 0")))
            }
            _ => Ok(()),
        }
    }
}

fn scaled_from_actions(
    state_actions: &[usize],
    num_actions: usize,
    suggested: usize,
    tau: f64,
) -> Result<Vec<f64>> {
    check_index("action", suggested, num_actions)?;
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::InvalidArgument(format!("tau {tau} not in (0, 1]")));
    }
    let other = if tau == 1.0 {
        0.0
    } else if num_actions < 2 {
        return Err(Error::InvalidArgument(
            "scaled likelihood with tau < 1 needs at least two actions".into(),
        ));
    } else {
        (1.0 - tau) / (num_actions - 1) as f64
    };
    Ok(state_actions
        .iter()
        .map(|&a| if a == suggested { tau } else { other })
        .collect())
}

/// Per-state softmax of `λ Q(s, ·)` evaluated at `suggested`, stabilized by
/// subtracting the row maximum.
fn softmax_entry(q_row: &[f64], suggested: usize, lambda: f64) -> f64 {
    let max = q_row
        .iter()
        .map(|q| lambda * q)
        .fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = q_row.iter().map(|q| (lambda * q - max).exp()).sum();
    (lambda * q_row[suggested] - max).exp() / total
}

/// Scaled-rational likelihood vector over states.
pub fn scaled_likelihood(
    model: &DiscretePomdp,
    policy: &AlphaVectorPolicy,
    suggested: usize,
    tau: f64,
) -> Result<Vec<f64>> {
    policy.check_model(model)?;
    scaled_from_actions(&policy.state_actions(), model.num_actions(), suggested, tau)
}

/// Noisy-rational likelihood vector over states, computing Q directly.
pub fn noisy_likelihood(
    model: &DiscretePomdp,
    policy: &AlphaVectorPolicy,
    suggested: usize,
    lambda: f64,
) -> Result<Vec<f64>> {
    SuggestionModel::noisy(lambda)?;
    policy.check_model(model)?;
    check_index("action", suggested, model.num_actions())?;
    let q = q_table(model, policy);
    let na = model.num_actions();
    Ok(q.chunks(na)
        .map(|row| softmax_entry(row, suggested, lambda))
        .collect())
}

/// `Q(δ_s, a)` for every state and action, row-major by state.
pub fn q_table(model: &DiscretePomdp, policy: &AlphaVectorPolicy) -> Vec<f64> {
    (0..model.num_states())
        .flat_map(|s| (0..model.num_actions()).map(move |a| (s, a)))
        .map(|(s, a)| policy.q_value_sparse(model, &[(s, 1.0)], a))
        .collect()
}

/// Precomputed per-state policy actions and (when needed) Q values for one
/// (model, policy) pair. Immutable once built and shared across episodes.
#[derive(Debug, Clone)]
pub struct SuggestionTables {
    num_actions: usize,
    state_actions: Vec<usize>,
    q: Option<Vec<f64>>,
}

impl SuggestionTables {
    /// Builds the state-action table, and the Q table when `with_q` is set.
    pub fn new(model: &DiscretePomdp, policy: &AlphaVectorPolicy, with_q: bool) -> Result<Self> {
        policy.check_model(model)?;
        Ok(Self {
            num_actions: model.num_actions(),
            state_actions: policy.state_actions(),
            q: with_q.then(|| q_table(model, policy)),
        })
    }

    pub fn for_model(
        model: &DiscretePomdp,
        policy: &AlphaVectorPolicy,
        sm: &SuggestionModel,
    ) -> Result<Self> {
        Self::new(model, policy, matches!(sm, SuggestionModel::Noisy { .. }))
    }

    pub fn state_actions(&self) -> &[usize] {
        &self.state_actions
    }

    pub fn q(&self, s: usize, a: usize) -> Option<f64> {
        self.q.as_ref().map(|q| q[s * self.num_actions + a])
    }

    pub fn likelihood(&self, sm: &SuggestionModel, suggested: usize) -> Result<Vec<f64>> {
        sm.validate()?;
        match *sm {
            SuggestionModel::Scaled { tau } => {
                scaled_from_actions(&self.state_actions, self.num_actions, suggested, tau)
            }
            SuggestionModel::Noisy { lambda } => {
                check_index("action", suggested, self.num_actions)?;
                let q = self.q.as_ref().ok_or_else(|| {
                    Error::InvalidArgument("noisy likelihood needs tables built with Q values".into())
                })?;
                Ok(q.chunks(self.num_actions)
                    .map(|row| softmax_entry(row, suggested, lambda))
                    .collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Incorporation {
    pub belief: Belief,
    /// Greedy action before the suggestion.
    pub planned: usize,
    /// Greedy action after the suggestion (equal to `planned` when not applied).
    pub action: usize,
    pub applied: bool,
    /// Set when the suggestion was ignored because it contradicted the belief.
    pub diagnostic: Option<String>,
}

/// Folds a suggestion into the belief and reselects the greedy action.
///
/// With `skip_equal`, a suggestion equal to the planned action leaves the
/// belief untouched. An impossible suggestion (zero normalizer, only possible
/// with τ = 1) is ignored and reported through `diagnostic`.
pub fn incorporate(
    policy: &AlphaVectorPolicy,
    tables: &SuggestionTables,
    b: &Belief,
    suggested: usize,
    sm: &SuggestionModel,
    skip_equal: bool,
) -> Result<Incorporation> {
    let planned = policy.action(b)?;
    if skip_equal && suggested == planned {
        return Ok(Incorporation {
            belief: b.clone(),
            planned,
            action: planned,
            applied: false,
            diagnostic: None,
        });
    }
    let likelihood = tables.likelihood(sm, suggested)?;
    match suggestion_update(b, &likelihood) {
        Ok(belief) => {
            let action = policy.action(&belief)?;
            Ok(Incorporation {
                belief,
                planned,
                action,
                applied: true,
                diagnostic: None,
            })
        }
        Err(Error::ImpossibleSuggestion) => Ok(Incorporation {
            belief: b.clone(),
            planned,
            action: planned,
            applied: false,
            diagnostic: Some(format!(
                "suggestion {suggested} has zero likelihood on the belief support; ignored"
            )),
        }),
        Err(e) => Err(e),
    }
}
