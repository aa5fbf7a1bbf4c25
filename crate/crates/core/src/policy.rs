//! Alpha-vector policies: greedy action selection, value, one-step lookahead
//! Q values and JSON persistence.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{check_index, Error, Result};
use crate::pomdp::{Belief, DiscretePomdp};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaVector {
    pub action: usize,
    pub coeffs: Vec<f64>,
}

impl AlphaVector {
    #[inline]
    pub fn dot_sparse(&self, support: &[(usize, f64)]) -> f64 {
        support.iter().map(|&(s, p)| self.coeffs[s] * p).sum()
    }
}

/// Piecewise-linear convex value function given by a set of action-tagged
/// alpha vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaVectorPolicy {
    num_states: usize,
    num_actions: usize,
    discount: f64,
    vectors: Vec<AlphaVector>,
}

impl AlphaVectorPolicy {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        discount: f64,
        vectors: Vec<AlphaVector>,
    ) -> Result<Self> {
        let policy = Self {
            num_states,
            num_actions,
            discount,
            vectors,
        };
        policy.validate().map_err(Error::InvalidArgument)?;
        Ok(policy)
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.vectors.is_empty() {
            return Err("policy has no alpha vectors".into());
        }
        for (i, v) in self.vectors.iter().enumerate() {
            if v.coeffs.len() != self.num_states {
                return Err(format!(
                    "vector {i} has {} coefficients, expected num_states = {}",
                    v.coeffs.len(),
                    self.num_states
                ));
            }
            if v.action >= self.num_actions {
                return Err(format!(
                    "vector {i} has action {} >= num_actions = {}",
                    v.action, self.num_actions
                ));
            }
            if v.coeffs.iter().any(|c| !c.is_finite()) {
                return Err(format!("vector {i} has a non-finite coefficient"));
            }
        }
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn vectors(&self) -> &[AlphaVector] {
        &self.vectors
    }

    /// Checks that the policy was built for `model`'s dimensions.
    pub fn check_model(&self, model: &DiscretePomdp) -> Result<()> {
        if self.num_states != model.num_states() {
            return Err(Error::DimensionMismatch {
                expected: model.num_states(),
                found: self.num_states,
            });
        }
        if self.num_actions != model.num_actions() {
            return Err(Error::DimensionMismatch {
                expected: model.num_actions(),
                found: self.num_actions,
            });
        }
        Ok(())
    }

    fn check_belief(&self, b: &Belief) -> Result<()> {
        if b.len() != self.num_states {
            return Err(Error::DimensionMismatch {
                expected: self.num_states,
                found: b.len(),
            });
        }
        Ok(())
    }

    /// Index and value of the maximizing vector for a sparse belief. Ties go
    /// to the lowest action, then the lowest vector position.
    pub fn best_vector(&self, support: &[(usize, f64)]) -> (usize, f64) {
        let mut best = (0, f64::NEG_INFINITY);
        for (i, v) in self.vectors.iter().enumerate() {
            let x = v.dot_sparse(support);
            if x > best.1 || (x == best.1 && v.action < self.vectors[best.0].action) {
                best = (i, x);
            }
        }
        best
    }

    pub fn value(&self, b: &Belief) -> Result<f64> {
        self.check_belief(b)?;
        Ok(self.best_vector(&b.support()).1)
    }

    pub fn action(&self, b: &Belief) -> Result<usize> {
        self.check_belief(b)?;
        Ok(self.vectors[self.best_vector(&b.support()).0].action)
    }

    /// Greedy action at the point belief `δ_s`.
    pub fn state_action(&self, s: usize) -> Result<usize> {
        check_index("state", s, self.num_states)?;
        Ok(self.vectors[self.best_vector(&[(s, 1.0)]).0].action)
    }

    /// Greedy action for every state, indexed by state.
    pub fn state_actions(&self) -> Vec<usize> {
        (0..self.num_states)
            .map(|s| self.vectors[self.best_vector(&[(s, 1.0)]).0].action)
            .collect()
    }

    /// One-step lookahead `Q(b, a) = R(b, a) + γ Σ_o P(o | b, a) V(b'_{a,o})`,
    /// skipping observations with zero probability.
    pub fn q_value(&self, model: &DiscretePomdp, b: &Belief, a: usize) -> Result<f64> {
        self.check_model(model)?;
        self.check_belief(b)?;
        check_index("action", a, self.num_actions)?;
        Ok(self.q_value_sparse(model, &b.support(), a))
    }

    pub(crate) fn q_value_sparse(
        &self,
        model: &DiscretePomdp,
        support: &[(usize, f64)],
        a: usize,
    ) -> f64 {
        let immediate: f64 = support.iter().map(|&(s, p)| p * model.reward(s, a)).sum();
        // Unnormalized successor weight per observation: P(o) b'_o(s').
        let mut pred: BTreeMap<usize, f64> = BTreeMap::new();
        for &(s, p) in support {
            for &(next, t) in model.transition_row(s, a) {
                *pred.entry(next).or_insert(0.0) += p * t;
            }
        }
        let mut branches: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
        for (&next, &w) in &pred {
            for &(o, q) in model.observation_row(next, a) {
                branches.entry(o).or_default().push((next, w * q));
            }
        }
        // P(o) · V(b'_o) = max_α Σ_s' α(s') P(o) b'_o(s').
        let future: f64 = branches
            .values()
            .map(|weights| self.best_vector(weights).1)
            .sum();
        immediate + model.discount() * future
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("policy serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let policy: Self = serde_json::from_str(text).map_err(|e| Error::PolicyParse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        policy.validate().map_err(Error::PolicyFormat)?;
        Ok(policy)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
