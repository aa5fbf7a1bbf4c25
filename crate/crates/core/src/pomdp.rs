//! Tabular POMDP model and exact Bayes filtering.
//!
//! Transition and observation rows are stored sparsely, beliefs densely.
//! The filter implements
//!
//! ```text
//! b'(s') ∝ O(o | s', a) · Σ_s T(s' | s, a) · b(s)
//! ```
//!
//! and the suggestion factor `b'(s) ∝ p(o^s | s) · b(s)` is applied by
//! [`suggestion_update`]. Because both are likelihood factors on the same
//! state they can be applied in either order or jointly ([`DiscretePomdp::joint_update`]).

use std::io::{self, Write};

use crate::error::{check_index, Error, Result};

/// Sparse probability row: `(index, probability)` pairs sorted by index.
pub type SparseRow = Vec<(usize, f64)>;

const SUM_TOLERANCE: f64 = 1e-9;

/// A probability vector over the states of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct Belief {
    probs: Vec<f64>,
}

impl Belief {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidBelief("empty belief".into()));
        }
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(Error::InvalidBelief(format!("entry {i} is {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidBelief(format!("entries sum to {total}")));
        }
        Ok(Self { probs })
    }

    /// Normalizes non-negative weights into a belief.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidBelief("weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidBelief("weights have zero mass".into()));
        }
        Ok(Self {
            probs: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn uniform(num_states: usize) -> Self {
        assert!(num_states > 0);
        Self {
            probs: vec![1.0 / num_states as f64; num_states],
        }
    }

    /// Uniform over the listed states.
    pub fn uniform_over(num_states: usize, states: &[usize]) -> Result<Self> {
        let mut w = vec![0.0; num_states];
        for &s in states {
            check_index("state", s, num_states)?;
            w[s] = 1.0;
        }
        Self::from_weights(w)
    }

    pub fn point(num_states: usize, state: usize) -> Self {
        assert!(state < num_states);
        let mut probs = vec![0.0; num_states];
        probs[state] = 1.0;
        Self { probs }
    }

    pub fn from_sparse(num_states: usize, entries: &[(usize, f64)]) -> Result<Self> {
        let mut w = vec![0.0; num_states];
        for &(s, p) in entries {
            check_index("state", s, num_states)?;
            w[s] += p;
        }
        Self::new(w)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_probs(self) -> Vec<f64> {
        self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn get(&self, s: usize) -> f64 {
        self.probs[s]
    }

    /// Nonzero entries in index order.
    pub fn support(&self) -> SparseRow {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(|(s, p)| (s, *p))
            .collect()
    }

    pub fn l1_distance(&self, other: &Belief) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }
}

/// Discrete POMDP `(S, A, O, T, O, R, γ)` with absorbing terminal states.
#[derive(Debug, Clone)]
pub struct DiscretePomdp {
    num_states: usize,
    num_actions: usize,
    num_observations: usize,
    transition: Vec<SparseRow>,
    observation: Vec<SparseRow>,
    reward: Vec<f64>,
    discount: f64,
    terminal: Vec<bool>,
    action_labels: Vec<String>,
}

impl DiscretePomdp {
    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn num_observations(&self) -> usize {
        self.num_observations
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn action_labels(&self) -> &[String] {
        &self.action_labels
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    pub fn terminal_states(&self) -> impl Iterator<Item = usize> + '_ {
        self.terminal
            .iter()
            .enumerate()
            .filter(|(_, t)| **t)
            .map(|(s, _)| s)
    }

    /// Successor distribution `T(· | s, a)`.
    pub fn transition_distribution(&self, s: usize, a: usize) -> Result<&[(usize, f64)]> {
        check_index("state", s, self.num_states)?;
        check_index("action", a, self.num_actions)?;
        Ok(self.transition_row(s, a))
    }

    /// Observation distribution `O(· | s', a)`.
    pub fn observation_distribution(&self, next: usize, a: usize) -> Result<&[(usize, f64)]> {
        check_index("state", next, self.num_states)?;
        check_index("action", a, self.num_actions)?;
        Ok(self.observation_row(next, a))
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.num_actions + a]
    }

    #[inline]
    pub(crate) fn transition_row(&self, s: usize, a: usize) -> &[(usize, f64)] {
        &self.transition[s * self.num_actions + a]
    }

    #[inline]
    pub(crate) fn observation_row(&self, next: usize, a: usize) -> &[(usize, f64)] {
        &self.observation[next * self.num_actions + a]
    }

    pub fn observation_probability(&self, next: usize, a: usize, o: usize) -> f64 {
        self.observation_row(next, a)
            .iter()
            .find(|(oo, _)| *oo == o)
            .map_or(0.0, |(_, p)| *p)
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

    /// Predicted successor weights `Σ_s T(s' | s, a) b(s)` as a dense vector.
    pub fn predict(&self, b: &Belief, a: usize) -> Result<Vec<f64>> {
        self.check_belief(b)?;
        check_index("action", a, self.num_actions)?;
        let mut out = vec![0.0; self.num_states];
        for (s, p) in b.probs.iter().enumerate() {
            if *p == 0.0 {
                continue;
            }
            for &(next, t) in self.transition_row(s, a) {
                out[next] += t * p;
            }
        }
        Ok(out)
    }

    /// Standard Bayes filter step.
    pub fn belief_update(&self, b: &Belief, a: usize, o: usize) -> Result<Belief> {
        self.joint_update(b, a, o, None)
    }

    /// One normalization of the full product: optional suggestion likelihood,
    /// observation likelihood and predicted state.
    pub fn joint_update(
        &self,
        b: &Belief,
        a: usize,
        o: usize,
        likelihood: Option<&[f64]>,
    ) -> Result<Belief> {
        check_index("observation", o, self.num_observations)?;
        if let Some(l) = likelihood {
            if l.len() != self.num_states {
                return Err(Error::DimensionMismatch {
                    expected: self.num_states,
                    found: l.len(),
                });
            }
        }
        let mut w = self.predict(b, a)?;
        for (next, x) in w.iter_mut().enumerate() {
            if *x == 0.0 {
                continue;
            }
            *x *= self.observation_probability(next, a, o);
            if let Some(l) = likelihood {
                *x *= l[next];
            }
        }
        let total: f64 = w.iter().sum();
        if total <= 0.0 {
            return Err(match likelihood {
                Some(_) if self.belief_update(b, a, o).is_ok() => Error::ImpossibleSuggestion,
                _ => Error::ImpossibleObservation {
                    action: a,
                    observation: o,
                },
            });
        }
        w.iter_mut().for_each(|x| *x /= total);
        Ok(Belief { probs: w })
    }

    /// Marginal observation probabilities `P(o | b, a)` (nonzero only).
    pub fn observation_probabilities(&self, b: &Belief, a: usize) -> Result<SparseRow> {
        let pred = self.predict(b, a)?;
        let mut probs = vec![0.0; self.num_observations];
        for (next, p) in pred.iter().enumerate() {
            if *p == 0.0 {
                continue;
            }
            for &(o, q) in self.observation_row(next, a) {
                probs[o] += p * q;
            }
        }
        Ok(probs
            .into_iter()
            .enumerate()
            .filter(|(_, p)| *p > 0.0)
            .collect())
    }

    /// Plain-text listing of every nonzero T, O and R entry, one per line.
    pub fn dump(&self, mut out: impl Write) -> io::Result<()> {
        writeln!(
            out,
            "# states={} actions={} observations={} discount={}",
            self.num_states, self.num_actions, self.num_observations, self.discount
        )?;
        for s in self.terminal_states() {
            writeln!(out, "terminal {s}")?;
        }
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                for &(next, p) in self.transition_row(s, a) {
                    writeln!(out, "T {s} {a} {next} {p}")?;
                }
            }
        }
        for next in 0..self.num_states {
            for a in 0..self.num_actions {
                for &(o, p) in self.observation_row(next, a) {
                    writeln!(out, "O {next} {a} {o} {p}")?;
                }
            }
        }
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                let r = self.reward(s, a);
                if r != 0.0 {
                    writeln!(out, "R {s} {a} {r}")?;
                }
            }
        }
        Ok(())
    }
}

/// Applies a state likelihood `p(o^s | s)` to a belief and renormalizes.
pub fn suggestion_update(b: &Belief, likelihood: &[f64]) -> Result<Belief> {
    if likelihood.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: b.len(),
            found: likelihood.len(),
        });
    }
    if likelihood.iter().any(|l| !l.is_finite() || *l < 0.0) {
        return Err(Error::InvalidArgument(
            "likelihood entries must be finite and non-negative".into(),
        ));
    }
    let mut w: Vec<f64> = b.probs.iter().zip(likelihood).map(|(p, l)| p * l).collect();
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return Err(Error::ImpossibleSuggestion);
    }
    w.iter_mut().for_each(|x| *x /= total);
    Ok(Belief { probs: w })
}

/// Incremental construction of a [`DiscretePomdp`]; `build` validates every invariant.
#[derive(Debug, Clone)]
pub struct PomdpBuilder {
    num_states: usize,
    num_actions: usize,
    num_observations: usize,
    discount: f64,
    transition: Vec<Option<SparseRow>>,
    observation: Vec<Option<SparseRow>>,
    reward: Vec<f64>,
    terminal: Vec<bool>,
    action_labels: Option<Vec<String>>,
}

impl PomdpBuilder {
    pub fn new(num_states: usize, num_actions: usize, num_observations: usize, discount: f64) -> Self {
        let n = num_states * num_actions;
        Self {
            num_states,
            num_actions,
            num_observations,
            discount,
            transition: vec![None; n],
            observation: vec![None; n],
            reward: vec![0.0; n],
            terminal: vec![false; num_states],
            action_labels: None,
        }
    }

    pub fn transition(&mut self, s: usize, a: usize, row: SparseRow) -> &mut Self {
        self.transition[s * self.num_actions + a] = Some(row);
        self
    }

    pub fn observation(&mut self, next: usize, a: usize, row: SparseRow) -> &mut Self {
        self.observation[next * self.num_actions + a] = Some(row);
        self
    }

    pub fn reward(&mut self, s: usize, a: usize, r: f64) -> &mut Self {
        self.reward[s * self.num_actions + a] = r;
        self
    }

    /// Marks `s` terminal and fills it in as absorbing with zero reward,
    /// emitting `terminal_observation`.
    pub fn terminal(&mut self, s: usize, terminal_observation: usize) -> &mut Self {
        self.terminal[s] = true;
        for a in 0..self.num_actions {
            self.transition(s, a, vec![(s, 1.0)]);
            self.observation(s, a, vec![(terminal_observation, 1.0)]);
            self.reward(s, a, 0.0);
        }
        self
    }

    pub fn action_labels(&mut self, labels: Vec<String>) -> &mut Self {
        self.action_labels = Some(labels);
        self
    }

    pub fn build(self) -> Result<DiscretePomdp> {
        let PomdpBuilder {
            num_states,
            num_actions,
            num_observations,
            discount,
            transition,
            observation,
            reward,
            terminal,
            action_labels,
        } = self;
        if num_states == 0 || num_actions == 0 || num_observations == 0 {
            return Err(Error::InvalidModel("state, action and observation counts must be positive".into()));
        }
        if !(0.0..1.0).contains(&discount) {
            return Err(Error::InvalidModel(format!("discount {discount} not in [0, 1)")));
        }
        let transition = normalize_rows(transition, num_actions, num_states, "transition")?;
        let observation = normalize_rows(observation, num_actions, num_observations, "observation")?;
        if let Some(i) = reward.iter().position(|r| !r.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "reward ({}, {}) is not finite",
                i / num_actions,
                i % num_actions
            )));
        }
        for s in (0..num_states).filter(|s| terminal[*s]) {
            for a in 0..num_actions {
                let i = s * num_actions + a;
                if transition[i].as_slice() != [(s, 1.0)] || reward[i] != 0.0 {
                    return Err(Error::InvalidModel(format!(
                        "terminal state {s} is not absorbing with zero reward under action {a}"
                    )));
                }
            }
        }
        let action_labels = match action_labels {
            Some(l) if l.len() != num_actions => {
                return Err(Error::InvalidModel(format!(
                    "{} action labels for {num_actions} actions",
                    l.len()
                )))
            }
            Some(l) => l,
            None => (0..num_actions).map(|a| format!("a{a}")).collect(),
        };
        Ok(DiscretePomdp {
            num_states,
            num_actions,
            num_observations,
            transition,
            observation,
            reward,
            discount,
            terminal,
            action_labels,
        })
    }
}

fn normalize_rows(
    rows: Vec<Option<SparseRow>>,
    num_actions: usize,
    bound: usize,
    what: &'static str,
) -> Result<Vec<SparseRow>> {
    rows.into_iter()
        .enumerate()
        .map(|(i, row)| {
            let (s, a) = (i / num_actions, i % num_actions);
            let mut row = row
                .ok_or_else(|| Error::InvalidModel(format!("{what} row ({s}, {a}) missing")))?;
            row.sort_by_key(|(j, _)| *j);
            let mut merged: SparseRow = Vec::with_capacity(row.len());
            for (j, p) in row {
                if j >= bound {
                    return Err(Error::InvalidModel(format!(
                        "{what} row ({s}, {a}) has index {j} >= {bound}"
                    )));
                }
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::InvalidModel(format!(
                        "{what} row ({s}, {a}) has probability {p}"
                    )));
                }
                match merged.last_mut() {
                    Some((k, q)) if *k == j => *q += p,
                    _ => merged.push((j, p)),
                }
            }
            merged.retain(|(_, p)| *p > 0.0);
            let total: f64 = merged.iter().map(|(_, p)| p).sum();
            if (total - 1.0).abs() > SUM_TOLERANCE {
                return Err(Error::InvalidModel(format!(
                    "{what} row ({s}, {a}) sums to {total}"
                )));
            }
            Ok(merged)
        })
        .collect()
}
