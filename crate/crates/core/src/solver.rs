//! Point-based value iteration.
//!
//! The belief set starts at the initial belief and grows by stochastic
//! simulation with explorative actions: each point spawns one successor per
//! action and keeps the one farthest (L1) from the set. Between expansions
//! every point is backed up until the largest Bellman residual over the set
//! drops below `bellman_epsilon`. The value function starts from the blind
//! policy lower bound, whose vectors stay in the final policy.
//!
//! Two optional additions, both on by default:
//! - `state_corners` backs up the point belief of every non-terminal state
//!   on every sweep, so the policy is sound when the state is known;
//! - `action_class_seeds` solves twice: the second run also starts from the
//!   initial belief restricted to each class of states sharing the same
//!   first-run policy action. Those are the beliefs an agent holds right
//!   after a trusted action suggestion.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{AlphaVector, AlphaVectorPolicy};
use crate::pomdp::{Belief, DiscretePomdp};

/// Sparse belief `(state, probability)` sorted by state.
pub type SparseBelief = Vec<(usize, f64)>;

const DEDUP_DISTANCE: f64 = 1e-6;
const BLIND_TOLERANCE: f64 = 1e-10;
const BLIND_MAX_ITERATIONS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    pub max_belief_points: usize,
    /// Cap on backup sweeps between two expansions (and after the last one).
    pub max_iterations: usize,
    pub bellman_epsilon: f64,
    pub expansion_rounds: usize,
    pub rng_seed: u64,
    /// Also back up every point belief on a non-terminal state. These points
    /// are fixed, never expanded and not counted against `max_belief_points`.
    #[serde(default = "yes")]
    pub state_corners: bool,
    #[serde(default = "yes")]
    pub action_class_seeds: bool,
}

fn yes() -> bool {
    true
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            max_belief_points: 2_000,
            max_iterations: 200,
            bellman_epsilon: 1e-3,
            expansion_rounds: 12,
            rng_seed: 0,
            state_corners: true,
            action_class_seeds: true,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_belief_points == 0 || self.max_iterations == 0 || self.expansion_rounds == 0 {
            return Err(Error::InvalidArgument(
                "solver point budget, iterations and expansion rounds must be positive".into(),
            ));
        }
        if !(self.bellman_epsilon > 0.0) {
            return Err(Error::InvalidArgument("bellman_epsilon must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SolveReport {
    pub sweeps: usize,
    pub belief_points: usize,
    pub vectors: usize,
    /// Largest `backup(b)·b − V(b)` over the belief set at the last sweep.
    pub final_residual: f64,
    pub converged: bool,
}

/// Alpha vectors stored row-major in one buffer.
#[derive(Debug, Clone)]
struct VectorSet {
    num_states: usize,
    actions: Vec<usize>,
    coeffs: Vec<f64>,
}

impl VectorSet {
    fn new(num_states: usize) -> Self {
        Self {
            num_states,
            actions: Vec::new(),
            coeffs: Vec::new(),
        }
    }

    fn from_vectors(num_states: usize, vectors: &[AlphaVector]) -> Self {
        let mut set = Self::new(num_states);
        for v in vectors {
            set.push(v.action, &v.coeffs);
        }
        set
    }

    fn len(&self) -> usize {
        self.actions.len()
    }

    fn push(&mut self, action: usize, coeffs: &[f64]) {
        debug_assert_eq!(coeffs.len(), self.num_states);
        self.actions.push(action);
        self.coeffs.extend_from_slice(coeffs);
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.coeffs[i * self.num_states..(i + 1) * self.num_states]
    }

    /// Argmax vector for sparse weights; ties go to the lowest position.
    fn argmax(&self, weights: &[(usize, f64)]) -> (usize, f64) {
        let mut best = (0, f64::NEG_INFINITY);
        for i in 0..self.len() {
            let row = self.row(i);
            let x: f64 = weights.iter().map(|&(s, w)| row[s] * w).sum();
            if x > best.1 {
                best = (i, x);
            }
        }
        best
    }

    /// Greedy value with the policy tie rule (lowest action, then position).
    fn value(&self, b: &[(usize, f64)]) -> (usize, f64) {
        let mut best = (0, f64::NEG_INFINITY);
        for i in 0..self.len() {
            let row = self.row(i);
            let x: f64 = b.iter().map(|&(s, w)| row[s] * w).sum();
            if x > best.1 || (x == best.1 && self.actions[i] < self.actions[best.0]) {
                best = (i, x);
            }
        }
        best
    }

    fn into_vectors(self) -> Vec<AlphaVector> {
        let n = self.num_states;
        self.actions
            .iter()
            .enumerate()
            .map(|(i, &action)| AlphaVector {
                action,
                coeffs: self.coeffs[i * n..(i + 1) * n].to_vec(),
            })
            .collect()
    }
}

/// Value of repeating each action forever, one vector per action.
pub fn blind_policy_vectors(model: &DiscretePomdp) -> Vec<AlphaVector> {
    let n = model.num_states();
    let gamma = model.discount();
    (0..model.num_actions())
        .map(|a| {
            let mut alpha: Vec<f64> = (0..n).map(|s| model.reward(s, a)).collect();
            for _ in 0..BLIND_MAX_ITERATIONS {
                let next: Vec<f64> = (0..n)
                    .map(|s| {
                        model.reward(s, a)
                            + gamma
                                * model
                                    .transition_row(s, a)
                                    .iter()
                                    .map(|&(t, p)| p * alpha[t])
                                    .sum::<f64>()
                    })
                    .collect();
                let diff = next
                    .iter()
                    .zip(&alpha)
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0, f64::max);
                alpha = next;
                if diff < BLIND_TOLERANCE {
                    break;
                }
            }
            AlphaVector { action: a, coeffs: alpha }
        })
        .collect()
}

/// Point-based Bellman backup at a single belief.
///
/// For each action `a` and observation `o` this picks the vector maximizing
/// `Σ_s' α(s') O(o | s', a) Σ_s T(s' | s, a) b(s)` (lowest position on ties,
/// so unreachable observations take vector 0), builds
/// `α_a(s) = R(s, a) + γ Σ_s' T(s' | s, a) Σ_o O(o | s', a) α_{a,o}(s')`
/// and returns the `α_a` with the largest value at `b` (lowest action on ties).
pub fn backup(
    model: &DiscretePomdp,
    belief: &Belief,
    vectors: &[AlphaVector],
) -> Result<AlphaVector> {
    if belief.len() != model.num_states() {
        return Err(Error::DimensionMismatch {
            expected: model.num_states(),
            found: belief.len(),
        });
    }
    if vectors.is_empty() {
        return Err(Error::InvalidArgument("backup needs at least one vector".into()));
    }
    if let Some(v) = vectors.iter().find(|v| v.coeffs.len() != model.num_states()) {
        return Err(Error::DimensionMismatch {
            expected: model.num_states(),
            found: v.coeffs.len(),
        });
    }
    let set = VectorSet::from_vectors(model.num_states(), vectors);
    let mut scratch = Scratch::new(model.num_states());
    let (action, coeffs, _) = backup_sparse(model, &belief.support(), &set, &mut scratch);
    Ok(AlphaVector { action, coeffs })
}

struct Scratch {
    pred: Vec<f64>,
    touched: Vec<usize>,
    entries: Vec<(usize, usize, f64)>,
    weights: Vec<(usize, f64)>,
}

impl Scratch {
    fn new(num_states: usize) -> Self {
        Self {
            pred: vec![0.0; num_states],
            touched: Vec::new(),
            entries: Vec::new(),
            weights: Vec::new(),
        }
    }
}

fn backup_sparse(
    model: &DiscretePomdp,
    b: &[(usize, f64)],
    set: &VectorSet,
    scratch: &mut Scratch,
) -> (usize, Vec<f64>, f64) {
    let gamma = model.discount();
    let mut best: Option<(usize, f64, Vec<(usize, usize)>)> = None;
    for a in 0..model.num_actions() {
        scratch.touched.clear();
        for &(s, p) in b {
            for &(next, t) in model.transition_row(s, a) {
                if scratch.pred[next] == 0.0 {
                    scratch.touched.push(next);
                }
                scratch.pred[next] += p * t;
            }
        }
        scratch.entries.clear();
        for &next in &scratch.touched {
            let w = scratch.pred[next];
            scratch.pred[next] = 0.0;
            for &(o, q) in model.observation_row(next, a) {
                scratch.entries.push((o, next, w * q));
            }
        }
        scratch.entries.sort_by_key(|&(o, next, _)| (o, next));

        let mut value = b.iter().map(|&(s, p)| p * model.reward(s, a)).sum::<f64>();
        let mut choices = Vec::new();
        let mut start = 0;
        while start < scratch.entries.len() {
            let o = scratch.entries[start].0;
            let end = start
                + scratch.entries[start..]
                    .iter()
                    .take_while(|e| e.0 == o)
                    .count();
            scratch.weights.clear();
            scratch
                .weights
                .extend(scratch.entries[start..end].iter().map(|&(_, s, w)| (s, w)));
            let (idx, x) = set.argmax(&scratch.weights);
            value += gamma * x;
            choices.push((o, idx));
            start = end;
        }
        if best.as_ref().map_or(true, |(_, v, _)| value > *v) {
            best = Some((a, value, choices));
        }
    }
    let (action, value, choices) = best.expect("at least one action");

    let mut chosen = vec![0usize; model.num_observations()];
    for (o, idx) in choices {
        chosen[o] = idx;
    }
    let coeffs = (0..model.num_states())
        .map(|s| {
            let future: f64 = model
                .transition_row(s, action)
                .iter()
                .map(|&(next, t)| {
                    t * model
                        .observation_row(next, action)
                        .iter()
                        .map(|&(o, q)| q * set.row(chosen[o])[next])
                        .sum::<f64>()
                })
                .sum();
            model.reward(s, action) + gamma * future
        })
        .collect();
    (action, coeffs, value)
}

fn sample_index(rng: &mut impl Rng, dist: &[(usize, f64)]) -> usize {
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

fn sparse_l1(a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
    let (mut i, mut j, mut d) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => {
                d += a[i].1;
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                d += b[j].1;
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                d += (a[i].1 - b[j].1).abs();
                i += 1;
                j += 1;
            }
        }
    }
    d + a[i..].iter().map(|x| x.1).sum::<f64>() + b[j..].iter().map(|x| x.1).sum::<f64>()
}

fn sparse_update(model: &DiscretePomdp, b: &[(usize, f64)], a: usize, o: usize) -> Option<SparseBelief> {
    let mut out: Vec<(usize, f64)> = Vec::new();
    for &(s, p) in b {
        for &(next, t) in model.transition_row(s, a) {
            let q = model.observation_probability(next, a, o);
            if q > 0.0 {
                out.push((next, p * t * q));
            }
        }
    }
    out.sort_by_key(|x| x.0);
    let mut merged: SparseBelief = Vec::with_capacity(out.len());
    for (s, w) in out {
        match merged.last_mut() {
            Some((k, x)) if *k == s => *x += w,
            _ => merged.push((s, w)),
        }
    }
    let total: f64 = merged.iter().map(|x| x.1).sum();
    if total <= 0.0 {
        return None;
    }
    merged.iter_mut().for_each(|x| x.1 /= total);
    Some(merged)
}

fn min_distance(set: &[SparseBelief], b: &[(usize, f64)]) -> f64 {
    set.iter().map(|x| sparse_l1(x, b)).fold(f64::INFINITY, f64::min)
}

/// One round of belief-set expansion.
pub fn expand_beliefs(
    model: &DiscretePomdp,
    points: &[Belief],
    max_points: usize,
    rng: &mut impl Rng,
) -> Vec<Belief> {
    let sparse: Vec<SparseBelief> = points.iter().map(Belief::support).collect();
    expand_sparse(model, &sparse, max_points, rng)
        .into_iter()
        .map(|b| Belief::from_sparse(model.num_states(), &b).expect("expanded belief is valid"))
        .collect()
}

fn expand_sparse(
    model: &DiscretePomdp,
    points: &[SparseBelief],
    max_points: usize,
    rng: &mut impl Rng,
) -> Vec<SparseBelief> {
    let mut out: Vec<SparseBelief> = points.to_vec();
    for b in points {
        if out.len() >= max_points {
            break;
        }
        let mut best: Option<(f64, SparseBelief)> = None;
        for a in 0..model.num_actions() {
            let s = sample_index(rng, b);
            let next = sample_index(rng, model.transition_row(s, a));
            let o = sample_index(rng, model.observation_row(next, a));
            let Some(candidate) = sparse_update(model, b, a, o) else {
                continue;
            };
            let d = min_distance(&out, &candidate);
            if best.as_ref().map_or(true, |(bd, _)| d > *bd) {
                best = Some((d, candidate));
            }
        }
        if let Some((d, candidate)) = best {
            if d > DEDUP_DISTANCE {
                out.push(candidate);
            }
        }
    }
    out
}

pub fn solve(model: &DiscretePomdp, initial: &Belief, params: &SolverParams) -> Result<AlphaVectorPolicy> {
    solve_with_report(model, initial, params).map(|(p, _)| p)
}

pub fn solve_with_report(
    model: &DiscretePomdp,
    initial: &Belief,
    params: &SolverParams,
) -> Result<(AlphaVectorPolicy, SolveReport)> {
    let (first, report) = solve_seeded(model, initial, &[], params)?;
    if !params.action_class_seeds {
        return Ok((first, report));
    }
    let seeds = action_class_beliefs(initial, &first.state_actions(), model.num_actions());
    let (policy, mut second) = solve_seeded(model, initial, &seeds, params)?;
    second.sweeps += report.sweeps;
    Ok((policy, second))
}

/// `b` restricted to the states whose policy action is `a`, for each action
/// with positive mass.
pub fn action_class_beliefs(b: &Belief, state_actions: &[usize], num_actions: usize) -> Vec<Belief> {
    (0..num_actions)
        .filter_map(|a| {
            let w: Vec<f64> = b
                .probs()
                .iter()
                .zip(state_actions)
                .map(|(p, sa)| if *sa == a { *p } else { 0.0 })
                .collect();
            Belief::from_weights(w).ok()
        })
        .collect()
}

/// Plain point-based run from `initial` plus extra starting points that are
/// backed up and expanded alongside it.
pub fn solve_seeded(
    model: &DiscretePomdp,
    initial: &Belief,
    seeds: &[Belief],
    params: &SolverParams,
) -> Result<(AlphaVectorPolicy, SolveReport)> {
    params.validate()?;
    for b in std::iter::once(initial).chain(seeds) {
        if b.len() != model.num_states() {
            return Err(Error::DimensionMismatch {
                expected: model.num_states(),
                found: b.len(),
            });
        }
    }
    let n = model.num_states();
    let blind = blind_policy_vectors(model);
    let mut learned = VectorSet::new(n);
    let mut points: Vec<SparseBelief> = vec![initial.support()];
    for b in seeds {
        let b = b.support();
        if min_distance(&points, &b) > DEDUP_DISTANCE {
            points.push(b);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let mut report = SolveReport::default();

    let corners: Vec<SparseBelief> = if params.state_corners {
        (0..n)
            .filter(|s| !model.is_terminal(*s))
            .map(|s| vec![(s, 1.0)])
            .collect()
    } else {
        Vec::new()
    };
    let mut all: Vec<SparseBelief> = points.iter().chain(&corners).cloned().collect();

    for round in 0..=params.expansion_rounds {
        let mut converged = false;
        for _ in 0..params.max_iterations {
            let (next, residual) = sweep(model, &blind, &learned, &all);
            report.sweeps += 1;
            report.final_residual = residual;
            if residual < params.bellman_epsilon {
                converged = true;
                break;
            }
            learned = next;
        }
        report.converged = converged;
        if round == params.expansion_rounds || points.len() >= params.max_belief_points {
            break;
        }
        let grown = expand_sparse(model, &points, params.max_belief_points, &mut rng);
        if grown.len() == points.len() && converged {
            break;
        }
        points = grown;
        all = points.iter().chain(&corners).cloned().collect();
    }

    let mut vectors = blind;
    vectors.extend(learned.into_vectors());
    report.belief_points = all.len();
    report.vectors = vectors.len();
    let policy = AlphaVectorPolicy::new(n, model.num_actions(), model.discount(), vectors)?;
    Ok((policy, report))
}

fn full_set(blind: &[AlphaVector], learned: &VectorSet) -> VectorSet {
    let mut set = VectorSet::from_vectors(learned.num_states, blind);
    set.actions.extend_from_slice(&learned.actions);
    set.coeffs.extend_from_slice(&learned.coeffs);
    set
}

/// Backs up every point against the current set. Returns the new learned
/// vectors (a point keeps its old best vector when the backup is worse, so
/// values never decrease) and the largest residual.
fn sweep(
    model: &DiscretePomdp,
    blind: &[AlphaVector],
    learned: &VectorSet,
    points: &[SparseBelief],
) -> (VectorSet, f64) {
    let current = full_set(blind, learned);
    let results: Vec<(usize, Vec<f64>, f64, f64, usize)> = points
        .par_iter()
        .map_init(
            || Scratch::new(model.num_states()),
            |scratch, b| {
                let (old_idx, old_value) = current.value(b);
                let (action, coeffs, value) = backup_sparse(model, b, &current, scratch);
                (action, coeffs, value, old_value, old_idx)
            },
        )
        .collect();

    let mut next = VectorSet::new(learned.num_states);
    let mut seen: HashSet<(usize, Vec<u64>)> = HashSet::new();
    let mut residual = f64::NEG_INFINITY;
    for (action, coeffs, value, old_value, old_idx) in results {
        residual = residual.max(value - old_value);
        let (action, coeffs) = if value >= old_value {
            (action, coeffs)
        } else {
            (current.actions[old_idx], current.row(old_idx).to_vec())
        };
        if old_idx < blind.len() && value < old_value {
            continue;
        }
        let key = (action, coeffs.iter().map(|c| c.to_bits()).collect());
        if seen.insert(key) {
            next.push(action, &coeffs);
        }
    }
    (next, residual.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pomdp::PomdpBuilder;

    fn single_state(reward: f64, gamma: f64) -> DiscretePomdp {
        let mut b = PomdpBuilder::new(1, 1, 1, gamma);
        b.transition(0, 0, vec![(0, 1.0)])
            .observation(0, 0, vec![(0, 1.0)])
            .reward(0, 0, reward);
        b.build().unwrap()
    }

    #[test]
    fn geometric_series() {
        let m = single_state(1.0, 0.5);
        let p = solve(&m, &Belief::point(1, 0), &SolverParams::default()).unwrap();
        assert!((p.value(&Belief::point(1, 0)).unwrap() - 2.0).abs() < 1e-6);
    }

    #[test]
    fn zero_discount_backup_is_reward() {
        let mut b = PomdpBuilder::new(2, 2, 1, 0.0);
        for s in 0..2 {
            for a in 0..2 {
                b.transition(s, a, vec![(1 - s, 1.0)])
                    .observation(s, a, vec![(0, 1.0)])
                    .reward(s, a, (s * 2 + a) as f64 - 1.5);
            }
        }
        let m = b.build().unwrap();
        let blind = blind_policy_vectors(&m);
        let belief = Belief::new(vec![0.2, 0.8]).unwrap();
        let v = backup(&m, &belief, &blind).unwrap();
        let expected: Vec<f64> = (0..2).map(|s| m.reward(s, v.action)).collect();
        assert_eq!(v.coeffs, expected);
        assert_eq!(v.action, 1);
    }

    #[test]
    fn expansion_respects_budget_and_single_state() {
        let m = single_state(1.0, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let points = vec![Belief::point(1, 0)];
        assert_eq!(expand_beliefs(&m, &points, 10, &mut rng), points);
        assert_eq!(expand_beliefs(&m, &points, 1, &mut rng), points);
    }

    #[test]
    fn sparse_l1_matches_dense() {
        let a = vec![(0, 0.5), (2, 0.5)];
        let b = vec![(1, 0.25), (2, 0.75)];
        assert!((sparse_l1(&a, &b) - 1.0).abs() < 1e-12);
        assert_eq!(sparse_l1(&a, &a), 0.0);
    }

    #[test]
    fn params_validation() {
        let mut p = SolverParams::default();
        p.bellman_epsilon = 0.0;
        assert!(p.validate().is_err());
        p = SolverParams {
            max_belief_points: 0,
            ..SolverParams::default()
        };
        assert!(p.validate().is_err());
    }
}
