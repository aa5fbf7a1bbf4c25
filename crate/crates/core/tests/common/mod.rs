#![allow(dead_code)]

use actsug_core::policy::AlphaVector;
use actsug_core::{Belief, DiscretePomdp, PomdpBuilder};
use rand::Rng;

pub const LISTEN: usize = 0;
pub const OPEN_LEFT: usize = 1;
pub const OPEN_RIGHT: usize = 2;
pub const HEAR_LEFT: usize = 0;
pub const HEAR_RIGHT: usize = 1;
pub const TIGER_LEFT: usize = 0;
pub const TIGER_RIGHT: usize = 1;

/// Classic Tiger: listening is right 85% of the time, opening a door resets.
pub fn tiger(discount: f64) -> DiscretePomdp {
    let mut b = PomdpBuilder::new(2, 3, 2, discount);
    for s in 0..2 {
        b.transition(s, LISTEN, vec![(s, 1.0)]);
        b.transition(s, OPEN_LEFT, vec![(0, 0.5), (1, 0.5)]);
        b.transition(s, OPEN_RIGHT, vec![(0, 0.5), (1, 0.5)]);
        b.observation(s, LISTEN, vec![(s, 0.85), (1 - s, 0.15)]);
        b.observation(s, OPEN_LEFT, vec![(0, 0.5), (1, 0.5)]);
        b.observation(s, OPEN_RIGHT, vec![(0, 0.5), (1, 0.5)]);
        b.reward(s, LISTEN, -1.0);
    }
    b.reward(TIGER_LEFT, OPEN_LEFT, -100.0)
        .reward(TIGER_LEFT, OPEN_RIGHT, 10.0)
        .reward(TIGER_RIGHT, OPEN_LEFT, 10.0)
        .reward(TIGER_RIGHT, OPEN_RIGHT, -100.0);
    b.action_labels(vec!["listen".into(), "open-left".into(), "open-right".into()]);
    b.build().unwrap()
}

fn random_row(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Dense random model: every transition and observation has positive mass.
pub fn random_model(
    rng: &mut impl Rng,
    ns: usize,
    na: usize,
    no: usize,
    discount: f64,
) -> DiscretePomdp {
    let mut b = PomdpBuilder::new(ns, na, no, discount);
    for s in 0..ns {
        for a in 0..na {
            b.transition(s, a, random_row(rng, ns).into_iter().enumerate().collect());
            b.observation(s, a, random_row(rng, no).into_iter().enumerate().collect());
            b.reward(s, a, rng.gen_range(-10.0..10.0));
        }
    }
    b.build().unwrap()
}

pub fn random_belief(rng: &mut impl Rng, n: usize) -> Belief {
    Belief::new(random_row(rng, n)).unwrap()
}

pub fn random_vectors(rng: &mut impl Rng, ns: usize, na: usize, count: usize) -> Vec<AlphaVector> {
    (0..count)
        .map(|_| AlphaVector {
            action: rng.gen_range(0..na),
            coeffs: (0..ns).map(|_| rng.gen_range(-20.0..20.0)).collect(),
        })
        .collect()
}

pub fn dense_t(m: &DiscretePomdp, s: usize, a: usize, next: usize) -> f64 {
    m.transition_distribution(s, a)
        .unwrap()
        .iter()
        .filter(|(t, _)| *t == next)
        .map(|(_, p)| p)
        .sum()
}

pub fn dense_o(m: &DiscretePomdp, next: usize, a: usize, o: usize) -> f64 {
    m.observation_distribution(next, a)
        .unwrap()
        .iter()
        .filter(|(x, _)| *x == o)
        .map(|(_, p)| p)
        .sum()
}

/// Textbook Bayes filter over dense loops. None when the observation is
/// impossible.
pub fn bayes(m: &DiscretePomdp, b: &[f64], a: usize, o: usize) -> Option<Vec<f64>> {
    let n = m.num_states();
    let mut w = vec![0.0; n];
    for (next, x) in w.iter_mut().enumerate() {
        let mut pred = 0.0;
        for (s, p) in b.iter().enumerate() {
            pred += dense_t(m, s, a, next) * p;
        }
        *x = dense_o(m, next, a, o) * pred;
    }
    let total: f64 = w.iter().sum();
    (total > 0.0).then(|| w.into_iter().map(|x| x / total).collect())
}

pub fn obs_prob(m: &DiscretePomdp, b: &[f64], a: usize, o: usize) -> f64 {
    let n = m.num_states();
    let mut total = 0.0;
    for next in 0..n {
        for (s, p) in b.iter().enumerate() {
            total += p * dense_t(m, s, a, next) * dense_o(m, next, a, o);
        }
    }
    total
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn max_value(vectors: &[AlphaVector], b: &[f64]) -> f64 {
    vectors
        .iter()
        .map(|v| dot(&v.coeffs, b))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Q(b, a) from the definition: expected reward plus discounted value of each
/// normalized posterior, weighted by its probability.
pub fn brute_q(m: &DiscretePomdp, vectors: &[AlphaVector], b: &[f64], a: usize) -> f64 {
    let immediate: f64 = b.iter().enumerate().map(|(s, p)| p * m.reward(s, a)).sum();
    let mut future = 0.0;
    for o in 0..m.num_observations() {
        let po = obs_prob(m, b, a, o);
        if po <= 0.0 {
            continue;
        }
        let post = bayes(m, b, a, o).unwrap();
        future += po * max_value(vectors, &post);
    }
    immediate + m.discount() * future
}

/// Backup by enumerating every assignment of a vector to each observation.
pub fn brute_backup(m: &DiscretePomdp, vectors: &[AlphaVector], b: &[f64]) -> (usize, Vec<f64>) {
    let ns = m.num_states();
    let no = m.num_observations();
    let nv = vectors.len();
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    for a in 0..m.num_actions() {
        let combos = nv.pow(no as u32);
        for code in 0..combos {
            let mut choice = Vec::with_capacity(no);
            let mut c = code;
            for _ in 0..no {
                choice.push(c % nv);
                c /= nv;
            }
            let alpha: Vec<f64> = (0..ns)
                .map(|s| {
                    let mut acc = 0.0;
                    for next in 0..ns {
                        let t = dense_t(m, s, a, next);
                        for (o, &k) in choice.iter().enumerate() {
                            acc += t * dense_o(m, next, a, o) * vectors[k].coeffs[next];
                        }
                    }
                    m.reward(s, a) + m.discount() * acc
                })
                .collect();
            let v = dot(&alpha, b);
            if best.as_ref().map_or(true, |(bv, _, _)| v > *bv) {
                best = Some((v, a, alpha));
            }
        }
    }
    let (_, a, alpha) = best.unwrap();
    (a, alpha)
}

/// A line `v(p) = c + m p` over the belief `(1 - p, p)` of a 2-state model.
#[derive(Debug, Clone, Copy)]
struct Line {
    m: f64,
    c: f64,
}

impl Line {
    fn from_coeffs(a: &[f64]) -> Self {
        Line {
            m: a[1] - a[0],
            c: a[0],
        }
    }

    fn coeffs(self) -> [f64; 2] {
        [self.c, self.c + self.m]
    }

    fn at(self, p: f64) -> f64 {
        self.c + self.m * p
    }
}

fn cross(l1: Line, l2: Line) -> f64 {
    (l1.c - l2.c) / (l2.m - l1.m)
}

/// Upper envelope of a set of lines restricted to p ∈ [0, 1].
fn envelope(mut lines: Vec<Line>) -> Vec<Line> {
    lines.sort_by(|a, b| a.m.partial_cmp(&b.m).unwrap().then(b.c.partial_cmp(&a.c).unwrap()));
    // Near-parallel lines: keep the higher one, whichever sorted first.
    lines.dedup_by(|later, kept| {
        let same = (later.m - kept.m).abs() < 1e-9;
        if same && later.c > kept.c {
            *kept = *later;
        }
        same
    });
    let mut hull: Vec<Line> = Vec::new();
    for l in lines {
        while hull.len() >= 2 {
            let l1 = hull[hull.len() - 2];
            let l2 = hull[hull.len() - 1];
            if cross(l1, l) <= cross(l1, l2) {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(l);
    }
    let k = hull.len();
    (0..k)
        .filter(|&i| {
            let lo = if i == 0 { f64::NEG_INFINITY } else { cross(hull[i - 1], hull[i]) };
            let hi = if i + 1 == k { f64::INFINITY } else { cross(hull[i], hull[i + 1]) };
            hi >= 0.0 && lo <= 1.0
        })
        .map(|i| hull[i])
        .collect()
}

/// Exact finite-horizon value iteration for a 2-state model, keeping only the
/// upper envelope of the alpha lines at every depth.
pub struct TwoStateVi {
    model: DiscretePomdp,
    layers: Vec<Vec<Line>>,
}

impl TwoStateVi {
    pub fn new(model: &DiscretePomdp, depth: usize) -> Self {
        assert_eq!(model.num_states(), 2);
        let mut layers = vec![vec![Line { m: 0.0, c: 0.0 }]];
        for _ in 0..depth {
            let prev = layers.last().unwrap();
            let prev_vecs: Vec<AlphaVector> = prev
                .iter()
                .map(|l| AlphaVector {
                    action: 0,
                    coeffs: l.coeffs().to_vec(),
                })
                .collect();
            let mut candidates = Vec::new();
            for a in 0..model.num_actions() {
                // Cross-sum over observations of the projected previous lines.
                let mut acc: Vec<[f64; 2]> = vec![[model.reward(0, a), model.reward(1, a)]];
                for o in 0..model.num_observations() {
                    let proj: Vec<[f64; 2]> = prev_vecs
                        .iter()
                        .map(|v| {
                            let mut g = [0.0; 2];
                            for (s, gs) in g.iter_mut().enumerate() {
                                for next in 0..2 {
                                    *gs += model.discount()
                                        * dense_t(model, s, a, next)
                                        * dense_o(model, next, a, o)
                                        * v.coeffs[next];
                                }
                            }
                            g
                        })
                        .collect();
                    let mut next_acc = Vec::new();
                    for x in &acc {
                        for g in &proj {
                            next_acc.push([x[0] + g[0], x[1] + g[1]]);
                        }
                    }
                    acc = envelope(next_acc.iter().map(|c| Line::from_coeffs(c)).collect())
                        .into_iter()
                        .map(Line::coeffs)
                        .collect();
                }
                candidates.extend(acc.iter().map(|c| Line::from_coeffs(c)));
            }
            layers.push(envelope(candidates));
        }
        Self {
            model: model.clone(),
            layers,
        }
    }

    pub fn value(&self, b: &[f64]) -> f64 {
        self.value_at(self.layers.len() - 1, b)
    }

    pub fn value_at(&self, depth: usize, b: &[f64]) -> f64 {
        self.layers[depth]
            .iter()
            .map(|l| l.at(b[1]))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Q at the full depth: one explicit step on top of depth − 1.
    pub fn q(&self, b: &[f64], a: usize) -> f64 {
        self.q_at(self.layers.len() - 1, b, a)
    }

    pub fn q_at(&self, depth: usize, b: &[f64], a: usize) -> f64 {
        let m = &self.model;
        let d = depth - 1;
        let immediate: f64 = b.iter().enumerate().map(|(s, p)| p * m.reward(s, a)).sum();
        let mut future = 0.0;
        for o in 0..m.num_observations() {
            let po = obs_prob(m, b, a, o);
            if po > 0.0 {
                future += po * self.value_at(d, &bayes(m, b, a, o).unwrap());
            }
        }
        immediate + m.discount() * future
    }
}
