mod common;

use std::sync::OnceLock;

use actsug_core::policy::AlphaVector;
use actsug_core::solver::{self, SolveReport, SolverParams};
use actsug_core::suggestion::{incorporate, noisy_likelihood, SuggestionModel, SuggestionTables};
use actsug_core::{AlphaVectorPolicy, Belief, Error, PomdpBuilder};
use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const ALGEBRAIC: f64 = 1e-9;

fn tiger_params() -> SolverParams {
    SolverParams {
        max_belief_points: 300,
        expansion_rounds: 10,
        bellman_epsilon: 1e-4,
        ..SolverParams::default()
    }
}

fn solved_tiger() -> &'static (AlphaVectorPolicy, SolveReport) {
    static CELL: OnceLock<(AlphaVectorPolicy, SolveReport)> = OnceLock::new();
    CELL.get_or_init(|| {
        let m = tiger(0.95);
        solver::solve_with_report(&m, &Belief::uniform(2), &tiger_params()).unwrap()
    })
}

fn tiger_vi() -> &'static TwoStateVi {
    static CELL: OnceLock<TwoStateVi> = OnceLock::new();
    CELL.get_or_init(|| TwoStateVi::new(&tiger(0.95), 600))
}

#[test]
fn tiger_listen_update_matches_hand_computation() {
    let m = tiger(0.95);
    let b = m.belief_update(&Belief::uniform(2), LISTEN, HEAR_LEFT).unwrap();
    assert!((b.get(0) - 0.85).abs() < ALGEBRAIC);
    assert!((b.get(1) - 0.15).abs() < ALGEBRAIC);
}

#[test]
fn belief_update_matches_dense_bayes_on_random_models() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let m = random_model(&mut rng, 6, 3, 4, 0.9);
        let b = random_belief(&mut rng, 6);
        for a in 0..3 {
            for o in 0..4 {
                let got = m.belief_update(&b, a, o).unwrap();
                let want = bayes(&m, b.probs(), a, o).unwrap();
                for (x, y) in got.probs().iter().zip(&want) {
                    assert!((x - y).abs() < ALGEBRAIC);
                }
            }
        }
    }
}

#[test]
fn identity_transition_with_flat_observation_is_a_no_op() {
    let mut pb = PomdpBuilder::new(2, 1, 2, 0.9);
    for s in 0..2 {
        pb.transition(s, 0, vec![(s, 1.0)])
            .observation(s, 0, vec![(0, 0.5), (1, 0.5)]);
    }
    let m = pb.build().unwrap();
    let b = Belief::new(vec![0.3, 0.7]).unwrap();
    for o in 0..2 {
        let post = m.belief_update(&b, 0, o).unwrap();
        assert!((post.get(0) - 0.3).abs() < ALGEBRAIC);
    }
}

#[test]
fn impossible_observation_is_an_error() {
    let mut pb = PomdpBuilder::new(2, 1, 2, 0.9);
    pb.transition(0, 0, vec![(0, 1.0)])
        .transition(1, 0, vec![(1, 1.0)])
        .observation(0, 0, vec![(0, 1.0)])
        .observation(1, 0, vec![(1, 1.0)]);
    let m = pb.build().unwrap();
    let err = m.belief_update(&Belief::point(2, 0), 0, 1).unwrap_err();
    assert!(matches!(err, Error::ImpossibleObservation { .. }));
}

#[test]
fn q_value_matches_definition_on_random_models() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..30 {
        let m = random_model(&mut rng, 5, 3, 3, 0.9);
        let vectors = random_vectors(&mut rng, 5, 3, 4);
        let policy = AlphaVectorPolicy::new(5, 3, 0.9, vectors.clone()).unwrap();
        let b = random_belief(&mut rng, 5);
        for a in 0..3 {
            let got = policy.q_value(&m, &b, a).unwrap();
            let want = brute_q(&m, &vectors, b.probs(), a);
            assert!((got - want).abs() < ALGEBRAIC, "{got} vs {want}");
        }
    }
}

#[test]
fn q_value_with_zero_discount_is_expected_reward() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let m = random_model(&mut rng, 4, 2, 2, 0.0);
    let policy = AlphaVectorPolicy::new(4, 2, 0.0, random_vectors(&mut rng, 4, 2, 3)).unwrap();
    let b = random_belief(&mut rng, 4);
    for a in 0..2 {
        let want: f64 = (0..4).map(|s| b.get(s) * m.reward(s, a)).sum();
        assert!((policy.q_value(&m, &b, a).unwrap() - want).abs() < ALGEBRAIC);
    }
}

#[test]
fn backup_matches_enumeration_on_random_three_state_models() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..40 {
        let m = random_model(&mut rng, 3, 2, 2, 0.9);
        let vectors = random_vectors(&mut rng, 3, 2, 4);
        let b = random_belief(&mut rng, 3);
        let got = solver::backup(&m, &b, &vectors).unwrap();
        let (action, coeffs) = brute_backup(&m, &vectors, b.probs());
        assert_eq!(got.action, action);
        for (x, y) in got.coeffs.iter().zip(&coeffs) {
            assert!((x - y).abs() < ALGEBRAIC);
        }
    }
}

#[test]
fn backup_with_zero_discount_is_reward_vector() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let m = random_model(&mut rng, 3, 2, 2, 0.0);
    let vectors = random_vectors(&mut rng, 3, 2, 2);
    let b = random_belief(&mut rng, 3);
    let got = solver::backup(&m, &b, &vectors).unwrap();
    for s in 0..3 {
        assert_eq!(got.coeffs[s], m.reward(s, got.action));
    }
}

#[test]
fn geometric_series_single_state() {
    let mut pb = PomdpBuilder::new(1, 1, 1, 0.5);
    pb.transition(0, 0, vec![(0, 1.0)])
        .observation(0, 0, vec![(0, 1.0)])
        .reward(0, 0, 1.0);
    let m = pb.build().unwrap();
    let policy = solver::solve(&m, &Belief::uniform(1), &SolverParams::default()).unwrap();
    assert!((policy.value(&Belief::uniform(1)).unwrap() - 2.0).abs() < 1e-6);
}

#[test]
fn exact_vi_oracle_agrees_with_known_tiger_facts() {
    let vi = tiger_vi();
    // Listening is optimal at the uniform belief; opening is optimal when sure.
    let u = [0.5, 0.5];
    assert!(vi.q(&u, LISTEN) > vi.q(&u, OPEN_LEFT));
    let sure = [0.0, 1.0];
    assert!(vi.q(&sure, OPEN_LEFT) > vi.q(&sure, LISTEN));
    // Bounded by the reward range over the horizon.
    assert!(vi.value(&u) < 10.0 / 0.05 && vi.value(&u) > -100.0 / 0.05);
}

#[test]
fn finite_horizon_values_approach_the_fixed_point() {
    let vi = tiger_vi();
    let u = [0.5, 0.5];
    // A 60-step horizon still misses roughly γ^60 of the value.
    let gap60 = vi.value(&u) - vi.value_at(60, &u);
    assert!(gap60 > 0.5, "{gap60}");
    assert!((vi.value_at(599, &u) - vi.value(&u)).abs() < 1e-9);
}

#[test]
fn tiger_solved_value_matches_value_iteration() {
    let (policy, _) = solved_tiger();
    let u = Belief::uniform(2);
    let got = policy.value(&u).unwrap();
    let want = tiger_vi().value(&[0.5, 0.5]);
    assert!((got - want).abs() < 0.1, "solver {got} vs oracle {want}");
    assert!((got - want).abs() < 0.05, "solver {got} vs oracle {want}");
}

#[test]
fn tiger_prefers_listening_at_uniform() {
    let (policy, _) = solved_tiger();
    assert_eq!(policy.action(&Belief::uniform(2)).unwrap(), LISTEN);
}

#[test]
fn tiger_open_left_q_matches_value_iteration() {
    let (policy, _) = solved_tiger();
    let m = tiger(0.95);
    let u = Belief::uniform(2);
    let got = policy.q_value(&m, &u, OPEN_LEFT).unwrap();
    let want = tiger_vi().q(&[0.5, 0.5], OPEN_LEFT);
    // −45 immediate plus the discounted value of the reset belief.
    let reset = -100.0 * 0.5 + 10.0 * 0.5 + 0.95 * tiger_vi().value(&[0.5, 0.5]);
    assert!((want - reset).abs() < 0.05);
    assert!((got - want).abs() < 0.05, "solver {got} vs oracle {want}");
}

#[test]
fn tiger_bellman_consistent_at_corners() {
    let (policy, report) = solved_tiger();
    assert!(report.converged);
    let m = tiger(0.95);
    let eps = tiger_params().bellman_epsilon;
    for s in 0..2 {
        let b = Belief::point(2, s);
        let best = (0..3)
            .map(|a| policy.q_value(&m, &b, a).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        let v = policy.value(&b).unwrap();
        assert!((best - v).abs() <= eps + 1e-9, "state {s}: {best} vs {v}");
    }
}

#[test]
fn tiger_expansion_reaches_post_listen_belief() {
    let m = tiger(0.95);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    // Several independent single rounds: at least one must be a listen posterior.
    let mut found = false;
    for _ in 0..20 {
        let out = solver::expand_beliefs(&m, &[Belief::uniform(2)], 10, &mut rng);
        assert!(out.len() <= 2);
        if out.iter().any(|b| b.probs().iter().cloned().fold(0.0, f64::max) >= 0.85 - 1e-12) {
            found = true;
        }
    }
    assert!(found);
}

#[test]
fn expansion_at_budget_is_unchanged() {
    let m = tiger(0.95);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let pts = vec![Belief::uniform(2), Belief::point(2, 0)];
    let out = solver::expand_beliefs(&m, &pts, 2, &mut rng);
    assert_eq!(out, pts);
}

#[test]
fn single_state_expansion_stays_put() {
    let mut pb = PomdpBuilder::new(1, 2, 1, 0.9);
    for a in 0..2 {
        pb.transition(0, a, vec![(0, 1.0)]).observation(0, a, vec![(0, 1.0)]);
    }
    let m = pb.build().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let out = solver::expand_beliefs(&m, &[Belief::uniform(1)], 10, &mut rng);
    assert_eq!(out.len(), 1);
}

#[test]
fn tiger_noisy_likelihood_is_softmax_of_oracle_q() {
    let (policy, _) = solved_tiger();
    let m = tiger(0.95);
    let vi = tiger_vi();
    let corner = [1.0, 0.0];
    let q: Vec<f64> = (0..3).map(|a| vi.q(&corner, a)).collect();
    let z: f64 = q.iter().map(|x| x.exp()).sum();
    let want = q[OPEN_RIGHT].exp() / z;
    let got = noisy_likelihood(&m, policy, OPEN_RIGHT, 1.0).unwrap()[TIGER_LEFT];
    assert!((got - want).abs() < 0.05, "{got} vs {want}");
}

#[test]
fn scaled_two_state_toy() {
    let mut pb = PomdpBuilder::new(2, 2, 1, 0.9);
    for s in 0..2 {
        for a in 0..2 {
            pb.transition(s, a, vec![(s, 1.0)]).observation(s, a, vec![(0, 1.0)]);
        }
    }
    let m = pb.build().unwrap();
    let policy = AlphaVectorPolicy::new(
        2,
        2,
        0.9,
        vec![
            AlphaVector { action: 0, coeffs: vec![1.0, 0.0] },
            AlphaVector { action: 1, coeffs: vec![0.0, 1.0] },
        ],
    )
    .unwrap();
    let l = actsug_core::suggestion::scaled_likelihood(&m, &policy, 0, 0.75).unwrap();
    assert!((l[0] - 0.75).abs() < ALGEBRAIC && (l[1] - 0.25).abs() < ALGEBRAIC);
}

#[test]
fn scaled_posterior_on_matching_state() {
    let na = 3;
    let mut pb = PomdpBuilder::new(4, na, 1, 0.9);
    for s in 0..4 {
        for a in 0..na {
            pb.transition(s, a, vec![(s, 1.0)]).observation(s, a, vec![(0, 1.0)]);
        }
    }
    let m = pb.build().unwrap();
    // π(2) = 2, every other state maps to action 0; action 1 has the top
    // value at the uniform belief so the planned action differs.
    let mut vectors = vec![AlphaVector { action: 1, coeffs: vec![5.0; 4] }];
    for s in 0..4 {
        let mut c = vec![0.0; 4];
        c[s] = 10.0;
        vectors.push(AlphaVector { action: if s == 2 { 2 } else { 0 }, coeffs: c });
    }
    let policy = AlphaVectorPolicy::new(4, na, 0.9, vectors).unwrap();
    let tables = SuggestionTables::new(&m, &policy, false).unwrap();
    let sm = SuggestionModel::scaled(0.99).unwrap();
    let inc = incorporate(&policy, &tables, &Belief::uniform(4), 2, &sm, true).unwrap();
    let other = 0.01 / (na - 1) as f64;
    let want = 0.99 / (0.99 + 3.0 * other);
    assert!(inc.applied);
    assert!((inc.belief.get(2) - want).abs() < ALGEBRAIC);
}

#[test]
fn value_iteration_layers_satisfy_the_bellman_equation() {
    let vi = tiger_vi();
    for d in [1, 2, 10, 60, 200, 600] {
        for i in 0..=200 {
            let p = i as f64 / 200.0;
            let b = [1.0 - p, p];
            let want = (0..3).map(|a| vi.q_at(d, &b, a)).fold(f64::NEG_INFINITY, f64::max);
            assert!((want - vi.value_at(d, &b)).abs() < 1e-9, "depth {d} p {p}");
        }
    }
}
