mod common;

use std::collections::HashMap;
use std::sync::Arc;

use capi_core::capi::{
    act, assess, assess_many, greedy_joint_policy, prescription_vectors, run_episode, train_capi, train_step,
    vector_count, vector_prob, Acquisition, ActOptions, Backend, CapiConfig, CapiRngs, CapiState, Checkpoint,
    ConstantValue, ExactValue, Exploration, NetworkModel, Row, ValueEstimator,
};
use capi_core::exact::{backward_induction, optimal_value, BeliefGraph};
use capi_core::fosg::{evaluate_joint_policy, ExplicitGameBuilder, FiniteGame, NULL_PRIVATE_OBS};
use capi_core::pubmdp::{enumerate_consistent_prescriptions, initial_belief, step, PublicBelief};
use capi_core::zoo::load_game;
use capi_core::Result;
use common::{gradient_error, random_batch, random_rows, small_network, TINY_HANABI};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn k_most_likely_matches_sorted_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let rows = random_rows(&mut rng, 10_000);
        let all = prescription_vectors(&rows, 1, Acquisition::EnumerateAll, 10_000, &mut rng).unwrap();
        let mut sorted: Vec<(f64, Vec<u16>)> = all.iter().map(|g| (vector_prob(&rows, &g.0), g.0.clone())).collect();
        sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
        let k = rng.gen_range(1..=all.len() + 3);
        let top = prescription_vectors(&rows, k, Acquisition::KMostLikely, 0, &mut rng).unwrap();
        assert_eq!(top.len(), k.min(all.len()));
        for (got, want) in top.iter().zip(&sorted) {
            assert!((vector_prob(&rows, &got.0) - want.0).abs() < 1e-15);
        }
        let distinct: std::collections::HashSet<_> = top.iter().collect();
        assert_eq!(distinct.len(), top.len());
    }
}

#[test]
fn sampled_frequencies_match_the_product_distribution() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for rows in [
        vec![Row::uniform(vec![0, 1, 2]), Row::uniform(vec![0, 1])],
        vec![
            Row {
                actions: vec![0, 1],
                probs: vec![0.7, 0.3],
            },
            Row {
                actions: vec![4, 5, 6],
                probs: vec![0.5, 0.2, 0.3],
            },
        ],
    ] {
        let draws = 100_000;
        let mut counts: HashMap<Vec<u16>, usize> = HashMap::new();
        for _ in 0..draws {
            let g = prescription_vectors(&rows, 1, Acquisition::Sample, 0, &mut rng).unwrap();
            *counts.entry(g[0].0.clone()).or_default() += 1;
        }
        let all = prescription_vectors(&rows, 1, Acquisition::EnumerateAll, 100, &mut rng).unwrap();
        assert_eq!(all.len() as u64, vector_count(&rows));
        for g in all {
            let p = vector_prob(&rows, &g.0);
            let freq = *counts.get(&g.0).unwrap_or(&0) as f64 / draws as f64;
            let se = (p * (1.0 - p) / draws as f64).sqrt();
            assert!((freq - p).abs() <= 3.0 * se, "{:?}: {freq} vs {p}", g.0);
        }
    }
}

proptest! {
    #[test]
    fn acquired_vectors_have_product_probability(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = random_rows(&mut rng, 500);
        let got = prescription_vectors(&rows, 20, Acquisition::Sample, 0, &mut rng).unwrap();
        for g in got {
            let direct: f64 = rows
                .iter()
                .zip(&g.0)
                .map(|(r, &a)| r.probs[r.actions.iter().position(|&b| b == a).unwrap()])
                .product();
            prop_assert!((vector_prob(&rows, &g.0) - direct).abs() < 1e-12);
        }
    }
}

/// All nonterminal beliefs reachable from the initial belief.
fn reachable(game: &FiniteGame) -> Vec<PublicBelief> {
    let graph = BeliefGraph::build(game).unwrap();
    graph.nodes().iter().map(|n| n.belief.clone()).collect()
}

struct Sum<'a>(&'a dyn ValueEstimator, &'a dyn ValueEstimator);

impl ValueEstimator for Sum<'_> {
    fn values(&self, game: &FiniteGame, beliefs: &[&PublicBelief]) -> Result<Vec<f64>> {
        let a = self.0.values(game, beliefs)?;
        let b = self.1.values(game, beliefs)?;
        Ok(a.iter().zip(b).map(|(x, y)| x + y).collect())
    }
}

/// Deterministic pseudo-random values per belief.
struct Hashed(u64);

impl ValueEstimator for Hashed {
    fn values(&self, game: &FiniteGame, beliefs: &[&PublicBelief]) -> Result<Vec<f64>> {
        Ok(beliefs
            .iter()
            .map(|b| {
                if b.terminal {
                    return 0.0;
                }
                let key = b.key(game.tree());
                let h = key
                    .0
                    .iter()
                    .fold(self.0, |h, &x| h.wrapping_mul(1_000_003).wrapping_add(x as u64));
                (h % 1000) as f64 / 100.0
            })
            .collect())
    }
}

#[test]
fn assess_basics() {
    let game = load_game("tiny_hanabi:A").unwrap();
    let root = initial_belief(&game);
    for gamma in enumerate_consistent_prescriptions(&game, &root, 100).unwrap() {
        let s = step(&game, &root, &gamma).unwrap();
        let a = assess(&game, &root, &gamma, &ConstantValue(2.5)).unwrap();
        assert!((a.q - (s.expected_reward + 2.5)).abs() < 1e-12);
        for b in &s.branches {
            let last = enumerate_consistent_prescriptions(&game, &b.next, 100).unwrap();
            for g in last {
                let r = step(&game, &b.next, &g).unwrap().expected_reward;
                let q = assess(&game, &b.next, &g, &ConstantValue(7.0)).unwrap().q;
                assert!((q - r).abs() < 1e-12, "final step ignores the value");
            }
        }
    }
}

#[test]
fn assess_is_linear_in_the_value() {
    for name in ["tiny_hanabi:A", "tiny_hanabi:F", "trade_comm:2x2"] {
        let game = load_game(name).unwrap();
        let (v1, v2) = (Hashed(3), Hashed(17));
        let sum = Sum(&v1, &v2);
        for belief in reachable(&game) {
            let gammas = enumerate_consistent_prescriptions(&game, &belief, 10_000).unwrap();
            let a = assess_many(&game, &belief, &gammas, &v1).unwrap();
            let b = assess_many(&game, &belief, &gammas, &v2).unwrap();
            let c = assess_many(&game, &belief, &gammas, &sum).unwrap();
            for ((a, b), c) in a.iter().zip(&b).zip(&c) {
                assert!((c.q - (a.q + b.q - a.reward)).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn exact_values_make_one_step_lookahead_optimal() {
    for name in TINY_HANABI {
        let game = load_game(name).unwrap();
        let exact = ExactValue::new(&game).unwrap();
        for belief in reachable(&game) {
            let gammas = enumerate_consistent_prescriptions(&game, &belief, 10_000).unwrap();
            let qs = assess_many(&game, &belief, &gammas, &exact).unwrap();
            let best = qs.iter().map(|a| a.q).fold(f64::NEG_INFINITY, f64::max);
            let v = exact.value(&game, &belief).unwrap();
            assert!((best - v).abs() < 1e-9, "{name}: {best} vs {v}");
        }
    }
}

fn plug_in_state(game: &FiniteGame) -> CapiState {
    let config = CapiConfig {
        acquisition: Acquisition::EnumerateAll,
        exploration: Exploration::None,
        ..CapiConfig::tabular()
    };
    CapiState::new(game, config, 0)
        .unwrap()
        .with_fixed_value(Arc::new(ExactValue::new(game).unwrap()))
}

#[test]
fn greedy_policy_with_exact_values_is_optimal() {
    for name in TINY_HANABI.iter().copied().chain(["trade_comm:2x2", "trade_comm:3x2"]) {
        let game = load_game(name).unwrap();
        let state = plug_in_state(&game);
        let policy = greedy_joint_policy(&game, &state).unwrap();
        let value = evaluate_joint_policy(&game, &policy);
        let opt = backward_induction(&BeliefGraph::build(&game).unwrap()).root_value();
        assert!((value - opt).abs() < 1e-12, "{name}: {value} vs {opt}");
        // The root assessment backs up the same value.
        let mut rngs = CapiRngs::new(0);
        let d = act(&game, &state, &initial_belief(&game), ActOptions::GREEDY, &mut rngs).unwrap();
        assert!((d.entry.q - value).abs() < 1e-9);
    }
}

#[test]
fn exploration_changes_execution_not_targets() {
    let game = load_game("tiny_hanabi:C").unwrap();
    let state = plug_in_state(&game);
    let root = initial_belief(&game);
    let greedy = act(&game, &state, &root, ActOptions::GREEDY, &mut CapiRngs::new(1)).unwrap();
    let mut seen = std::collections::HashSet::new();
    let mut rngs = CapiRngs::new(1);
    for _ in 0..200 {
        let opts = ActOptions {
            epsilon: 1.0,
            structured: false,
        };
        let d = act(&game, &state, &root, opts, &mut rngs).unwrap();
        assert!(d.explored);
        assert_eq!(d.entry, greedy.entry);
        seen.insert(d.executed);
    }
    assert_eq!(seen.len(), greedy.candidates);
}

#[test]
fn acting_is_deterministic_given_the_seed() {
    let game = load_game("trade_comm:3x3").unwrap();
    let config = CapiConfig {
        k: 50,
        ..CapiConfig::tabular()
    };
    let state = CapiState::new(&game, config, 9).unwrap();
    let root = initial_belief(&game);
    let opts = ActOptions {
        epsilon: 0.5,
        structured: true,
    };
    let a = act(&game, &state, &root, opts, &mut CapiRngs::new(4)).unwrap();
    let b = act(&game, &state, &root, opts, &mut CapiRngs::new(4)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn episode_sizes() {
    for name in TINY_HANABI {
        let game = load_game(name).unwrap();
        let actions = game.dynamics().num_actions(0);
        let config = CapiConfig {
            k: 20,
            ..CapiConfig::tabular()
        };
        let state = CapiState::new(&game, config, 2).unwrap();
        let mut rngs = CapiRngs::new(2);
        for _ in 0..20 {
            let buffer = run_episode(&game, &state, &mut rngs).unwrap();
            assert!(buffer.len() <= 1 + actions && buffer.len() >= 2);
        }
    }

    let mut b = ExplicitGameBuilder::new("one_shot", 2, 1);
    let w0 = b.world(vec![vec![0, 1], vec![0, 1]]);
    let end = b.terminal();
    for a in 0..2 {
        for c in 0..2 {
            b.outcome(w0, &[a, c], end, 1.0, (a == c) as u8 as f64, 1, &[NULL_PRIVATE_OBS; 2]);
        }
    }
    let game = FiniteGame::new(b.build().unwrap()).unwrap();
    let state = CapiState::new(&game, CapiConfig::tabular(), 0).unwrap();
    let buffer = run_episode(&game, &state, &mut CapiRngs::new(0)).unwrap();
    assert_eq!(buffer.len(), 1);
    let policy = greedy_joint_policy(&game, &state).unwrap();
    assert_eq!(evaluate_joint_policy(&game, &policy), 1.0);
}

#[test]
fn structured_exploration_opens_exactly_one_row() {
    let game = load_game("tiny_hanabi:E").unwrap();
    let config = CapiConfig {
        k: 1000,
        policy_lr: 1.0,
        ..CapiConfig::tabular()
    };
    let mut state = CapiState::new(&game, config, 0).unwrap();
    let root = initial_belief(&game);
    // Make every row one-hot.
    let mut buffer = vec![
        act(&game, &state, &root, ActOptions::GREEDY, &mut CapiRngs::new(0))
            .unwrap()
            .entry,
    ];
    train_step(&game, &mut state, &mut buffer).unwrap();
    assert!(buffer.is_empty());
    let mut rngs = CapiRngs::new(3);
    let plain = act(&game, &state, &root, ActOptions::GREEDY, &mut rngs).unwrap();
    assert_eq!(plain.candidates, 1);
    let opts = ActOptions {
        epsilon: 0.0,
        structured: true,
    };
    for _ in 0..10 {
        let d = act(&game, &state, &root, opts, &mut rngs).unwrap();
        assert_eq!(d.candidates, 3, "one 3-action row opened");
    }
}

#[test]
fn tabular_updates_with_unit_steps() {
    let game = load_game("tiny_hanabi:B").unwrap();
    let config = CapiConfig {
        k: 4,
        acquisition: Acquisition::EnumerateAll,
        policy_lr: 1.0,
        value_lr: 1.0,
        ..CapiConfig::tabular()
    };
    let mut state = CapiState::new(&game, config, 0).unwrap();
    let mut buffer = run_episode(&game, &state, &mut CapiRngs::new(0)).unwrap();
    let entries = buffer.clone();
    train_step(&game, &mut state, &mut buffer).unwrap();
    for e in &entries {
        assert_eq!(state.value_table.get(&game, &e.belief), e.q);
        let rows = state.rows(&game, &e.belief);
        for (r, row) in rows.iter().enumerate() {
            if e.belief.indicators[r] {
                for (&a, &p) in row.actions.iter().zip(&row.probs) {
                    assert_eq!(p, if a == e.target.0[r] { 1.0 } else { 0.0 });
                }
            }
        }
    }
}

#[test]
fn tabular_policy_iteration_solves_tiny_hanabi() {
    for (seed, name) in TINY_HANABI.iter().enumerate() {
        let game = load_game(name).unwrap();
        let config = CapiConfig {
            acquisition: Acquisition::EnumerateAll,
            exploration: Exploration::EpsilonGreedy { epsilon: 0.5 },
            policy_lr: 1.0,
            value_lr: 1.0,
            ..CapiConfig::tabular()
        };
        let mut state = CapiState::new(&game, config, seed as u64).unwrap();
        let run = train_capi(&game, &mut state, 300, 10, None, &mut CapiRngs::new(seed as u64)).unwrap();
        let opt = optimal_value(&game).unwrap();
        assert!(
            (run.final_value - opt).abs() < 1e-9,
            "{name}: {} vs {opt}",
            run.final_value
        );
        assert!(run.curve.iter().all(|p| p.greedy_value <= opt + 1e-9));
    }
}

#[test]
fn gradients_match_finite_differences() {
    let game = load_game("tiny_hanabi:A").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let mut net = small_network(&game, k % 2 == 0, k);
        let batch = random_batch(&net, &mut rng, 1);
        worst = worst.max(gradient_error(&mut net, &batch));
    }
    assert!(worst < 1e-4, "worst relative error {worst}");
}

#[test]
fn network_overfits_a_small_buffer() {
    let game = load_game("trade_comm:2x2").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut net = NetworkModel::new(&game, &[64, 64, 64], false, 1e-3, &mut rng);
    let beliefs: Vec<PublicBelief> = reachable(&game).into_iter().take(10).collect();
    let targets: Vec<f64> = (0..10).map(|_| rng.gen_range(0.0..1.0)).collect();
    let dummy = capi_core::pubmdp::Prescription(Vec::new());
    let batch = net.batch(&game, beliefs.iter().zip(&targets).map(|(b, &q)| (b, q, &dummy)));
    let mut steps = 0;
    loop {
        let refs: Vec<&PublicBelief> = beliefs.iter().collect();
        let v = net.values(&game, &refs).unwrap();
        let err = v.iter().zip(&targets).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if err < 1e-3 {
            break;
        }
        assert!(steps < 10_000, "error still {err}");
        net.train(&batch).unwrap();
        steps += 1;
    }
}

#[test]
fn network_backend_trains_end_to_end() {
    let game = load_game("tiny_hanabi:A").unwrap();
    let config = CapiConfig {
        k: 16,
        hidden: vec![32, 32],
        network_lr: 1e-2,
        train_steps: 5,
        squash_value: true,
        ..CapiConfig::default()
    };
    let mut state = CapiState::new(&game, config, 3).unwrap();
    let run = train_capi(&game, &mut state, 200, 20, None, &mut CapiRngs::new(3)).unwrap();
    let opt = optimal_value(&game).unwrap();
    assert!(run.best_value <= opt + 1e-9);
    assert!(run.best_value >= 2.0, "best {}", run.best_value);
}

#[test]
fn checkpoint_round_trip() {
    let game = load_game("tiny_hanabi:D").unwrap();
    for backend in [Backend::Table, Backend::Network] {
        let config = CapiConfig {
            k: 8,
            hidden: vec![8],
            policy_backend: backend,
            value_backend: backend,
            ..CapiConfig::default()
        };
        let mut state = CapiState::new(&game, config, 5).unwrap();
        train_capi(&game, &mut state, 5, 5, None, &mut CapiRngs::new(5)).unwrap();
        let cp = Checkpoint::capture(&game, &state);
        let dir = std::env::temp_dir().join(format!("capi-cp-{}-{backend}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("cp.json");
        cp.save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap();
        assert_eq!(loaded, cp);
        let restored = loaded.restore(&game).unwrap();
        assert_eq!(
            evaluate_joint_policy(&game, &greedy_joint_policy(&game, &restored).unwrap()),
            evaluate_joint_policy(&game, &greedy_joint_policy(&game, &state).unwrap())
        );
        let other = load_game("tiny_hanabi:A").unwrap();
        assert!(loaded.restore(&other).is_err());
        std::fs::remove_dir_all(dir).unwrap();
    }
}

#[test]
fn graph_values_agree_with_exact_estimator() {
    let game = load_game("tiny_hanabi:E").unwrap();
    let graph = BeliefGraph::build(&game).unwrap();
    let sol = backward_induction(&graph);
    let exact = ExactValue::new(&game).unwrap();
    assert_eq!(exact.value(&game, &initial_belief(&game)).unwrap(), sol.root_value());
}

#[test]
fn invalid_configs_are_rejected() {
    let game = load_game("tiny_hanabi:A").unwrap();
    let bad = [
        CapiConfig {
            k: 0,
            ..CapiConfig::tabular()
        },
        CapiConfig {
            exploration: Exploration::EpsilonGreedy { epsilon: 1.5 },
            ..CapiConfig::tabular()
        },
        CapiConfig {
            policy_floor: 0.5,
            ..CapiConfig::tabular()
        },
    ];
    for config in bad {
        assert!(CapiState::new(&game, config, 0).is_err());
    }
}
