use capi_core::exact::{
    backward_induction, brute_force_optimal, brute_force_optimal_with, format_value, golden_value, golden_values,
    linear_decay, pubmdp_q_learning, pubmdp_q_learning_from, BeliefGraph, BruteForceConfig, QLearningConfig, QTable,
};
use capi_core::fosg::{evaluate_joint_policy, ExplicitGameBuilder, FiniteGame};
use capi_core::pubmdp::{enumerate_prescription_vectors, step};
use capi_core::zoo::{load_game, trade_comm, TradeCommSpec};
use capi_core::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TINY_HANABI: [&str; 6] = [
    "tiny_hanabi:A",
    "tiny_hanabi:B",
    "tiny_hanabi:C",
    "tiny_hanabi:D",
    "tiny_hanabi:E",
    "tiny_hanabi:F",
];

#[test]
fn oracles_agree_and_match_the_golden_file() {
    let games = TINY_HANABI.iter().chain(&[
        "trade_comm:1x1",
        "trade_comm:2x1",
        "trade_comm:2x2",
        "trade_comm:2x3",
        "trade_comm:3x2",
    ]);
    for name in games {
        let game = load_game(name).unwrap();
        let bf = brute_force_optimal(&game).unwrap();
        let graph = BeliefGraph::build(&game).unwrap();
        let solution = backward_induction(&graph);
        assert!((bf.value - solution.root_value()).abs() < 1e-9, "{name}");
        assert!((evaluate_joint_policy(&game, &bf.policy) - bf.value).abs() < 1e-9);
        let greedy = solution.joint_policy(&game, &graph).unwrap();
        assert!((evaluate_joint_policy(&game, &greedy) - solution.root_value()).abs() < 1e-9);
        assert_eq!(
            format_value(bf.value),
            format_value(golden_value(name).unwrap()),
            "{name}"
        );
    }
}

#[test]
fn golden_file_lists_expected_games() {
    let values = golden_values().unwrap();
    assert!(values.len() >= 14);
    assert_eq!(golden_value("trade_comm:2x1"), Some(0.5));
    assert_eq!(golden_value("nope"), None);
}

#[test]
fn trade_comm_with_enough_utterances_is_solved_by_signalling() {
    for (n, u) in [(4, 4), (12, 12)] {
        let game = load_game(&format!("trade_comm:{n}x{u}")).unwrap();
        let policy = trade_comm::signalling_policy(&game, TradeCommSpec::new(n, u).unwrap()).unwrap();
        let v = evaluate_joint_policy(&game, &policy);
        assert!((v - golden_value(&game.name()).unwrap()).abs() < 1e-9);
    }
}

#[test]
fn brute_force_enumerates_all_64_policies_of_small_games() {
    // Without pruning, player one has 2² policies and player two's best
    // response covers its 2⁴, so 4 combinations are searched per game.
    for name in &TINY_HANABI[..4] {
        let game = load_game(name).unwrap();
        let plain = brute_force_optimal_with(
            &game,
            BruteForceConfig {
                prune_dominated: false,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(plain.evaluated, 4);
        assert_eq!(plain.value, brute_force_optimal(&game).unwrap().value);
    }
}

#[test]
fn brute_force_respects_its_cap() {
    let game = load_game("trade_comm:12x12").unwrap();
    assert!(matches!(brute_force_optimal(&game), Err(Error::CapExceeded { .. })));
    let game = load_game("trade_comm:2x2").unwrap();
    let small = BruteForceConfig {
        cap: 10,
        prune_dominated: true,
    };
    assert!(matches!(
        brute_force_optimal_with(&game, small),
        Err(Error::CapExceeded { .. })
    ));
}

#[test]
fn graph_shapes() {
    let game = load_game("tiny_hanabi:A").unwrap();
    let graph = BeliefGraph::build(&game).unwrap();
    let root = graph.node(graph.root());
    assert_eq!(root.num_edges(), 4);
    for k in 0..4 {
        assert!(graph.branches(root.edge(k)).len() <= 2);
    }
    assert_eq!(graph.depth(), 2);
    let tc = load_game("trade_comm:2x2").unwrap();
    assert_eq!(BeliefGraph::build(&tc).unwrap().nodes().len(), 43);
}

fn one_step_game(rewards: &[f64]) -> FiniteGame {
    let mut b = ExplicitGameBuilder::new("one-step", 2, 1);
    let w0 = b.world(vec![vec![0, 1], vec![0, 1]]);
    let end = b.terminal();
    for (k, &r) in rewards.iter().enumerate() {
        let joint = [(k % 2) as u16, (k / 2) as u16];
        b.outcome(w0, &joint, end, 1.0, r, 0, &[0, 0]);
    }
    FiniteGame::new(b.build().unwrap()).unwrap()
}

#[test]
fn horizon_one_and_zero_reward_games() {
    let game = one_step_game(&[0.0, 1.0, 3.0, 2.0]);
    let graph = BeliefGraph::build(&game).unwrap();
    assert_eq!(graph.depth(), 1);
    let solution = backward_induction(&graph);
    assert_eq!(solution.root_value(), 3.0);
    // Prescriptions are lexicographic with the last row fastest.
    assert_eq!(graph.prescription(&game, 0, solution.greedy[0]).0, vec![0, 1]);

    let zero = one_step_game(&[0.0; 4]);
    let graph = BeliefGraph::build(&zero).unwrap();
    assert!(backward_induction(&graph).values.iter().all(|&v| v == 0.0));
}

#[test]
fn edges_agree_with_the_belief_mdp_step() {
    for name in TINY_HANABI.iter().chain(&["trade_comm:2x2"]) {
        let game = load_game(name).unwrap();
        let graph = BeliefGraph::build(&game).unwrap();
        for (id, node) in graph.nodes().iter().enumerate() {
            for k in 0..node.num_edges() {
                let gamma = graph.prescription(&game, id as u32, k);
                let s = step(&game, &node.belief, &gamma).unwrap();
                let e = node.edge(k);
                assert!((s.expected_reward - graph.edge_reward(e)).abs() < 1e-12);
                let nonterminal: Vec<_> = s.branches.iter().filter(|b| !b.next.is_terminal()).collect();
                assert_eq!(nonterminal.len(), graph.branches(e).len());
                for (b, g) in nonterminal.iter().zip(graph.branches(e)) {
                    assert_eq!(b.obs, g.obs);
                    assert!((b.prob - g.prob).abs() < 1e-12);
                    assert_eq!(graph.node(g.next).belief, b.next);
                }
                let total: f64 = graph.branches(e).iter().map(|b| b.prob).sum::<f64>() + graph.terminal_prob(e);
                assert!((total - 1.0).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn full_prescription_sets_reproduce_the_optimum() {
    // Maximizing over every prescription, ruled-out rows included, gives the
    // same values as the graph built over consistent rows only.
    for name in TINY_HANABI.iter().chain(&["trade_comm:2x2"]) {
        let game = load_game(name).unwrap();
        let graph = BeliefGraph::build(&game).unwrap();
        let solution = backward_induction(&graph);
        for (id, node) in graph.nodes().iter().enumerate() {
            let mut best = f64::NEG_INFINITY;
            for gamma in enumerate_prescription_vectors(&game, &node.belief, 1 << 20).unwrap() {
                let s = step(&game, &node.belief, &gamma).unwrap();
                let q = s.expected_reward
                    + s.branches
                        .iter()
                        .map(|b| b.prob * solution.value_of(&graph, &b.next).unwrap())
                        .sum::<f64>();
                best = best.max(q);
            }
            assert!((best - solution.values[id]).abs() < 1e-9, "{name} node {id}");
        }
    }
}

#[test]
fn jacobi_sweeps_converge_in_depth_sweeps() {
    for name in TINY_HANABI.iter().chain(&["trade_comm:2x3"]) {
        let game = load_game(name).unwrap();
        let graph = BeliefGraph::build(&game).unwrap();
        let exact = backward_induction(&graph).values;
        let mut values = vec![0.0; graph.nodes().len()];
        let mut sweeps = 0;
        loop {
            let next: Vec<f64> = graph
                .nodes()
                .iter()
                .map(|n| {
                    (0..n.num_edges())
                        .map(|k| graph.backup(n.edge(k), &values))
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .collect();
            if next == values {
                break;
            }
            values = next;
            sweeps += 1;
        }
        assert_eq!(values, exact);
        assert!(sweeps <= graph.depth(), "{name}: {sweeps} sweeps");
    }
}

#[test]
fn decay_reaches_zero() {
    assert_eq!(linear_decay(0.5, 0, 10), 0.5);
    assert_eq!(linear_decay(0.5, 10, 10), 0.0);
    assert_eq!(linear_decay(0.5, 12, 10), 0.0);
    assert!((linear_decay(0.4, 5, 10) - 0.2).abs() < 1e-15);
}

#[test]
fn q_learning_sanity() {
    let game = load_game("tiny_hanabi:C").unwrap();
    let graph = BeliefGraph::build(&game).unwrap();
    let solution = backward_induction(&graph);
    let optimum = solution.root_value();

    // Frozen learning rate.
    let config = QLearningConfig {
        episodes: 200,
        epsilon: 0.5,
        alpha: 0.0,
        initial_q: 0.0,
        eval_every: 1,
    };
    let run = pubmdp_q_learning(&graph, &config, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    assert!(run.q.values.iter().all(|&q| q == 0.0));

    // Starting at the optimal table with no exploration.
    let config = QLearningConfig {
        epsilon: 0.0,
        alpha: 0.1,
        ..config
    };
    let q = QTable::optimal(&graph, &solution);
    let run = pubmdp_q_learning_from(&graph, &config, q, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    assert!(run.curve.iter().all(|p| (p.greedy_value - optimum).abs() < 1e-9));

    // Greedy values never exceed the optimum, best values never decrease,
    // and identical seeds give identical curves.
    let config = QLearningConfig {
        episodes: 2000,
        epsilon: 0.5,
        alpha: 0.2,
        initial_q: 0.0,
        eval_every: 7,
    };
    let a = pubmdp_q_learning(&graph, &config, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let b = pubmdp_q_learning(&graph, &config, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    assert_eq!(a.curve, b.curve);
    assert!(a.curve.iter().all(|p| p.greedy_value <= optimum + 1e-9));
    assert!(a.curve.windows(2).all(|w| w[0].best_value <= w[1].best_value));
    assert_eq!(a.curve.last().unwrap().episode, 2000);

    let bad = QLearningConfig { epsilon: 1.5, ..config };
    assert!(pubmdp_q_learning(&graph, &bad, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
}
