use capi_core::baselines::{greedy_value, train_baseline, AgentQTable, Algorithm, BaselineConfig};
use capi_core::exact::{linear_decay, optimal_value};
use capi_core::fosg::{ExplicitGameBuilder, FiniteGame, NULL_PRIVATE_OBS};
use capi_core::zoo::load_game;

fn config(algorithm: Algorithm, episodes: u64) -> BaselineConfig {
    BaselineConfig {
        episodes,
        eval_every: 50,
        ..BaselineConfig::new(algorithm)
    }
}

#[test]
fn hql_with_equal_rates_is_iql() {
    for name in ["tiny_hanabi:A", "tiny_hanabi:E", "trade_comm:2x2"] {
        let game = load_game(name).unwrap();
        let iql = train_baseline(&game, &config(Algorithm::Iql, 3000), 4).unwrap();
        let hql = train_baseline(
            &game,
            &BaselineConfig {
                beta: 0.1,
                alpha: 0.1,
                ..config(Algorithm::Hql, 3000)
            },
            4,
        )
        .unwrap();
        assert_eq!(iql.curve, hql.curve);
        assert_eq!(iql.q, hql.q);
    }
}

/// A one-player game with two sequential decisions and a chance card.
fn solo_game() -> FiniteGame {
    let mut b = ExplicitGameBuilder::new("solo", 1, 3);
    let w0 = b.world(vec![vec![0]]);
    let cards: Vec<_> = (0..2).map(|_| b.world(vec![vec![0, 1]])).collect();
    let end = b.terminal();
    for (c, &w) in cards.iter().enumerate() {
        b.outcome(w0, &[0], w, 0.5, 0.0, 2, &[1 + c as u16]);
        for a in 0..2u16 {
            let next = b.world(vec![vec![0, 1, 2]]);
            b.outcome(w, &[a], next, 1.0, a as f64 * 0.5, 3 + a, &[NULL_PRIVATE_OBS]);
            for z in 0..3u16 {
                let r = if z as usize == (c + a as usize) % 3 { 2.0 } else { 0.0 };
                b.outcome(next, &[z], end, 1.0, r, 0, &[NULL_PRIVATE_OBS]);
            }
        }
    }
    FiniteGame::new(b.build().unwrap()).unwrap()
}

/// With one player, IQL is plain tabular Q-learning.
#[test]
fn vdn_on_one_player_is_q_learning() {
    let game = solo_game();
    let vdn = train_baseline(&game, &config(Algorithm::Vdn, 2000), 9).unwrap();
    let iql = train_baseline(&game, &config(Algorithm::Iql, 2000), 9).unwrap();
    assert_eq!(vdn.q, iql.q);
    let opt = optimal_value(&game).unwrap();
    assert!((vdn.best_value - opt).abs() < 1e-9, "{} vs {opt}", vdn.best_value);
}

#[test]
fn sad_without_exploration_matches_iql() {
    // Player one's action is public in Tiny Hanabi, so with ε = 0 the SAD key
    // adds nothing the information state does not already hold.
    for name in ["tiny_hanabi:A", "tiny_hanabi:C", "tiny_hanabi:F"] {
        let game = load_game(name).unwrap();
        let cfg = |a| BaselineConfig {
            epsilon: 0.0,
            ..config(a, 2000)
        };
        let sad = train_baseline(&game, &cfg(Algorithm::Sad), 1).unwrap();
        let iql = train_baseline(&game, &cfg(Algorithm::Iql), 1).unwrap();
        assert_eq!(sad.curve, iql.curve);
    }
}

#[test]
fn runs_are_deterministic_and_bounded() {
    for name in [
        "tiny_hanabi:A",
        "tiny_hanabi:B",
        "tiny_hanabi:C",
        "tiny_hanabi:D",
        "tiny_hanabi:E",
        "tiny_hanabi:F",
    ] {
        let game = load_game(name).unwrap();
        let opt = optimal_value(&game).unwrap();
        for algorithm in Algorithm::ALL {
            let a = train_baseline(&game, &config(algorithm, 2000), 3).unwrap();
            let b = train_baseline(&game, &config(algorithm, 2000), 3).unwrap();
            assert_eq!(a.curve, b.curve);
            assert!(a.curve.iter().all(|p| p.greedy_value <= opt + 1e-9));
            assert!(a.curve.windows(2).all(|w| w[0].best_value <= w[1].best_value));
        }
    }
}

#[test]
fn schedules_reach_zero_at_the_horizon() {
    assert_eq!(linear_decay(0.3, 100, 100), 0.0);
    assert_eq!(linear_decay(0.3, 150, 100), 0.0);
    assert_eq!(linear_decay(0.4, 50, 100), 0.2);
    // A decay horizon shorter than the budget freezes learning afterwards.
    let game = load_game("tiny_hanabi:B").unwrap();
    let short = BaselineConfig {
        decay_episodes: Some(500),
        ..config(Algorithm::Iql, 1000)
    };
    let run = train_baseline(&game, &short, 0).unwrap();
    let frozen: Vec<f64> = run
        .curve
        .iter()
        .filter(|p| p.episode >= 500)
        .map(|p| p.greedy_value)
        .collect();
    assert!(frozen.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn untrained_tables_play_first_legal() {
    let game = load_game("tiny_hanabi:A").unwrap();
    let q = AgentQTable::new(2, 0.0);
    for algorithm in Algorithm::ALL {
        assert_eq!(greedy_value(&game, algorithm, &q), 1.25);
    }
}

#[test]
fn invalid_configs() {
    let game = load_game("tiny_hanabi:A").unwrap();
    let bad = [
        BaselineConfig {
            beta: 0.5,
            alpha: 0.1,
            ..config(Algorithm::Hql, 10)
        },
        BaselineConfig {
            epsilon: -0.1,
            ..config(Algorithm::Iql, 10)
        },
    ];
    for cfg in bad {
        assert!(train_baseline(&game, &cfg, 0).is_err());
    }
    assert!("ia2c2".parse::<Algorithm>().is_err());
    assert_eq!("vdn".parse::<Algorithm>().unwrap(), Algorithm::Vdn);
}
