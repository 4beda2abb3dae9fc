//! Tabular decentralized value-based learners: independent Q-learning (IQL),
//! hysteretic Q-learning (HQL), value decomposition (VDN) and simplified
//! action decoding (SAD).
//!
//! Each player keeps a table over its own information states and learns only
//! at decision points (information states with more than one legal action).
//! Rewards between a player's decisions are summed into its next target.
//! Exploration is ε-greedy per player and decision, and both ε and the step
//! sizes decay linearly to zero at the decay horizon.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::exact::{linear_decay, CurvePoint, WallClock};
use crate::fosg::{
    evaluate_joint_policy, evaluate_with, ActionId, FiniteGame, HistoryId, InfoId, JointPolicy, Outcome, PlayerId,
};
use crate::rng::stream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Iql,
    Hql,
    Vdn,
    Sad,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Iql, Algorithm::Hql, Algorithm::Vdn, Algorithm::Sad];
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Iql => "iql",
            Algorithm::Hql => "hql",
            Algorithm::Vdn => "vdn",
            Algorithm::Sad => "sad",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iql" => Ok(Algorithm::Iql),
            "hql" => Ok(Algorithm::Hql),
            "vdn" => Ok(Algorithm::Vdn),
            "sad" => Ok(Algorithm::Sad),
            other => Err(Error::InvalidConfig(format!("unknown baseline {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub algorithm: Algorithm,
    pub epsilon: f64,
    pub alpha: f64,
    /// Step size for negative TD errors (HQL only).
    pub beta: f64,
    pub episodes: u64,
    /// Episode at which ε and the step sizes reach zero; `None` means `episodes`.
    pub decay_episodes: Option<u64>,
    pub eval_every: u64,
    pub initial_q: f64,
}

impl BaselineConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            epsilon: 0.3,
            alpha: 0.1,
            beta: 0.01,
            episodes: 200_000,
            decay_episodes: None,
            eval_every: 1000,
            initial_q: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::InvalidConfig(format!("epsilon {} outside [0, 1]", self.epsilon)));
        }
        if !(self.alpha.is_finite() && (0.0..=1.0).contains(&self.alpha)) {
            return Err(Error::InvalidConfig(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if self.algorithm == Algorithm::Hql && !(0.0 <= self.beta && self.beta <= self.alpha) {
            return Err(Error::InvalidConfig(format!(
                "HQL needs 0 <= beta <= alpha, got beta {} and alpha {}",
                self.beta, self.alpha
            )));
        }
        if !self.initial_q.is_finite() {
            return Err(Error::InvalidConfig("initial_q must be finite".into()));
        }
        Ok(())
    }

    fn horizon(&self) -> u64 {
        self.decay_episodes.unwrap_or(self.episodes)
    }
}

/// Table key: an information state plus, for SAD, the teammates' greedy
/// actions at their earlier decisions in the episode.
pub type Key = (InfoId, SmallVec<[ActionId; 4]>);

/// Per player, action values over the legal actions of each key.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentQTable {
    pub tables: Vec<HashMap<Key, Vec<f64>>>,
    initial: f64,
}

impl AgentQTable {
    pub fn new(num_players: usize, initial: f64) -> Self {
        Self {
            tables: vec![HashMap::new(); num_players],
            initial,
        }
    }

    fn row(&mut self, game: &FiniteGame, player: PlayerId, key: &Key) -> &mut Vec<f64> {
        let initial = self.initial;
        self.tables[player]
            .entry(key.clone())
            .or_insert_with(|| vec![initial; game.tree().info(player, key.0).legal.len()])
    }

    /// Values at `key`; the initial value for unseen keys.
    pub fn values(&self, game: &FiniteGame, player: PlayerId, key: &Key) -> Vec<f64> {
        self.tables[player]
            .get(key)
            .cloned()
            .unwrap_or_else(|| vec![self.initial; game.tree().info(player, key.0).legal.len()])
    }

    /// Position of the first maximum among the legal actions.
    pub fn greedy(&self, player: PlayerId, key: &Key) -> usize {
        match self.tables[player].get(key) {
            Some(row) => crate::exact::argmax(row).0,
            None => 0,
        }
    }

    fn max(&self, player: PlayerId, key: &Key) -> f64 {
        self.tables[player]
            .get(key)
            .map_or(self.initial, |row| crate::exact::argmax(row).1)
    }
}

#[derive(Clone, Debug)]
pub struct BaselineRun {
    pub curve: Vec<CurvePoint>,
    pub final_value: f64,
    pub best_value: f64,
    pub q: AgentQTable,
}

struct Pending {
    player: PlayerId,
    key: Key,
    pos: usize,
}

/// Trains one baseline and scores its greedy joint policy exactly before
/// training and every `eval_every` episodes.
pub fn train_baseline(game: &FiniteGame, config: &BaselineConfig, seed: u64) -> Result<BaselineRun> {
    train_baseline_until(game, config, seed, WallClock::default())
}

/// As [`train_baseline`], with timing and a deadline checked after each
/// evaluation. A deadline makes results depend on machine speed.
pub fn train_baseline_until(
    game: &FiniteGame,
    config: &BaselineConfig,
    seed: u64,
    clock: WallClock,
) -> Result<BaselineRun> {
    config.validate()?;
    let mut explore = stream(seed, "baseline/exploration");
    let mut chance = stream(seed, "baseline/chance");
    let mut q = AgentQTable::new(game.num_players(), config.initial_q);
    let mut best = greedy_value(game, config.algorithm, &q);
    let mut curve = vec![CurvePoint {
        episode: 0,
        greedy_value: best,
        best_value: best,
        wall_ms: clock.ms(),
    }];
    let eval_every = config.eval_every.max(1);
    for episode in 0..config.episodes {
        let epsilon = linear_decay(config.epsilon, episode, config.horizon());
        let alpha = linear_decay(config.alpha, episode, config.horizon());
        let beta = linear_decay(config.beta, episode, config.horizon());
        run_episode(
            game,
            config.algorithm,
            &mut q,
            epsilon,
            alpha,
            beta,
            &mut explore,
            &mut chance,
        );
        let done = episode + 1;
        if done % eval_every == 0 || done == config.episodes {
            let value = greedy_value(game, config.algorithm, &q);
            best = best.max(value);
            curve.push(CurvePoint {
                episode: done,
                greedy_value: value,
                best_value: best,
                wall_ms: clock.ms(),
            });
            if clock.expired() {
                break;
            }
        }
    }
    Ok(BaselineRun {
        final_value: curve.last().map_or(best, |p| p.greedy_value),
        best_value: best,
        curve,
        q,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_episode(
    game: &FiniteGame,
    algorithm: Algorithm,
    q: &mut AgentQTable,
    epsilon: f64,
    alpha: f64,
    beta: f64,
    explore: &mut ChaCha8Rng,
    chance: &mut ChaCha8Rng,
) {
    let tree = game.tree();
    let n = game.num_players();
    let mut h = tree.root();
    let mut joint = vec![0 as ActionId; n];
    let mut outcomes: Vec<Outcome> = Vec::new();
    // Independent learners: one open decision and reward sum per player.
    let mut open: Vec<Option<(Pending, f64)>> = (0..n).map(|_| None).collect();
    // VDN: the open joint decision and its reward sum.
    let mut open_joint: Option<(Vec<Pending>, f64)> = None;
    // SAD: greedy actions of earlier decisions, by player.
    let mut greedy_log: Vec<(PlayerId, ActionId)> = Vec::new();

    let step = |delta: f64| {
        if algorithm == Algorithm::Hql && delta < 0.0 {
            beta
        } else {
            alpha
        }
    };

    loop {
        let node = tree.history(h);
        let mut deciders = Vec::new();
        let mut new_greedy = Vec::new();
        for i in 0..n {
            let info = node.info[i];
            let legal = &tree.info(i, info).legal;
            if legal.len() == 1 {
                joint[i] = legal[0];
                continue;
            }
            let key: Key = if algorithm == Algorithm::Sad {
                (
                    info,
                    greedy_log.iter().filter(|(p, _)| *p != i).map(|&(_, a)| a).collect(),
                )
            } else {
                (info, SmallVec::new())
            };
            let greedy = q.greedy(i, &key);
            let pos = if explore.gen::<f64>() < epsilon {
                explore.gen_range(0..legal.len())
            } else {
                greedy
            };
            joint[i] = legal[pos];
            new_greedy.push((i, legal[greedy]));
            deciders.push(Pending { player: i, key, pos });
        }
        greedy_log.extend(new_greedy);

        if !deciders.is_empty() {
            if algorithm == Algorithm::Vdn {
                let bootstrap: f64 = deciders.iter().map(|d| q.max(d.player, &d.key)).sum();
                if let Some((prev, g)) = open_joint.take() {
                    vdn_update(game, q, &prev, g + bootstrap, alpha);
                }
                open_joint = Some((deciders, 0.0));
            } else {
                for d in deciders {
                    let i = d.player;
                    if let Some((prev, g)) = open[i].take() {
                        let target = g + q.max(i, &d.key);
                        let row = q.row(game, i, &prev.key);
                        let delta = target - row[prev.pos];
                        row[prev.pos] += step(delta) * delta;
                    }
                    open[i] = Some((d, 0.0));
                }
            }
        }

        game.transition(node.world, &joint, &mut outcomes);
        let probs: Vec<f64> = outcomes.iter().map(|o| o.prob).collect();
        let o = &outcomes[crate::fosg::sample_index(&probs, chance)];
        for (_, g) in open.iter_mut().flatten() {
            *g += o.reward;
        }
        if let Some((_, g)) = open_joint.as_mut() {
            *g += o.reward;
        }
        match tree.child(h, &joint, o.next) {
            Some(child) => h = child,
            None => break,
        }
    }

    if let Some((prev, g)) = open_joint.take() {
        vdn_update(game, q, &prev, g, alpha);
    }
    for (i, slot) in open.iter_mut().enumerate() {
        if let Some((prev, g)) = slot.take() {
            let row = q.row(game, i, &prev.key);
            let delta = g - row[prev.pos];
            row[prev.pos] += step(delta) * delta;
        }
    }
}

/// Joint TD error on `Σᵢ Qᵢ`, applied to every summand.
fn vdn_update(game: &FiniteGame, q: &mut AgentQTable, decision: &[Pending], target: f64, alpha: f64) {
    let total: f64 = decision.iter().map(|d| q.values(game, d.player, &d.key)[d.pos]).sum();
    let delta = target - total;
    for d in decision {
        q.row(game, d.player, &d.key)[d.pos] += alpha * delta;
    }
}

/// Exact value of greedy play. SAD keys depend on the teammates' greedy
/// actions along the history, so SAD is scored per history.
pub fn greedy_value(game: &FiniteGame, algorithm: Algorithm, q: &AgentQTable) -> f64 {
    if algorithm != Algorithm::Sad {
        return evaluate_joint_policy(game, &greedy_policy(game, q));
    }
    let tree = game.tree();
    let mut keys: HashMap<(HistoryId, PlayerId), usize> = HashMap::new();
    evaluate_with(game, |h, i, row| {
        let legal = tree.info(i, tree.history(h).info[i]).legal.len();
        let pos = *keys.entry((h, i)).or_insert_with(|| sad_greedy(game, q, h, i));
        row.clear();
        row.resize(legal, 0.0);
        row[pos] = 1.0;
    })
}

/// Greedy action position of player `i` at history `h` under SAD keys.
fn sad_greedy(game: &FiniteGame, q: &AgentQTable, h: HistoryId, player: PlayerId) -> usize {
    let tree = game.tree();
    let mut path = vec![h];
    while let Some(p) = tree.history(*path.last().expect("nonempty")).parent {
        path.push(p);
    }
    path.reverse();
    let mut log: Vec<(PlayerId, ActionId)> = Vec::new();
    for &k in &path {
        let node = tree.history(k);
        let mut fresh = Vec::new();
        for i in 0..game.num_players() {
            let legal = &tree.info(i, node.info[i]).legal;
            if legal.len() == 1 {
                continue;
            }
            let key: Key = (
                node.info[i],
                log.iter().filter(|(p, _)| *p != i).map(|&(_, a)| a).collect(),
            );
            let pos = q.greedy(i, &key);
            if k == h && i == player {
                return pos;
            }
            fresh.push((i, legal[pos]));
        }
        log.extend(fresh);
    }
    0
}

/// Greedy joint policy of per-information-state tables (unaugmented keys).
pub fn greedy_policy(game: &FiniteGame, q: &AgentQTable) -> JointPolicy {
    JointPolicy::deterministic(game, |player, info, legal| {
        legal[q.greedy(player, &(info, SmallVec::new()))]
    })
}
