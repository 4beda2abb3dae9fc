use rand::Rng;

use super::{ActionId, FiniteGame, HistoryId, InfoId, Outcome, PlayerId};
use crate::error::{Error, Result};

/// Per-player action distributions indexed by information state. Each row is
/// aligned with the information state's legal action list.
#[derive(Clone, Debug, PartialEq)]
pub struct JointPolicy {
    tables: Vec<Vec<Vec<f64>>>,
}

impl JointPolicy {
    pub fn from_fn(game: &FiniteGame, mut row: impl FnMut(PlayerId, InfoId, &[ActionId]) -> Vec<f64>) -> Self {
        let tree = game.tree();
        let tables = (0..game.num_players())
            .map(|i| {
                tree.infos(i)
                    .iter()
                    .enumerate()
                    .map(|(k, node)| row(i, InfoId(k as u32), &node.legal))
                    .collect()
            })
            .collect();
        Self { tables }
    }

    pub fn uniform(game: &FiniteGame) -> Self {
        Self::from_fn(game, |_, _, legal| vec![1.0 / legal.len() as f64; legal.len()])
    }

    pub fn deterministic(game: &FiniteGame, mut choose: impl FnMut(PlayerId, InfoId, &[ActionId]) -> ActionId) -> Self {
        Self::from_fn(game, |i, id, legal| {
            let a = choose(i, id, legal);
            legal.iter().map(|&b| if b == a { 1.0 } else { 0.0 }).collect()
        })
    }

    pub fn first_legal(game: &FiniteGame) -> Self {
        Self::deterministic(game, |_, _, legal| legal[0])
    }

    pub fn row(&self, player: PlayerId, info: InfoId) -> &[f64] {
        &self.tables[player][info.index()]
    }

    pub fn set_row(&mut self, player: PlayerId, info: InfoId, row: Vec<f64>) {
        self.tables[player][info.index()] = row;
    }

    /// Makes `action` certain at `info`. Panics if it is not legal there.
    pub fn set_action(&mut self, game: &FiniteGame, player: PlayerId, info: InfoId, action: ActionId) {
        let legal = &game.tree().info(player, info).legal;
        let pos = legal
            .iter()
            .position(|&a| a == action)
            .expect("action must be legal at the information state");
        let row = &mut self.tables[player][info.index()];
        row.iter_mut().for_each(|p| *p = 0.0);
        row[pos] = 1.0;
    }

    pub fn prob(&self, game: &FiniteGame, player: PlayerId, info: InfoId, action: ActionId) -> f64 {
        let legal = &game.tree().info(player, info).legal;
        legal
            .iter()
            .position(|&a| a == action)
            .map_or(0.0, |pos| self.tables[player][info.index()][pos])
    }

    /// The action with the highest probability (first on ties).
    pub fn greedy_action(&self, game: &FiniteGame, player: PlayerId, info: InfoId) -> ActionId {
        let legal = &game.tree().info(player, info).legal;
        let row = &self.tables[player][info.index()];
        let mut best = 0;
        for k in 1..row.len() {
            if row[k] > row[best] {
                best = k;
            }
        }
        legal[best]
    }

    pub fn validate(&self, game: &FiniteGame) -> Result<()> {
        for (i, table) in self.tables.iter().enumerate() {
            for (k, row) in table.iter().enumerate() {
                let legal = &game.tree().infos(i)[k].legal;
                let sum: f64 = row.iter().sum();
                if row.len() != legal.len() || row.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidParameters(format!(
                        "policy row for player {i}, information state {k} is not a distribution over its legal actions"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Factors of `Pᵖⁱ(h)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReachContributions {
    pub chance: f64,
    pub players: Vec<f64>,
}

impl ReachContributions {
    pub fn total(&self) -> f64 {
        self.chance * self.players.iter().product::<f64>()
    }
}

pub fn reach_contributions(game: &FiniteGame, policy: &JointPolicy, history: HistoryId) -> ReachContributions {
    let tree = game.tree();
    let node = tree.history(history);
    let mut players = vec![1.0; game.num_players()];
    let mut cur = node;
    while let Some(parent) = cur.parent {
        let p = tree.history(parent);
        for (i, contribution) in players.iter_mut().enumerate() {
            *contribution *= policy.prob(game, i, p.info[i], cur.action[i]);
        }
        cur = p;
    }
    ReachContributions {
        chance: node.chance_reach,
        players,
    }
}

/// Exact expected return of a joint policy.
pub fn evaluate_joint_policy(game: &FiniteGame, policy: &JointPolicy) -> f64 {
    let tree = game.tree();
    evaluate_with(game, |h, i, row| {
        row.clear();
        row.extend_from_slice(policy.row(i, tree.history(h).info[i]));
    })
}

/// Exact expected return of a behavior given per history (not necessarily
/// decentralized). `fill(h, i, row)` writes player `i`'s distribution over the
/// legal actions of its information state at `h` into `row`.
pub fn evaluate_with(game: &FiniteGame, mut fill: impl FnMut(HistoryId, PlayerId, &mut Vec<f64>)) -> f64 {
    let tree = game.tree();
    let n = game.num_players();
    let mut reach = vec![0.0; tree.histories().len()];
    reach[0] = 1.0;
    let mut value = 0.0;
    let mut row = Vec::new();
    let mut support: Vec<Vec<(ActionId, f64)>> = vec![Vec::new(); n];
    let mut outcomes: Vec<Outcome> = Vec::new();
    let mut joint = vec![0 as ActionId; n];
    let mut pos = vec![0usize; n];

    for (k, node) in tree.histories().iter().enumerate() {
        let r = reach[k];
        if r == 0.0 {
            continue;
        }
        let h = HistoryId(k as u32);
        for i in 0..n {
            fill(h, i, &mut row);
            let legal = &tree.info(i, node.info[i]).legal;
            support[i].clear();
            support[i].extend(legal.iter().zip(&row).filter(|(_, &p)| p > 0.0).map(|(&a, &p)| (a, p)));
            pos[i] = 0;
            joint[i] = support[i][0].0;
        }
        'joint: loop {
            let pa: f64 = (0..n).map(|i| support[i][pos[i]].1).product();
            game.transition(node.world, &joint, &mut outcomes);
            for o in &outcomes {
                let mass = r * pa * o.prob;
                value += mass * o.reward;
                if let Some(child) = tree.child(h, &joint, o.next) {
                    reach[child.index()] += mass;
                }
            }
            for i in 0..n {
                pos[i] += 1;
                if pos[i] < support[i].len() {
                    joint[i] = support[i][pos[i]].0;
                    continue 'joint;
                }
                pos[i] = 0;
                joint[i] = support[i][0].0;
            }
            break;
        }
    }
    value
}

/// Samples one episode and returns its total reward.
pub fn simulate_episode<R: Rng + ?Sized>(game: &FiniteGame, policy: &JointPolicy, rng: &mut R) -> f64 {
    let tree = game.tree();
    let n = game.num_players();
    let mut h = tree.root();
    let mut total = 0.0;
    let mut joint = vec![0 as ActionId; n];
    let mut outcomes = Vec::new();
    loop {
        let node = tree.history(h);
        for i in 0..n {
            let info = node.info[i];
            joint[i] = tree.info(i, info).legal[sample_index(policy.row(i, info), rng)];
        }
        game.transition(node.world, &joint, &mut outcomes);
        let probs: Vec<f64> = outcomes.iter().map(|o| o.prob).collect();
        let o = &outcomes[sample_index(&probs, rng)];
        total += o.reward;
        match tree.child(h, &joint, o.next) {
            Some(child) => h = child,
            None => return total,
        }
    }
}

pub(crate) fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (k, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = k;
            if u < acc {
                return k;
            }
        }
    }
    last
}
