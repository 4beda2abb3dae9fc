//! Exhaustive search over deterministic joint policies.
//!
//! Players `0..N-1` enumerate their reduced deterministic policies (actions are
//! only chosen at information states the player's own earlier choices can
//! reach); the last player plays an exact best response computed backwards
//! over its information-state tree. Optionally, at information states from
//! which every transition ends the game, actions that are weakly dominated
//! against every history and every choice of the other players are dropped
//! before enumeration. This never lowers the optimum.

use crate::error::{Error, Result};
use crate::fosg::{ActionId, FiniteGame, HistoryId, InfoId, JointPolicy, Outcome, PlayerId};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BruteForceConfig {
    /// Limit on the number of reduced policy combinations enumerated.
    pub cap: u64,
    pub prune_dominated: bool,
}

impl Default for BruteForceConfig {
    fn default() -> Self {
        Self {
            cap: 100_000_000,
            prune_dominated: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BruteForceResult {
    pub value: f64,
    pub policy: JointPolicy,
    /// Number of policy combinations of the non-final players evaluated.
    pub evaluated: u64,
}

pub fn brute_force_optimal(game: &FiniteGame) -> Result<BruteForceResult> {
    brute_force_optimal_with(game, BruteForceConfig::default())
}

struct Edge {
    reward: f64,
    children: Vec<(HistoryId, f64)>,
}

struct Search<'a> {
    game: &'a FiniteGame,
    /// Allowed actions per player and information state.
    allowed: Vec<Vec<Vec<ActionId>>>,
    /// Per information state, its children with the position of the action
    /// leading to them (`None` when that action was pruned).
    links: Vec<Vec<Vec<(InfoId, Option<usize>)>>>,
    /// Per history, outcomes of every allowed joint action, indexed in mixed
    /// radix over allowed positions with player 0 fastest.
    edges: Vec<Vec<Edge>>,
    assign: Vec<Vec<Option<usize>>>,
    reach: Vec<f64>,
    immediate: Vec<Vec<f64>>,
    best_value: f64,
    best_assign: Vec<Vec<Option<usize>>>,
    best_response: Vec<Option<usize>>,
    evaluated: u64,
}

pub fn brute_force_optimal_with(game: &FiniteGame, config: BruteForceConfig) -> Result<BruteForceResult> {
    let tree = game.tree();
    let n = game.num_players();
    let last = n - 1;

    let legal_links = |i: PlayerId, allowed: &[Vec<ActionId>]| -> Vec<Vec<(InfoId, Option<usize>)>> {
        tree.infos(i)
            .iter()
            .enumerate()
            .map(|(k, node)| {
                node.children
                    .iter()
                    .map(|&c| {
                        let a = tree.info(i, c).action.expect("child has an action");
                        (c, allowed[k].iter().position(|&b| b == a))
                    })
                    .collect()
            })
            .collect()
    };
    let check_cap = |count: u128| {
        if count > config.cap as u128 {
            Err(Error::CapExceeded {
                what: "deterministic joint policies",
                cap: config.cap,
            })
        } else {
            Ok(())
        }
    };

    // Cheap lower bound first: count as if every game-ending information
    // state offered a single choice, so hopeless games fail before the
    // dominance pass.
    let mut lower: u128 = 1;
    for i in 0..last {
        let legal: Vec<Vec<ActionId>> = tree.infos(i).iter().map(|node| node.legal.to_vec()).collect();
        let links = legal_links(i, &legal);
        let sizes: Vec<usize> = tree
            .infos(i)
            .iter()
            .map(|node| {
                if tree.public(node.public).children.is_empty() {
                    1
                } else {
                    node.legal.len()
                }
            })
            .collect();
        lower = lower.saturating_mul(reduced_count(&sizes, &links, 0));
    }
    check_cap(lower)?;

    let allowed: Vec<Vec<Vec<ActionId>>> = (0..n)
        .map(|i| {
            (0..tree.infos(i).len())
                .map(|k| {
                    let id = InfoId(k as u32);
                    if config.prune_dominated {
                        undominated_actions(game, i, id)
                    } else {
                        tree.info(i, id).legal.to_vec()
                    }
                })
                .collect()
        })
        .collect();
    let links: Vec<Vec<Vec<(InfoId, Option<usize>)>>> = (0..n).map(|i| legal_links(i, &allowed[i])).collect();

    let mut total: u128 = 1;
    for i in 0..last {
        let sizes: Vec<usize> = allowed[i].iter().map(|l| l.len()).collect();
        total = total.saturating_mul(reduced_count(&sizes, &links[i], 0));
    }
    check_cap(total)?;

    let mut outcomes: Vec<Outcome> = Vec::new();
    let mut edges = Vec::with_capacity(tree.histories().len());
    for (k, node) in tree.histories().iter().enumerate() {
        let lists: Vec<&[ActionId]> = (0..n).map(|i| &allowed[i][node.info[i].index()][..]).collect();
        let count: usize = lists.iter().map(|l| l.len()).product();
        let mut here = Vec::with_capacity(count);
        let mut joint = vec![0; n];
        for code in 0..count {
            let mut rest = code;
            for i in 0..n {
                joint[i] = lists[i][rest % lists[i].len()];
                rest /= lists[i].len();
            }
            game.transition(node.world, &joint, &mut outcomes);
            let h = HistoryId(k as u32);
            here.push(Edge {
                reward: outcomes.iter().map(|o| o.prob * o.reward).sum(),
                children: outcomes
                    .iter()
                    .filter_map(|o| tree.child(h, &joint, o.next).map(|c| (c, o.prob)))
                    .collect(),
            });
        }
        edges.push(here);
    }

    let mut search = Search {
        game,
        immediate: allowed[last].iter().map(|l| vec![0.0; l.len()]).collect(),
        assign: (0..n).map(|i| vec![None; tree.infos(i).len()]).collect(),
        allowed,
        links,
        edges,
        reach: vec![0.0; tree.histories().len()],
        best_value: f64::NEG_INFINITY,
        best_assign: Vec::new(),
        best_response: Vec::new(),
        evaluated: 0,
    };
    search.enumerate(0, vec![InfoId(0)]);

    let mut policy = JointPolicy::first_legal(game);
    for i in 0..n {
        for k in 0..tree.infos(i).len() {
            let pos = if i == last {
                search.best_response[k]
            } else {
                search.best_assign[i][k]
            };
            let a = search.allowed[i][k][pos.unwrap_or(0)];
            policy.set_action(game, i, InfoId(k as u32), a);
        }
    }
    Ok(BruteForceResult {
        value: search.best_value,
        policy,
        evaluated: search.evaluated,
    })
}

/// Number of reduced deterministic policies below information state `k`.
fn reduced_count(sizes: &[usize], links: &[Vec<(InfoId, Option<usize>)>], k: usize) -> u128 {
    (0..sizes[k])
        .map(|pos| {
            links[k]
                .iter()
                .filter(|&&(_, p)| p == Some(pos))
                .fold(1u128, |acc, &(c, _)| {
                    acc.saturating_mul(reduced_count(sizes, links, c.index()))
                })
        })
        .fold(0u128, |acc, x| acc.saturating_add(x))
}

impl Search<'_> {
    fn enumerate(&mut self, player: PlayerId, mut frontier: Vec<InfoId>) {
        let last = self.game.num_players() - 1;
        if player == last {
            self.best_response_value();
            return;
        }
        let Some(s) = frontier.pop() else {
            self.enumerate(player + 1, vec![InfoId(0)]);
            return;
        };
        for pos in 0..self.allowed[player][s.index()].len() {
            self.assign[player][s.index()] = Some(pos);
            let mut next = frontier.clone();
            next.extend(
                self.links[player][s.index()]
                    .iter()
                    .filter(|&&(_, p)| p == Some(pos))
                    .map(|&(c, _)| c),
            );
            self.enumerate(player, next);
        }
        self.assign[player][s.index()] = None;
    }

    fn best_response_value(&mut self) {
        self.evaluated += 1;
        let tree = self.game.tree();
        let n = self.game.num_players();
        let last = n - 1;
        self.reach.iter_mut().for_each(|r| *r = 0.0);
        self.reach[0] = 1.0;
        self.immediate
            .iter_mut()
            .for_each(|row| row.iter_mut().for_each(|x| *x = 0.0));
        for (k, node) in tree.histories().iter().enumerate() {
            let r = self.reach[k];
            if r == 0.0 {
                continue;
            }
            let mut base = 0;
            let mut stride = 1;
            let mut last_stride = 1;
            for i in 0..n {
                let len = self.allowed[i][node.info[i].index()].len();
                if i == last {
                    last_stride = stride;
                } else {
                    let pos = self.assign[i][node.info[i].index()].expect("reachable information states are assigned");
                    base += pos * stride;
                }
                stride *= len;
            }
            let s = node.info[last].index();
            for b in 0..self.allowed[last][s].len() {
                let edge = &self.edges[k][base + b * last_stride];
                self.immediate[s][b] += r * edge.reward;
                for &(c, p) in &edge.children {
                    self.reach[c.index()] += r * p;
                }
            }
        }
        let infos = tree.infos(last).len();
        let mut value = vec![0.0; infos];
        let mut choice = vec![None; infos];
        for s in (0..infos).rev() {
            let mut totals = self.immediate[s].clone();
            for &(c, pos) in &self.links[last][s] {
                if let Some(pos) = pos {
                    totals[pos] += value[c.index()];
                }
            }
            let (best, v) = argmax(&totals);
            value[s] = v;
            choice[s] = Some(best);
        }
        if value[0] > self.best_value + 1e-12 {
            self.best_value = value[0];
            self.best_assign = self.assign.clone();
            self.best_response = choice;
        }
    }
}

/// Index and value of the first maximum.
pub(crate) fn argmax(xs: &[f64]) -> (usize, f64) {
    let mut best = 0;
    for (k, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = k;
        }
    }
    (best, xs[best])
}

/// Legal actions at `info` minus those weakly dominated by a kept action.
/// Only information states whose public state ends the game on every
/// transition are pruned.
fn undominated_actions(game: &FiniteGame, player: PlayerId, info: InfoId) -> Vec<ActionId> {
    let tree = game.tree();
    let node = tree.info(player, info);
    let public = tree.public(node.public);
    if node.legal.len() == 1 || !public.children.is_empty() {
        return node.legal.to_vec();
    }
    let n = game.num_players();
    let histories: Vec<HistoryId> = public
        .histories
        .iter()
        .copied()
        .filter(|&h| tree.history(h).info[player] == info)
        .collect();
    let mut outcomes = Vec::new();
    let payoff = |a: ActionId, outcomes: &mut Vec<Outcome>| -> Vec<f64> {
        let mut out = Vec::new();
        for &h in &histories {
            let hn = tree.history(h);
            let lists: Vec<&[ActionId]> = (0..n).map(|i| &tree.info(i, hn.info[i]).legal[..]).collect();
            let others: usize = (0..n).filter(|&i| i != player).map(|i| lists[i].len()).product();
            let mut joint = vec![0; n];
            for code in 0..others {
                let mut rest = code;
                for i in 0..n {
                    if i == player {
                        joint[i] = a;
                    } else {
                        joint[i] = lists[i][rest % lists[i].len()];
                        rest /= lists[i].len();
                    }
                }
                game.transition(hn.world, &joint, outcomes);
                out.push(outcomes.iter().map(|o| o.prob * o.reward).sum());
            }
        }
        out
    };
    let mut kept: Vec<(ActionId, Vec<f64>)> = Vec::new();
    for &a in node.legal.iter() {
        let r = payoff(a, &mut outcomes);
        if kept.iter().any(|(_, k)| dominates(k, &r)) {
            continue;
        }
        kept.retain(|(_, k)| !dominates(&r, k));
        kept.push((a, r));
    }
    kept.sort_by_key(|&(a, _)| a);
    kept.into_iter().map(|(a, _)| a).collect()
}

fn dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x >= y)
}
