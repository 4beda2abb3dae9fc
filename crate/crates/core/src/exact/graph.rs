//! The reachable part of the public belief MDP as an explicit graph.
//!
//! Edges are the prescriptions of [`enumerate_consistent_prescriptions`]: rows
//! the belief has ruled out stay at their first legal action, since they affect
//! neither rewards nor successors. Storage is flat because Trade Comm(3, 3)
//! already has millions of edges: per edge only the expected reward and the
//! slice of nonterminal branches are kept, and prescriptions are decoded from
//! the edge index on demand.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::fosg::{ActionId, FiniteGame, ObsCode, Outcome, TERMINAL_OBS};
use crate::pubmdp::{initial_belief, joint_action, prescription_count, row_legal, Prescription, PublicBelief};

/// Default limit on the total number of edges.
pub const DEFAULT_EDGE_CAP: u64 = 50_000_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GraphBranch {
    pub obs: ObsCode,
    pub prob: f64,
    pub next: u32,
}

#[derive(Clone, Debug)]
pub struct GraphNode {
    pub belief: PublicBelief,
    pub depth: usize,
    first_edge: usize,
    num_edges: usize,
}

impl GraphNode {
    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    /// Global index of the node's `k`-th edge.
    pub fn edge(&self, k: usize) -> usize {
        self.first_edge + k
    }
}

/// All beliefs reachable from the initial belief, in breadth-first order, so
/// every edge leads from a node to one with a larger index.
#[derive(Clone, Debug)]
pub struct BeliefGraph {
    nodes: Vec<GraphNode>,
    index: HashMap<PublicBelief, u32>,
    edge_reward: Vec<f64>,
    /// Start of each edge's branches in `branches`; one extra entry at the end.
    branch_start: Vec<u32>,
    branches: Vec<GraphBranch>,
}

impl BeliefGraph {
    pub fn build(game: &FiniteGame) -> Result<Self> {
        Self::build_with_cap(game, DEFAULT_EDGE_CAP)
    }

    pub fn build_with_cap(game: &FiniteGame, cap: u64) -> Result<Self> {
        let tree = game.tree();
        let root = initial_belief(game);
        let mut graph = BeliefGraph {
            nodes: Vec::new(),
            index: HashMap::new(),
            edge_reward: Vec::new(),
            branch_start: vec![0],
            branches: Vec::new(),
        };
        graph.intern(root, 0);
        let mut outcomes: Vec<Outcome> = Vec::new();
        let mut joint: Vec<ActionId> = Vec::new();
        let mut mass: Vec<(ObsCode, f64)> = Vec::new();
        let mut cursor = 0;
        while cursor < graph.nodes.len() {
            let belief = graph.nodes[cursor].belief.clone();
            let depth = graph.nodes[cursor].depth;
            let count = prescription_count(tree, &belief, true);
            if graph.edge_reward.len() as u64 + count > cap {
                return Err(Error::CapExceeded {
                    what: "belief graph edges",
                    cap,
                });
            }
            graph.nodes[cursor].first_edge = graph.edge_reward.len();
            graph.nodes[cursor].num_edges = count as usize;

            let node = tree.public(belief.public);
            let support = support(game, &belief);
            let choices = choices(game, &belief);
            let mut gamma: Vec<ActionId> = choices.iter().map(|c| c[0]).collect();
            let mut pos = vec![0usize; choices.len()];
            loop {
                mass.clear();
                let mut reward = 0.0;
                for &(k, p) in &support {
                    joint_action(node, &gamma, k, &mut joint);
                    let world = tree.history(node.histories[k]).world;
                    game.transition(world, &joint, &mut outcomes);
                    for o in &outcomes {
                        let m = p * o.prob;
                        reward += m * o.reward;
                        match mass.iter_mut().find(|(obs, _)| *obs == o.public) {
                            Some(entry) => entry.1 += m,
                            None => mass.push((o.public, m)),
                        }
                    }
                }
                mass.sort_by_key(|&(obs, _)| obs);
                graph.edge_reward.push(reward);
                for &(obs, prob) in &mass {
                    if obs == TERMINAL_OBS {
                        continue;
                    }
                    let next = successor(game, &belief, &gamma, obs);
                    let id = graph.intern(next, depth + 1);
                    graph.branches.push(GraphBranch { obs, prob, next: id });
                }
                graph.branch_start.push(graph.branches.len() as u32);
                if !advance(&mut pos, &mut gamma, &choices) {
                    break;
                }
            }
            cursor += 1;
        }
        Ok(graph)
    }

    fn intern(&mut self, belief: PublicBelief, depth: usize) -> u32 {
        if let Some(&id) = self.index.get(&belief) {
            return id;
        }
        let id = self.nodes.len() as u32;
        self.index.insert(belief.clone(), id);
        self.nodes.push(GraphNode {
            belief,
            depth,
            first_edge: 0,
            num_edges: 0,
        });
        id
    }

    pub fn nodes(&self) -> &[GraphNode] {
        &self.nodes
    }

    pub fn node(&self, id: u32) -> &GraphNode {
        &self.nodes[id as usize]
    }

    pub fn root(&self) -> u32 {
        0
    }

    pub fn find(&self, belief: &PublicBelief) -> Option<u32> {
        self.index.get(belief).copied()
    }

    pub fn num_edges(&self) -> usize {
        self.edge_reward.len()
    }

    pub fn edge_reward(&self, edge: usize) -> f64 {
        self.edge_reward[edge]
    }

    /// Nonterminal branches of an edge; the remaining probability mass ends the game.
    pub fn branches(&self, edge: usize) -> &[GraphBranch] {
        &self.branches[self.branch_start[edge] as usize..self.branch_start[edge + 1] as usize]
    }

    /// Probability that the edge ends the game.
    pub fn terminal_prob(&self, edge: usize) -> f64 {
        (1.0 - self.branches(edge).iter().map(|b| b.prob).sum::<f64>()).max(0.0)
    }

    pub fn depth(&self) -> usize {
        self.nodes.last().map_or(0, |n| n.depth + 1)
    }

    /// Prescription of a node's `k`-th edge. Edges follow lexicographic order
    /// of the flat row layout, last row fastest.
    pub fn prescription(&self, game: &FiniteGame, node: u32, k: usize) -> Prescription {
        let belief = &self.nodes[node as usize].belief;
        let choices = choices(game, belief);
        let mut actions = vec![0; choices.len()];
        let mut rest = k;
        for r in (0..choices.len()).rev() {
            actions[r] = choices[r][rest % choices[r].len()];
            rest /= choices[r].len();
        }
        Prescription(actions)
    }

    /// Expected reward plus expected value of the successors under `values`.
    pub fn backup(&self, edge: usize, values: &[f64]) -> f64 {
        self.edge_reward[edge]
            + self
                .branches(edge)
                .iter()
                .map(|b| b.prob * values[b.next as usize])
                .sum::<f64>()
    }
}

fn choices<'a>(game: &'a FiniteGame, belief: &PublicBelief) -> Vec<&'a [ActionId]> {
    let tree = game.tree();
    let node = tree.public(belief.public);
    (0..node.num_rows())
        .map(|r| {
            let legal = row_legal(tree, node, r);
            if belief.indicators[r] {
                legal
            } else {
                &legal[..1]
            }
        })
        .collect()
}

/// Odometer with the last row fastest.
fn advance(pos: &mut [usize], gamma: &mut [ActionId], choices: &[&[ActionId]]) -> bool {
    for r in (0..pos.len()).rev() {
        pos[r] += 1;
        if pos[r] < choices[r].len() {
            gamma[r] = choices[r][pos[r]];
            return true;
        }
        pos[r] = 0;
        gamma[r] = choices[r][0];
    }
    false
}

/// Normalized posterior weights of the supported histories.
fn support(game: &FiniteGame, belief: &PublicBelief) -> Vec<(usize, f64)> {
    crate::pubmdp::reconstruct_history_distribution(game, belief)
        .expect("graph beliefs are reachable")
        .into_iter()
        .enumerate()
        .filter(|&(_, (_, p))| p > 0.0)
        .map(|(k, (_, p))| (k, p))
        .collect()
}

fn successor(game: &FiniteGame, belief: &PublicBelief, gamma: &[ActionId], obs: ObsCode) -> PublicBelief {
    crate::pubmdp::successor(game.tree(), belief, gamma, obs)
}

/// Optimal values and first-index greedy edges of every node.
#[derive(Clone, Debug)]
pub struct Solution {
    pub values: Vec<f64>,
    /// Local edge index per node.
    pub greedy: Vec<usize>,
}

impl Solution {
    pub fn root_value(&self) -> f64 {
        self.values[0]
    }

    pub fn value_of(&self, graph: &BeliefGraph, belief: &PublicBelief) -> Option<f64> {
        if belief.terminal {
            return Some(0.0);
        }
        graph.find(belief).map(|id| self.values[id as usize])
    }
}

pub fn backward_induction(graph: &BeliefGraph) -> Solution {
    let n = graph.nodes.len();
    let mut values = vec![0.0; n];
    let mut greedy = vec![0; n];
    for id in (0..n).rev() {
        let node = &graph.nodes[id];
        let mut best = f64::NEG_INFINITY;
        for k in 0..node.num_edges {
            let q = graph.backup(node.edge(k), &values);
            if q > best {
                best = q;
                greedy[id] = k;
            }
        }
        values[id] = best;
    }
    Solution { values, greedy }
}
