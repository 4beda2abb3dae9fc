//! Tabular Q-learning in the public belief MDP.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::brute_force::argmax;
use super::graph::{BeliefGraph, Solution};
use crate::error::{Error, Result};

/// Q-values per belief-graph edge, that is per (belief, prescription index).
#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    pub values: Vec<f64>,
}

impl QTable {
    pub fn constant(graph: &BeliefGraph, value: f64) -> Self {
        Self {
            values: vec![value; graph.num_edges()],
        }
    }

    /// Exact optimal action values.
    pub fn optimal(graph: &BeliefGraph, solution: &Solution) -> Self {
        Self {
            values: (0..graph.num_edges())
                .map(|e| graph.backup(e, &solution.values))
                .collect(),
        }
    }

    pub fn node_values(&self, graph: &BeliefGraph, node: u32) -> &[f64] {
        let n = graph.node(node);
        &self.values[n.edge(0)..n.edge(0) + n.num_edges()]
    }

    /// First-index argmax edge of a node, as a local index.
    pub fn greedy(&self, graph: &BeliefGraph, node: u32) -> usize {
        argmax(self.node_values(graph, node)).0
    }

    fn max(&self, graph: &BeliefGraph, node: u32) -> f64 {
        argmax(self.node_values(graph, node)).1
    }

    /// Exact expected return of the greedy coordinator policy.
    pub fn greedy_value(&self, graph: &BeliefGraph) -> f64 {
        self.greedy_value_from(graph, graph.root())
    }

    fn greedy_value_from(&self, graph: &BeliefGraph, node: u32) -> f64 {
        let edge = graph.node(node).edge(self.greedy(graph, node));
        graph.edge_reward(edge)
            + graph
                .branches(edge)
                .iter()
                .map(|b| b.prob * self.greedy_value_from(graph, b.next))
                .sum::<f64>()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QLearningConfig {
    pub episodes: u64,
    /// Initial exploration rate, decayed linearly to zero at `episodes`.
    pub epsilon: f64,
    /// Initial learning rate, decayed linearly to zero at `episodes`.
    pub alpha: f64,
    pub initial_q: f64,
    /// Greedy evaluation cadence in episodes.
    pub eval_every: u64,
}

impl Default for QLearningConfig {
    fn default() -> Self {
        Self {
            episodes: 200_000,
            epsilon: 0.5,
            alpha: 0.1,
            initial_q: 0.0,
            eval_every: 1,
        }
    }
}

impl QLearningConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) || !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig("epsilon and alpha must lie in [0, 1]".into()));
        }
        if self.eval_every == 0 || !self.initial_q.is_finite() {
            return Err(Error::InvalidConfig(
                "eval_every must be positive and initial_q finite".into(),
            ));
        }
        Ok(())
    }
}

/// Fraction of a linear schedule left at `episode` of `total`.
pub fn linear_decay(initial: f64, episode: u64, total: u64) -> f64 {
    if total == 0 {
        return 0.0;
    }
    initial * (1.0 - episode as f64 / total as f64).max(0.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    /// Episodes completed.
    pub episode: u64,
    pub greedy_value: f64,
    pub best_value: f64,
    /// Milliseconds since the run started; zero without a [`WallClock`] start.
    pub wall_ms: u64,
}

/// Optional wall-clock timing and stopping for a training run. The default
/// reads no clock, keeping runs deterministic.
#[derive(Clone, Copy, Debug, Default)]
pub struct WallClock {
    pub start: Option<Instant>,
    pub deadline: Option<Instant>,
}

impl WallClock {
    /// Timing from now, with an optional time limit.
    pub fn started(limit: Option<std::time::Duration>) -> Self {
        let now = Instant::now();
        Self {
            start: Some(now),
            deadline: limit.map(|l| now + l),
        }
    }

    pub fn ms(&self) -> u64 {
        self.start.map_or(0, |s| s.elapsed().as_millis() as u64)
    }

    pub fn expired(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() >= d)
    }
}

#[derive(Clone, Debug)]
pub struct QLearningRun {
    pub curve: Vec<CurvePoint>,
    pub final_value: f64,
    pub best_value: f64,
    pub q: QTable,
}

pub fn pubmdp_q_learning<R: Rng + ?Sized>(
    graph: &BeliefGraph,
    config: &QLearningConfig,
    rng: &mut R,
) -> Result<QLearningRun> {
    let q = QTable::constant(graph, config.initial_q);
    pubmdp_q_learning_from(graph, config, q, rng)
}

/// Q-learning from a given table. One update per visited belief along a
/// single sampled trajectory per episode.
pub fn pubmdp_q_learning_from<R: Rng + ?Sized>(
    graph: &BeliefGraph,
    config: &QLearningConfig,
    q: QTable,
    rng: &mut R,
) -> Result<QLearningRun> {
    pubmdp_q_learning_until(graph, config, q, rng, WallClock::default())
}

/// As [`pubmdp_q_learning_from`], with timing and a deadline checked after
/// each evaluation.
pub fn pubmdp_q_learning_until<R: Rng + ?Sized>(
    graph: &BeliefGraph,
    config: &QLearningConfig,
    mut q: QTable,
    rng: &mut R,
    clock: WallClock,
) -> Result<QLearningRun> {
    config.validate()?;
    let mut curve = Vec::new();
    let mut best = q.greedy_value(graph);
    curve.push(CurvePoint {
        episode: 0,
        greedy_value: best,
        best_value: best,
        wall_ms: clock.ms(),
    });
    for episode in 0..config.episodes {
        let epsilon = linear_decay(config.epsilon, episode, config.episodes);
        let alpha = linear_decay(config.alpha, episode, config.episodes);
        let mut node = graph.root();
        loop {
            let n = graph.node(node);
            let k = if rng.gen::<f64>() < epsilon {
                rng.gen_range(0..n.num_edges())
            } else {
                q.greedy(graph, node)
            };
            let edge = n.edge(k);
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut next = None;
            for b in graph.branches(edge) {
                acc += b.prob;
                if u < acc {
                    next = Some(b.next);
                    break;
                }
            }
            // Rounding can leave u just above the branch total of an edge
            // that never terminates; fall back to the last branch.
            if next.is_none() && graph.terminal_prob(edge) < 1e-12 {
                next = graph.branches(edge).last().map(|b| b.next);
            }
            let bootstrap = next.map_or(0.0, |c| q.max(graph, c));
            let target = graph.edge_reward(edge) + bootstrap;
            q.values[edge] += alpha * (target - q.values[edge]);
            match next {
                Some(c) => node = c,
                None => break,
            }
        }
        let done = episode + 1;
        if done % config.eval_every == 0 || done == config.episodes {
            let value = q.greedy_value(graph);
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
    Ok(QLearningRun {
        final_value: curve.last().map_or(best, |p| p.greedy_value),
        best_value: best,
        curve,
        q,
    })
}
