//! Reference solvers: exhaustive joint-policy search, backward induction on
//! the belief graph, and tabular Q-learning in the public belief MDP.

mod brute_force;
mod graph;
mod qlearning;

pub(crate) use brute_force::argmax;
pub use brute_force::{brute_force_optimal, brute_force_optimal_with, BruteForceConfig, BruteForceResult};
pub use graph::{backward_induction, BeliefGraph, GraphBranch, GraphNode, Solution, DEFAULT_EDGE_CAP};
pub use qlearning::{
    linear_decay, pubmdp_q_learning, pubmdp_q_learning_from, pubmdp_q_learning_until, CurvePoint, QLearningConfig,
    QLearningRun, QTable, WallClock,
};

use crate::error::{Error, Result};
use crate::fosg::{FiniteGame, JointPolicy};
use crate::pubmdp::decentralize;

const ORACLE_FILE: &str = include_str!("../../data/oracle_values.txt");

/// Optimal values stored in the versioned oracle file.
pub fn golden_values() -> Result<Vec<(String, f64)>> {
    let mut lines = ORACLE_FILE.lines();
    if lines.next() != Some("# oracle values v1") {
        return Err(Error::Malformed("oracle file version".into()));
    }
    lines
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| {
            let (name, value) = l
                .split_once(char::is_whitespace)
                .ok_or_else(|| Error::Malformed(l.to_string()))?;
            let value = value.trim().parse().map_err(|_| Error::Malformed(l.to_string()))?;
            Ok((name.to_string(), value))
        })
        .collect()
}

pub fn golden_value(name: &str) -> Option<f64> {
    golden_values()
        .ok()?
        .into_iter()
        .find(|(n, _)| n == name)
        .map(|(_, v)| v)
}

/// Formats a value the way the oracle file stores it.
pub fn format_value(value: f64) -> String {
    format!("{value:.9}")
}

/// Optimal value of a game: the oracle file if it lists the game, else
/// backward induction on the belief graph, else brute force.
pub fn optimal_value(game: &FiniteGame) -> Result<f64> {
    if let Some(v) = golden_value(&game.name()) {
        return Ok(v);
    }
    match BeliefGraph::build(game) {
        Ok(graph) => Ok(backward_induction(&graph).root_value()),
        Err(Error::CapExceeded { .. }) => Ok(brute_force_optimal(game)?.value),
        Err(e) => Err(e),
    }
}

impl Solution {
    /// Decentralized joint policy following the greedy prescriptions.
    pub fn joint_policy(&self, game: &FiniteGame, graph: &BeliefGraph) -> Result<JointPolicy> {
        decentralize(game, |belief| {
            let id = graph
                .find(belief)
                .ok_or_else(|| Error::Malformed("belief missing from graph".into()))?;
            Ok(graph.prescription(game, id, self.greedy[id as usize]))
        })
    }
}
