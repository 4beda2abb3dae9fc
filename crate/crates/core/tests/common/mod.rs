//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use std::collections::BTreeMap;

use capi_core::capi::{Batch, NetworkModel, PolicyTarget, Row};
use capi_core::fosg::{ActionId, FiniteGame, HistoryId, ObsCode, Outcome};
use capi_core::pubmdp::{Prescription, PublicBelief};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TINY_HANABI: [&str; 6] = [
    "tiny_hanabi:A",
    "tiny_hanabi:B",
    "tiny_hanabi:C",
    "tiny_hanabi:D",
    "tiny_hanabi:E",
    "tiny_hanabi:F",
];

/// Posterior over histories maintained by plain Bayes rule on the dynamics.
pub type Posterior = BTreeMap<HistoryId, f64>;

pub fn tracker_root(game: &FiniteGame, belief: &PublicBelief) -> Posterior {
    // Walk forward from w⁰ through the forced prefix by chance alone.
    let tree = game.tree();
    let mut post: Posterior = BTreeMap::from([(tree.root(), 1.0)]);
    let mut out = Vec::new();
    while tree.history(*post.keys().next().unwrap()).public != belief.public {
        let mut next = Posterior::new();
        for (&h, &p) in &post {
            let node = tree.history(h);
            let joint: Vec<ActionId> = (0..game.num_players())
                .map(|i| tree.info(i, node.info[i]).legal[0])
                .collect();
            game.transition(node.world, &joint, &mut out);
            for o in &out {
                let child = tree.child(h, &joint, o.next).unwrap();
                *next.entry(child).or_insert(0.0) += p * o.prob;
            }
        }
        post = next;
    }
    post
}

pub fn tracker_update(game: &FiniteGame, post: &Posterior, gamma: &Prescription, obs: ObsCode) -> Posterior {
    let tree = game.tree();
    let mut next = Posterior::new();
    let mut out: Vec<Outcome> = Vec::new();
    for (&h, &p) in post {
        let node = tree.history(h);
        let public = tree.public(node.public);
        let joint: Vec<ActionId> = (0..game.num_players())
            .map(|i| gamma.0[public.row(i, tree.info(i, node.info[i]).local)])
            .collect();
        game.transition(node.world, &joint, &mut out);
        for o in out.iter().filter(|o| o.public == obs) {
            let child = tree.child(h, &joint, o.next).unwrap();
            *next.entry(child).or_insert(0.0) += p * o.prob;
        }
    }
    let z: f64 = next.values().sum();
    next.values_mut().for_each(|p| *p /= z);
    next
}

pub fn random_rows(rng: &mut ChaCha8Rng, max_vectors: u64) -> Vec<Row> {
    let mut rows = Vec::new();
    let mut count = 1u64;
    let target = rng.gen_range(1..=6);
    while rows.len() < target {
        let n = rng.gen_range(1..=5u16);
        if count * n as u64 > max_vectors {
            break;
        }
        count *= n as u64;
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
        let total: f64 = w.iter().sum();
        // Arbitrary legal subsets: actions need not start at 0.
        let offset = rng.gen_range(0..3u16);
        rows.push(Row {
            actions: (0..n).map(|a| offset + 2 * a).collect(),
            probs: w.iter().map(|x| x / total).collect(),
        });
    }
    rows
}

pub fn small_network(game: &FiniteGame, squash: bool, seed: u64) -> NetworkModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = NetworkModel::new(game, &[16, 16, 16], true, 1e-3, &mut rng);
    if squash {
        net.squash = Some((-1.0, 2.0));
    }
    net.policy_weight = 0.3;
    net
}

/// Relative error of the analytic gradient against central differences.
pub fn gradient_error(net: &mut NetworkModel, batch: &Batch) -> f64 {
    let (_, grad) = net.loss_and_grad(batch);
    let h = 1e-6;
    let mut numeric = vec![0.0; grad.len()];
    for k in 0..grad.len() {
        let orig = net.mlp.params()[k];
        net.mlp.params_mut()[k] = orig + h;
        let plus = net.loss_and_grad(batch).0.total;
        net.mlp.params_mut()[k] = orig - h;
        let minus = net.loss_and_grad(batch).0.total;
        net.mlp.params_mut()[k] = orig;
        numeric[k] = (plus - minus) / (2.0 * h);
    }
    let diff: f64 = grad
        .iter()
        .zip(&numeric)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let norm: f64 = grad.iter().map(|a| a * a).sum::<f64>().sqrt() + numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
    diff / norm.max(1e-12)
}

pub fn random_batch(net: &NetworkModel, rng: &mut ChaCha8Rng, size: usize) -> Batch {
    let dim = net.mlp.inputs();
    let inputs = Array2::from_shape_fn((size, dim), |_| rng.gen_range(-1.0..1.0));
    let values = (0..size).map(|_| rng.gen_range(-1.0..2.0)).collect();
    let slots = net.mlp.policy_outputs();
    let policy = (0..size)
        .flat_map(|sample| {
            let width = 3;
            let slot = rng.gen_range(0..slots - width);
            let target = rng.gen_range(0..width as u16);
            [PolicyTarget {
                sample,
                slot,
                legal: (0..width as u16).collect(),
                target,
            }]
        })
        .collect();
    Batch { inputs, values, policy }
}
