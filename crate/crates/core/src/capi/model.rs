//! Policy and value backends: tables, a two-headed network over the belief
//! encoding, and fixed estimators.

use std::collections::HashMap;

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::factored::{apply_floor, Row};
use super::nn::{Adam, Mlp};
use crate::error::{Error, Result};
use crate::exact::{BeliefGraph, Solution};
use crate::fosg::{ActionId, FiniteGame, PublicId};
use crate::pubmdp::{row_legal, BeliefKey, Prescription, PublicBelief};

/// Estimated value of beliefs. Terminal beliefs are worth 0.
pub trait ValueEstimator: Send + Sync {
    fn values(&self, game: &FiniteGame, beliefs: &[&PublicBelief]) -> Result<Vec<f64>>;

    fn value(&self, game: &FiniteGame, belief: &PublicBelief) -> Result<f64> {
        Ok(self.values(game, &[belief])?[0])
    }
}

/// A distribution over prescription vectors that factors over the rows of the
/// belief's public state.
pub trait FactoredPolicy {
    /// One row per information state, aligned with the public state's flat
    /// row layout, each over that information state's legal actions.
    fn rows(&self, game: &FiniteGame, belief: &PublicBelief) -> Vec<Row>;
}

/// The same value everywhere except at terminal beliefs.
#[derive(Clone, Copy, Debug)]
pub struct ConstantValue(pub f64);

impl ValueEstimator for ConstantValue {
    fn values(&self, _game: &FiniteGame, beliefs: &[&PublicBelief]) -> Result<Vec<f64>> {
        Ok(beliefs.iter().map(|b| if b.terminal { 0.0 } else { self.0 }).collect())
    }
}

/// Optimal values read from a solved belief graph.
#[derive(Clone, Debug)]
pub struct ExactValue {
    pub graph: BeliefGraph,
    pub solution: Solution,
}

impl ExactValue {
    pub fn new(game: &FiniteGame) -> Result<Self> {
        let graph = BeliefGraph::build(game)?;
        let solution = crate::exact::backward_induction(&graph);
        Ok(Self { graph, solution })
    }
}

impl ValueEstimator for ExactValue {
    fn values(&self, game: &FiniteGame, beliefs: &[&PublicBelief]) -> Result<Vec<f64>> {
        beliefs
            .iter()
            .map(|b| {
                self.solution.value_of(&self.graph, b).ok_or_else(|| {
                    Error::InvalidGame(format!(
                        "belief at public state {:?} of {} is not in the belief graph",
                        b.public,
                        game.name()
                    ))
                })
            })
            .collect()
    }
}

/// Values keyed by belief, with a default for unseen beliefs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TableValue {
    pub default: f64,
    pub entries: HashMap<BeliefKey, f64>,
}

impl TableValue {
    pub fn new(default: f64) -> Self {
        Self {
            default,
            entries: HashMap::new(),
        }
    }

    pub fn get(&self, game: &FiniteGame, belief: &PublicBelief) -> f64 {
        if belief.terminal {
            return 0.0;
        }
        self.entries
            .get(&belief.key(game.tree()))
            .copied()
            .unwrap_or(self.default)
    }

    /// `v ← v + α (target − v)`.
    pub fn update(&mut self, game: &FiniteGame, belief: &PublicBelief, target: f64, alpha: f64) {
        let default = self.default;
        let v = self.entries.entry(belief.key(game.tree())).or_insert(default);
        *v += alpha * (target - *v);
    }
}

impl ValueEstimator for TableValue {
    fn values(&self, game: &FiniteGame, beliefs: &[&PublicBelief]) -> Result<Vec<f64>> {
        Ok(beliefs.iter().map(|b| self.get(game, b)).collect())
    }
}

/// Probability rows per public state, uniform until first trained.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TablePolicy {
    pub entries: HashMap<PublicId, Vec<Vec<f64>>>,
}

impl TablePolicy {
    fn uniform_rows(game: &FiniteGame, public: PublicId) -> Vec<Vec<f64>> {
        let tree = game.tree();
        let node = tree.public(public);
        (0..node.num_rows())
            .map(|r| {
                let n = row_legal(tree, node, r).len();
                vec![1.0 / n as f64; n]
            })
            .collect()
    }

    /// Moves every row the belief still considers possible toward the
    /// one-hot of the target action, then applies the floor.
    pub fn update(&mut self, game: &FiniteGame, belief: &PublicBelief, target: &Prescription, alpha: f64, floor: f64) {
        let tree = game.tree();
        let node = tree.public(belief.public);
        let rows = self
            .entries
            .entry(belief.public)
            .or_insert_with(|| Self::uniform_rows(game, belief.public));
        for (r, probs) in rows.iter_mut().enumerate() {
            if !belief.indicators[r] {
                continue;
            }
            let legal = row_legal(tree, node, r);
            for (p, &a) in probs.iter_mut().zip(legal) {
                let hot = if a == target.0[r] { 1.0 } else { 0.0 };
                *p += alpha * (hot - *p);
            }
            let total: f64 = probs.iter().sum();
            probs.iter_mut().for_each(|p| *p /= total);
            apply_floor(probs, floor);
        }
    }
}

impl FactoredPolicy for TablePolicy {
    fn rows(&self, game: &FiniteGame, belief: &PublicBelief) -> Vec<Row> {
        let tree = game.tree();
        let node = tree.public(belief.public);
        let probs = self
            .entries
            .get(&belief.public)
            .cloned()
            .unwrap_or_else(|| Self::uniform_rows(game, belief.public));
        probs
            .into_iter()
            .enumerate()
            .map(|(r, probs)| Row {
                actions: row_legal(tree, node, r).to_vec(),
                probs,
            })
            .collect()
    }
}

/// Fixed-length encoding of a belief: a one-hot public observation per path
/// position (padded to the horizon), then each player's indicator bits padded
/// to the largest number of information states that player ever has in one
/// public state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    path_slots: usize,
    obs_count: usize,
    max_slots: Vec<usize>,
    num_actions: Vec<usize>,
}

impl Encoder {
    pub fn new(game: &FiniteGame) -> Self {
        let tree = game.tree();
        let n = game.num_players();
        let max_slots = (0..n)
            .map(|i| tree.publics().iter().map(|p| p.info_states[i].len()).max().unwrap_or(0))
            .collect();
        Self {
            path_slots: game.horizon() + 1,
            obs_count: game.dynamics().public_obs_count(),
            max_slots,
            num_actions: (0..n).map(|i| game.dynamics().num_actions(i)).collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.path_slots * self.obs_count + self.max_slots.iter().sum::<usize>()
    }

    pub fn policy_dim(&self) -> usize {
        self.max_slots.iter().zip(&self.num_actions).map(|(s, a)| s * a).sum()
    }

    /// First policy output of a player's information state.
    pub fn policy_slot(&self, player: usize, local: usize) -> usize {
        let before: usize = (0..player).map(|i| self.max_slots[i] * self.num_actions[i]).sum();
        before + local * self.num_actions[player]
    }

    pub fn encode(&self, game: &FiniteGame, belief: &PublicBelief, out: &mut [f64]) {
        let tree = game.tree();
        out.iter_mut().for_each(|x| *x = 0.0);
        for (pos, &obs) in belief.public_path(tree).iter().enumerate().take(self.path_slots) {
            out[pos * self.obs_count + obs as usize] = 1.0;
        }
        let mut base = self.path_slots * self.obs_count;
        for i in 0..self.max_slots.len() {
            for (k, &bit) in belief.player_indicators(tree, i).iter().enumerate() {
                if bit {
                    out[base + k] = 1.0;
                }
            }
            base += self.max_slots[i];
        }
    }

    pub fn encode_batch(&self, game: &FiniteGame, beliefs: &[&PublicBelief]) -> Array2<f64> {
        let dim = self.input_dim();
        let mut x = Array2::zeros((beliefs.len(), dim));
        for (b, mut row) in beliefs.iter().zip(x.rows_mut()) {
            self.encode(game, b, row.as_slice_mut().expect("contiguous row"));
        }
        x
    }
}

/// Cross-entropy target for one row of one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyTarget {
    pub sample: usize,
    pub slot: usize,
    pub legal: Vec<ActionId>,
    pub target: ActionId,
}

/// Encoded training data.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub inputs: Array2<f64>,
    pub values: Vec<f64>,
    pub policy: Vec<PolicyTarget>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Loss {
    pub value: f64,
    pub policy: f64,
    pub total: f64,
}

/// Two-headed network: value estimate and policy logits from one trunk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkModel {
    pub encoder: Encoder,
    pub mlp: Mlp,
    pub adam: Adam,
    /// Output range when the value is squashed through a sigmoid.
    pub squash: Option<(f64, f64)>,
    pub value_weight: f64,
    pub policy_weight: f64,
}

const EVAL_CHUNK: usize = 2048;

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl NetworkModel {
    pub fn new<R: Rng + ?Sized>(game: &FiniteGame, hidden: &[usize], with_policy: bool, lr: f64, rng: &mut R) -> Self {
        let encoder = Encoder::new(game);
        let policy_dim = if with_policy { encoder.policy_dim() } else { 0 };
        let mlp = Mlp::new(encoder.input_dim(), hidden, policy_dim, rng);
        let adam = Adam::new(mlp.params().len(), lr);
        Self {
            encoder,
            mlp,
            adam,
            squash: None,
            value_weight: 1.0,
            policy_weight: 1.0,
        }
    }

    fn output(&self, raw: f64) -> f64 {
        match self.squash {
            Some((lo, hi)) => lo + (hi - lo) * sigmoid(raw),
            None => raw,
        }
    }

    /// Derivative of the output transform at `raw`.
    fn output_slope(&self, raw: f64) -> f64 {
        match self.squash {
            Some((lo, hi)) => {
                let s = sigmoid(raw);
                (hi - lo) * s * (1.0 - s)
            }
            None => 1.0,
        }
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Array1<f64> {
        self.mlp.values(x).mapv(|z| self.output(z))
    }

    /// Encodes `(belief, target value, target prescription)` triples. Policy
    /// targets cover only rows the belief considers possible.
    pub fn batch<'a>(
        &self,
        game: &FiniteGame,
        entries: impl ExactSizeIterator<Item = (&'a PublicBelief, f64, &'a Prescription)>,
    ) -> Batch {
        let tree = game.tree();
        let mut beliefs = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        let mut policy = Vec::new();
        for (sample, (belief, q, gamma)) in entries.enumerate() {
            beliefs.push(belief);
            values.push(q);
            if self.mlp.policy_outputs() == 0 {
                continue;
            }
            let node = tree.public(belief.public);
            for r in 0..node.num_rows() {
                let legal = row_legal(tree, node, r);
                if !belief.indicators[r] || legal.len() < 2 {
                    continue;
                }
                let (player, local) = node.row_owner(r);
                policy.push(PolicyTarget {
                    sample,
                    slot: self.encoder.policy_slot(player, local),
                    legal: legal.to_vec(),
                    target: gamma.0[r],
                });
            }
        }
        Batch {
            inputs: self.encoder.encode_batch(game, &beliefs),
            values,
            policy,
        }
    }

    /// Weighted loss `w_v · mean (v − q)² + w_π · mean Σ_rows CE` and its
    /// gradient with respect to every parameter.
    pub fn loss_and_grad(&self, batch: &Batch) -> (Loss, Vec<f64>) {
        let n = batch.values.len().max(1) as f64;
        let with_policy = self.mlp.policy_outputs() > 0 && !batch.policy.is_empty();
        let fwd = self.mlp.forward(batch.inputs.view(), with_policy);
        let mut loss = Loss::default();
        let mut d_value = Array1::zeros(batch.values.len());
        for (k, (&raw, &q)) in fwd.value.iter().zip(&batch.values).enumerate() {
            let err = self.output(raw) - q;
            loss.value += err * err / n;
            d_value[k] = self.value_weight * 2.0 * err / n * self.output_slope(raw);
        }
        let d_logits = fwd.logits.as_ref().map(|logits| {
            let mut d = Array2::zeros(logits.dim());
            for t in &batch.policy {
                let z: Vec<f64> = t
                    .legal
                    .iter()
                    .map(|&a| logits[[t.sample, t.slot + a as usize]])
                    .collect();
                let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let exp: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
                let total: f64 = exp.iter().sum();
                for (k, &a) in t.legal.iter().enumerate() {
                    let p = exp[k] / total;
                    let hot = if a == t.target { 1.0 } else { 0.0 };
                    if a == t.target {
                        loss.policy -= (p.ln()) / n;
                    }
                    d[[t.sample, t.slot + a as usize]] += self.policy_weight * (p - hot) / n;
                }
            }
            d
        });
        loss.total = self.value_weight * loss.value + self.policy_weight * loss.policy;
        let grad = self.mlp.backward(&fwd, &d_value, d_logits.as_ref());
        (loss, grad)
    }

    /// One Adam step on the batch.
    pub fn train(&mut self, batch: &Batch) -> Result<Loss> {
        let (loss, grad) = self.loss_and_grad(batch);
        if !loss.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Divergence(format!("non-finite loss {}", loss.total)));
        }
        self.adam.step(self.mlp.params_mut(), &grad);
        Ok(loss)
    }
}

impl ValueEstimator for NetworkModel {
    fn values(&self, game: &FiniteGame, beliefs: &[&PublicBelief]) -> Result<Vec<f64>> {
        let live: Vec<&PublicBelief> = beliefs.iter().copied().filter(|b| !b.terminal).collect();
        let mut estimates = Vec::with_capacity(live.len());
        for chunk in live.chunks(EVAL_CHUNK) {
            let x = self.encoder.encode_batch(game, chunk);
            estimates.extend(self.predict(x.view()));
        }
        let mut it = estimates.into_iter();
        Ok(beliefs
            .iter()
            .map(|b| {
                if b.terminal {
                    0.0
                } else {
                    it.next().expect("one estimate per live belief")
                }
            })
            .collect())
    }
}

impl FactoredPolicy for NetworkModel {
    fn rows(&self, game: &FiniteGame, belief: &PublicBelief) -> Vec<Row> {
        let tree = game.tree();
        let node = tree.public(belief.public);
        let x = self.encoder.encode_batch(game, &[belief]);
        let logits = self.mlp.logits(x.view());
        (0..node.num_rows())
            .map(|r| {
                let legal = row_legal(tree, node, r);
                let (player, local) = node.row_owner(r);
                let slot = self.encoder.policy_slot(player, local);
                let z: Vec<f64> = legal.iter().map(|&a| logits[[0, slot + a as usize]]).collect();
                let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let exp: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
                let total: f64 = exp.iter().sum();
                Row {
                    actions: legal.to_vec(),
                    probs: exp.iter().map(|e| e / total).collect(),
                }
            })
            .collect()
    }
}
