//! Cooperative approximate policy iteration.
//!
//! At every decision point the coordinator draws candidate prescription
//! vectors from a factored policy, scores each by its exact expected reward
//! plus the expected estimated value of the next belief, keeps the best one
//! as a training target and executes it (or, when exploring, a random
//! candidate). Episodes follow every public branch of the executed vectors;
//! after each episode the policy and value are trained on the collected
//! targets and the buffer is cleared.

mod checkpoint;
mod factored;
mod model;
mod nn;

pub use checkpoint::{config_hash, Checkpoint, CHECKPOINT_VERSION};
pub use factored::{apply_floor, prescription_vectors, vector_count, vector_prob, Acquisition, Row};
pub use model::{
    Batch, ConstantValue, Encoder, ExactValue, FactoredPolicy, Loss, NetworkModel, PolicyTarget, TablePolicy,
    TableValue, ValueEstimator,
};
pub use nn::{Adam, Forward, Mlp};

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{CurvePoint, WallClock};
use crate::fosg::{evaluate_joint_policy, ActionId, FiniteGame, JointPolicy, ObsCode, Outcome, TERMINAL_OBS};
use crate::pubmdp::{
    decentralize, initial_belief, joint_action, reconstruct_history_distribution, Branch, Prescription, PublicBelief,
};
use crate::rng::stream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Table,
    Network,
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table" => Ok(Backend::Table),
            "network" => Ok(Backend::Network),
            other => Err(Error::InvalidConfig(format!("unknown backend {other:?}"))),
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Table => "table",
            Backend::Network => "network",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exploration {
    /// Each decision explores independently with probability `epsilon`.
    EpsilonGreedy {
        epsilon: f64,
    },
    /// One decision per episode explores.
    OncePerEpisode,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapiConfig {
    /// Candidate vectors per decision.
    pub k: usize,
    pub acquisition: Acquisition,
    pub exploration: Exploration,
    /// Replace one random row of the policy by the uniform row at each
    /// training decision.
    pub structured_exploration: bool,
    pub policy_backend: Backend,
    pub value_backend: Backend,
    /// Tabular policy step size.
    pub policy_lr: f64,
    /// Tabular value step size.
    pub value_lr: f64,
    pub network_lr: f64,
    pub hidden: Vec<usize>,
    /// Adam steps per episode on the episode's buffer.
    pub train_steps: usize,
    pub policy_floor: f64,
    /// Squash network values into the game's return bounds with a sigmoid.
    pub squash_value: bool,
    pub value_loss_weight: f64,
    pub policy_loss_weight: f64,
    /// Value of unseen beliefs in the value table.
    pub default_value: f64,
    /// Limit for `enumerate_all` acquisition.
    pub enumerate_cap: u64,
    /// Limit on decisions per episode.
    pub max_decisions: usize,
}

impl Default for CapiConfig {
    /// Two-headed 3×256 network, 10,000 sampled candidates, ε = 0.1.
    fn default() -> Self {
        Self {
            k: 10_000,
            acquisition: Acquisition::Sample,
            exploration: Exploration::EpsilonGreedy { epsilon: 0.1 },
            structured_exploration: false,
            policy_backend: Backend::Network,
            value_backend: Backend::Network,
            policy_lr: 0.1,
            value_lr: 0.5,
            network_lr: 1e-4,
            hidden: vec![256, 256, 256],
            train_steps: 1,
            policy_floor: 0.0,
            squash_value: false,
            value_loss_weight: 1.0,
            policy_loss_weight: 0.01,
            default_value: 0.0,
            enumerate_cap: crate::pubmdp::DEFAULT_PRESCRIPTION_CAP,
            max_decisions: 1_000_000,
        }
    }
}

impl CapiConfig {
    /// Tabular policy and value.
    pub fn tabular() -> Self {
        Self {
            policy_backend: Backend::Table,
            value_backend: Backend::Table,
            ..Self::default()
        }
    }

    pub fn validate(&self, game: &FiniteGame) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("K must be at least 1".into()));
        }
        if let Exploration::EpsilonGreedy { epsilon } = self.exploration {
            if !(0.0..=1.0).contains(&epsilon) {
                return Err(Error::InvalidConfig(format!("epsilon {epsilon} outside [0, 1]")));
            }
        }
        let max_actions = (0..game.num_players())
            .flat_map(|i| game.tree().infos(i).iter().map(|s| s.legal.len()))
            .max()
            .unwrap_or(1);
        if !(0.0..1.0 / max_actions as f64).contains(&self.policy_floor) {
            return Err(Error::InvalidConfig(format!(
                "policy floor {} outside [0, 1/{max_actions})",
                self.policy_floor
            )));
        }
        for (name, x) in [
            ("policy_lr", self.policy_lr),
            ("value_lr", self.value_lr),
            ("network_lr", self.network_lr),
            ("value_loss_weight", self.value_loss_weight),
            ("policy_loss_weight", self.policy_loss_weight),
        ] {
            if !(x.is_finite() && x >= 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be a nonnegative number, got {x}"
                )));
            }
        }
        if self.policy_lr > 1.0 || self.value_lr > 1.0 {
            return Err(Error::InvalidConfig("tabular step sizes must be at most 1".into()));
        }
        Ok(())
    }
}

/// A training target recorded at one decision.
#[derive(Clone, Debug, PartialEq)]
pub struct BufferEntry {
    pub belief: PublicBelief,
    pub target: Prescription,
    pub q: f64,
}

/// Score of one candidate vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Assessment {
    pub q: f64,
    pub reward: f64,
    /// Positive-probability public observations in increasing code order.
    pub branches: Vec<Branch>,
}

/// Random streams of one learner.
#[derive(Clone, Debug)]
pub struct CapiRngs {
    pub acquisition: ChaCha8Rng,
    pub exploration: ChaCha8Rng,
}

impl CapiRngs {
    pub fn new(seed: u64) -> Self {
        Self {
            acquisition: stream(seed, "capi/acquisition"),
            exploration: stream(seed, "capi/exploration"),
        }
    }
}

/// Policy, value estimator and configuration of a learner.
pub struct CapiState {
    pub config: CapiConfig,
    pub policy_table: TablePolicy,
    pub value_table: TableValue,
    pub network: Option<NetworkModel>,
    fixed_value: Option<Arc<dyn ValueEstimator>>,
    /// Seed of the acquisition stream used for greedy play.
    pub greedy_seed: u64,
    pub episodes: u64,
}

impl fmt::Debug for CapiState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CapiState")
            .field("config", &self.config)
            .field("policy_rows", &self.policy_table.entries.len())
            .field("value_entries", &self.value_table.entries.len())
            .field("network", &self.network.as_ref().map(|n| n.mlp.params().len()))
            .field("fixed_value", &self.fixed_value.is_some())
            .field("episodes", &self.episodes)
            .finish()
    }
}

impl CapiState {
    pub fn new(game: &FiniteGame, config: CapiConfig, seed: u64) -> Result<Self> {
        config.validate(game)?;
        let needs_net = config.policy_backend == Backend::Network || config.value_backend == Backend::Network;
        let network = needs_net.then(|| {
            let mut init = stream(seed, "capi/init");
            let mut net = NetworkModel::new(
                game,
                &config.hidden,
                config.policy_backend == Backend::Network,
                config.network_lr,
                &mut init,
            );
            if config.squash_value {
                net.squash = Some(game.dynamics().return_bounds());
            }
            net.value_weight = if config.value_backend == Backend::Network {
                config.value_loss_weight
            } else {
                0.0
            };
            net.policy_weight = config.policy_loss_weight;
            net
        });
        Ok(Self {
            value_table: TableValue::new(config.default_value),
            policy_table: TablePolicy::default(),
            network,
            fixed_value: None,
            greedy_seed: rand::Rng::gen(&mut stream(seed, "capi/greedy")),
            episodes: 0,
            config,
        })
    }

    /// Replaces the learned value by a fixed estimator; training then only
    /// touches the policy.
    pub fn with_fixed_value(mut self, value: Arc<dyn ValueEstimator>) -> Self {
        self.fixed_value = Some(value);
        self
    }

    pub fn value(&self) -> &dyn ValueEstimator {
        if let Some(v) = &self.fixed_value {
            return v.as_ref();
        }
        match (self.config.value_backend, &self.network) {
            (Backend::Network, Some(net)) => net,
            _ => &self.value_table,
        }
    }

    pub fn policy(&self) -> &dyn FactoredPolicy {
        match (self.config.policy_backend, &self.network) {
            (Backend::Network, Some(net)) => net,
            _ => &self.policy_table,
        }
    }

    /// Policy rows at `belief`, with the floor applied.
    pub fn rows(&self, game: &FiniteGame, belief: &PublicBelief) -> Vec<Row> {
        let mut rows = self.policy().rows(game, belief);
        if self.config.policy_floor > 0.0 {
            for row in &mut rows {
                apply_floor(&mut row.probs, self.config.policy_floor);
            }
        }
        rows
    }
}

/// Scores one vector: `q = r + Σ_O p(O) v(b')`, exact over public observations.
pub fn assess(
    game: &FiniteGame,
    belief: &PublicBelief,
    gamma: &Prescription,
    value: &dyn ValueEstimator,
) -> Result<Assessment> {
    if belief.terminal {
        return Err(Error::TerminalBelief);
    }
    gamma.validate(game.tree(), belief.public)?;
    Ok(assess_many(game, belief, std::slice::from_ref(gamma), value)?.remove(0))
}

/// Scores many vectors at one belief; successor values are estimated once per
/// distinct successor.
pub fn assess_many(
    game: &FiniteGame,
    belief: &PublicBelief,
    candidates: &[Prescription],
    value: &dyn ValueEstimator,
) -> Result<Vec<Assessment>> {
    let tree = game.tree();
    let node = tree.public(belief.public);
    let support: Vec<(usize, usize, f64)> = reconstruct_history_distribution(game, belief)?
        .into_iter()
        .enumerate()
        .filter(|&(_, (_, p))| p > 0.0)
        .map(|(k, (h, p))| (k, tree.history(h).world, p))
        .collect();
    let mut joint: Vec<ActionId> = Vec::with_capacity(game.num_players());
    let mut outcomes: Vec<Outcome> = Vec::new();
    let mut mass: Vec<(ObsCode, f64)> = Vec::new();
    let mut out = Vec::with_capacity(candidates.len());
    for gamma in candidates {
        mass.clear();
        let mut reward = 0.0;
        for &(k, world, p) in &support {
            joint_action(node, &gamma.0, k, &mut joint);
            game.transition(world, &joint, &mut outcomes);
            for o in &outcomes {
                let m = p * o.prob;
                reward += m * o.reward;
                match mass.iter_mut().find(|(obs, _)| *obs == o.public) {
                    Some(e) => e.1 += m,
                    None => mass.push((o.public, m)),
                }
            }
        }
        mass.sort_by_key(|&(obs, _)| obs);
        let branches = mass
            .iter()
            .map(|&(obs, prob)| Branch {
                obs,
                prob,
                next: crate::pubmdp::successor(tree, belief, &gamma.0, obs),
            })
            .collect();
        out.push(Assessment {
            q: reward,
            reward,
            branches,
        });
    }

    let mut index: HashMap<&PublicBelief, usize> = HashMap::new();
    let mut distinct: Vec<&PublicBelief> = Vec::new();
    for a in &out {
        for b in &a.branches {
            if b.obs != TERMINAL_OBS && !index.contains_key(&b.next) {
                index.insert(&b.next, distinct.len());
                distinct.push(&b.next);
            }
        }
    }
    let values = value.values(game, &distinct)?;
    let qs: Vec<f64> = out
        .iter()
        .map(|a| {
            a.reward
                + a.branches
                    .iter()
                    .filter(|b| b.obs != TERMINAL_OBS)
                    .map(|b| b.prob * values[index[&b.next]])
                    .sum::<f64>()
        })
        .collect();
    for (a, q) in out.iter_mut().zip(qs) {
        a.q = q;
    }
    Ok(out)
}

/// How a single decision explores.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActOptions {
    /// Probability of executing a uniformly random candidate.
    pub epsilon: f64,
    pub structured: bool,
}

impl ActOptions {
    pub const GREEDY: ActOptions = ActOptions {
        epsilon: 0.0,
        structured: false,
    };
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    pub executed: Prescription,
    pub executed_assessment: Assessment,
    pub entry: BufferEntry,
    /// Number of distinct candidates assessed.
    pub candidates: usize,
    pub explored: bool,
}

/// Acquires candidates at `belief`, assesses them and picks the first best.
/// Rows the belief rules out are pinned to their first legal action before
/// acquisition: they change neither rewards nor successors.
pub fn act(
    game: &FiniteGame,
    state: &CapiState,
    belief: &PublicBelief,
    options: ActOptions,
    rngs: &mut CapiRngs,
) -> Result<Decision> {
    if belief.terminal {
        return Err(Error::TerminalBelief);
    }
    let mut rows = state.rows(game, belief);
    for (r, row) in rows.iter_mut().enumerate() {
        if !belief.indicators[r] {
            *row = Row::fixed(row.actions[0]);
        }
    }
    if options.structured {
        let open: Vec<usize> = (0..rows.len()).filter(|&r| rows[r].actions.len() > 1).collect();
        if !open.is_empty() {
            let r = open[rngs.acquisition.gen_range(0..open.len())];
            rows[r] = Row::uniform(rows[r].actions.clone());
        }
    }
    let config = &state.config;
    let candidates = prescription_vectors(
        &rows,
        config.k,
        config.acquisition,
        config.enumerate_cap,
        &mut rngs.acquisition,
    )?;
    let mut assessed = assess_many(game, belief, &candidates, state.value())?;
    let best = crate::exact::argmax(&assessed.iter().map(|a| a.q).collect::<Vec<_>>()).0;
    let entry = BufferEntry {
        belief: belief.clone(),
        target: candidates[best].clone(),
        q: assessed[best].q,
    };
    if !entry.q.is_finite() {
        return Err(Error::Divergence(format!("non-finite assessment {}", entry.q)));
    }
    let explored = options.epsilon > 0.0 && rngs.exploration.gen_bool(options.epsilon);
    let pick = if explored {
        rngs.exploration.gen_range(0..candidates.len())
    } else {
        best
    };
    Ok(Decision {
        executed: candidates[pick].clone(),
        executed_assessment: assessed.swap_remove(pick),
        entry,
        candidates: candidates.len(),
        explored,
    })
}

/// Number of decisions an episode makes when every decision plays the
/// policy's most likely vector.
fn mode_decision_count(game: &FiniteGame, state: &CapiState, cap: usize) -> Result<usize> {
    let mut count = 0;
    let mut stack = vec![initial_belief(game)];
    while let Some(belief) = stack.pop() {
        count += 1;
        if count > cap {
            break;
        }
        let gamma: Vec<ActionId> = state
            .rows(game, &belief)
            .iter()
            .enumerate()
            .map(|(r, row)| {
                if belief.indicators[r] {
                    row.actions[crate::exact::argmax(&row.probs).0]
                } else {
                    row.actions[0]
                }
            })
            .collect();
        for branch in crate::pubmdp::step_unchecked(game, &belief, &gamma)?.branches {
            if !branch.next.terminal {
                stack.push(branch.next);
            }
        }
    }
    Ok(count)
}

/// Plays one training episode over every public branch and returns the
/// buffer entries in visiting order (depth first, lower observations first).
pub fn run_episode(game: &FiniteGame, state: &CapiState, rngs: &mut CapiRngs) -> Result<Vec<BufferEntry>> {
    let config = &state.config;
    let forced = match config.exploration {
        Exploration::OncePerEpisode => {
            let n = mode_decision_count(game, state, config.max_decisions)?;
            Some(rngs.exploration.gen_range(0..n))
        }
        _ => None,
    };
    let epsilon = match config.exploration {
        Exploration::EpsilonGreedy { epsilon } => epsilon,
        _ => 0.0,
    };
    let mut buffer = Vec::new();
    let mut stack = vec![initial_belief(game)];
    while let Some(belief) = stack.pop() {
        if buffer.len() >= config.max_decisions {
            return Err(Error::CapExceeded {
                what: "decisions per episode",
                cap: config.max_decisions as u64,
            });
        }
        let options = ActOptions {
            epsilon: if forced == Some(buffer.len()) { 1.0 } else { epsilon },
            structured: config.structured_exploration,
        };
        let decision = act(game, state, &belief, options, rngs)?;
        buffer.push(decision.entry);
        for branch in decision.executed_assessment.branches.into_iter().rev() {
            if !branch.next.terminal {
                stack.push(branch.next);
            }
        }
    }
    Ok(buffer)
}

/// Trains on the buffer and empties it.
pub fn train_step(game: &FiniteGame, state: &mut CapiState, buffer: &mut Vec<BufferEntry>) -> Result<Loss> {
    if buffer.is_empty() {
        return Err(Error::InvalidConfig("empty training buffer".into()));
    }
    let config = state.config.clone();
    let learn_value = state.fixed_value.is_none();
    let mut loss = Loss::default();
    if config.value_backend == Backend::Table && learn_value {
        for e in buffer.iter() {
            let v = state.value_table.get(game, &e.belief);
            loss.value += (v - e.q).powi(2) / buffer.len() as f64;
            state.value_table.update(game, &e.belief, e.q, config.value_lr);
        }
    }
    if config.policy_backend == Backend::Table {
        for e in buffer.iter() {
            state
                .policy_table
                .update(game, &e.belief, &e.target, config.policy_lr, config.policy_floor);
        }
    }
    if let Some(net) = state.network.as_mut() {
        if !learn_value {
            net.value_weight = 0.0;
        }
        if net.value_weight > 0.0 || net.mlp.policy_outputs() > 0 {
            let batch = net.batch(game, buffer.iter().map(|e| (&e.belief, e.q, &e.target)));
            for _ in 0..config.train_steps {
                let l = net.train(&batch)?;
                if net.value_weight > 0.0 {
                    loss.value = l.value;
                }
                loss.policy = l.policy;
            }
        }
    }
    loss.total = loss.value + config.policy_loss_weight * loss.policy;
    buffer.clear();
    Ok(loss)
}

/// Greedy coordinator play turned into a joint policy. Exploration is off and
/// acquisition uses a stream seeded from the state, so the result is a
/// function of the state alone.
pub fn greedy_joint_policy(game: &FiniteGame, state: &CapiState) -> Result<JointPolicy> {
    let mut rngs = CapiRngs::new(state.greedy_seed);
    decentralize(game, |belief| {
        Ok(act(game, state, belief, ActOptions::GREEDY, &mut rngs)?.executed)
    })
}

/// One line of the training log.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpisodeLog {
    pub episode: u64,
    /// Greedy value at the most recent evaluation.
    pub greedy_value: f64,
    pub buffer_size: usize,
    pub wall_ms: u64,
}

#[derive(Clone, Debug)]
pub struct CapiRun {
    pub curve: Vec<CurvePoint>,
    pub log: Vec<EpisodeLog>,
    pub final_value: f64,
    pub best_value: f64,
}

/// Trains for `episodes` episodes, scoring the greedy joint policy exactly
/// before training and every `eval_every` episodes. Stops early once the
/// greedy value reaches `stop_at`, when given.
pub fn train_capi(
    game: &FiniteGame,
    state: &mut CapiState,
    episodes: u64,
    eval_every: u64,
    stop_at: Option<f64>,
    rngs: &mut CapiRngs,
) -> Result<CapiRun> {
    train_capi_until(game, state, episodes, eval_every, stop_at, rngs, WallClock::default())
}

/// As [`train_capi`], with timing and a deadline checked before each episode.
pub fn train_capi_until(
    game: &FiniteGame,
    state: &mut CapiState,
    episodes: u64,
    eval_every: u64,
    stop_at: Option<f64>,
    rngs: &mut CapiRngs,
    clock: WallClock,
) -> Result<CapiRun> {
    let eval_every = eval_every.max(1);
    let evaluate =
        |state: &CapiState| -> Result<f64> { Ok(evaluate_joint_policy(game, &greedy_joint_policy(game, state)?)) };
    let mut greedy = evaluate(state)?;
    let mut best = greedy;
    let mut curve = vec![CurvePoint {
        episode: 0,
        greedy_value: greedy,
        best_value: best,
        wall_ms: clock.ms(),
    }];
    let mut log = Vec::new();
    for episode in 1..=episodes {
        if stop_at.is_some_and(|target| best >= target - 1e-9) || clock.expired() {
            break;
        }
        let mut buffer = run_episode(game, state, rngs)?;
        let size = buffer.len();
        train_step(game, state, &mut buffer)?;
        state.episodes += 1;
        if episode % eval_every == 0 || episode == episodes {
            greedy = evaluate(state)?;
            best = best.max(greedy);
            curve.push(CurvePoint {
                episode,
                greedy_value: greedy,
                best_value: best,
                wall_ms: clock.ms(),
            });
        }
        log.push(EpisodeLog {
            episode,
            greedy_value: greedy,
            buffer_size: size,
            wall_ms: clock.ms(),
        });
    }
    let last = log.last().map_or(0, |l| l.episode);
    if curve.last().is_some_and(|p| p.episode < last) {
        greedy = evaluate(state)?;
        best = best.max(greedy);
        curve.push(CurvePoint {
            episode: last,
            greedy_value: greedy,
            best_value: best,
            wall_ms: clock.ms(),
        });
    }
    Ok(CapiRun {
        curve,
        log,
        final_value: greedy,
        best_value: best,
    })
}
