//! The public belief MDP.
//!
//! A coordinator that sees only public observations picks one prescription
//! vector per step: an action for every information state each player might
//! hold in the current public state. Because prescriptions are deterministic,
//! the coordinator's posterior over the public set is fully described by the
//! public state and, per player, a 0/1 indicator over its information states
//! marking the ones consistent with past prescriptions. Chance reach is read
//! from the game tree, so a history's posterior weight is its chance reach when
//! all its players' indicators are set, and zero otherwise.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::fosg::{
    ActionId, FiniteGame, GameTree, HistoryId, JointPolicy, ObsCode, Outcome, PublicId, PublicNode, TERMINAL_OBS,
};

/// Default limit on the number of prescription vectors enumerated at one belief.
pub const DEFAULT_PRESCRIPTION_CAP: u64 = 1_000_000;

/// One legal action per row of a public state, rows ordered by
/// `(player, canonical information-state index)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Prescription(pub Vec<ActionId>);

impl Prescription {
    /// Every row set to its first legal action.
    pub fn first_legal(tree: &GameTree, public: PublicId) -> Self {
        let node = tree.public(public);
        Self((0..node.num_rows()).map(|r| row_legal(tree, node, r)[0]).collect())
    }

    pub fn validate(&self, tree: &GameTree, public: PublicId) -> Result<()> {
        let node = tree.public(public);
        if self.0.len() != node.num_rows() {
            return Err(Error::PrescriptionMismatch(format!(
                "{} entries for a public state with {} information states",
                self.0.len(),
                node.num_rows()
            )));
        }
        for (r, &a) in self.0.iter().enumerate() {
            if !row_legal(tree, node, r).contains(&a) {
                let (player, local) = node.row_owner(r);
                return Err(Error::PrescriptionMismatch(format!(
                    "action {a} is illegal for player {player} at information state {local}"
                )));
            }
        }
        Ok(())
    }
}

/// Legal actions of the information state behind `row`.
pub fn row_legal<'a>(tree: &'a GameTree, node: &PublicNode, row: usize) -> &'a [ActionId] {
    let (player, local) = node.row_owner(row);
    &tree.info(player, node.info_states[player][local]).legal
}

/// A belief of the public belief MDP.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PublicBelief {
    /// The current public state, or for terminal beliefs the public state the
    /// game ended from.
    pub public: PublicId,
    pub terminal: bool,
    /// Flat 0/1 indicators aligned with the public state's rows. Empty when terminal.
    pub indicators: Vec<bool>,
}

impl PublicBelief {
    pub fn is_terminal(&self) -> bool {
        self.terminal
    }

    /// Public observation sequence, ending with the terminal observation for terminal beliefs.
    pub fn public_path(&self, tree: &GameTree) -> Vec<ObsCode> {
        let mut path = tree.public_path(self.public);
        if self.terminal {
            path.push(TERMINAL_OBS);
        }
        path
    }

    /// Indicators of one player.
    pub fn player_indicators<'a>(&'a self, tree: &GameTree, player: usize) -> &'a [bool] {
        if self.terminal {
            return &[];
        }
        let node = tree.public(self.public);
        &self.indicators[node.offsets[player]..node.offsets[player + 1]]
    }

    /// Positions in the public set of histories with all indicators set and
    /// positive chance reach, with their chance reach.
    fn support(&self, tree: &GameTree) -> Vec<(usize, f64)> {
        let node = tree.public(self.public);
        node.histories
            .iter()
            .enumerate()
            .filter_map(|(k, &h)| {
                let consistent = node.history_local[k]
                    .iter()
                    .enumerate()
                    .all(|(i, &local)| self.indicators[node.row(i, local as usize)]);
                let reach = tree.history(h).chance_reach;
                (consistent && reach > 0.0).then_some((k, reach))
            })
            .collect()
    }

    pub fn key(&self, tree: &GameTree) -> BeliefKey {
        BeliefKey::new(self, tree)
    }
}

/// Canonical byte encoding of a belief: the public path length as a `u16`,
/// each public observation code as a `u16` (both big-endian), then for each
/// player its indicator bits, most significant bit first, padded with zeros to
/// a whole byte. Terminal beliefs carry no indicator bytes. The length prefix
/// keeps the encoding prefix-free across public states of different depths.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BeliefKey(pub Box<[u8]>);

impl BeliefKey {
    pub fn new(belief: &PublicBelief, tree: &GameTree) -> Self {
        let path = belief.public_path(tree);
        let mut bytes = Vec::with_capacity(2 + 2 * path.len() + belief.indicators.len() / 8 + 2);
        bytes.extend_from_slice(&(path.len() as u16).to_be_bytes());
        for obs in &path {
            bytes.extend_from_slice(&obs.to_be_bytes());
        }
        if !belief.terminal {
            for i in 0..tree.num_players() {
                for chunk in belief.player_indicators(tree, i).chunks(8) {
                    let byte = chunk
                        .iter()
                        .enumerate()
                        .fold(0u8, |acc, (b, &set)| acc | (u8::from(set) << (7 - b)));
                    bytes.push(byte);
                }
            }
        }
        Self(bytes.into_boxed_slice())
    }
}

impl fmt::Debug for BeliefKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.0.iter() {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

/// The public state a forced step leads to: every row has a single legal
/// action, there is exactly one public observation, no terminal outcome and no
/// reward. Such steps carry no decision and no information for the coordinator.
fn forced_successor(tree: &GameTree, public: PublicId) -> Option<PublicId> {
    let node = tree.public(public);
    if node.terminal_child || node.children.len() != 1 {
        return None;
    }
    if (0..node.num_rows()).any(|r| row_legal(tree, node, r).len() != 1) {
        return None;
    }
    let child = *node.children.values().next()?;
    let rewardless = tree
        .public(child)
        .histories
        .iter()
        .all(|&h| tree.history(h).step_reward == 0.0);
    rewardless.then_some(child)
}

/// The belief the coordinator starts from: all indicators set, positioned
/// after any leading forced steps (such as the initial deal).
pub fn initial_belief(game: &FiniteGame) -> PublicBelief {
    let tree = game.tree();
    let mut public = tree.root_public();
    while let Some(next) = forced_successor(tree, public) {
        public = next;
    }
    PublicBelief {
        public,
        terminal: false,
        indicators: vec![true; tree.public(public).num_rows()],
    }
}

/// Posterior over the public set, aligned with the public state's history list.
pub fn reconstruct_history_distribution(game: &FiniteGame, belief: &PublicBelief) -> Result<Vec<(HistoryId, f64)>> {
    if belief.terminal {
        return Err(Error::TerminalBelief);
    }
    let tree = game.tree();
    let node = tree.public(belief.public);
    let support = belief.support(tree);
    let total: f64 = support.iter().map(|&(_, w)| w).sum();
    if total <= 0.0 {
        return Err(Error::EmptySupport);
    }
    let mut out: Vec<(HistoryId, f64)> = node.histories.iter().map(|&h| (h, 0.0)).collect();
    for (k, w) in support {
        out[k].1 = w / total;
    }
    Ok(out)
}

/// One branch of a coordinator step.
#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub obs: ObsCode,
    pub prob: f64,
    pub next: PublicBelief,
}

/// Everything the coordinator's transition `(b, Γ)` produces.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub expected_reward: f64,
    /// Positive-probability public observations in increasing code order.
    pub branches: Vec<Branch>,
}

/// Joint action `Γ(h)` for the `k`-th history of a public state.
pub fn joint_action(node: &PublicNode, gamma: &[ActionId], k: usize, out: &mut Vec<ActionId>) {
    out.clear();
    out.extend(
        node.history_local[k]
            .iter()
            .enumerate()
            .map(|(i, &local)| gamma[node.row(i, local as usize)]),
    );
}

/// Exact expected reward, observation distribution and successor beliefs.
pub fn step(game: &FiniteGame, belief: &PublicBelief, gamma: &Prescription) -> Result<Step> {
    if belief.terminal {
        return Err(Error::TerminalBelief);
    }
    let tree = game.tree();
    gamma.validate(tree, belief.public)?;
    step_unchecked(game, belief, &gamma.0)
}

/// [`step`] without validating the prescription. Used on hot paths where the
/// prescription was produced from the public state's legal actions.
pub fn step_unchecked(game: &FiniteGame, belief: &PublicBelief, gamma: &[ActionId]) -> Result<Step> {
    let tree = game.tree();
    let node = tree.public(belief.public);
    let support = belief.support(tree);
    let total: f64 = support.iter().map(|&(_, w)| w).sum();
    if total <= 0.0 {
        return Err(Error::EmptySupport);
    }
    let mut joint = Vec::with_capacity(game.num_players());
    let mut outcomes: Vec<Outcome> = Vec::new();
    let mut expected_reward = 0.0;
    let mut mass: BTreeMap<ObsCode, f64> = BTreeMap::new();
    for (k, w) in support {
        joint_action(node, gamma, k, &mut joint);
        let world = tree.history(node.histories[k]).world;
        game.transition(world, &joint, &mut outcomes);
        let p = w / total;
        for o in &outcomes {
            let m = p * o.prob;
            expected_reward += m * o.reward;
            *mass.entry(o.public).or_insert(0.0) += m;
        }
    }
    let branches = mass
        .into_iter()
        .map(|(obs, prob)| Branch {
            obs,
            prob,
            next: successor(tree, belief, gamma, obs),
        })
        .collect();
    Ok(Step {
        expected_reward,
        branches,
    })
}

/// Successor belief after observing `obs`; assumes `obs` has positive probability.
pub(crate) fn successor(tree: &GameTree, belief: &PublicBelief, gamma: &[ActionId], obs: ObsCode) -> PublicBelief {
    if obs == TERMINAL_OBS {
        return PublicBelief {
            public: belief.public,
            terminal: true,
            indicators: Vec::new(),
        };
    }
    let node = tree.public(belief.public);
    let child = node.children[&obs];
    let child_node = tree.public(child);
    let mut indicators = Vec::with_capacity(child_node.num_rows());
    for (i, states) in child_node.info_states.iter().enumerate() {
        for &s in states {
            let info = tree.info(i, s);
            let parent = info.parent.expect("non-root information state has a parent");
            let row = node.row(i, tree.info(i, parent).local);
            indicators.push(belief.indicators[row] && info.action == Some(gamma[row]));
        }
    }
    PublicBelief {
        public: child,
        terminal: false,
        indicators,
    }
}

pub fn expected_reward(game: &FiniteGame, belief: &PublicBelief, gamma: &Prescription) -> Result<f64> {
    Ok(step(game, belief, gamma)?.expected_reward)
}

pub fn observation_distribution(
    game: &FiniteGame,
    belief: &PublicBelief,
    gamma: &Prescription,
) -> Result<Vec<(ObsCode, f64)>> {
    Ok(step(game, belief, gamma)?
        .branches
        .into_iter()
        .map(|b| (b.obs, b.prob))
        .collect())
}

pub fn next_belief(
    game: &FiniteGame,
    belief: &PublicBelief,
    gamma: &Prescription,
    obs: ObsCode,
) -> Result<PublicBelief> {
    step(game, belief, gamma)?
        .branches
        .into_iter()
        .find(|b| b.obs == obs)
        .map(|b| b.next)
        .ok_or(Error::ZeroProbabilityObservation(obs))
}

/// Number of prescription vectors at a belief, saturating at `u64::MAX`.
/// With `consistent_only`, rows ruled out by the indicators count as one choice.
pub fn prescription_count(tree: &GameTree, belief: &PublicBelief, consistent_only: bool) -> u64 {
    if belief.terminal {
        return 0;
    }
    let node = tree.public(belief.public);
    (0..node.num_rows())
        .map(|r| {
            if consistent_only && !belief.indicators[r] {
                1
            } else {
                row_legal(tree, node, r).len() as u64
            }
        })
        .fold(1u64, |acc, n| acc.saturating_mul(n))
}

/// Every prescription vector at `belief` in lexicographic order of the flat
/// row layout (row 0 most significant).
pub fn enumerate_prescription_vectors(game: &FiniteGame, belief: &PublicBelief, cap: u64) -> Result<Vec<Prescription>> {
    enumerate(game, belief, cap, false)
}

/// Like [`enumerate_prescription_vectors`], but rows whose information state is
/// ruled out by the belief stay at their first legal action. Ruled-out rows
/// never influence rewards or successor beliefs, so this loses nothing for
/// planning.
pub fn enumerate_consistent_prescriptions(
    game: &FiniteGame,
    belief: &PublicBelief,
    cap: u64,
) -> Result<Vec<Prescription>> {
    enumerate(game, belief, cap, true)
}

fn enumerate(game: &FiniteGame, belief: &PublicBelief, cap: u64, consistent_only: bool) -> Result<Vec<Prescription>> {
    if belief.terminal {
        return Err(Error::TerminalBelief);
    }
    let tree = game.tree();
    let count = prescription_count(tree, belief, consistent_only);
    if count > cap {
        return Err(Error::CapExceeded {
            what: "prescription vectors",
            cap,
        });
    }
    let node = tree.public(belief.public);
    let choices: Vec<&[ActionId]> = (0..node.num_rows())
        .map(|r| {
            let legal = row_legal(tree, node, r);
            if consistent_only && !belief.indicators[r] {
                &legal[..1]
            } else {
                legal
            }
        })
        .collect();
    let mut out = Vec::with_capacity(count as usize);
    let mut pos = vec![0usize; choices.len()];
    loop {
        out.push(Prescription(pos.iter().zip(&choices).map(|(&p, c)| c[p]).collect()));
        // Odometer with the last row varying fastest.
        let mut r = choices.len();
        loop {
            if r == 0 {
                return Ok(out);
            }
            r -= 1;
            pos[r] += 1;
            if pos[r] < choices[r].len() {
                break;
            }
            pos[r] = 0;
        }
    }
}

/// Turns a coordinator policy into a decentralized joint policy by following
/// every public branch from the initial belief. Each reachable public state is
/// met by exactly one belief, so each information state gets one action;
/// information states never met keep their first legal action.
pub fn decentralize(
    game: &FiniteGame,
    mut choose: impl FnMut(&PublicBelief) -> Result<Prescription>,
) -> Result<JointPolicy> {
    let tree = game.tree();
    let mut policy = JointPolicy::first_legal(game);
    let mut stack = vec![initial_belief(game)];
    while let Some(belief) = stack.pop() {
        let gamma = choose(&belief)?;
        gamma.validate(tree, belief.public)?;
        let node = tree.public(belief.public);
        for (r, &a) in gamma.0.iter().enumerate() {
            let (player, local) = node.row_owner(r);
            policy.set_action(game, player, node.info_states[player][local], a);
        }
        for branch in step_unchecked(game, &belief, &gamma.0)?.branches {
            if !branch.next.terminal {
                stack.push(branch.next);
            }
        }
    }
    Ok(policy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo::load_game;

    #[test]
    fn initial_belief_skips_the_deal() {
        let game = load_game("tiny_hanabi:A").unwrap();
        let b = initial_belief(&game);
        assert_eq!(b.public_path(game.tree()), vec![0, 2]);
        assert_eq!(b.indicators, vec![true; 4]);
        let dist = reconstruct_history_distribution(&game, &b).unwrap();
        assert_eq!(dist.len(), 4);
        assert!(dist.iter().all(|&(_, p)| p == 0.25));
    }

    #[test]
    fn key_layout() {
        let game = load_game("tiny_hanabi:A").unwrap();
        let b = initial_belief(&game);
        let key = b.key(game.tree());
        assert_eq!(&*key.0, &[0, 2, 0, 0, 0, 2, 0b1100_0000, 0b1100_0000]);
    }

    #[test]
    fn lexicographic_enumeration() {
        let game = load_game("tiny_hanabi:A").unwrap();
        let b = initial_belief(&game);
        let all = enumerate_prescription_vectors(&game, &b, 100).unwrap();
        let rows: Vec<Vec<ActionId>> = all.iter().map(|p| p.0.clone()).collect();
        assert_eq!(
            rows,
            vec![vec![0, 0, 0, 0], vec![0, 1, 0, 0], vec![1, 0, 0, 0], vec![1, 1, 0, 0]]
        );
        assert!(matches!(
            enumerate_prescription_vectors(&game, &b, 3),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn invalid_prescriptions_are_rejected() {
        let game = load_game("tiny_hanabi:A").unwrap();
        let b = initial_belief(&game);
        for bad in [vec![0, 0, 0], vec![0, 0, 0, 1], vec![2, 0, 0, 0]] {
            assert!(matches!(
                step(&game, &b, &Prescription(bad)),
                Err(Error::PrescriptionMismatch(_))
            ));
        }
    }
}
