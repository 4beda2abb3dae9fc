//! Finite common-payoff factored-observation stochastic games.
//!
//! A game is described by a [`Dynamics`] implementation and fully enumerated
//! into a [`GameTree`] when wrapped in a [`FiniteGame`]. Turn-taking games give
//! the non-acting players a single no-op action, so every step is a joint
//! action. Observation codes `0` and `1` are reserved: [`INITIAL_OBS`] is the
//! observation every player holds at `w⁰`, and [`TERMINAL_OBS`] is the public
//! observation emitted by (and only by) transitions into terminal worlds.

mod dump;
mod enumerate;
mod explicit;
mod policy;
mod tree;

use std::fmt;
use std::sync::Arc;

use smallvec::SmallVec;

use crate::error::Result;

pub use dump::dump_game;
pub use enumerate::{enumerate_histories, HistoryEnumeration, HistoryRecord, PublicSet};
pub use explicit::{ExplicitGame, ExplicitGameBuilder};
pub(crate) use policy::sample_index;
pub use policy::{
    evaluate_joint_policy, evaluate_with, reach_contributions, simulate_episode, JointPolicy, ReachContributions,
};
pub use tree::{GameTree, History, HistoryId, HistoryNode, InfoId, InfoNode, InformationState, PublicId, PublicNode};

pub type WorldId = usize;
pub type ActionId = u16;
pub type ObsCode = u16;
pub type PlayerId = usize;

/// Observation held by every player (private and public) at the initial world.
pub const INITIAL_OBS: ObsCode = 0;
/// Public observation of a transition into a terminal world. It never reveals the reward.
pub const TERMINAL_OBS: ObsCode = 1;
/// Private observation produced by steps that reveal nothing privately.
pub const NULL_PRIVATE_OBS: ObsCode = 0;

/// Default limit on the number of nonterminal histories materialized at load.
pub const DEFAULT_TREE_CAP: usize = 5_000_000;

/// One possible result of a transition `(w, a) -> w'`.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub next: WorldId,
    pub prob: f64,
    /// Common reward `R(w, a, w')`.
    pub reward: f64,
    pub public: ObsCode,
    pub private: SmallVec<[ObsCode; 2]>,
}

/// Generative description of a finite game. Implementations must be pure.
pub trait Dynamics: Send + Sync {
    fn name(&self) -> String;
    fn num_players(&self) -> usize;
    /// Size of player `i`'s global action space `𝒜ᵢ`; legal actions are a subset.
    fn num_actions(&self, player: PlayerId) -> usize;
    fn initial_world(&self) -> WorldId {
        0
    }
    /// Maximum number of joint actions in any history.
    fn horizon(&self) -> usize;
    fn is_terminal(&self, world: WorldId) -> bool;
    /// `true` when every joint action at `world` leads only to terminal worlds.
    /// Lets tree construction skip enumerating large final simultaneous steps.
    fn ends_after(&self, _world: WorldId) -> bool {
        false
    }
    fn legal_actions(&self, world: WorldId, player: PlayerId) -> Vec<ActionId>;
    /// Appends the positive-probability outcomes of `(world, joint)` to `out`.
    fn transition(&self, world: WorldId, joint: &[ActionId], out: &mut Vec<Outcome>);
    /// Number of distinct public observation codes, including the reserved ones.
    fn public_obs_count(&self) -> usize;
    /// Lower and upper bound on the return of any episode.
    fn return_bounds(&self) -> (f64, f64);

    fn world_label(&self, world: WorldId) -> String {
        world.to_string()
    }
    fn action_label(&self, _player: PlayerId, action: ActionId) -> String {
        action.to_string()
    }
    fn public_obs_label(&self, obs: ObsCode) -> String {
        match obs {
            INITIAL_OBS => "init".to_string(),
            TERMINAL_OBS => "end".to_string(),
            other => other.to_string(),
        }
    }
}

/// A validated, fully enumerated game.
#[derive(Clone)]
pub struct FiniteGame {
    dynamics: Arc<dyn Dynamics>,
    tree: Arc<GameTree>,
}

impl fmt::Debug for FiniteGame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FiniteGame")
            .field("name", &self.dynamics.name())
            .field("histories", &self.tree.histories().len())
            .field("public_states", &self.tree.publics().len())
            .finish()
    }
}

impl FiniteGame {
    pub fn new<D: Dynamics + 'static>(dynamics: D) -> Result<Self> {
        Self::with_cap(Arc::new(dynamics), DEFAULT_TREE_CAP)
    }

    pub fn with_cap(dynamics: Arc<dyn Dynamics>, cap: usize) -> Result<Self> {
        let tree = GameTree::build(dynamics.as_ref(), cap)?;
        Ok(Self {
            dynamics,
            tree: Arc::new(tree),
        })
    }

    pub fn name(&self) -> String {
        self.dynamics.name()
    }

    pub fn dynamics(&self) -> &dyn Dynamics {
        self.dynamics.as_ref()
    }

    pub fn tree(&self) -> &GameTree {
        &self.tree
    }

    pub fn num_players(&self) -> usize {
        self.dynamics.num_players()
    }

    pub fn horizon(&self) -> usize {
        self.dynamics.horizon()
    }

    pub fn transition(&self, world: WorldId, joint: &[ActionId], out: &mut Vec<Outcome>) {
        out.clear();
        self.dynamics.transition(world, joint, out);
    }

    pub fn info_state(&self, history: HistoryId, player: PlayerId) -> InformationState {
        let id = self.tree.history(history).info[player];
        self.tree.information_state(player, id)
    }

    pub fn public_state(&self, history: HistoryId) -> Vec<ObsCode> {
        self.tree.public_path(self.tree.history(history).public)
    }
}
