//! Trade Comm: each player is dealt an item, both make one public utterance in
//! turn, then both privately and simultaneously request a trade. The trade
//! succeeds (reward 1) only when each player offers its own item for the
//! other's.

use smallvec::smallvec;

use crate::error::{Error, Result};
use crate::fosg::{ActionId, Dynamics, FiniteGame, JointPolicy, ObsCode, Outcome, PlayerId, WorldId, TERMINAL_OBS};

pub const DEAL_OBS: ObsCode = 2;
const FIRST_UTTERANCE_OBS: ObsCode = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TradeCommSpec {
    pub num_items: usize,
    pub num_utterances: usize,
}

impl TradeCommSpec {
    pub fn new(num_items: usize, num_utterances: usize) -> Result<Self> {
        if num_items == 0 || num_utterances == 0 {
            return Err(Error::InvalidParameters(format!(
                "trade_comm needs at least one item and one utterance, got {num_items}x{num_utterances}"
            )));
        }
        if num_items * num_items > ActionId::MAX as usize
            || num_utterances + FIRST_UTTERANCE_OBS as usize > ObsCode::MAX as usize
        {
            return Err(Error::InvalidParameters("trade_comm is too large".into()));
        }
        Ok(Self {
            num_items,
            num_utterances,
        })
    }

    /// Action id of the request "give `give`, receive `get`".
    pub fn trade(&self, give: usize, get: usize) -> ActionId {
        (give * self.num_items + get) as ActionId
    }

    pub fn trade_parts(&self, action: ActionId) -> (usize, usize) {
        let a = action as usize;
        (a / self.num_items, a % self.num_items)
    }
}

#[derive(Clone, Debug)]
pub struct TradeComm {
    spec: TradeCommSpec,
}

enum Stage {
    Start,
    Terminal,
    Dealt { items: (usize, usize) },
    Spoke1 { items: (usize, usize), u1: usize },
    Spoke2 { items: (usize, usize) },
}

impl TradeComm {
    pub fn new(num_items: usize, num_utterances: usize) -> Result<Self> {
        Ok(Self {
            spec: TradeCommSpec::new(num_items, num_utterances)?,
        })
    }

    pub fn spec(&self) -> TradeCommSpec {
        self.spec
    }

    fn deals(&self) -> usize {
        self.spec.num_items * self.spec.num_items
    }

    fn deal_index(&self, items: (usize, usize)) -> usize {
        items.0 * self.spec.num_items + items.1
    }

    fn stage(&self, world: WorldId) -> Stage {
        let n = self.spec.num_items;
        let u = self.spec.num_utterances;
        let deals = self.deals();
        let split = |d: usize| (d / n, d % n);
        match world {
            0 => Stage::Start,
            1 => Stage::Terminal,
            w if w < 2 + deals => Stage::Dealt { items: split(w - 2) },
            w if w < 2 + deals + deals * u => {
                let k = w - 2 - deals;
                Stage::Spoke1 {
                    items: split(k / u),
                    u1: k % u,
                }
            }
            w => {
                let k = w - 2 - deals - deals * u;
                Stage::Spoke2 {
                    items: split(k / (u * u)),
                }
            }
        }
    }
}

impl Dynamics for TradeComm {
    fn name(&self) -> String {
        format!("trade_comm:{}x{}", self.spec.num_items, self.spec.num_utterances)
    }

    fn num_players(&self) -> usize {
        2
    }

    fn num_actions(&self, _player: PlayerId) -> usize {
        self.spec.num_utterances.max(self.deals())
    }

    fn horizon(&self) -> usize {
        4
    }

    fn is_terminal(&self, world: WorldId) -> bool {
        world == 1
    }

    fn ends_after(&self, world: WorldId) -> bool {
        matches!(self.stage(world), Stage::Spoke2 { .. })
    }

    fn legal_actions(&self, world: WorldId, player: PlayerId) -> Vec<ActionId> {
        let range = |k: usize| (0..k as ActionId).collect();
        match (self.stage(world), player) {
            (Stage::Dealt { .. }, 0) | (Stage::Spoke1 { .. }, 1) => range(self.spec.num_utterances),
            (Stage::Spoke2 { .. }, _) => range(self.deals()),
            _ => vec![0],
        }
    }

    fn transition(&self, world: WorldId, joint: &[ActionId], out: &mut Vec<Outcome>) {
        let u = self.spec.num_utterances;
        let deals = self.deals();
        match self.stage(world) {
            Stage::Start => {
                let prob = 1.0 / deals as f64;
                for d in 0..deals {
                    let (x, y) = (d / self.spec.num_items, d % self.spec.num_items);
                    out.push(Outcome {
                        next: 2 + d,
                        prob,
                        reward: 0.0,
                        public: DEAL_OBS,
                        private: smallvec![1 + x as ObsCode, 1 + y as ObsCode],
                    });
                }
            }
            Stage::Dealt { items } => {
                let u1 = joint[0] as usize;
                out.push(Outcome {
                    next: 2 + deals + self.deal_index(items) * u + u1,
                    prob: 1.0,
                    reward: 0.0,
                    public: FIRST_UTTERANCE_OBS + joint[0],
                    private: smallvec![0, 0],
                });
            }
            Stage::Spoke1 { items, u1 } => {
                let u2 = joint[1] as usize;
                out.push(Outcome {
                    next: 2 + deals + deals * u + (self.deal_index(items) * u + u1) * u + u2,
                    prob: 1.0,
                    reward: 0.0,
                    public: FIRST_UTTERANCE_OBS + joint[1],
                    private: smallvec![0, 0],
                });
            }
            Stage::Spoke2 { items: (x, y) } => {
                let success = joint[0] == self.spec.trade(x, y) && joint[1] == self.spec.trade(y, x);
                out.push(Outcome {
                    next: 1,
                    prob: 1.0,
                    reward: if success { 1.0 } else { 0.0 },
                    public: TERMINAL_OBS,
                    private: smallvec![0, 0],
                });
            }
            Stage::Terminal => {}
        }
    }

    fn public_obs_count(&self) -> usize {
        FIRST_UTTERANCE_OBS as usize + self.spec.num_utterances
    }

    fn return_bounds(&self) -> (f64, f64) {
        (0.0, 1.0)
    }

    fn world_label(&self, world: WorldId) -> String {
        match self.stage(world) {
            Stage::Start => "start".into(),
            Stage::Terminal => "end".into(),
            Stage::Dealt { items } => format!("deal{items:?}"),
            Stage::Spoke1 { items, u1 } => format!("deal{items:?} u1={u1}"),
            Stage::Spoke2 { items } => format!("deal{items:?} spoken"),
        }
    }

    fn public_obs_label(&self, obs: ObsCode) -> String {
        match obs {
            0 => "init".into(),
            1 => "end".into(),
            DEAL_OBS => "deal".into(),
            k => format!("utter{}", k - FIRST_UTTERANCE_OBS),
        }
    }
}

/// The policy that announces its own item and then requests the matching
/// trade. Needs at least as many utterances as items.
pub fn signalling_policy(game: &FiniteGame, spec: TradeCommSpec) -> Result<JointPolicy> {
    if spec.num_utterances < spec.num_items {
        return Err(Error::InvalidParameters(
            "signalling needs num_utterances >= num_items".into(),
        ));
    }
    let tree = game.tree();
    Ok(JointPolicy::deterministic(game, |player, id, legal| {
        let s = tree.information_state(player, id);
        if legal.len() == 1 {
            return legal[0];
        }
        let item = s.observations[1].0 as usize - 1;
        match s.observations.len() {
            // Own utterance turn: announce the item.
            2 | 3 => item as ActionId,
            // Trade step: the partner's utterance is the partner's item.
            _ => {
                let partner = if player == 0 {
                    s.observations[3].1
                } else {
                    s.observations[2].1
                };
                spec.trade(item, (partner - FIRST_UTTERANCE_OBS) as usize)
            }
        }
    }))
}
