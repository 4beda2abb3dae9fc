//! The six Tiny Hanabi games.
//!
//! Chance deals one card to each player from separate piles, player one acts
//! (the action is public), then player two acts and the game ends with a payoff
//! read from a `(card₁, action₁, card₂, action₂)` table.

use std::fmt;
use std::str::FromStr;

use smallvec::smallvec;

use crate::error::{Error, Result};
use crate::fosg::{ActionId, Dynamics, ObsCode, Outcome, PlayerId, WorldId, TERMINAL_OBS};

/// Public observation of the deal.
pub const DEAL_OBS: ObsCode = 2;
const FIRST_ACTION_OBS: ObsCode = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    A,
    B,
    C,
    D,
    E,
    F,
}

impl Variant {
    pub const ALL: [Variant; 6] = [Variant::A, Variant::B, Variant::C, Variant::D, Variant::E, Variant::F];
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(Variant::A),
            "B" | "b" => Ok(Variant::B),
            "C" | "c" => Ok(Variant::C),
            "D" | "d" => Ok(Variant::D),
            "E" | "e" => Ok(Variant::E),
            "F" | "f" => Ok(Variant::F),
            other => Err(Error::UnknownGame(format!("tiny_hanabi:{other}"))),
        }
    }
}

#[rustfmt::skip]
const GAME_A: [f64; 16] = [
    0., 1., 0., 1.,
    0., 0., 3., 2.,
    3., 3., 2., 0.,
    3., 2., 3., 3.,
];
#[rustfmt::skip]
const GAME_B: [f64; 16] = [
    1., 0., 0., 1.,
    1., 0., 0., 1.,
    0., 1., 1., 0.,
    0., 0., 1., 0.,
];
#[rustfmt::skip]
const GAME_C: [f64; 16] = [
    3., 0., 2., 0.,
    0., 3., 3., 3.,
    2., 2., 0., 1.,
    3., 0., 0., 2.,
];
#[rustfmt::skip]
const GAME_D: [f64; 16] = [
    3., 0., 3., 0.,
    1., 3., 3., 0.,
    3., 2., 0., 1.,
    0., 2., 0., 0.,
];
#[rustfmt::skip]
const GAME_E: [f64; 36] = [
    10., 0., 0.,  0., 0., 10.,
     4., 8., 4.,  4., 8.,  4.,
    10., 0., 0.,  0., 0., 10.,
     0., 0., 10., 10., 0., 0.,
     4., 8., 4.,  4., 8.,  4.,
     0., 0., 0., 10., 0.,  0.,
];
#[rustfmt::skip]
const GAME_F: [f64; 36] = [
    0., 3.,  0., 0.,  3., 1.,
    3., 2.,  0., 1.,  2., 1.,
    0., 2.,  1., 2.,  0., 1.,
    0., 1.,  1., 2.,  0., 3.,
    1., 3.,  0., 3.,  3., 1.,
    1., 2.,  2., 2.,  3., 0.,
];

/// Payoff table of one variant. Rows are `(card₁, action₁)` and columns
/// `(card₂, action₂)`, both card-major, matching the published layout.
#[derive(Clone, Debug, PartialEq)]
pub struct TinyHanabiSpec {
    pub variant: Variant,
    pub num_cards: usize,
    pub num_actions: usize,
    payoffs: Vec<f64>,
}

impl TinyHanabiSpec {
    pub fn new(variant: Variant) -> Self {
        let (num_cards, num_actions, table): (usize, usize, &[f64]) = match variant {
            Variant::A => (2, 2, &GAME_A),
            Variant::B => (2, 2, &GAME_B),
            Variant::C => (2, 2, &GAME_C),
            Variant::D => (2, 2, &GAME_D),
            Variant::E => (2, 3, &GAME_E),
            Variant::F => (3, 2, &GAME_F),
        };
        debug_assert_eq!(table.len(), (num_cards * num_actions).pow(2));
        Self {
            variant,
            num_cards,
            num_actions,
            payoffs: table.to_vec(),
        }
    }

    pub fn payoff(&self, card1: usize, action1: usize, card2: usize, action2: usize) -> f64 {
        let row = card1 * self.num_actions + action1;
        let col = card2 * self.num_actions + action2;
        self.payoffs[row * self.num_cards * self.num_actions + col]
    }

    /// The table as text, one `(card₁, action₁)` row per line.
    pub fn render(&self) -> String {
        let numerals = ["I", "II", "III"];
        let lower = ["a", "b", "c"];
        let upper = ["A", "B", "C"];
        let mut out = format!("game {}\ncard action", self.variant);
        for c2 in 0..self.num_cards {
            for a2 in 0..self.num_actions {
                out.push_str(&format!(" {}{}", numerals[c2].to_lowercase(), lower[a2]));
            }
        }
        out.push('\n');
        for c1 in 0..self.num_cards {
            for a1 in 0..self.num_actions {
                out.push_str(&format!("{} {}", numerals[c1], upper[a1]));
                for c2 in 0..self.num_cards {
                    for a2 in 0..self.num_actions {
                        out.push_str(&format!(" {}", self.payoff(c1, a1, c2, a2)));
                    }
                }
                out.push('\n');
            }
        }
        out
    }
}

/// World layout: `0` is `w⁰`, `1` the terminal world, then one world per deal,
/// then one per `(deal, action₁)`.
#[derive(Clone, Debug)]
pub struct TinyHanabi {
    spec: TinyHanabiSpec,
}

enum Stage {
    Start,
    Terminal,
    Dealt { card1: usize, card2: usize },
    Acted { card1: usize, card2: usize, action1: usize },
}

impl TinyHanabi {
    pub fn new(variant: Variant) -> Self {
        Self {
            spec: TinyHanabiSpec::new(variant),
        }
    }

    pub fn spec(&self) -> &TinyHanabiSpec {
        &self.spec
    }

    fn deals(&self) -> usize {
        self.spec.num_cards * self.spec.num_cards
    }

    fn dealt_world(&self, card1: usize, card2: usize) -> WorldId {
        2 + card1 * self.spec.num_cards + card2
    }

    fn acted_world(&self, card1: usize, card2: usize, action1: usize) -> WorldId {
        2 + self.deals() + (card1 * self.spec.num_cards + card2) * self.spec.num_actions + action1
    }

    fn stage(&self, world: WorldId) -> Stage {
        let nc = self.spec.num_cards;
        match world {
            0 => Stage::Start,
            1 => Stage::Terminal,
            w if w < 2 + self.deals() => {
                let deal = w - 2;
                Stage::Dealt {
                    card1: deal / nc,
                    card2: deal % nc,
                }
            }
            w => {
                let k = w - 2 - self.deals();
                let deal = k / self.spec.num_actions;
                Stage::Acted {
                    card1: deal / nc,
                    card2: deal % nc,
                    action1: k % self.spec.num_actions,
                }
            }
        }
    }
}

impl Dynamics for TinyHanabi {
    fn name(&self) -> String {
        format!("tiny_hanabi:{}", self.spec.variant)
    }

    fn num_players(&self) -> usize {
        2
    }

    fn num_actions(&self, _player: PlayerId) -> usize {
        self.spec.num_actions
    }

    fn horizon(&self) -> usize {
        3
    }

    fn is_terminal(&self, world: WorldId) -> bool {
        world == 1
    }

    fn legal_actions(&self, world: WorldId, player: PlayerId) -> Vec<ActionId> {
        let all = || (0..self.spec.num_actions as ActionId).collect();
        match (self.stage(world), player) {
            (Stage::Dealt { .. }, 0) | (Stage::Acted { .. }, 1) => all(),
            _ => vec![0],
        }
    }

    fn transition(&self, world: WorldId, joint: &[ActionId], out: &mut Vec<Outcome>) {
        match self.stage(world) {
            Stage::Start => {
                let prob = 1.0 / self.deals() as f64;
                for card1 in 0..self.spec.num_cards {
                    for card2 in 0..self.spec.num_cards {
                        out.push(Outcome {
                            next: self.dealt_world(card1, card2),
                            prob,
                            reward: 0.0,
                            public: DEAL_OBS,
                            private: smallvec![1 + card1 as ObsCode, 1 + card2 as ObsCode],
                        });
                    }
                }
            }
            Stage::Dealt { card1, card2 } => {
                let action1 = joint[0] as usize;
                out.push(Outcome {
                    next: self.acted_world(card1, card2, action1),
                    prob: 1.0,
                    reward: 0.0,
                    public: FIRST_ACTION_OBS + joint[0],
                    private: smallvec![0, 0],
                });
            }
            Stage::Acted { card1, card2, action1 } => out.push(Outcome {
                next: 1,
                prob: 1.0,
                reward: self.spec.payoff(card1, action1, card2, joint[1] as usize),
                public: TERMINAL_OBS,
                private: smallvec![0, 0],
            }),
            Stage::Terminal => {}
        }
    }

    fn public_obs_count(&self) -> usize {
        FIRST_ACTION_OBS as usize + self.spec.num_actions
    }

    fn return_bounds(&self) -> (f64, f64) {
        let lo = self.spec.payoffs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.spec.payoffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo.min(0.0), hi)
    }

    fn world_label(&self, world: WorldId) -> String {
        match self.stage(world) {
            Stage::Start => "start".into(),
            Stage::Terminal => "end".into(),
            Stage::Dealt { card1, card2 } => format!("deal({card1},{card2})"),
            Stage::Acted { card1, card2, action1 } => format!("acted({card1},{card2},{action1})"),
        }
    }

    fn action_label(&self, player: PlayerId, action: ActionId) -> String {
        let letters = ["a", "b", "c"];
        let l = letters[action as usize];
        if player == 0 {
            l.to_uppercase()
        } else {
            l.to_string()
        }
    }

    fn public_obs_label(&self, obs: ObsCode) -> String {
        match obs {
            0 => "init".into(),
            1 => "end".into(),
            DEAL_OBS => "deal".into(),
            a => self.action_label(0, a - FIRST_ACTION_OBS),
        }
    }
}
