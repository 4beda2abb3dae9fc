use std::collections::HashMap;

use smallvec::SmallVec;

use super::{ActionId, Dynamics, ObsCode, Outcome, PlayerId, WorldId, TERMINAL_OBS};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
struct ExplicitWorld {
    terminal: bool,
    legal: Vec<Vec<ActionId>>,
    transitions: HashMap<Vec<ActionId>, Vec<Outcome>>,
}

/// A game given by explicit transition tables. World `0` is `w⁰`.
#[derive(Clone, Debug)]
pub struct ExplicitGame {
    name: String,
    num_players: usize,
    num_actions: Vec<usize>,
    horizon: usize,
    worlds: Vec<ExplicitWorld>,
    public_obs_count: usize,
    bounds: (f64, f64),
}

#[derive(Clone, Debug)]
pub struct ExplicitGameBuilder {
    game: ExplicitGame,
}

impl ExplicitGameBuilder {
    pub fn new(name: &str, num_players: usize, horizon: usize) -> Self {
        Self {
            game: ExplicitGame {
                name: name.to_string(),
                num_players,
                num_actions: vec![1; num_players],
                horizon,
                worlds: Vec::new(),
                public_obs_count: 2,
                bounds: (0.0, 0.0),
            },
        }
    }

    /// Adds a nonterminal world with the given per-player legal actions.
    pub fn world(&mut self, legal: Vec<Vec<ActionId>>) -> WorldId {
        for (i, actions) in legal.iter().enumerate() {
            let top = actions.iter().max().map_or(0, |&a| a as usize + 1);
            self.game.num_actions[i] = self.game.num_actions[i].max(top);
        }
        self.game.worlds.push(ExplicitWorld {
            terminal: false,
            legal,
            transitions: HashMap::new(),
        });
        self.game.worlds.len() - 1
    }

    pub fn terminal(&mut self) -> WorldId {
        self.game.worlds.push(ExplicitWorld {
            terminal: true,
            legal: vec![vec![0]; self.game.num_players],
            transitions: HashMap::new(),
        });
        self.game.worlds.len() - 1
    }

    /// Adds an outcome of `(world, joint)`. Transitions into terminal worlds
    /// get [`TERMINAL_OBS`] automatically; `public` is used otherwise.
    pub fn outcome(
        &mut self,
        world: WorldId,
        joint: &[ActionId],
        next: WorldId,
        prob: f64,
        reward: f64,
        public: ObsCode,
        private: &[ObsCode],
    ) -> &mut Self {
        let public = if self.game.worlds[next].terminal {
            TERMINAL_OBS
        } else {
            public
        };
        self.game.public_obs_count = self.game.public_obs_count.max(public as usize + 1);
        self.game.worlds[world]
            .transitions
            .entry(joint.to_vec())
            .or_default()
            .push(Outcome {
                next,
                prob,
                reward,
                public,
                private: SmallVec::from_slice(private),
            });
        self
    }

    pub fn build(mut self) -> Result<ExplicitGame> {
        if self.game.worlds.is_empty() {
            return Err(Error::InvalidGame("no worlds".into()));
        }
        let mut memo = HashMap::new();
        self.game.bounds = bounds(&self.game, 0, 0, &mut memo)?;
        Ok(self.game)
    }
}

fn bounds(g: &ExplicitGame, w: WorldId, depth: usize, memo: &mut HashMap<WorldId, (f64, f64)>) -> Result<(f64, f64)> {
    if g.worlds[w].terminal {
        return Ok((0.0, 0.0));
    }
    if depth >= g.horizon {
        return Err(Error::HorizonExceeded { horizon: g.horizon });
    }
    if let Some(&b) = memo.get(&w) {
        return Ok(b);
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for outcomes in g.worlds[w].transitions.values() {
        for o in outcomes {
            let (l, h) = bounds(g, o.next, depth + 1, memo)?;
            lo = lo.min(o.reward + l);
            hi = hi.max(o.reward + h);
        }
    }
    if !lo.is_finite() {
        return Err(Error::InvalidGame(format!("world {w} has no transitions")));
    }
    memo.insert(w, (lo, hi));
    Ok((lo, hi))
}

impl Dynamics for ExplicitGame {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn num_players(&self) -> usize {
        self.num_players
    }

    fn num_actions(&self, player: PlayerId) -> usize {
        self.num_actions[player]
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn is_terminal(&self, world: WorldId) -> bool {
        self.worlds[world].terminal
    }

    fn legal_actions(&self, world: WorldId, player: PlayerId) -> Vec<ActionId> {
        self.worlds[world].legal[player].clone()
    }

    fn transition(&self, world: WorldId, joint: &[ActionId], out: &mut Vec<Outcome>) {
        if let Some(outcomes) = self.worlds[world].transitions.get(joint) {
            out.extend(outcomes.iter().cloned());
        }
    }

    fn public_obs_count(&self) -> usize {
        self.public_obs_count
    }

    fn return_bounds(&self) -> (f64, f64) {
        self.bounds
    }
}
