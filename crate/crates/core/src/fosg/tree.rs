use std::collections::{BTreeMap, HashMap};

use smallvec::SmallVec;

use super::{ActionId, Dynamics, ObsCode, Outcome, PlayerId, WorldId, INITIAL_OBS, TERMINAL_OBS};
use crate::error::{Error, Result};

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }
    };
}

id_type!(
    /// Index of a nonterminal history in a [`GameTree`].
    HistoryId
);
id_type!(
    /// Index of a nonterminal public state in a [`GameTree`].
    PublicId
);
id_type!(
    /// Per-player index of an information state in a [`GameTree`].
    InfoId
);

/// Explicit `(w⁰, a⁰, w¹, …, wᵗ)` sequence.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct History {
    pub worlds: Vec<WorldId>,
    pub actions: Vec<Vec<ActionId>>,
}

/// Player `i`'s view `(Oᵢ⁰, aᵢ⁰, …, Oᵢᵗ)`; each observation is a `(private, public)` pair.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InformationState {
    pub player: PlayerId,
    pub observations: Vec<(ObsCode, ObsCode)>,
    pub actions: Vec<ActionId>,
}

impl InformationState {
    pub fn public_state(&self) -> Vec<ObsCode> {
        self.observations.iter().map(|&(_, public)| public).collect()
    }
}

#[derive(Clone, Debug)]
pub struct HistoryNode {
    pub parent: Option<HistoryId>,
    /// Joint action taken at the parent (empty at the root).
    pub action: Box<[ActionId]>,
    pub step_prob: f64,
    pub step_reward: f64,
    pub world: WorldId,
    /// `P_𝒯(h)`.
    pub chance_reach: f64,
    pub public: PublicId,
    pub info: SmallVec<[InfoId; 2]>,
    pub depth: usize,
}

#[derive(Clone, Debug)]
pub struct InfoNode {
    pub parent: Option<InfoId>,
    /// The player's own action that led here from `parent`.
    pub action: Option<ActionId>,
    pub private: ObsCode,
    pub public_obs: ObsCode,
    pub public: PublicId,
    /// Canonical position within the public state's information state set.
    pub local: usize,
    pub legal: Box<[ActionId]>,
    pub children: Vec<InfoId>,
}

#[derive(Clone, Debug)]
pub struct PublicNode {
    pub parent: Option<PublicId>,
    pub obs: ObsCode,
    pub depth: usize,
    /// The public set `I_pub(s)`.
    pub histories: Vec<HistoryId>,
    /// Per history in `histories`, the local information-state index of each player.
    pub history_local: Vec<SmallVec<[u32; 2]>>,
    /// `𝒮ᵢ(s)` in canonical order.
    pub info_states: Vec<Vec<InfoId>>,
    /// Flat row layout: player `i` owns rows `offsets[i]..offsets[i + 1]`.
    pub offsets: Vec<usize>,
    pub children: BTreeMap<ObsCode, PublicId>,
    pub terminal_child: bool,
}

impl PublicNode {
    pub fn num_rows(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    #[inline]
    pub fn row(&self, player: PlayerId, local: usize) -> usize {
        self.offsets[player] + local
    }

    /// Inverse of [`PublicNode::row`].
    pub fn row_owner(&self, row: usize) -> (PlayerId, usize) {
        let player = self.offsets.partition_point(|&o| o <= row) - 1;
        (player, row - self.offsets[player])
    }
}

type InfoKey = (Option<InfoId>, ActionId, ObsCode, ObsCode);

/// All nonterminal histories, public states and information states of a game.
///
/// Terminal histories are not materialized; transitions into them are
/// recomputed from the dynamics when needed.
#[derive(Clone, Debug)]
pub struct GameTree {
    num_players: usize,
    radix: Vec<u64>,
    histories: Vec<HistoryNode>,
    infos: Vec<Vec<InfoNode>>,
    publics: Vec<PublicNode>,
    child_index: HashMap<(HistoryId, u64, WorldId), HistoryId>,
}

impl GameTree {
    pub fn build(d: &dyn Dynamics, cap: usize) -> Result<Self> {
        let n = d.num_players();
        if n == 0 {
            return Err(Error::InvalidGame("no players".into()));
        }
        let w0 = d.initial_world();
        if d.is_terminal(w0) {
            return Err(Error::InvalidGame("initial world is terminal".into()));
        }
        let horizon = d.horizon();
        let radix: Vec<u64> = (0..n).map(|i| d.num_actions(i) as u64).collect();

        let mut tree = GameTree {
            num_players: n,
            radix,
            histories: Vec::new(),
            infos: vec![Vec::new(); n],
            publics: Vec::new(),
            child_index: HashMap::new(),
        };
        let mut public_map: HashMap<(Option<PublicId>, ObsCode), PublicId> = HashMap::new();
        let mut info_maps: Vec<HashMap<InfoKey, InfoId>> = vec![HashMap::new(); n];

        let root_public = tree.intern_public(&mut public_map, None, INITIAL_OBS, 0);
        let mut root_info = SmallVec::new();
        for i in 0..n {
            let key = (None, 0, INITIAL_OBS, INITIAL_OBS);
            root_info.push(tree.intern_info(&mut info_maps[i], d, i, key, root_public, w0)?);
        }
        tree.histories.push(HistoryNode {
            parent: None,
            action: Box::new([]),
            step_prob: 1.0,
            step_reward: 0.0,
            world: w0,
            chance_reach: 1.0,
            public: root_public,
            info: root_info,
            depth: 0,
        });
        tree.publics[root_public.index()].histories.push(HistoryId(0));

        let mut outcomes: Vec<Outcome> = Vec::new();
        let mut cursor = 0;
        while cursor < tree.histories.len() {
            let hid = HistoryId(cursor as u32);
            cursor += 1;
            let (world, depth, public, reach) = {
                let h = &tree.histories[hid.index()];
                (h.world, h.depth, h.public, h.chance_reach)
            };
            let info = tree.histories[hid.index()].info.clone();
            let legal: Vec<Box<[ActionId]>> = (0..n).map(|i| tree.infos[i][info[i].index()].legal.clone()).collect();

            let mut joint: Vec<ActionId> = legal.iter().map(|l| l[0]).collect();
            let mut pos = vec![0usize; n];
            loop {
                outcomes.clear();
                d.transition(world, &joint, &mut outcomes);
                let total: f64 = outcomes.iter().map(|o| o.prob).sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidGame(format!(
                        "transition from world {world} under {joint:?} sums to {total}"
                    )));
                }
                for o in &outcomes {
                    if !(o.prob > 0.0) || !o.reward.is_finite() || o.private.len() != n {
                        return Err(Error::InvalidGame(format!(
                            "malformed outcome from world {world}: {o:?}"
                        )));
                    }
                    if depth + 1 > horizon {
                        return Err(Error::HorizonExceeded { horizon });
                    }
                    let terminal = d.is_terminal(o.next);
                    if terminal != (o.public == TERMINAL_OBS) {
                        return Err(Error::InvalidGame(format!(
                            "terminal observation convention violated from world {world} to {}",
                            o.next
                        )));
                    }
                    if !terminal && d.ends_after(world) {
                        return Err(Error::InvalidGame(format!(
                            "world {world} is declared final but has a nonterminal outcome"
                        )));
                    }
                    if terminal {
                        tree.publics[public.index()].terminal_child = true;
                        continue;
                    }
                    if o.public == INITIAL_OBS {
                        return Err(Error::InvalidGame("reserved public observation 0".into()));
                    }
                    let child_public = tree.intern_public(&mut public_map, Some(public), o.public, depth + 1);
                    let mut child_info = SmallVec::new();
                    for i in 0..n {
                        let key = (Some(info[i]), joint[i], o.private[i], o.public);
                        child_info.push(tree.intern_info(&mut info_maps[i], d, i, key, child_public, o.next)?);
                    }
                    let child = HistoryId(tree.histories.len() as u32);
                    let code = tree.joint_code(&joint);
                    if tree.child_index.insert((hid, code, o.next), child).is_some() {
                        return Err(Error::InvalidGame(format!(
                            "duplicate outcome world {} from world {world}",
                            o.next
                        )));
                    }
                    tree.histories.push(HistoryNode {
                        parent: Some(hid),
                        action: joint.clone().into_boxed_slice(),
                        step_prob: o.prob,
                        step_reward: o.reward,
                        world: o.next,
                        chance_reach: reach * o.prob,
                        public: child_public,
                        info: child_info,
                        depth: depth + 1,
                    });
                    tree.publics[child_public.index()].histories.push(child);
                    if tree.histories.len() > cap {
                        return Err(Error::CapExceeded {
                            what: "nonterminal history count",
                            cap: cap as u64,
                        });
                    }
                }
                // Every joint action at such a world ends the game, so there are no
                // nonterminal children to discover beyond the first probe.
                if d.ends_after(world) || !advance(&mut pos, &mut joint, &legal) {
                    break;
                }
            }
        }
        tree.finalize();
        Ok(tree)
    }

    fn intern_public(
        &mut self,
        map: &mut HashMap<(Option<PublicId>, ObsCode), PublicId>,
        parent: Option<PublicId>,
        obs: ObsCode,
        depth: usize,
    ) -> PublicId {
        if let Some(&id) = map.get(&(parent, obs)) {
            return id;
        }
        let id = PublicId(self.publics.len() as u32);
        self.publics.push(PublicNode {
            parent,
            obs,
            depth,
            histories: Vec::new(),
            history_local: Vec::new(),
            info_states: vec![Vec::new(); self.num_players],
            offsets: Vec::new(),
            children: BTreeMap::new(),
            terminal_child: false,
        });
        if let Some(p) = parent {
            self.publics[p.index()].children.insert(obs, id);
        }
        map.insert((parent, obs), id);
        id
    }

    fn intern_info(
        &mut self,
        map: &mut HashMap<InfoKey, InfoId>,
        d: &dyn Dynamics,
        player: PlayerId,
        key: InfoKey,
        public: PublicId,
        world: WorldId,
    ) -> Result<InfoId> {
        let legal = d.legal_actions(world, player);
        if let Some(&id) = map.get(&key) {
            if *self.infos[player][id.index()].legal != *legal {
                return Err(Error::InvalidGame(format!(
                    "player {player} has different legal actions at histories sharing an information state"
                )));
            }
            return Ok(id);
        }
        let num_actions = d.num_actions(player);
        if legal.is_empty()
            || legal.windows(2).any(|w| w[0] >= w[1])
            || legal.iter().any(|&a| a as usize >= num_actions)
        {
            return Err(Error::InvalidGame(format!(
                "player {player} has malformed legal actions {legal:?} at world {world}"
            )));
        }
        let id = InfoId(self.infos[player].len() as u32);
        let (parent, action, private, public_obs) = key;
        self.infos[player].push(InfoNode {
            parent,
            action: parent.map(|_| action),
            private,
            public_obs,
            public,
            local: 0,
            legal: legal.into_boxed_slice(),
            children: Vec::new(),
        });
        map.insert(key, id);
        Ok(id)
    }

    fn finalize(&mut self) {
        let n = self.num_players;
        for i in 0..n {
            for k in 0..self.infos[i].len() {
                if let Some(p) = self.infos[i][k].parent {
                    self.infos[i][p.index()].children.push(InfoId(k as u32));
                }
            }
        }
        // Public states are created parents-first, so parent local indices are final
        // by the time a child public state is ordered.
        for p in 0..self.publics.len() {
            for i in 0..n {
                let mut ids: Vec<InfoId> = self.publics[p]
                    .histories
                    .iter()
                    .map(|h| self.histories[h.index()].info[i])
                    .collect();
                ids.sort_unstable();
                ids.dedup();
                ids.sort_by_key(|id| {
                    let node = &self.infos[i][id.index()];
                    let parent_local = node.parent.map_or(0, |q| self.infos[i][q.index()].local);
                    (parent_local, node.action, node.private)
                });
                for (local, id) in ids.iter().enumerate() {
                    self.infos[i][id.index()].local = local;
                }
                self.publics[p].info_states[i] = ids;
            }
            let mut offsets = vec![0];
            for i in 0..n {
                offsets.push(offsets[i] + self.publics[p].info_states[i].len());
            }
            let locals = self.publics[p]
                .histories
                .iter()
                .map(|h| {
                    self.histories[h.index()]
                        .info
                        .iter()
                        .enumerate()
                        .map(|(i, id)| self.infos[i][id.index()].local as u32)
                        .collect()
                })
                .collect();
            let node = &mut self.publics[p];
            node.offsets = offsets;
            node.history_local = locals;
        }
    }

    pub fn num_players(&self) -> usize {
        self.num_players
    }

    pub fn histories(&self) -> &[HistoryNode] {
        &self.histories
    }

    pub fn history(&self, id: HistoryId) -> &HistoryNode {
        &self.histories[id.index()]
    }

    pub fn publics(&self) -> &[PublicNode] {
        &self.publics
    }

    pub fn public(&self, id: PublicId) -> &PublicNode {
        &self.publics[id.index()]
    }

    pub fn infos(&self, player: PlayerId) -> &[InfoNode] {
        &self.infos[player]
    }

    pub fn info(&self, player: PlayerId, id: InfoId) -> &InfoNode {
        &self.infos[player][id.index()]
    }

    pub fn root(&self) -> HistoryId {
        HistoryId(0)
    }

    pub fn root_public(&self) -> PublicId {
        PublicId(0)
    }

    /// Mixed-radix code of a joint action over the global action spaces.
    pub fn joint_code(&self, joint: &[ActionId]) -> u64 {
        joint
            .iter()
            .zip(&self.radix)
            .rev()
            .fold(0, |acc, (&a, &r)| acc * r + a as u64)
    }

    /// Nonterminal child reached from `parent` by `joint` into `world`.
    pub fn child(&self, parent: HistoryId, joint: &[ActionId], world: WorldId) -> Option<HistoryId> {
        self.child_index.get(&(parent, self.joint_code(joint), world)).copied()
    }

    pub fn public_path(&self, id: PublicId) -> Vec<ObsCode> {
        let mut path = Vec::with_capacity(self.publics[id.index()].depth + 1);
        let mut cur = Some(id);
        while let Some(p) = cur {
            let node = &self.publics[p.index()];
            path.push(node.obs);
            cur = node.parent;
        }
        path.reverse();
        path
    }

    pub fn information_state(&self, player: PlayerId, id: InfoId) -> InformationState {
        let mut observations = Vec::new();
        let mut actions = Vec::new();
        let mut cur = Some(id);
        while let Some(k) = cur {
            let node = &self.infos[player][k.index()];
            observations.push((node.private, node.public_obs));
            if let Some(a) = node.action {
                actions.push(a);
            }
            cur = node.parent;
        }
        observations.reverse();
        actions.reverse();
        InformationState {
            player,
            observations,
            actions,
        }
    }

    pub fn history_path(&self, id: HistoryId) -> History {
        let mut worlds = Vec::new();
        let mut actions = Vec::new();
        let mut cur = Some(id);
        while let Some(h) = cur {
            let node = &self.histories[h.index()];
            worlds.push(node.world);
            if node.parent.is_some() {
                actions.push(node.action.to_vec());
            }
            cur = node.parent;
        }
        worlds.reverse();
        actions.reverse();
        History { worlds, actions }
    }

    /// Public states strictly below `root` (inclusive), in creation order.
    pub fn public_subtree(&self, root: PublicId) -> Vec<PublicId> {
        let mut out = vec![root];
        let mut k = 0;
        while k < out.len() {
            out.extend(self.publics[out[k].index()].children.values().copied());
            k += 1;
        }
        out
    }
}

/// Odometer step over per-player legal lists. Returns `false` after the last combination.
pub(crate) fn advance(pos: &mut [usize], joint: &mut [ActionId], legal: &[Box<[ActionId]>]) -> bool {
    for i in 0..pos.len() {
        pos[i] += 1;
        if pos[i] < legal[i].len() {
            joint[i] = legal[i][pos[i]];
            return true;
        }
        pos[i] = 0;
        joint[i] = legal[i][0];
    }
    false
}
