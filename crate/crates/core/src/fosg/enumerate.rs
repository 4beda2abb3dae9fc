use std::collections::{BTreeMap, BTreeSet};

use super::{ActionId, Dynamics, History, InformationState, ObsCode, Outcome, INITIAL_OBS};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct HistoryRecord {
    pub history: History,
    pub chance_reach: f64,
    /// Sum of rewards collected along the history.
    pub reward: f64,
    pub terminal: bool,
    pub info: Vec<InformationState>,
}

#[derive(Clone, Debug, Default)]
pub struct PublicSet {
    pub histories: Vec<HistoryRecord>,
    pub info_states: Vec<BTreeSet<InformationState>>,
}

/// Every reachable history, terminal ones included, grouped into public sets.
#[derive(Clone, Debug, Default)]
pub struct HistoryEnumeration {
    pub public_sets: BTreeMap<Vec<ObsCode>, PublicSet>,
}

impl HistoryEnumeration {
    pub fn num_histories(&self) -> usize {
        self.public_sets.values().map(|s| s.histories.len()).sum()
    }

    pub fn terminal_histories(&self) -> impl Iterator<Item = &HistoryRecord> {
        self.public_sets
            .values()
            .flat_map(|s| s.histories.iter())
            .filter(|h| h.terminal)
    }
}

/// Depth-first enumeration straight from the dynamics, independent of
/// [`super::GameTree`]. Intended for small games, golden dumps and cross-checks.
pub fn enumerate_histories(d: &dyn Dynamics, cap: usize) -> Result<HistoryEnumeration> {
    let n = d.num_players();
    let w0 = d.initial_world();
    let root = HistoryRecord {
        history: History {
            worlds: vec![w0],
            actions: Vec::new(),
        },
        chance_reach: 1.0,
        reward: 0.0,
        terminal: d.is_terminal(w0),
        info: (0..n)
            .map(|player| InformationState {
                player,
                observations: vec![(INITIAL_OBS, INITIAL_OBS)],
                actions: Vec::new(),
            })
            .collect(),
    };
    let mut out = HistoryEnumeration::default();
    let mut count = 0usize;
    let mut stack = vec![root];
    let mut outcomes: Vec<Outcome> = Vec::new();
    while let Some(rec) = stack.pop() {
        count += 1;
        if count > cap {
            return Err(Error::CapExceeded {
                what: "history count",
                cap: cap as u64,
            });
        }
        let world = *rec.history.worlds.last().unwrap();
        let depth = rec.history.actions.len();
        let public = rec.info[0].public_state();
        let mut children = Vec::new();
        if !rec.terminal {
            let legal: Vec<Vec<ActionId>> = (0..n).map(|i| d.legal_actions(world, i)).collect();
            for joint in joint_actions(&legal) {
                outcomes.clear();
                d.transition(world, &joint, &mut outcomes);
                for o in &outcomes {
                    if depth + 1 > d.horizon() {
                        return Err(Error::HorizonExceeded { horizon: d.horizon() });
                    }
                    let mut history = rec.history.clone();
                    history.worlds.push(o.next);
                    history.actions.push(joint.clone());
                    let info = rec
                        .info
                        .iter()
                        .enumerate()
                        .map(|(i, s)| {
                            let mut s = s.clone();
                            s.actions.push(joint[i]);
                            s.observations.push((o.private[i], o.public));
                            s
                        })
                        .collect();
                    children.push(HistoryRecord {
                        history,
                        chance_reach: rec.chance_reach * o.prob,
                        reward: rec.reward + o.reward,
                        terminal: d.is_terminal(o.next),
                        info,
                    });
                }
            }
        }
        let set = out.public_sets.entry(public).or_insert_with(|| PublicSet {
            histories: Vec::new(),
            info_states: vec![BTreeSet::new(); n],
        });
        for (i, s) in rec.info.iter().enumerate() {
            set.info_states[i].insert(s.clone());
        }
        set.histories.push(rec);
        // Reverse so the stack pops children in generation order.
        stack.extend(children.into_iter().rev());
    }
    Ok(out)
}

/// All joint actions over per-player legal lists; player 0 varies fastest.
pub(crate) fn joint_actions(legal: &[Vec<ActionId>]) -> Vec<Vec<ActionId>> {
    let mut out = vec![Vec::with_capacity(legal.len())];
    for actions in legal {
        out = actions
            .iter()
            .flat_map(|&a| {
                out.iter().map(move |prefix| {
                    let mut v = prefix.clone();
                    v.push(a);
                    v
                })
            })
            .collect();
    }
    out
}
