//! JSON checkpoints of a learner's tables and network parameters.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{CapiConfig, CapiState, NetworkModel, TablePolicy, TableValue};
use crate::error::{Error, Result};
use crate::fosg::{FiniteGame, PublicId};
use crate::pubmdp::BeliefKey;

pub const CHECKPOINT_VERSION: u32 = 1;

/// SHA-256 of the configuration's JSON form, hex encoded.
pub fn config_hash(config: &CapiConfig) -> String {
    let json = serde_json::to_vec(config).expect("config serializes");
    Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub game: String,
    pub config_hash: String,
    pub config: CapiConfig,
    pub episodes: u64,
    pub greedy_seed: u64,
    /// `(public state id, rows)`, sorted by id.
    pub policy_table: Vec<(u32, Vec<Vec<f64>>)>,
    pub default_value: f64,
    /// `(hex belief key, value)`, sorted by key.
    pub value_table: Vec<(String, f64)>,
    pub network: Option<NetworkModel>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn unhex(s: &str) -> Result<Vec<u8>> {
    if s.len() % 2 != 0 {
        return Err(Error::Malformed(format!("odd-length hex key {s:?}")));
    }
    (0..s.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&s[i..i + 2], 16).map_err(|_| Error::Malformed(format!("bad hex key {s:?}"))))
        .collect()
}

impl Checkpoint {
    pub fn capture(game: &FiniteGame, state: &CapiState) -> Self {
        let mut policy_table: Vec<(u32, Vec<Vec<f64>>)> = state
            .policy_table
            .entries
            .iter()
            .map(|(id, rows)| (id.0, rows.clone()))
            .collect();
        policy_table.sort_by_key(|(id, _)| *id);
        let mut value_table: Vec<(String, f64)> =
            state.value_table.entries.iter().map(|(k, v)| (hex(&k.0), *v)).collect();
        value_table.sort_by(|a, b| a.0.cmp(&b.0));
        Self {
            version: CHECKPOINT_VERSION,
            game: game.name(),
            config_hash: config_hash(&state.config),
            config: state.config.clone(),
            episodes: state.episodes,
            greedy_seed: state.greedy_seed,
            policy_table,
            default_value: state.value_table.default,
            value_table,
            network: state.network.clone(),
        }
    }

    /// Rebuilds the learner. Fails on a version, game or configuration hash mismatch.
    pub fn restore(&self, game: &FiniteGame) -> Result<CapiState> {
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Malformed(format!("checkpoint version {}", self.version)));
        }
        if self.game != game.name() {
            return Err(Error::Malformed(format!(
                "checkpoint is for {}, not {}",
                self.game,
                game.name()
            )));
        }
        if self.config_hash != config_hash(&self.config) {
            return Err(Error::Malformed("checkpoint configuration hash mismatch".into()));
        }
        let mut state = CapiState::new(game, self.config.clone(), 0)?;
        state.episodes = self.episodes;
        state.greedy_seed = self.greedy_seed;
        state.policy_table = TablePolicy {
            entries: self
                .policy_table
                .iter()
                .map(|(id, rows)| (PublicId(*id), rows.clone()))
                .collect(),
        };
        let mut value = TableValue::new(self.default_value);
        for (k, v) in &self.value_table {
            value.entries.insert(BeliefKey(unhex(k)?.into_boxed_slice()), *v);
        }
        state.value_table = value;
        state.network = self.network.clone();
        Ok(state)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(self)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}
