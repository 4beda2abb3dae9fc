//! Benchmark games and a name-based registry.
//!
//! Names: `tiny_hanabi:A` through `tiny_hanabi:F`, and
//! `trade_comm:<items>x<utterances>` (for example `trade_comm:12x12`).

pub mod tiny_hanabi;
pub mod trade_comm;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fosg::{Dynamics, FiniteGame, DEFAULT_TREE_CAP};

pub use tiny_hanabi::{TinyHanabi, TinyHanabiSpec, Variant};
pub use trade_comm::{TradeComm, TradeCommSpec};

/// Parses a game name into its dynamics without building the tree.
pub fn dynamics_by_name(name: &str) -> Result<Arc<dyn Dynamics>> {
    let (family, params) = name
        .split_once(':')
        .ok_or_else(|| Error::UnknownGame(name.to_string()))?;
    match family {
        "tiny_hanabi" => Ok(Arc::new(TinyHanabi::new(params.parse()?))),
        "trade_comm" => {
            let (items, utterances) = params
                .split_once('x')
                .ok_or_else(|| Error::UnknownGame(name.to_string()))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::UnknownGame(name.to_string()))
            };
            Ok(Arc::new(TradeComm::new(parse(items)?, parse(utterances)?)?))
        }
        _ => Err(Error::UnknownGame(name.to_string())),
    }
}

pub fn load_game(name: &str) -> Result<FiniteGame> {
    load_game_with_cap(name, DEFAULT_TREE_CAP)
}

pub fn load_game_with_cap(name: &str, cap: usize) -> Result<FiniteGame> {
    FiniteGame::with_cap(dynamics_by_name(name)?, cap)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for name in ["tiny_hanabi:A", "tiny_hanabi:F", "trade_comm:2x1", "trade_comm:12x12"] {
            assert_eq!(dynamics_by_name(name).unwrap().name(), name);
        }
    }

    #[test]
    fn rejects_unknown_names() {
        for name in ["tiny_hanabi:G", "trade_comm:0x3", "trade_comm:3", "chess", "poker:1"] {
            assert!(dynamics_by_name(name).is_err(), "{name}");
        }
    }
}
