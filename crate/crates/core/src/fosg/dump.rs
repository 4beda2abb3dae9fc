use std::fmt::Write;

use super::{enumerate_histories, Dynamics};
use crate::error::Result;

/// Canonical text dump of every history, one per line, sorted by world path
/// then joint actions:
///
/// `worlds=0,2,6 actions=0.0;1.0 public=0,2,3 private=0.0;1.2;0.0 reward=0 chance=0.25 terminal=0`
///
/// Joint actions and per-step private observations list players separated by `.`.
pub fn dump_game(d: &dyn Dynamics, cap: usize) -> Result<String> {
    let enumeration = enumerate_histories(d, cap)?;
    let mut records: Vec<_> = enumeration
        .public_sets
        .values()
        .flat_map(|s| s.histories.iter())
        .collect();
    records.sort_by(|a, b| (&a.history.worlds, &a.history.actions).cmp(&(&b.history.worlds, &b.history.actions)));
    let join = |xs: &[u16]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(".");
    let mut out = String::new();
    for r in records {
        let worlds: Vec<String> = r.history.worlds.iter().map(|w| w.to_string()).collect();
        let actions: Vec<String> = r.history.actions.iter().map(|a| join(a)).collect();
        let steps = r.history.worlds.len();
        let public: Vec<String> = (0..steps).map(|t| r.info[0].observations[t].1.to_string()).collect();
        let private: Vec<String> = (0..steps)
            .map(|t| {
                let obs: Vec<u16> = r.info.iter().map(|s| s.observations[t].0).collect();
                join(&obs)
            })
            .collect();
        writeln!(
            out,
            "worlds={} actions={} public={} private={} reward={} chance={} terminal={}",
            worlds.join(","),
            actions.join(";"),
            public.join(","),
            private.join(";"),
            r.reward,
            r.chance_reach,
            u8::from(r.terminal)
        )
        .expect("writing to a String cannot fail");
    }
    Ok(out)
}
