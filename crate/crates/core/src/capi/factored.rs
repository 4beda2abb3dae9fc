//! Product distributions over prescription vectors and the three ways of
//! drawing candidate vectors from them.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fosg::{sample_index, ActionId};
use crate::pubmdp::Prescription;

/// One factor of the distribution: a probability row over the legal actions
/// of one information state.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub actions: Vec<ActionId>,
    pub probs: Vec<f64>,
}

impl Row {
    pub fn uniform(actions: Vec<ActionId>) -> Self {
        let p = 1.0 / actions.len() as f64;
        Self {
            probs: vec![p; actions.len()],
            actions,
        }
    }

    /// A row that always plays `action`.
    pub fn fixed(action: ActionId) -> Self {
        Self {
            actions: vec![action],
            probs: vec![1.0],
        }
    }

    pub fn prob(&self, action: ActionId) -> f64 {
        self.actions
            .iter()
            .position(|&a| a == action)
            .map_or(0.0, |k| self.probs[k])
    }
}

/// Probability of `gamma` under the product of `rows`.
pub fn vector_prob(rows: &[Row], gamma: &[ActionId]) -> f64 {
    rows.iter().zip(gamma).map(|(row, &a)| row.prob(a)).product()
}

/// Number of vectors in the support of the product, saturating.
pub fn vector_count(rows: &[Row]) -> u64 {
    rows.iter()
        .fold(1u64, |acc, r| acc.saturating_mul(r.actions.len() as u64))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Acquisition {
    Sample,
    KMostLikely,
    EnumerateAll,
}

impl fmt::Display for Acquisition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Acquisition::Sample => "sample",
            Acquisition::KMostLikely => "k_most_likely",
            Acquisition::EnumerateAll => "enumerate_all",
        })
    }
}

impl FromStr for Acquisition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sample" => Ok(Acquisition::Sample),
            "k_most_likely" => Ok(Acquisition::KMostLikely),
            "enumerate_all" => Ok(Acquisition::EnumerateAll),
            other => Err(Error::InvalidConfig(format!("unknown acquisition mode {other:?}"))),
        }
    }
}

/// Distinct candidate vectors drawn from the product of `rows`.
///
/// `Sample` draws `k` vectors and drops repeats, keeping first occurrences in
/// draw order. `KMostLikely` returns the `k` most probable vectors in
/// decreasing probability (all of them when `k` exceeds the support).
/// `EnumerateAll` ignores `k` and lists the whole support, last row fastest,
/// failing when it is larger than `cap`.
pub fn prescription_vectors<R: Rng + ?Sized>(
    rows: &[Row],
    k: usize,
    mode: Acquisition,
    cap: u64,
    rng: &mut R,
) -> Result<Vec<Prescription>> {
    if k == 0 {
        return Err(Error::InvalidConfig("K must be at least 1".into()));
    }
    match mode {
        Acquisition::Sample => Ok(sample(rows, k, rng)),
        Acquisition::KMostLikely => Ok(k_most_likely(rows, k)),
        Acquisition::EnumerateAll => enumerate_all(rows, cap),
    }
}

fn sample<R: Rng + ?Sized>(rows: &[Row], k: usize, rng: &mut R) -> Vec<Prescription> {
    let mut seen = HashSet::with_capacity(k);
    let mut out = Vec::new();
    for _ in 0..k {
        let gamma: Vec<ActionId> = rows
            .iter()
            .map(|row| row.actions[sample_index(&row.probs, rng)])
            .collect();
        if seen.insert(gamma.clone()) {
            out.push(Prescription(gamma));
        }
    }
    out
}

struct Frontier {
    prob: f64,
    seq: u64,
    pos: Vec<u32>,
}

impl PartialEq for Frontier {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Frontier {}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Frontier {
    // Most probable first; among equals, the one pushed first.
    fn cmp(&self, other: &Self) -> Ordering {
        self.prob.total_cmp(&other.prob).then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Best-first expansion over rows sorted by decreasing probability. A vector
/// of sorted positions is generated only by its unique parent, the vector
/// with its last nonzero position decremented; parents are never less
/// probable than their children, so vectors leave the heap in order.
fn k_most_likely(rows: &[Row], k: usize) -> Vec<Prescription> {
    let order: Vec<Vec<usize>> = rows
        .iter()
        .map(|row| {
            let mut idx: Vec<usize> = (0..row.actions.len()).collect();
            idx.sort_by(|&a, &b| row.probs[b].total_cmp(&row.probs[a]));
            idx
        })
        .collect();
    let prob_of = |pos: &[u32]| -> f64 {
        rows.iter()
            .zip(&order)
            .zip(pos)
            .map(|((row, o), &p)| row.probs[o[p as usize]])
            .product()
    };
    let mut heap = BinaryHeap::new();
    let mut seq = 0;
    let start = vec![0u32; rows.len()];
    heap.push(Frontier {
        prob: prob_of(&start),
        seq,
        pos: start,
    });
    let mut out = Vec::with_capacity(k.min(1 << 20));
    while let Some(Frontier { pos, .. }) = heap.pop() {
        let last_nonzero = pos.iter().rposition(|&p| p > 0).unwrap_or(0);
        for r in last_nonzero..rows.len() {
            if (pos[r] as usize) + 1 < rows[r].actions.len() {
                let mut child = pos.clone();
                child[r] += 1;
                seq += 1;
                heap.push(Frontier {
                    prob: prob_of(&child),
                    seq,
                    pos: child,
                });
            }
        }
        out.push(Prescription(
            pos.iter()
                .enumerate()
                .map(|(r, &p)| rows[r].actions[order[r][p as usize]])
                .collect(),
        ));
        if out.len() == k {
            break;
        }
    }
    out
}

fn enumerate_all(rows: &[Row], cap: u64) -> Result<Vec<Prescription>> {
    let count = vector_count(rows);
    if count > cap {
        return Err(Error::CapExceeded {
            what: "prescription vectors",
            cap,
        });
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut pos = vec![0usize; rows.len()];
    loop {
        out.push(Prescription(
            pos.iter().zip(rows).map(|(&p, row)| row.actions[p]).collect(),
        ));
        let mut r = rows.len();
        loop {
            if r == 0 {
                return Ok(out);
            }
            r -= 1;
            pos[r] += 1;
            if pos[r] < rows[r].actions.len() {
                break;
            }
            pos[r] = 0;
        }
    }
}

/// Mixes `probs` with the uniform distribution just enough that every entry
/// is at least `floor`. Rows already above the floor are left alone.
pub fn apply_floor(probs: &mut [f64], floor: f64) {
    let n = probs.len() as f64;
    let min = probs.iter().copied().fold(f64::INFINITY, f64::min);
    if floor <= 0.0 || min >= floor {
        return;
    }
    let uniform = 1.0 / n;
    let lambda = ((floor - min) / (uniform - min)).clamp(0.0, 1.0);
    for p in probs.iter_mut() {
        *p = (1.0 - lambda) * *p + lambda * uniform;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn row(probs: &[f64]) -> Row {
        Row {
            actions: (0..probs.len() as ActionId).collect(),
            probs: probs.to_vec(),
        }
    }

    #[test]
    fn top_one_is_the_product_of_row_maxima() {
        let rows = [row(&[0.9, 0.1]), row(&[0.2, 0.8])];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let top = prescription_vectors(&rows, 1, Acquisition::KMostLikely, u64::MAX, &mut rng).unwrap();
        assert_eq!(top, vec![Prescription(vec![0, 1])]);
        assert!((vector_prob(&rows, &top[0].0) - 0.72).abs() < 1e-12);
    }

    #[test]
    fn large_k_returns_everything_sorted() {
        let rows = [row(&[0.5, 0.3, 0.2]), row(&[0.6, 0.4]), Row::fixed(3)];
        let all = k_most_likely(&rows, 100);
        assert_eq!(all.len(), 6);
        let probs: Vec<f64> = all.iter().map(|g| vector_prob(&rows, &g.0)).collect();
        assert!(probs.windows(2).all(|w| w[0] >= w[1]));
        assert!(all.iter().all(|g| g.0[2] == 3));
    }

    #[test]
    fn samples_are_distinct() {
        let rows = [row(&[0.5, 0.5]), row(&[0.5, 0.5])];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let got = prescription_vectors(&rows, 50, Acquisition::Sample, 0, &mut rng).unwrap();
        assert_eq!(got.len(), 4);
    }

    #[test]
    fn enumeration_respects_cap() {
        let rows = [row(&[0.5, 0.5]), row(&[0.5, 0.5])];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(prescription_vectors(&rows, 1, Acquisition::EnumerateAll, 3, &mut rng).is_err());
        let all = prescription_vectors(&rows, 1, Acquisition::EnumerateAll, 4, &mut rng).unwrap();
        assert_eq!(all[1], Prescription(vec![0, 1]));
    }

    #[test]
    fn floor_mixing() {
        let mut p = vec![1.0, 0.0, 0.0, 0.0];
        apply_floor(&mut p, 0.01);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&x| x >= 0.01 - 1e-15));
        let mut q = vec![0.4, 0.6];
        apply_floor(&mut q, 0.01);
        assert_eq!(q, vec![0.4, 0.6]);
    }
}
