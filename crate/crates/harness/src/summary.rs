//! Per-algorithm statistics and long-format plot data.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ALGORITHMS};
use crate::error::{HarnessError, Result};

/// A run solves the game when its best value is within this of the optimum.
pub const SOLVE_TOLERANCE: f64 = 1e-9;

pub const STATISTICS: [&str; 5] = ["min", "median", "max", "mean", "solve_rate"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub algorithm: String,
    pub setting: String,
    pub params: serde_json::Value,
    pub episodes: u64,
    pub seeds: Vec<u64>,
    /// Best greedy value per seed, in seed order.
    pub best_values: Vec<f64>,
    pub min: f64,
    pub median: f64,
    pub max: f64,
    pub mean: f64,
    pub solve_rate: f64,
    pub deterministic: bool,
    /// The algorithm's highest-scoring setting, by solve rate then mean.
    pub selected: bool,
}

impl AlgorithmSummary {
    pub fn new(cfg: &ExperimentConfig, oracle: f64, best_values: Vec<f64>) -> Result<Self> {
        if best_values.is_empty() {
            return Err(HarnessError::Config(format!("{} produced no runs", cfg.algorithm)));
        }
        let mut sorted = best_values.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
        };
        let solved = best_values.iter().filter(|&&v| v >= oracle - SOLVE_TOLERANCE).count();
        Ok(Self {
            algorithm: cfg.algorithm.clone(),
            setting: cfg.setting.clone(),
            params: serde_json::to_value(&cfg.params)?,
            episodes: cfg.episodes,
            seeds: cfg.seeds.clone(),
            min: sorted[0],
            median,
            max: sorted[n - 1],
            mean: best_values.iter().sum::<f64>() / n as f64,
            solve_rate: solved as f64 / n as f64,
            best_values,
            deterministic: cfg.deterministic(),
            selected: false,
        })
    }

    pub fn statistic(&self, name: &str) -> Option<f64> {
        Some(match name {
            "min" => self.min,
            "median" => self.median,
            "max" => self.max,
            "mean" => self.mean,
            "solve_rate" => self.solve_rate,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub game: String,
    pub oracle: f64,
    /// False when any entry used the wall clock.
    pub deterministic: bool,
    pub algorithms: Vec<AlgorithmSummary>,
}

impl Summary {
    pub fn new(game: &str, oracle: f64) -> Self {
        Self {
            game: game.to_string(),
            oracle,
            deterministic: true,
            algorithms: Vec::new(),
        }
    }

    /// Adds an entry, replacing one with the same algorithm and setting.
    pub fn insert(&mut self, entry: AlgorithmSummary) {
        match self
            .algorithms
            .iter_mut()
            .find(|a| a.algorithm == entry.algorithm && a.setting == entry.setting)
        {
            Some(slot) => *slot = entry,
            None => self.algorithms.push(entry),
        }
        self.deterministic = self.algorithms.iter().all(|a| a.deterministic);
        self.select();
    }

    fn select(&mut self) {
        for a in &mut self.algorithms {
            a.selected = false;
        }
        let mut names: Vec<String> = self.algorithms.iter().map(|a| a.algorithm.clone()).collect();
        names.dedup();
        for name in names {
            let mut best: Option<usize> = None;
            for (i, a) in self.algorithms.iter().enumerate() {
                if a.algorithm != name {
                    continue;
                }
                let better = best.map_or(true, |b| {
                    let b = &self.algorithms[b];
                    (a.solve_rate, a.mean) > (b.solve_rate, b.mean)
                });
                if better {
                    best = Some(i);
                }
            }
            if let Some(b) = best {
                self.algorithms[b].selected = true;
            }
        }
    }

    pub fn selected(&self) -> impl Iterator<Item = &AlgorithmSummary> {
        self.algorithms.iter().filter(|a| a.selected)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let summary: Summary = serde_json::from_str(&text).map_err(|e| HarnessError::MalformedSummary {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        summary.check().map_err(|reason| HarnessError::MalformedSummary {
            path: path.display().to_string(),
            reason,
        })?;
        Ok(summary)
    }

    fn check(&self) -> std::result::Result<(), String> {
        if !self.oracle.is_finite() {
            return Err("oracle is not finite".into());
        }
        if self.algorithms.is_empty() {
            return Err("no algorithms".into());
        }
        for a in &self.algorithms {
            if a.best_values.len() != a.seeds.len() {
                return Err(format!(
                    "{}: {} values for {} seeds",
                    a.algorithm,
                    a.best_values.len(),
                    a.seeds.len()
                ));
            }
            if !STATISTICS.iter().all(|s| a.statistic(s).is_some_and(f64::is_finite)) {
                return Err(format!("{}: non-finite statistic", a.algorithm));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json + "\n").map_err(|e| HarnessError::io(path, e))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub game: String,
    pub algorithm: String,
    pub statistic: String,
    pub value: f64,
}

/// `summary.json` files under `root` (or `root` itself), sorted by path.
pub fn find_summaries(root: &Path) -> Result<Vec<PathBuf>> {
    if root.is_file() {
        return Ok(vec![root.to_path_buf()]);
    }
    let mut found = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).map_err(|e| HarnessError::io(&dir, e))? {
            let path = entry.map_err(|e| HarnessError::io(&dir, e))?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().is_some_and(|n| n == "summary.json") {
                found.push(path);
            }
        }
    }
    found.sort();
    Ok(found)
}

/// Rows for each selected algorithm setting, then one `oracle` row per
/// game. Games and algorithms appear in a fixed order.
pub fn emit_plot_data(summaries: &[PathBuf]) -> Result<Vec<PlotRow>> {
    if summaries.is_empty() {
        return Err(HarnessError::Config("no summary files".into()));
    }
    let mut loaded = summaries.iter().map(|p| Summary::load(p)).collect::<Result<Vec<_>>>()?;
    loaded.sort_by(|a, b| a.game.cmp(&b.game));
    let rank = |name: &str| ALGORITHMS.iter().position(|a| *a == name).unwrap_or(ALGORITHMS.len());
    let mut rows = Vec::new();
    let mut games: Vec<(String, f64)> = Vec::new();
    for s in &loaded {
        let mut selected: Vec<&AlgorithmSummary> = s.selected().collect();
        selected.sort_by(|a, b| {
            rank(&a.algorithm)
                .cmp(&rank(&b.algorithm))
                .then(a.algorithm.cmp(&b.algorithm))
        });
        for a in selected {
            for stat in STATISTICS {
                rows.push(PlotRow {
                    game: s.game.clone(),
                    algorithm: a.algorithm.clone(),
                    statistic: stat.to_string(),
                    value: a.statistic(stat).expect("known statistic"),
                });
            }
        }
        if !games.iter().any(|(g, _)| *g == s.game) {
            games.push((s.game.clone(), s.oracle));
        }
    }
    for (game, oracle) in games {
        rows.push(PlotRow {
            game,
            algorithm: "oracle".into(),
            statistic: "optimum".into(),
            value: oracle,
        });
    }
    Ok(rows)
}

pub fn write_plot_data(rows: &[PlotRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["game", "algorithm", "statistic", "value"])?;
    for r in rows {
        w.write_record([r.game.as_str(), &r.algorithm, &r.statistic, &r.value.to_string()])?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}
