//! INI experiment files.
//!
//! ```ini
//! [experiment]
//! game = tiny_hanabi:A
//! seeds = 32            ; a count (0..32), a range `100..132`, or a list `1, 5, 9`
//! episodes = 200000
//! eval_every = 1000
//! out = results/tiny_hanabi_A
//! workers = 4           ; optional, defaults to the available cores
//! wall_clock = false    ; record wall-clock ms (marks the run non-deterministic)
//! time_limit_secs = 60  ; optional per-run time limit (also non-deterministic)
//!
//! [pubmdp_q]
//! epsilon = 0.5
//!
//! [iql]
//! epsilon = 0.1, 0.3, 0.5
//! alpha = 0.05, 0.1, 0.2
//! ```
//!
//! Each algorithm section runs that algorithm. A comma-separated value turns
//! a key into a grid axis and the section runs every combination. Algorithm
//! sections may override `episodes` and `eval_every`.

use std::path::{Path, PathBuf};
use std::time::Duration;

use capi_core::baselines::{Algorithm, BaselineConfig};
use capi_core::capi::{CapiConfig, Exploration};
use capi_core::exact::QLearningConfig;
use ini::Ini;
use serde::Serialize;

use crate::error::{HarnessError, Result};

pub const ALGORITHMS: [&str; 6] = ["pubmdp_q", "capi", "iql", "hql", "vdn", "sad"];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CapiSettings {
    pub config: CapiConfig,
    /// Stop a run once its greedy policy reaches the optimum.
    pub stop_at_optimum: bool,
    /// Write a checkpoint per seed.
    pub checkpoint: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum AlgorithmParams {
    PubmdpQ(QLearningConfig),
    Capi(CapiSettings),
    Baseline(BaselineConfig),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub game: String,
    pub algorithm: String,
    /// Grid point label, `default` outside a grid.
    pub setting: String,
    pub params: AlgorithmParams,
    pub seeds: Vec<u64>,
    pub episodes: u64,
    pub eval_every: u64,
    pub out: PathBuf,
    pub workers: usize,
    pub wall_clock: bool,
    pub time_limit: Option<Duration>,
}

impl ExperimentConfig {
    /// Default parameters for one algorithm.
    pub fn new(game: &str, algorithm: &str, seeds: Vec<u64>, episodes: u64, out: PathBuf) -> Result<Self> {
        let cfg = Self {
            game: game.to_string(),
            algorithm: algorithm.to_string(),
            setting: "default".into(),
            params: default_params(algorithm)?,
            seeds,
            episodes,
            eval_every: (episodes / 100).max(1),
            out,
            workers: default_workers(),
            wall_clock: false,
            time_limit: None,
        };
        Ok(cfg)
    }

    /// True when results depend on machine speed.
    pub fn deterministic(&self) -> bool {
        !self.wall_clock && self.time_limit.is_none()
    }

    /// Directory of this algorithm setting's per-seed files.
    pub fn run_dir(&self) -> PathBuf {
        let dir = self.out.join(&self.algorithm);
        if self.setting == "default" {
            dir
        } else {
            dir.join(self.setting.replace(['=', ';', ' '], "_"))
        }
    }

    /// Sets one algorithm parameter from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "episodes" => self.episodes = parse(key, value)?,
            "eval_every" => self.eval_every = parse(key, value)?,
            _ => set_param(&mut self.params, key, value)?,
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !ALGORITHMS.contains(&self.algorithm.as_str()) {
            return Err(HarnessError::Config(format!("unknown algorithm {:?}", self.algorithm)));
        }
        capi_core::zoo::dynamics_by_name(&self.game)?;
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("no seeds".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(HarnessError::Config("seeds must be distinct".into()));
        }
        if self.eval_every == 0 {
            return Err(HarnessError::Config("eval_every must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(HarnessError::Config("workers must be at least 1".into()));
        }
        match &self.params {
            AlgorithmParams::PubmdpQ(q) => q.validate()?,
            AlgorithmParams::Baseline(b) => b.validate()?,
            // Needs the built game; checked when the run starts.
            AlgorithmParams::Capi(_) => {}
        }
        Ok(())
    }
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

pub fn default_params(algorithm: &str) -> Result<AlgorithmParams> {
    Ok(match algorithm {
        "pubmdp_q" => AlgorithmParams::PubmdpQ(QLearningConfig::default()),
        "capi" => AlgorithmParams::Capi(CapiSettings {
            config: CapiConfig::default(),
            stop_at_optimum: false,
            checkpoint: true,
        }),
        other => match other.parse::<Algorithm>() {
            Ok(alg) => AlgorithmParams::Baseline(BaselineConfig::new(alg)),
            Err(_) => return Err(HarnessError::Config(format!("unknown algorithm {other:?}"))),
        },
    })
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| HarnessError::Config(format!("bad value {value:?} for {key}")))
}

fn set_param(params: &mut AlgorithmParams, key: &str, value: &str) -> Result<()> {
    let unknown = || HarnessError::Config(format!("unknown parameter {key:?}"));
    match params {
        AlgorithmParams::PubmdpQ(q) => match key {
            "epsilon" => q.epsilon = parse(key, value)?,
            "alpha" => q.alpha = parse(key, value)?,
            "initial_q" => q.initial_q = parse(key, value)?,
            _ => return Err(unknown()),
        },
        AlgorithmParams::Baseline(b) => match key {
            "epsilon" => b.epsilon = parse(key, value)?,
            "alpha" => b.alpha = parse(key, value)?,
            "beta" => b.beta = parse(key, value)?,
            "initial_q" => b.initial_q = parse(key, value)?,
            "decay_episodes" => b.decay_episodes = Some(parse(key, value)?),
            _ => return Err(unknown()),
        },
        AlgorithmParams::Capi(s) => {
            let c = &mut s.config;
            match key {
                "k" => c.k = parse(key, value)?,
                "acquisition" => c.acquisition = value.trim().parse()?,
                "exploration" => {
                    let epsilon = match c.exploration {
                        Exploration::EpsilonGreedy { epsilon } => epsilon,
                        _ => 0.1,
                    };
                    c.exploration = match value.trim() {
                        "epsilon_greedy" => Exploration::EpsilonGreedy { epsilon },
                        "once_per_episode" => Exploration::OncePerEpisode,
                        "none" => Exploration::None,
                        other => return Err(HarnessError::Config(format!("unknown exploration {other:?}"))),
                    }
                }
                "epsilon" => {
                    c.exploration = Exploration::EpsilonGreedy {
                        epsilon: parse(key, value)?,
                    }
                }
                "structured_exploration" => c.structured_exploration = parse(key, value)?,
                "policy_backend" => c.policy_backend = value.trim().parse()?,
                "value_backend" => c.value_backend = value.trim().parse()?,
                "policy_lr" => c.policy_lr = parse(key, value)?,
                "value_lr" => c.value_lr = parse(key, value)?,
                "network_lr" => c.network_lr = parse(key, value)?,
                "hidden" => {
                    c.hidden = value
                        .split('x')
                        .map(|w| parse(key, w))
                        .collect::<Result<Vec<usize>>>()?
                }
                "train_steps" => c.train_steps = parse(key, value)?,
                "policy_floor" => c.policy_floor = parse(key, value)?,
                "squash_value" => c.squash_value = parse(key, value)?,
                "value_loss_weight" => c.value_loss_weight = parse(key, value)?,
                "policy_loss_weight" => c.policy_loss_weight = parse(key, value)?,
                "default_value" => c.default_value = parse(key, value)?,
                "enumerate_cap" => c.enumerate_cap = parse(key, value)?,
                "max_decisions" => c.max_decisions = parse(key, value)?,
                "stop_at_optimum" => s.stop_at_optimum = parse(key, value)?,
                "checkpoint" => s.checkpoint = parse(key, value)?,
                _ => return Err(unknown()),
            }
        }
    }
    Ok(())
}

/// `32` means seeds 0..32; `a..b` a range; otherwise a comma-separated list.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let text = text.trim();
    if let Some((a, b)) = text.split_once("..") {
        let (a, b): (u64, u64) = (parse("seeds", a)?, parse("seeds", b)?);
        return Ok((a..b).collect());
    }
    if text.contains(',') {
        return text.split(',').map(|s| parse("seeds", s)).collect();
    }
    Ok((0..parse::<u64>("seeds", text)?).collect())
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    parse(key, value)
}

pub fn load_config(path: &Path) -> Result<Vec<ExperimentConfig>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

/// Parses an experiment file into one validated config per algorithm
/// setting, in file order.
pub fn parse_config(text: &str) -> Result<Vec<ExperimentConfig>> {
    let ini = Ini::load_from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
    let exp = ini
        .section(Some("experiment"))
        .ok_or_else(|| HarnessError::Config("missing [experiment] section".into()))?;
    let get = |key: &str| {
        exp.get(key)
            .ok_or_else(|| HarnessError::Config(format!("[experiment] needs {key}")))
    };
    for (key, _) in exp.iter() {
        if ![
            "game",
            "seeds",
            "episodes",
            "eval_every",
            "out",
            "workers",
            "wall_clock",
            "time_limit_secs",
        ]
        .contains(&key)
        {
            return Err(HarnessError::Config(format!("unknown [experiment] key {key:?}")));
        }
    }
    let game = get("game")?.trim().to_string();
    let seeds = parse_seeds(get("seeds")?)?;
    let episodes: u64 = parse("episodes", get("episodes")?)?;
    let out = PathBuf::from(get("out")?.trim());
    let eval_every = match exp.get("eval_every") {
        Some(v) => parse("eval_every", v)?,
        None => (episodes / 100).max(1),
    };
    let workers = match exp.get("workers") {
        Some(v) => parse("workers", v)?,
        None => default_workers(),
    };
    let wall_clock = exp
        .get("wall_clock")
        .map(|v| parse_bool("wall_clock", v))
        .transpose()?
        .unwrap_or(false);
    let time_limit = exp
        .get("time_limit_secs")
        .map(|v| {
            let secs: f64 = parse("time_limit_secs", v)?;
            if !(secs.is_finite() && secs > 0.0) {
                return Err(HarnessError::Config("time_limit_secs must be positive".into()));
            }
            Ok(Duration::from_secs_f64(secs))
        })
        .transpose()?;

    let mut configs = Vec::new();
    for (name, section) in ini.iter() {
        let Some(name) = name else {
            if section.iter().next().is_some() {
                return Err(HarnessError::Config("keys outside any section".into()));
            }
            continue;
        };
        if name == "experiment" {
            continue;
        }
        let base = ExperimentConfig {
            game: game.clone(),
            algorithm: name.to_string(),
            setting: "default".into(),
            params: default_params(name)?,
            seeds: seeds.clone(),
            episodes,
            eval_every,
            out: out.clone(),
            workers,
            wall_clock,
            time_limit,
        };
        let axes: Vec<(String, Vec<String>)> = section
            .iter()
            .map(|(k, v)| (k.to_string(), v.split(',').map(|s| s.trim().to_string()).collect()))
            .collect();
        for point in grid(&axes) {
            let mut cfg = base.clone();
            let mut label = Vec::new();
            for (i, (key, values)) in axes.iter().enumerate() {
                cfg.set(key, &values[point[i]])?;
                if values.len() > 1 {
                    label.push(format!("{key}={}", values[point[i]]));
                }
            }
            if !label.is_empty() {
                cfg.setting = label.join(";");
            }
            cfg.validate()?;
            configs.push(cfg);
        }
    }
    if configs.is_empty() {
        return Err(HarnessError::Config("no algorithm sections".into()));
    }
    Ok(configs)
}

/// Index tuples of the cartesian product, last axis fastest.
fn grid(axes: &[(String, Vec<String>)]) -> Vec<Vec<usize>> {
    let mut points = vec![Vec::new()];
    for (_, values) in axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                (0..values.len()).map(move |i| {
                    let mut q = p.clone();
                    q.push(i);
                    q
                })
            })
            .collect();
    }
    points
}
