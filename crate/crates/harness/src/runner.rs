//! Seeded runs on a worker pool; a single collector writes the result files.

use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;

use capi_core::baselines::{train_baseline_until, BaselineConfig};
use capi_core::capi::{train_capi_until, CapiRngs, CapiState, Checkpoint, EpisodeLog};
use capi_core::exact::{
    optimal_value, pubmdp_q_learning_until, BeliefGraph, CurvePoint, QLearningConfig, QTable, WallClock,
};
use capi_core::fosg::FiniteGame;
use capi_core::rng::stream;
use capi_core::zoo::load_game;

use crate::config::{AlgorithmParams, ExperimentConfig};
use crate::error::{HarnessError, Result};
use crate::summary::{AlgorithmSummary, Summary};

pub const RUN_HEADER: [&str; 5] = ["seed", "episode", "greedy_value", "best_value", "wall_ms"];
pub const LOG_HEADER: [&str; 4] = ["episode", "greedy_value", "buffer_size", "wall_ms"];

#[derive(Clone, Debug)]
pub struct SeedResult {
    pub seed: u64,
    pub curve: Vec<CurvePoint>,
    /// CAPI only: one line per training episode.
    pub log: Vec<EpisodeLog>,
    pub checkpoint: Option<Checkpoint>,
}

impl SeedResult {
    pub fn best_value(&self) -> f64 {
        self.curve.last().map_or(f64::NEG_INFINITY, |p| p.best_value)
    }
}

/// Trains one seed. `graph` is required for `pubmdp_q`.
pub fn run_seed(
    game: &FiniteGame,
    graph: Option<&BeliefGraph>,
    oracle: f64,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<SeedResult> {
    let clock = if cfg.deterministic() {
        WallClock::default()
    } else {
        WallClock::started(cfg.time_limit)
    };
    let mut result = SeedResult {
        seed,
        curve: Vec::new(),
        log: Vec::new(),
        checkpoint: None,
    };
    match &cfg.params {
        AlgorithmParams::PubmdpQ(q) => {
            let graph = graph.ok_or_else(|| HarnessError::Config("pubmdp_q needs the belief graph".into()))?;
            let q = QLearningConfig {
                episodes: cfg.episodes,
                eval_every: cfg.eval_every,
                ..*q
            };
            let table = QTable::constant(graph, q.initial_q);
            let mut rng = stream(seed, "pubmdp_q/exploration");
            result.curve = pubmdp_q_learning_until(graph, &q, table, &mut rng, clock)?.curve;
        }
        AlgorithmParams::Capi(s) => {
            let mut state = CapiState::new(game, s.config.clone(), seed)?;
            let stop = s.stop_at_optimum.then_some(oracle);
            let run = train_capi_until(
                game,
                &mut state,
                cfg.episodes,
                cfg.eval_every,
                stop,
                &mut CapiRngs::new(seed),
                clock,
            )?;
            result.curve = run.curve;
            result.log = run.log;
            if s.checkpoint {
                result.checkpoint = Some(Checkpoint::capture(game, &state));
            }
        }
        AlgorithmParams::Baseline(b) => {
            let b = BaselineConfig {
                episodes: cfg.episodes,
                eval_every: cfg.eval_every,
                ..b.clone()
            };
            result.curve = train_baseline_until(game, &b, seed, clock)?.curve;
        }
    }
    Ok(result)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}

fn write_seed_files(cfg: &ExperimentConfig, r: &SeedResult) -> Result<()> {
    let dir = cfg.run_dir();
    let path = dir.join(format!("seed_{}.csv", r.seed));
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(RUN_HEADER)?;
    for p in &r.curve {
        w.write_record([
            r.seed.to_string(),
            p.episode.to_string(),
            p.greedy_value.to_string(),
            p.best_value.to_string(),
            p.wall_ms.to_string(),
        ])?;
    }
    w.flush().map_err(|e| HarnessError::io(&path, e))?;
    if matches!(cfg.params, AlgorithmParams::Capi(_)) {
        let path = dir.join(format!("seed_{}.log.csv", r.seed));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(LOG_HEADER)?;
        for l in &r.log {
            w.write_record([
                l.episode.to_string(),
                l.greedy_value.to_string(),
                l.buffer_size.to_string(),
                l.wall_ms.to_string(),
            ])?;
        }
        w.flush().map_err(|e| HarnessError::io(&path, e))?;
    }
    if let Some(cp) = &r.checkpoint {
        cp.save(&dir.join(format!("seed_{}.checkpoint.json", r.seed)))?;
    }
    Ok(())
}

/// Runs every (setting, seed) pair of `configs`, which must share a game and
/// output directory, writes one CSV per seed and merges the statistics into
/// `<out>/summary.json`.
pub fn run_experiment(configs: &[ExperimentConfig]) -> Result<Summary> {
    let first = configs
        .first()
        .ok_or_else(|| HarnessError::Config("nothing to run".into()))?;
    for cfg in configs {
        cfg.validate()?;
        if cfg.game != first.game || cfg.out != first.out {
            return Err(HarnessError::Config(
                "an experiment runs one game into one directory".into(),
            ));
        }
    }
    let game = load_game(&first.game)?;
    for cfg in configs {
        if let AlgorithmParams::Capi(s) = &cfg.params {
            s.config.validate(&game)?;
        }
    }
    let oracle = optimal_value(&game)?;
    let graph = if configs.iter().any(|c| matches!(c.params, AlgorithmParams::PubmdpQ(_))) {
        Some(BeliefGraph::build(&game)?)
    } else {
        None
    };
    for cfg in configs {
        create_dir(&cfg.run_dir())?;
    }

    let jobs: Vec<(usize, u64)> = configs
        .iter()
        .enumerate()
        .flat_map(|(i, c)| c.seeds.iter().map(move |&s| (i, s)))
        .collect();
    let workers = first.workers.min(jobs.len()).max(1);
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let mut bests: Vec<Vec<(u64, f64)>> = vec![Vec::new(); configs.len()];
    let mut failure = None;
    std::thread::scope(|scope| {
        let (tx, rx) = mpsc::channel();
        for _ in 0..workers {
            let tx = tx.clone();
            let (jobs, next, abort, game, graph) = (&jobs, &next, &abort, &game, graph.as_ref());
            scope.spawn(move || loop {
                if abort.load(Ordering::Relaxed) {
                    break;
                }
                let j = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(i, seed)) = jobs.get(j) else { break };
                let result = run_seed(game, graph, oracle, &configs[i], seed);
                if tx.send((i, result)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (i, result) in rx {
            let written = result.and_then(|r| {
                write_seed_files(&configs[i], &r)?;
                Ok(r)
            });
            match written {
                Ok(r) => bests[i].push((r.seed, r.best_value())),
                Err(e) => {
                    abort.store(true, Ordering::Relaxed);
                    failure.get_or_insert(e);
                }
            }
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }

    let entries = configs.iter().zip(bests).map(|(cfg, mut b)| {
        // Back to the configured seed order.
        b.sort_by_key(|(s, _)| cfg.seeds.iter().position(|x| x == s));
        AlgorithmSummary::new(cfg, oracle, b.into_iter().map(|(_, v)| v).collect())
    });
    let path = first.out.join("summary.json");
    let mut summary = match Summary::load(&path) {
        Ok(s) if s.game == first.game => s,
        _ => Summary::new(&first.game, oracle),
    };
    for entry in entries {
        summary.insert(entry?);
    }
    summary.save(&path)?;
    Ok(summary)
}
