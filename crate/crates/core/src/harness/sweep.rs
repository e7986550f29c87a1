//! Recovery sweeps: for every `(n, trial)` cell, simulate a trajectory, run
//! the observer and score it against the truth.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::boolnet::{parse_rules, random_andor_network, sample_boolean_trajectory, BooleanNetwork, RulesError};
use crate::exactchain::ExactChain;
use crate::infer::{metrics, observe, ObserverMode, RecoveryMetrics};
use crate::model::{random_model, BarModel, GeneratorParams, GraphTruth, ModelError};
use crate::rng::derive_seed;
use crate::simulate::{sample_stationary_trajectory, sample_trajectory, Init, Trajectory};

/// Exact CSV header of a sweep.
pub const CSV_HEADER: &str = "n,trial,seed,exact_unsigned,exact_signed,edge_recall,edge_accuracy,wall_ms";

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid sweep config: {0}")]
    Config(String),
    #[error("model: {0}")]
    Model(#[from] ModelError),
    #[error("rules: {0}")]
    Rules(#[from] RulesError),
    #[error("sweep output: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelSource {
    /// A model file, fixed across trials.
    File { path: PathBuf },
    /// Random BAR models. With `per_trial`, every trial draws a fresh model.
    Generator {
        params: GeneratorParams,
        model_seed: u64,
        #[serde(default)]
        per_trial: bool,
    },
    /// A rules file for a noisy boolean network.
    Rules {
        path: PathBuf,
        #[serde(default)]
        noise: Option<f64>,
    },
    /// Random AND/OR networks.
    RandomAndOr {
        p: usize,
        fan_in: usize,
        noise: f64,
        network_seed: u64,
        #[serde(default)]
        per_trial: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObserverKind {
    SelectionOnly,
    KnownDegrees,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    #[default]
    BurnIn,
    ExactStationary,
}

fn default_tau() -> f64 {
    0.025
}

fn default_boolean_burn_in() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub source: ModelSource,
    pub n_grid: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub mode: ObserverKind,
    pub d: usize,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default)]
    pub init: InitKind,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Fill the `wall_ms` column. Off by default so that the CSV is a pure
    /// function of the config.
    #[serde(default)]
    pub record_wall_time: bool,
    #[serde(default = "default_boolean_burn_in")]
    pub boolean_burn_in: usize,
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self, SweepError> {
        serde_json::from_str(text).map_err(|e| SweepError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        if self.n_grid.is_empty() || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SweepError::Config("n grid must be non-empty and strictly increasing".into()));
        }
        if self.n_grid[0] < 2 {
            return Err(SweepError::Config("every n must be at least 2".into()));
        }
        if self.trials == 0 {
            return Err(SweepError::Config("trials must be at least 1".into()));
        }
        if self.d == 0 {
            return Err(SweepError::Config("d must be at least 1".into()));
        }
        if !(self.tau > 0.0) {
            return Err(SweepError::Config("tau must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub trial: usize,
    pub seed: u64,
    pub metrics: Option<RecoveryMetrics>,
    pub wall_ms: u64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub n: usize,
    pub completed: usize,
    pub exact_unsigned: f64,
    pub exact_signed: f64,
    pub edge_recall: f64,
    pub edge_accuracy: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub summaries: Vec<SummaryRow>,
}

impl SweepReport {
    pub fn errors(&self) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(|r| r.error.is_some())
    }

    pub fn summary(&self, n: usize) -> Option<&SummaryRow> {
        self.summaries.iter().find(|s| s.n == n)
    }

    /// Data rows in `(n, trial)` order, then one `mean` row per `n`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for r in &self.rows {
            match &r.metrics {
                Some(m) => writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    r.n, r.trial, r.seed, m.exact_unsigned, m.exact_signed, m.edge_recall, m.edge_accuracy, r.wall_ms
                )?,
                None => writeln!(out, "{},{},{},NA,NA,NA,NA,{}", r.n, r.trial, r.seed, r.wall_ms)?,
            }
        }
        for s in &self.summaries {
            writeln!(
                out,
                "{},mean,,{},{},{},{},{}",
                s.n, s.exact_unsigned, s.exact_signed, s.edge_recall, s.edge_accuracy, s.wall_ms
            )?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<(), SweepError> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(&mut file)?;
        file.flush()?;
        Ok(())
    }
}

/// A process the sweep can simulate, with its true graph.
enum Instance {
    Bar {
        model: BarModel,
        truth: GraphTruth,
        chain: Option<ExactChain>,
    },
    Boolean {
        net: BooleanNetwork,
        truth: GraphTruth,
    },
}

impl Instance {
    fn bar(model: BarModel, init: InitKind) -> Result<Self, String> {
        let chain = match init {
            InitKind::ExactStationary => Some(ExactChain::build(&model).map_err(|e| e.to_string())?),
            InitKind::BurnIn => None,
        };
        let truth = model.truth();
        Ok(Instance::Bar { model, truth, chain })
    }

    fn truth(&self) -> &GraphTruth {
        match self {
            Instance::Bar { truth, .. } | Instance::Boolean { truth, .. } => truth,
        }
    }

    fn simulate(&self, n: usize, seed: u64, boolean_burn_in: usize) -> Result<Trajectory, String> {
        match self {
            Instance::Bar { model, chain: Some(chain), .. } => {
                sample_stationary_trajectory(model, chain, n, seed).map_err(|e| e.to_string())
            }
            Instance::Bar { model, chain: None, .. } => {
                sample_trajectory(model, n, &Init::BurnIn, seed).map_err(|e| e.to_string())
            }
            Instance::Boolean { net, .. } => Ok(sample_boolean_trajectory(net, n, boolean_burn_in, seed)),
        }
    }
}

fn shared_instance(config: &SweepConfig) -> Result<Option<Instance>, SweepError> {
    Ok(match &config.source {
        ModelSource::File { path } => {
            Some(Instance::bar(BarModel::load(path)?, config.init).map_err(SweepError::Config)?)
        }
        ModelSource::Generator { params, model_seed, per_trial: false } => {
            let (model, _) = random_model(params, *model_seed)?;
            Some(Instance::bar(model, config.init).map_err(SweepError::Config)?)
        }
        ModelSource::Rules { path, noise } => {
            let mut net = parse_rules(&std::fs::read_to_string(path)?)?;
            if let Some(noise) = noise {
                net = net.with_noise(*noise)?;
            }
            let truth = net.truth();
            Some(Instance::Boolean { net, truth })
        }
        ModelSource::RandomAndOr {
            p,
            fan_in,
            noise,
            network_seed,
            per_trial: false,
        } => {
            let net = random_andor_network(*p, *fan_in, *noise, *network_seed)?;
            let truth = net.truth();
            Some(Instance::Boolean { net, truth })
        }
        _ => None,
    })
}

fn trial_instance(config: &SweepConfig, trial_seed: u64) -> Result<Instance, String> {
    match &config.source {
        ModelSource::Generator { params, model_seed, .. } => {
            let (model, _) = random_model(params, derive_seed(*model_seed, &[trial_seed])).map_err(|e| e.to_string())?;
            Instance::bar(model, config.init)
        }
        ModelSource::RandomAndOr {
            p,
            fan_in,
            noise,
            network_seed,
            ..
        } => {
            let net = random_andor_network(*p, *fan_in, *noise, derive_seed(*network_seed, &[trial_seed]))
                .map_err(|e| e.to_string())?;
            let truth = net.truth();
            Ok(Instance::Boolean { net, truth })
        }
        _ => unreachable!("fixed sources are built once"),
    }
}

fn run_cell(config: &SweepConfig, shared: Option<&Instance>, n: usize, trial_seed: u64) -> Result<RecoveryMetrics, String> {
    let owned;
    let instance = match shared {
        Some(i) => i,
        None => {
            owned = trial_instance(config, trial_seed)?;
            &owned
        }
    };
    let truth = instance.truth();
    let traj = instance.simulate(n, trial_seed, config.boolean_burn_in)?;
    let mode = match config.mode {
        ObserverKind::SelectionOnly => ObserverMode::SelectionOnly,
        ObserverKind::KnownDegrees => ObserverMode::KnownDegrees(truth.degrees()),
        ObserverKind::Full => ObserverMode::Full { tau: config.tau },
    };
    let estimate = observe(&traj, config.d, &mode).map_err(|e| e.to_string())?;
    Ok(metrics(&estimate, truth))
}

/// Runs every cell of the sweep. Cells run concurrently; rows come back in
/// `(n, trial)` order. Per-cell failures are recorded in the row.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepReport, SweepError> {
    config.validate()?;
    let shared = shared_instance(config)?;
    let cells: Vec<(usize, usize, usize)> = config
        .n_grid
        .iter()
        .enumerate()
        .flat_map(|(ni, &n)| (0..config.trials).map(move |t| (ni, n, t)))
        .collect();
    let rows: Vec<SweepRow> = cells
        .par_iter()
        .map(|&(ni, n, trial)| {
            let seed = derive_seed(config.seed, &[ni as u64, trial as u64]);
            let start = Instant::now();
            let outcome = run_cell(config, shared.as_ref(), n, seed);
            let wall_ms = if config.record_wall_time {
                start.elapsed().as_millis() as u64
            } else {
                0
            };
            let (metrics, error) = match outcome {
                Ok(m) => (Some(m), None),
                Err(e) => (None, Some(e)),
            };
            SweepRow {
                n,
                trial,
                seed,
                metrics,
                wall_ms,
                error,
            }
        })
        .collect();

    let summaries = config
        .n_grid
        .iter()
        .map(|&n| {
            let done: Vec<(&RecoveryMetrics, u64)> = rows
                .iter()
                .filter(|r| r.n == n)
                .filter_map(|r| r.metrics.as_ref().map(|m| (m, r.wall_ms)))
                .collect();
            let k = done.len().max(1) as f64;
            let mean = |f: &dyn Fn(&RecoveryMetrics) -> f64| done.iter().map(|(m, _)| f(m)).sum::<f64>() / k;
            SummaryRow {
                n,
                completed: done.len(),
                exact_unsigned: mean(&|m| m.exact_unsigned as f64),
                exact_signed: mean(&|m| m.exact_signed as f64),
                edge_recall: mean(&|m| m.edge_recall),
                edge_accuracy: mean(&|m| m.edge_accuracy),
                wall_ms: done.iter().map(|(_, w)| *w as f64).sum::<f64>() / k,
            }
        })
        .collect();

    let report = SweepReport { rows, summaries };
    for row in report.errors() {
        log::warn!("n = {}, trial {}: {}", row.n, row.trial, row.error.as_deref().unwrap_or(""));
    }
    if let Some(path) = &config.output {
        report.save_csv(path)?;
    }
    Ok(report)
}
