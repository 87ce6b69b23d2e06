//! Experiment configs, seeded replication and on-disk artifacts.
//!
//! A run of an [`ExperimentConfig`] writes, below the output directory:
//!
//! - `<estimator>/run_<r>.csv`: one row per round for the tracked agent;
//! - `<estimator>/mean.csv`: cumulative regret and consensus error averaged
//!   over the replicates that completed;
//! - `summary.json`: config echo, resolved schedules, final regret mean and
//!   standard error per estimator, failed runs and wall time.

pub mod config;
pub mod verify;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{feasible_grid, path_length, LossProcess, DEFAULT_GRID_POINTS};
use crate::metrics::RegretLedger;
use crate::optimizer::run;
use crate::smoothing::EstimatorKind;
use crate::Vector;

pub use config::{
    preset, ConstantForm, ExperimentConfig, GraphConfig, Preset, ProblemConfig, ResolvedSchedule, ScheduleConfig,
    PRESETS,
};
pub use verify::{verify_suite, Check, Level, VerifyReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedRun {
    pub replicate: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub estimator: EstimatorKind,
    pub completed: usize,
    pub failed: Vec<FailedRun>,
    /// Mean over completed replicates of `DR_T`.
    pub final_regret_mean: Option<f64>,
    pub final_regret_std_error: Option<f64>,
    /// Mean of `DR_T / T`.
    pub average_regret_mean: Option<f64>,
    /// Mean of the time-averaged consensus error.
    pub consensus_mean: Option<f64>,
    pub queries_per_agent_round: usize,
}

/// Environment variation over the horizon, for families with the oracles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variation {
    pub seed: u64,
    pub theta: f64,
    pub omega: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config: ExperimentConfig,
    pub schedule: ResolvedSchedule,
    pub estimators: Vec<EstimatorSummary>,
    pub variation: Option<Variation>,
    pub wall_time_seconds: f64,
}

impl Summary {
    pub fn estimator(&self, kind: EstimatorKind) -> Option<&EstimatorSummary> {
        self.estimators.iter().find(|e| e.estimator == kind)
    }
}

/// Per-round means over the completed replicates of one estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanCurve {
    pub estimator: EstimatorKind,
    pub runs: usize,
    pub cumulative_regret: Vec<f64>,
    pub cumulative_regret_std_error: Vec<f64>,
    pub consensus_error: Vec<f64>,
}

impl MeanCurve {
    /// Mean `DR_T / T` for `1 <= T <= len`.
    pub fn average_regret(&self, horizon: usize) -> Option<f64> {
        (horizon >= 1 && horizon <= self.cumulative_regret.len())
            .then(|| self.cumulative_regret[horizon - 1] / horizon as f64)
    }

    /// Mean time-averaged consensus error over the first `horizon` rounds.
    pub fn time_averaged_consensus(&self, horizon: usize) -> Option<f64> {
        (horizon >= 1 && horizon <= self.consensus_error.len())
            .then(|| self.consensus_error[..horizon].iter().sum::<f64>() / horizon as f64)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "k,mean_cum_regret,se_cum_regret,mean_consensus_error,runs")?;
        for (idx, ((m, se), c)) in self
            .cumulative_regret
            .iter()
            .zip(&self.cumulative_regret_std_error)
            .zip(&self.consensus_error)
            .enumerate()
        {
            writeln!(out, "{},{m},{se},{c},{}", idx + 1, self.runs)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub out_dir: PathBuf,
    pub summary: Summary,
    pub curves: Vec<MeanCurve>,
}

struct RunTrace {
    cumulative: Vec<f64>,
    consensus: Vec<f64>,
}

/// Seed of replicate `r`.
pub fn replicate_seed(base: u64, replicate: usize) -> u64 {
    base.wrapping_add(replicate as u64)
}

/// One replicate of one estimator, without touching the file system.
pub fn run_replicate(config: &ExperimentConfig, estimator: EstimatorKind, replicate: usize) -> Result<RegretLedger> {
    let (graph, set) = config.validate()?;
    let schedule = config.resolve_schedule(&graph, &set)?;
    let seed = replicate_seed(config.seed, replicate);
    let loss = config.problem.build(config.horizon, seed)?;
    run(&config.algorithm(estimator, &schedule), &graph, &loss, &set, seed)
}

fn is_run_failure(e: &Error) -> bool {
    matches!(e, Error::Diverged { .. } | Error::NonFinite(_))
}

fn mean_and_std_error(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let se = if values.len() < 2 {
        0.0
    } else {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    };
    (Some(mean), Some(se))
}

fn variation(config: &ExperimentConfig, loss: &LossProcess, seed: u64) -> Result<Variation> {
    let grid = feasible_grid(&config.set(), DEFAULT_GRID_POINTS)?;
    let theta = loss.big_theta(config.horizon, &grid)?;
    let minimizers: Option<Vec<Vec<Vector>>> = (1..=config.horizon + 1)
        .map(|k| loss.analytic_minimizer(k).map(|m| m.map(|x| vec![x])))
        .collect::<Result<_>>()?;
    Ok(Variation { seed, theta, omega: minimizers.map(|m| path_length(&m)) })
}

/// Runs every estimator on every replicate and writes the artifacts.
///
/// Runs that hit a non-finite value are listed as failed in the summary;
/// any other error aborts the experiment.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentOutcome> {
    let start = Instant::now();
    let (graph, set) = config.validate()?;
    let schedule = config.resolve_schedule(&graph, &set)?;
    fs::create_dir_all(out_dir)?;
    for e in &config.estimators {
        fs::create_dir_all(out_dir.join(e.name()))?;
    }

    let jobs: Vec<(EstimatorKind, usize)> = config
        .estimators
        .iter()
        .flat_map(|&e| (0..config.replicates).map(move |r| (e, r)))
        .collect();
    let traces: Vec<Result<RunTrace>> = jobs
        .par_iter()
        .map(|&(estimator, r)| {
            let seed = replicate_seed(config.seed, r);
            let loss = config.problem.build(config.horizon, seed)?;
            let ledger = run(&config.algorithm(estimator, &schedule), &graph, &loss, &set, seed)?;
            let path = out_dir.join(estimator.name()).join(format!("run_{r}.csv"));
            let mut file = BufWriter::new(fs::File::create(&path)?);
            ledger.write_csv(&mut file)?;
            file.flush()?;
            Ok(RunTrace {
                cumulative: ledger.cumulative_curve(),
                consensus: ledger.records.iter().map(|rec| rec.consensus_error).collect(),
            })
        })
        .collect();

    let mut summaries = Vec::new();
    let mut curves = Vec::new();
    for &estimator in &config.estimators {
        let mut ok = Vec::new();
        let mut failed = Vec::new();
        for ((e, r), trace) in jobs.iter().zip(&traces) {
            if *e != estimator {
                continue;
            }
            match trace {
                Ok(t) => ok.push(t),
                Err(err) if is_run_failure(err) => failed.push(FailedRun {
                    replicate: *r,
                    seed: replicate_seed(config.seed, *r),
                    error: err.to_string(),
                }),
                Err(err) => return Err(err.clone()),
            }
        }
        let t = config.horizon;
        let mut curve = MeanCurve {
            estimator,
            runs: ok.len(),
            cumulative_regret: Vec::with_capacity(t),
            cumulative_regret_std_error: Vec::with_capacity(t),
            consensus_error: Vec::with_capacity(t),
        };
        if !ok.is_empty() {
            for k in 0..t {
                let column: Vec<f64> = ok.iter().map(|tr| tr.cumulative[k]).collect();
                let (m, se) = mean_and_std_error(&column);
                curve.cumulative_regret.push(m.unwrap_or(f64::NAN));
                curve.cumulative_regret_std_error.push(se.unwrap_or(f64::NAN));
                curve.consensus_error.push(ok.iter().map(|tr| tr.consensus[k]).sum::<f64>() / ok.len() as f64);
            }
        }
        let mut file = BufWriter::new(fs::File::create(out_dir.join(estimator.name()).join("mean.csv"))?);
        curve.write_csv(&mut file)?;
        file.flush()?;

        let finals: Vec<f64> = ok.iter().map(|tr| tr.cumulative[t - 1]).collect();
        let (final_regret_mean, final_regret_std_error) = mean_and_std_error(&finals);
        summaries.push(EstimatorSummary {
            estimator,
            completed: ok.len(),
            failed,
            final_regret_mean,
            final_regret_std_error,
            average_regret_mean: final_regret_mean.map(|m| m / t as f64),
            consensus_mean: curve.time_averaged_consensus(t),
            queries_per_agent_round: estimator.query_count(),
        });
        curves.push(curve);
    }

    let variation = if config.report_variation {
        let loss = config.problem.build(config.horizon + 1, config.seed)?;
        Some(variation(config, &loss, config.seed)?)
    } else {
        None
    };

    let summary = Summary {
        config: config.clone(),
        schedule,
        estimators: summaries,
        variation,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    };
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(out_dir.join("summary.json"), json + "\n")?;
    Ok(ExperimentOutcome { out_dir: out_dir.to_path_buf(), summary, curves })
}

/// The output directory a config asks for, or `runs/<name>`.
pub fn default_out_dir(config: &ExperimentConfig) -> PathBuf {
    config.out_dir.clone().unwrap_or_else(|| PathBuf::from("runs").join(&config.name))
}
