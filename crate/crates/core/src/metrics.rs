//! Dynamic regret instrumentation.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ConstraintSet;
use crate::losses::{feasible_grid, LossProcess};
use crate::smoothing::EstimatorKind;
use crate::Vector;

/// Which dynamic regret the ledger accumulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegretMetric {
    /// `f_k(x_{j,k}) - f_k(x_k^*)`.
    Convex,
    /// `<grad f_k(x_{j,k}), x_{j,k}> - min_{x in set} <grad f_k(x_{j,k}), x>`.
    Nonconvex,
}

/// How the per-round benchmark minimizer is obtained for the convex metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MinimizerMethod {
    Analytic,
    GridThenDescent,
}

/// Step size of the projected descent used by [`MinimizerMethod::GridThenDescent`].
pub const DESCENT_STEP: f64 = 1e-3;
pub const DESCENT_TOLERANCE: f64 = 1e-8;
pub const DESCENT_MAX_ITERS: usize = 10_000;
const COARSE_GRID_POINTS: usize = 1024;

pub fn convex_regret_increment(loss: &LossProcess, k: usize, decision: &Vector, minimizer: &Vector) -> Result<f64> {
    Ok(loss.global_value(k, decision)? - loss.global_value(k, minimizer)?)
}

/// Returns `(increment, benchmark)` where `benchmark` is the linear minimum
/// `min_{x in set} <g, x>` for `g = grad f_k(decision)`.
pub fn nonconvex_regret_terms(
    loss: &LossProcess,
    k: usize,
    decision: &Vector,
    set: &ConstraintSet,
) -> Result<(f64, f64)> {
    let g = loss.global_gradient(k, decision)?;
    let vertex = set.linear_minimize(&g)?;
    Ok((g.dot(&(decision - &vertex)), g.dot(&vertex)))
}

pub fn nonconvex_regret_increment(loss: &LossProcess, k: usize, decision: &Vector, set: &ConstraintSet) -> Result<f64> {
    nonconvex_regret_terms(loss, k, decision, set).map(|(inc, _)| inc)
}

/// The minimizer of the global loss `f_k` over `set`.
pub fn per_round_minimizer(loss: &LossProcess, k: usize, set: &ConstraintSet, method: MinimizerMethod) -> Result<Vector> {
    match method {
        MinimizerMethod::Analytic => match loss.analytic_minimizer(k)? {
            Some(x) if set.contains(&x, 1e-12) => Ok(x),
            Some(x) => Err(Error::Capability(format!(
                "analytic minimizer {:?} of round {k} lies outside the feasible set",
                x.as_slice()
            ))),
            None => Err(Error::Capability(format!("{} losses have no analytic minimizer", loss.family()))),
        },
        MinimizerMethod::GridThenDescent => {
            let grid = feasible_grid(set, COARSE_GRID_POINTS)?;
            let mut best = (f64::INFINITY, set.center());
            for x in grid {
                let value = loss.global_value(k, &x)?;
                if value < best.0 {
                    best = (value, x);
                }
            }
            let mut x = best.1;
            for _ in 0..DESCENT_MAX_ITERS {
                let g = loss.global_gradient(k, &x)?;
                let next = set.project(&(&x - g * DESCENT_STEP))?;
                let mapping = (&x - &next).norm() / DESCENT_STEP;
                x = next;
                if mapping <= DESCENT_TOLERANCE {
                    break;
                }
            }
            Ok(x)
        }
    }
}

/// `sum_i |x_i - mean|`.
pub fn consensus_error(decisions: &[Vector]) -> f64 {
    let Some(first) = decisions.first() else {
        return 0.0;
    };
    let mut mean = Vector::zeros(first.len());
    for x in decisions {
        mean += x;
    }
    mean /= decisions.len() as f64;
    decisions.iter().map(|x| (x - &mean).norm()).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub k: usize,
    /// `x_{i,k}` for every agent.
    pub decisions: Vec<Vector>,
    /// `g_{i,k}` for every agent.
    pub estimates: Vec<Vector>,
    /// `f_{i,k}(x_{i,k})` for every agent.
    pub agent_losses: Vec<f64>,
    /// Global loss at the tracked agent's decision.
    pub tracked_loss: f64,
    /// `f_k(x_k^*)` (convex) or `min_x <grad f_k(x_{j,k}), x>` (nonconvex).
    pub benchmark: f64,
    pub increment: f64,
    pub cumulative: f64,
    pub consensus_error: f64,
    /// Function evaluations spent by all agents this round.
    pub function_queries: usize,
    pub gradient_queries: usize,
}

/// Per-round history of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretLedger {
    pub metric: RegretMetric,
    pub estimator: EstimatorKind,
    pub tracked_agent: usize,
    pub seed: u64,
    pub records: Vec<RoundRecord>,
}

impl RegretLedger {
    pub fn new(metric: RegretMetric, estimator: EstimatorKind, tracked_agent: usize, seed: u64) -> Self {
        RegretLedger { metric, estimator, tracked_agent, seed, records: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn push(&mut self, mut record: RoundRecord) {
        record.cumulative = self.final_regret() + record.increment;
        self.records.push(record);
    }

    pub fn final_regret(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.cumulative)
    }

    pub fn cumulative_curve(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.cumulative).collect()
    }

    /// `DR_T / T` using the first `horizon` rounds.
    pub fn average_regret(&self, horizon: usize) -> Option<f64> {
        (horizon >= 1 && horizon <= self.len()).then(|| self.records[horizon - 1].cumulative / horizon as f64)
    }

    /// `(1/T) sum_{k <= T} sum_i |x_{i,k} - mean_k|`.
    pub fn time_averaged_consensus(&self, horizon: usize) -> Option<f64> {
        (horizon >= 1 && horizon <= self.len())
            .then(|| self.records[..horizon].iter().map(|r| r.consensus_error).sum::<f64>() / horizon as f64)
    }

    pub fn csv_header(dim: usize) -> String {
        let mut cols = vec!["k".to_string(), "agent".to_string()];
        cols.extend((1..=dim).map(|j| format!("x{j}")));
        cols.extend(
            ["loss", "regret_increment", "cum_regret", "consensus_error", "fn_queries"]
                .iter()
                .map(|s| s.to_string()),
        );
        cols.join(",")
    }

    /// One row per round for the tracked agent.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let dim = self.records.first().map_or(0, |r| r.decisions[self.tracked_agent].len());
        writeln!(out, "{}", Self::csv_header(dim))?;
        for r in &self.records {
            write!(out, "{},{}", r.k, self.tracked_agent)?;
            for v in r.decisions[self.tracked_agent].iter() {
                write!(out, ",{v}")?;
            }
            writeln!(
                out,
                ",{},{},{},{},{}",
                r.tracked_loss, r.increment, r.cumulative, r.consensus_error, r.function_queries
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}
