//! The synchronous distributed engine: local gradient-feedback step,
//! consensus mixing with `W_k`, projection back onto the feasible set.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::ConstraintSet;
use crate::graph::GraphSequence;
use crate::losses::LossProcess;
use crate::metrics::{
    consensus_error, convex_regret_increment, nonconvex_regret_terms, per_round_minimizer, MinimizerMethod,
    RegretLedger, RegretMetric, RoundRecord,
};
use crate::rng::{keyed_stream, Purpose};
use crate::smoothing::{estimate_gradient, EstimatorKind, ResidualMemory};
use crate::Vector;

/// A positive, non-increasing sequence indexed by the 1-based round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    /// `scale / (k + offset)^exponent`.
    PowerLaw { scale: f64, exponent: f64, offset: f64 },
    Constant { value: f64 },
}

impl Schedule {
    pub fn power_law(scale: f64, exponent: f64, offset: f64) -> Self {
        Schedule::PowerLaw { scale, exponent, offset }
    }

    pub fn constant(value: f64) -> Self {
        Schedule::Constant { value }
    }

    pub fn value(&self, k: usize) -> f64 {
        match *self {
            Schedule::PowerLaw { scale, exponent, offset } => scale / (k as f64 + offset).powf(exponent),
            Schedule::Constant { value } => value,
        }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        let ok = match *self {
            Schedule::PowerLaw { scale, exponent, offset } => {
                scale.is_finite() && scale > 0.0 && exponent.is_finite() && exponent >= 0.0 && offset.is_finite() && offset > -1.0
            }
            Schedule::Constant { value } => value.is_finite() && value > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "{name} schedule {self:?} must be positive and non-increasing for k >= 1"
            )))
        }
    }
}

/// `M = 4 sqrt(3d) n Gamma L0 gamma / (1 - gamma)`, the constant in the
/// theorem-mode step size `alpha_k = 1 / (2 M k^a)`.
pub fn theorem_constant_m(d: usize, n: usize, big_gamma: f64, gamma: f64, lipschitz: f64) -> Result<f64> {
    check_gamma(gamma)?;
    Ok(4.0 * (3.0 * d as f64).sqrt() * n as f64 * big_gamma * lipschitz * gamma / (1.0 - gamma))
}

/// The variant `sqrt(3d) (8 + 6 n Gamma) L0 / (gamma (1 - gamma))` that falls
/// out of the consensus-error derivation.
pub fn derived_constant_m(d: usize, n: usize, big_gamma: f64, gamma: f64, lipschitz: f64) -> Result<f64> {
    check_gamma(gamma)?;
    Ok((3.0 * d as f64).sqrt() * (8.0 + 6.0 * n as f64 * big_gamma) * lipschitz / (gamma * (1.0 - gamma)))
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(Error::Usage(format!("gamma must lie in (0, 1), got {gamma}")))
    }
}

/// Theorem-mode schedules `alpha_k = 1/(2 M k^a)`, `mu_k = 1/k^b`; requires
/// `0 < b <= a < 1`.
pub fn theorem_schedules(m: f64, a: f64, b: f64) -> Result<(Schedule, Schedule)> {
    if !(0.0 < b && b <= a && a < 1.0) {
        return Err(Error::Config(format!("theorem exponents need 0 < b <= a < 1, got a = {a}, b = {b}")));
    }
    if !(m.is_finite() && m > 0.0) {
        return Err(Error::Config(format!("M must be positive, got {m}")));
    }
    Ok((Schedule::power_law(1.0 / (2.0 * m), a, 0.0), Schedule::power_law(1.0, b, 0.0)))
}

/// Where agents start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Initialization {
    /// Every agent starts at the projection of `point`.
    Point { point: Vec<f64> },
    /// Each agent draws uniformly from the box, then projects.
    Uniform { lower: Vec<f64>, upper: Vec<f64> },
}

impl Initialization {
    pub fn origin(dim: usize) -> Self {
        Initialization::Point { point: vec![0.0; dim] }
    }

    pub fn initial_decisions(&self, n: usize, set: &ConstraintSet, seed: u64) -> Result<Vec<Vector>> {
        let d = set.dim();
        match self {
            Initialization::Point { point } => {
                check_dim(d, point.len())?;
                let x = set.project(&Vector::from_row_slice(point))?;
                Ok(vec![x; n])
            }
            Initialization::Uniform { lower, upper } => {
                check_dim(d, lower.len())?;
                check_dim(d, upper.len())?;
                if lower.iter().zip(upper).any(|(l, u)| l.partial_cmp(u) != Some(std::cmp::Ordering::Less)) {
                    return Err(Error::Config("uniform initialization needs lower < upper".into()));
                }
                (0..n)
                    .map(|i| {
                        let mut rng = keyed_stream(seed, Purpose::Initialization, i, 0);
                        let x = Vector::from_iterator(d, (0..d).map(|j| rng.random_range(lower[j]..upper[j])));
                        set.project(&x)
                    })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmConfig {
    pub estimator: EstimatorKind,
    pub alpha: Schedule,
    pub mu: Schedule,
    pub horizon: usize,
    pub metric: RegretMetric,
    /// Agent `j` whose decisions the regret is measured at (0-based).
    pub tracked_agent: usize,
    pub initialization: Initialization,
    pub benchmark: MinimizerMethod,
}

impl AlgorithmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        self.alpha.validate("alpha")?;
        if self.estimator.is_bandit() {
            self.mu.validate("mu")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    /// Current decision `x_{i,k}`.
    pub x: Vector,
    pub memory: ResidualMemory,
    /// Last estimate `g_{i,k}`.
    pub last_estimate: Vector,
}

impl AgentState {
    pub fn new(x: Vector) -> Self {
        let d = x.len();
        AgentState { x, memory: ResidualMemory::default(), last_estimate: Vector::zeros(d) }
    }
}

/// What a round spent.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub estimates: Vec<Vector>,
    pub function_queries: usize,
    pub gradient_queries: usize,
}

/// Advances every agent from `x_{i,k}` to `x_{i,k+1}`.
///
/// All estimates and gradient steps `y_{i,k} = x_{i,k} - alpha_k g_{i,k}` are
/// formed before any mixing; then `x_{i,k+1} = P[sum_j W_k[i,j] y_{j,k}]`.
/// Perturbations for agent `i` come from the stream keyed by `(seed, i, k)`.
#[allow(clippy::too_many_arguments)]
pub fn step(
    states: &mut [AgentState],
    k: usize,
    graph: &GraphSequence,
    loss: &LossProcess,
    set: &ConstraintSet,
    estimator: EstimatorKind,
    alpha: f64,
    mu: f64,
    seed: u64,
) -> Result<StepReport> {
    let n = states.len();
    check_dim(graph.n(), n)?;
    let mut report = StepReport { estimates: Vec::with_capacity(n), function_queries: 0, gradient_queries: 0 };
    let mut ys = Vec::with_capacity(n);
    for (i, state) in states.iter_mut().enumerate() {
        let mut rng = keyed_stream(seed, Purpose::Perturbation, i, k);
        let est = estimate_gradient(estimator, loss, i, k, &state.x, mu, &mut state.memory, &mut rng)?;
        if est.function_queries != estimator.query_count() {
            return Err(Error::Diverged {
                round: k,
                agent: i,
                what: format!("spent {} queries, expected {}", est.function_queries, estimator.query_count()),
            });
        }
        if est.gradient.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { round: k, agent: i, what: "gradient estimate is not finite".into() });
        }
        report.function_queries += est.function_queries;
        report.gradient_queries += est.gradient_queries;
        ys.push(&state.x - &est.gradient * alpha);
        state.last_estimate = est.gradient.clone();
        report.estimates.push(est.gradient);
    }
    let w = graph.weight_matrix_at(k);
    for (i, state) in states.iter_mut().enumerate() {
        let mut mixed = Vector::zeros(set.dim());
        for (j, y) in ys.iter().enumerate() {
            let wij = w[(i, j)];
            if wij != 0.0 {
                mixed += y * wij;
            }
        }
        state.x = set.project(&mixed).map_err(|e| match e {
            Error::NonFinite(_) => Error::Diverged { round: k, agent: i, what: "mixed iterate is not finite".into() },
            other => other,
        })?;
    }
    Ok(report)
}

fn check_problem(config: &AlgorithmConfig, graph: &GraphSequence, loss: &LossProcess, set: &ConstraintSet) -> Result<()> {
    config.validate()?;
    set.validate()?;
    if loss.n() != graph.n() {
        return Err(Error::Config(format!("loss has {} agents but graph has {}", loss.n(), graph.n())));
    }
    check_dim(set.dim(), loss.dim())?;
    if config.tracked_agent >= loss.n() {
        return Err(Error::Config(format!(
            "tracked agent {} out of range for {} agents",
            config.tracked_agent,
            loss.n()
        )));
    }
    if let Some(last) = loss.last_round() {
        if config.horizon > last {
            return Err(Error::Config(format!("horizon {} exceeds the loss process's last round {last}", config.horizon)));
        }
    }
    if config.estimator == EstimatorKind::FullGradient && !loss.has_gradient() {
        return Err(Error::Capability("full-gradient feedback needs an analytic gradient".into()));
    }
    if config.metric == RegretMetric::Nonconvex && !loss.has_gradient() {
        return Err(Error::Capability("nonconvex regret needs an analytic gradient".into()));
    }
    Ok(())
}

/// Runs `config.horizon` rounds and records the regret ledger.
pub fn run(
    config: &AlgorithmConfig,
    graph: &GraphSequence,
    loss: &LossProcess,
    set: &ConstraintSet,
    seed: u64,
) -> Result<RegretLedger> {
    check_problem(config, graph, loss, set)?;
    let n = loss.n();
    let mut states: Vec<AgentState> = config
        .initialization
        .initial_decisions(n, set, seed)?
        .into_iter()
        .map(AgentState::new)
        .collect();
    let mut ledger = RegretLedger::new(config.metric, config.estimator, config.tracked_agent, seed);
    let j = config.tracked_agent;
    for k in 1..=config.horizon {
        let decisions: Vec<Vector> = states.iter().map(|s| s.x.clone()).collect();
        let agent_losses = (0..n).map(|i| loss.evaluate(i, k, &decisions[i])).collect::<Result<Vec<_>>>()?;
        let tracked_loss = loss.global_value(k, &decisions[j])?;
        let (increment, benchmark) = match config.metric {
            RegretMetric::Convex => {
                let x_star = per_round_minimizer(loss, k, set, config.benchmark)?;
                let inc = convex_regret_increment(loss, k, &decisions[j], &x_star)?;
                (inc, tracked_loss - inc)
            }
            RegretMetric::Nonconvex => nonconvex_regret_terms(loss, k, &decisions[j], set)?,
        };
        if !tracked_loss.is_finite() || !increment.is_finite() {
            return Err(Error::Diverged { round: k, agent: j, what: "regret increment is not finite".into() });
        }
        let report = step(
            &mut states,
            k,
            graph,
            loss,
            set,
            config.estimator,
            config.alpha.value(k),
            config.mu.value(k),
            seed,
        )?;
        ledger.push(RoundRecord {
            k,
            consensus_error: consensus_error(&decisions),
            decisions,
            estimates: report.estimates,
            agent_losses,
            tracked_loss,
            benchmark,
            increment,
            cumulative: 0.0,
            function_queries: report.function_queries,
            gradient_queries: report.gradient_queries,
        });
    }
    Ok(ledger)
}
