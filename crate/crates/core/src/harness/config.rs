//! Declarative TOML experiment configs and the checked-in presets.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ConstraintSet;
use crate::graph::{build_periodic_topology, ten_node_parts, GraphSequence, Weighting};
use crate::losses::{estimate_lipschitz, CubicCosine, LossProcess, TargetTracking, SENSOR_POSITIONS};
use crate::metrics::{MinimizerMethod, RegretMetric};
use crate::optimizer::{
    derived_constant_m, theorem_constant_m, theorem_schedules, AlgorithmConfig, Initialization, Schedule,
};
use crate::smoothing::EstimatorKind;

pub const BUILTIN_TOPOLOGY: &str = "ten-node";

/// Pairs used when estimating the Lipschitz constant for theorem-mode steps.
const LIPSCHITZ_PAIRS: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    /// Ten range sensors tracking a randomly wandering target.
    TargetTracking,
    /// Nonconvex cubic-cosine losses with noisy drifting coefficients.
    CubicCosine {
        #[serde(default = "default_agents")]
        agents: usize,
        #[serde(default = "default_noise_std")]
        noise_std: f64,
    },
}

fn default_agents() -> usize {
    10
}

fn default_noise_std() -> f64 {
    1.0
}

impl ProblemConfig {
    pub fn agents(&self) -> usize {
        match self {
            ProblemConfig::TargetTracking => SENSOR_POSITIONS.len(),
            ProblemConfig::CubicCosine { agents, .. } => *agents,
        }
    }

    pub fn dim(&self) -> usize {
        2
    }

    /// The loss sequence for one replicate; randomness in the environment is
    /// keyed by the replicate seed so estimators see identical losses.
    pub fn build(&self, horizon: usize, seed: u64) -> Result<LossProcess> {
        Ok(match self {
            ProblemConfig::TargetTracking => LossProcess::TargetTracking(TargetTracking::new(horizon, seed)?),
            ProblemConfig::CubicCosine { agents, noise_std } => {
                LossProcess::CubicCosine(CubicCosine::new(*agents, *noise_std, seed)?)
            }
        })
    }

    pub fn default_set(&self) -> ConstraintSet {
        match self {
            ProblemConfig::TargetTracking => ConstraintSet::L1 { dim: 2, radius: 3.0 },
            ProblemConfig::CubicCosine { .. } => ConstraintSet::Box { lower: vec![-3.0; 2], upper: vec![3.0; 2] },
        }
    }

    pub fn default_metric(&self) -> RegretMetric {
        match self {
            ProblemConfig::TargetTracking => RegretMetric::Convex,
            ProblemConfig::CubicCosine { .. } => RegretMetric::Nonconvex,
        }
    }

    pub fn default_initialization(&self) -> Initialization {
        match self {
            ProblemConfig::TargetTracking => Initialization::origin(2),
            ProblemConfig::CubicCosine { .. } => Initialization::Uniform { lower: vec![-3.0; 2], upper: vec![3.0; 2] },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphConfig {
    /// A named built-in topology.
    Builtin {
        name: String,
        #[serde(default = "default_weighting")]
        weighting: Weighting,
    },
    /// Periodic edge lists; phase `p` is active in rounds `k` with `k % len == p`.
    Periodic {
        n: usize,
        phases: Vec<Vec<[usize; 2]>>,
        #[serde(default = "default_weighting")]
        weighting: Weighting,
    },
}

fn default_weighting() -> Weighting {
    Weighting::Metropolis
}

impl GraphConfig {
    pub fn build(&self) -> Result<GraphSequence> {
        match self {
            GraphConfig::Builtin { name, weighting } => {
                if name != BUILTIN_TOPOLOGY {
                    return Err(Error::Config(format!(
                        "unknown builtin topology {name:?} (available: {BUILTIN_TOPOLOGY:?})"
                    )));
                }
                build_periodic_topology(10, &ten_node_parts(), *weighting)
            }
            GraphConfig::Periodic { n, phases, weighting } => {
                let parts: Vec<Vec<(usize, usize)>> =
                    phases.iter().map(|p| p.iter().map(|e| (e[0], e[1])).collect()).collect();
                build_periodic_topology(*n, &parts, *weighting)
            }
        }
    }
}

/// Which closed form to use for the theorem-mode constant `M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantForm {
    #[default]
    Theorem,
    Derived,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleConfig {
    Explicit {
        alpha: Schedule,
        mu: Schedule,
    },
    /// `alpha_k = c / k^a`, `mu_k = 1 / k^b`. Without `scale`, `c = 1/(2M)`
    /// from the graph constants and a Lipschitz bound (estimated when absent).
    Theorem {
        a: f64,
        b: f64,
        #[serde(default)]
        scale: Option<f64>,
        #[serde(default)]
        lipschitz: Option<f64>,
        #[serde(default)]
        constant: ConstantForm,
    },
}

/// Step and smoothing schedules after theorem-mode constants are filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedSchedule {
    pub alpha: Schedule,
    pub mu: Schedule,
    pub m: Option<f64>,
    pub lipschitz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub horizon: usize,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    pub estimators: Vec<EstimatorKind>,
    #[serde(default)]
    pub tracked_agent: usize,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub metric: Option<RegretMetric>,
    #[serde(default = "default_benchmark")]
    pub benchmark: MinimizerMethod,
    /// Also report the loss-variation and path-length functionals.
    #[serde(default)]
    pub report_variation: bool,
    pub problem: ProblemConfig,
    pub graph: GraphConfig,
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub set: Option<ConstraintSet>,
    #[serde(default)]
    pub initialization: Option<Initialization>,
}

fn default_replicates() -> usize {
    20
}

fn default_benchmark() -> MinimizerMethod {
    MinimizerMethod::Analytic
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn graph_weighting(&self) -> Weighting {
        match &self.graph {
            GraphConfig::Builtin { weighting, .. } | GraphConfig::Periodic { weighting, .. } => *weighting,
        }
    }

    pub fn set(&self) -> ConstraintSet {
        self.set.clone().unwrap_or_else(|| self.problem.default_set())
    }

    pub fn metric(&self) -> RegretMetric {
        self.metric.unwrap_or_else(|| self.problem.default_metric())
    }

    pub fn initialization(&self) -> Initialization {
        self.initialization.clone().unwrap_or_else(|| self.problem.default_initialization())
    }

    /// Checks everything that can be checked without running; returns the
    /// built graph and set.
    pub fn validate(&self) -> Result<(GraphSequence, ConstraintSet)> {
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::Config("at least one estimator is required".into()));
        }
        for (idx, e) in self.estimators.iter().enumerate() {
            if self.estimators[..idx].contains(e) {
                return Err(Error::Config(format!("estimator {e} listed twice")));
            }
        }
        if let ProblemConfig::CubicCosine { agents, noise_std } = &self.problem {
            if *agents == 0 || !(noise_std.is_finite() && *noise_std >= 0.0) {
                return Err(Error::Config("cubic_cosine needs agents >= 1 and noise_std >= 0".into()));
            }
        }
        let set = self.set();
        set.validate().map_err(|e| Error::Config(e.to_string()))?;
        if set.dim() != self.problem.dim() {
            return Err(Error::Config(format!(
                "set has dimension {} but the problem has dimension {}",
                set.dim(),
                self.problem.dim()
            )));
        }
        let graph = self.graph.build().map_err(|e| Error::Config(e.to_string()))?;
        if graph.n() != self.problem.agents() {
            return Err(Error::Config(format!(
                "graph has {} nodes but the problem has {} agents",
                graph.n(),
                self.problem.agents()
            )));
        }
        let report = graph.validate();
        // the in-neighbour rule is kept for fidelity runs even when only row stochastic
        let tolerated = matches!(self.graph_weighting(), Weighting::InNeighbor) && !report.has_connectivity_violation();
        if !report.is_ok() && !tolerated {
            let msgs: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
            return Err(Error::Config(format!("graph violates assumptions: {}", msgs.join("; "))));
        }
        if self.tracked_agent >= graph.n() {
            return Err(Error::Config(format!(
                "tracked_agent {} out of range for {} agents",
                self.tracked_agent,
                graph.n()
            )));
        }
        if self.metric() == RegretMetric::Convex
            && self.benchmark == MinimizerMethod::Analytic
            && !matches!(self.problem, ProblemConfig::TargetTracking)
        {
            return Err(Error::Config("analytic benchmark is only available for target_tracking".into()));
        }
        match &self.schedule {
            ScheduleConfig::Explicit { alpha, mu } => {
                alpha.validate("alpha")?;
                mu.validate("mu")?;
            }
            ScheduleConfig::Theorem { a, b, scale, lipschitz, .. } => {
                theorem_schedules(1.0, *a, *b)?;
                if scale.is_some_and(|c| !(c.is_finite() && c > 0.0)) {
                    return Err(Error::Config("theorem scale must be positive".into()));
                }
                if lipschitz.is_some_and(|l| !(l.is_finite() && l > 0.0)) {
                    return Err(Error::Config("lipschitz must be positive".into()));
                }
            }
        }
        let init = self.initialization();
        let d = set.dim();
        let init_dim_ok = match &init {
            Initialization::Point { point } => point.len() == d,
            Initialization::Uniform { lower, upper } => {
                lower.len() == d && upper.len() == d && lower.iter().zip(upper).all(|(l, u)| l < u)
            }
        };
        if !init_dim_ok {
            return Err(Error::Config(format!("initialization does not match the {d}-dimensional set")));
        }
        Ok((graph, set))
    }

    pub fn resolve_schedule(&self, graph: &GraphSequence, set: &ConstraintSet) -> Result<ResolvedSchedule> {
        match &self.schedule {
            ScheduleConfig::Explicit { alpha, mu } => {
                Ok(ResolvedSchedule { alpha: *alpha, mu: *mu, m: None, lipschitz: None })
            }
            ScheduleConfig::Theorem { a, b, scale: Some(c), .. } => {
                let (alpha, mu) = theorem_schedules(1.0, *a, *b)?;
                let alpha = match alpha {
                    Schedule::PowerLaw { exponent, offset, .. } => Schedule::PowerLaw { scale: *c, exponent, offset },
                    other => other,
                };
                Ok(ResolvedSchedule { alpha, mu, m: None, lipschitz: None })
            }
            ScheduleConfig::Theorem { a, b, scale: None, lipschitz, constant } => {
                let l0 = match lipschitz {
                    Some(l) => *l,
                    None => {
                        let loss = self.problem.build(self.horizon, self.seed)?;
                        let rounds: Vec<usize> = [1, self.horizon.div_ceil(2), self.horizon].to_vec();
                        estimate_lipschitz(&loss, &rounds, set, LIPSCHITZ_PAIRS, self.seed)?
                    }
                };
                let c = graph.mixing_constants();
                let n = graph.n();
                let d = set.dim();
                let m = match constant {
                    ConstantForm::Theorem => theorem_constant_m(d, n, c.big_gamma, c.gamma, l0)?,
                    ConstantForm::Derived => derived_constant_m(d, n, c.big_gamma, c.gamma, l0)?,
                };
                let (alpha, mu) = theorem_schedules(m, *a, *b)?;
                Ok(ResolvedSchedule { alpha, mu, m: Some(m), lipschitz: Some(l0) })
            }
        }
    }

    pub fn algorithm(&self, estimator: EstimatorKind, schedule: &ResolvedSchedule) -> AlgorithmConfig {
        AlgorithmConfig {
            estimator,
            alpha: schedule.alpha,
            mu: schedule.mu,
            horizon: self.horizon,
            metric: self.metric(),
            tracked_agent: self.tracked_agent,
            initialization: self.initialization(),
            benchmark: self.benchmark,
        }
    }
}

/// A checked-in experiment config.
#[derive(Debug, Clone, Copy)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub toml: &'static str,
}

pub const PRESETS: [Preset; 3] = [
    Preset {
        name: "fig2",
        description: "target tracking, convex dynamic regret, four feedback types",
        toml: include_str!("../../presets/fig2.toml"),
    },
    Preset {
        name: "fig3",
        description: "cubic-cosine, nonconvex dynamic regret, four feedback types",
        toml: include_str!("../../presets/fig3.toml"),
    },
    Preset {
        name: "consensus",
        description: "target tracking with k^-1/2 step and smoothing schedules, residual feedback",
        toml: include_str!("../../presets/consensus.toml"),
    },
];

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let p = PRESETS
        .iter()
        .find(|p| p.name == name)
        .ok_or_else(|| Error::Config(format!("unknown preset {name:?}")))?;
    ExperimentConfig::from_toml(p.toml)
}
