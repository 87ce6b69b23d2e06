//! Gaussian smoothing and the gradient-feedback oracles.
//!
//! All bandit oracles perturb along standard multivariate normal directions
//! and query the loss at `x + mu * u` without projecting back onto the
//! feasible set.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::losses::LossProcess;
use crate::Vector;

/// Gradient-feedback model used by each agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    /// Exact local gradient.
    FullGradient,
    /// `(u/mu) f_k(x + mu u)`.
    OnePoint,
    /// `(u/mu) (f_k(x + mu u) - f_k(x))`.
    TwoPoint,
    /// `(u_k/mu_k) (f_k(x_k + mu_k u_k) - f_{k-1}(x_{k-1} + mu_{k-1} u_{k-1}))`,
    /// reusing last round's query.
    OnePointResidual,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] = [
        EstimatorKind::FullGradient,
        EstimatorKind::TwoPoint,
        EstimatorKind::OnePointResidual,
        EstimatorKind::OnePoint,
    ];

    /// Function evaluations per agent per round.
    pub fn query_count(self) -> usize {
        match self {
            EstimatorKind::FullGradient => 0,
            EstimatorKind::OnePoint | EstimatorKind::OnePointResidual => 1,
            EstimatorKind::TwoPoint => 2,
        }
    }

    pub fn is_bandit(self) -> bool {
        self != EstimatorKind::FullGradient
    }

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::FullGradient => "full_gradient",
            EstimatorKind::OnePoint => "one_point",
            EstimatorKind::TwoPoint => "two_point",
            EstimatorKind::OnePointResidual => "one_point_residual",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full_gradient" | "full" => Ok(EstimatorKind::FullGradient),
            "one_point" => Ok(EstimatorKind::OnePoint),
            "two_point" => Ok(EstimatorKind::TwoPoint),
            "one_point_residual" | "residual" => Ok(EstimatorKind::OnePointResidual),
            other => Err(Error::Config(format!("unknown estimator kind `{other}`"))),
        }
    }
}

/// What the residual oracle carries from one round to the next.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResidualMemory {
    /// `f_{i,k-1}(x_{i,k-1} + mu_{k-1} u_{i,k-1})`.
    pub previous_value: f64,
    pub previous_direction: Option<Vector>,
    pub previous_mu: f64,
    pub initialized: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    pub gradient: Vector,
    pub function_queries: usize,
    pub gradient_queries: usize,
}

/// A standard normal vector in `d` dimensions.
pub fn gaussian_direction<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vector {
    Vector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// One gradient estimate for agent `i` at round `k`.
///
/// The residual oracle returns the zero vector the first time it is called
/// with an uninitialized memory; it still spends its one query so the next
/// round has a value to difference against.
#[allow(clippy::too_many_arguments)]
pub fn estimate_gradient<R: Rng + ?Sized>(
    kind: EstimatorKind,
    loss: &LossProcess,
    i: usize,
    k: usize,
    x: &Vector,
    mu: f64,
    memory: &mut ResidualMemory,
    rng: &mut R,
) -> Result<GradientEstimate> {
    check_dim(loss.dim(), x.len())?;
    if kind.is_bandit() && !(mu.is_finite() && mu > 0.0) {
        return Err(Error::Usage(format!("smoothing radius must be positive, got {mu}")));
    }
    let d = x.len();
    let estimate = match kind {
        EstimatorKind::FullGradient => GradientEstimate {
            gradient: loss.gradient(i, k, x)?,
            function_queries: 0,
            gradient_queries: 1,
        },
        EstimatorKind::OnePoint => {
            let u = gaussian_direction(d, rng);
            let value = loss.evaluate(i, k, &(x + &u * mu))?;
            GradientEstimate { gradient: u * (value / mu), function_queries: 1, gradient_queries: 0 }
        }
        EstimatorKind::TwoPoint => {
            let u = gaussian_direction(d, rng);
            let perturbed = loss.evaluate(i, k, &(x + &u * mu))?;
            let base = loss.evaluate(i, k, x)?;
            GradientEstimate {
                gradient: u * ((perturbed - base) / mu),
                function_queries: 2,
                gradient_queries: 0,
            }
        }
        EstimatorKind::OnePointResidual => {
            let u = gaussian_direction(d, rng);
            let value = loss.evaluate(i, k, &(x + &u * mu))?;
            let gradient = if memory.initialized {
                &u * ((value - memory.previous_value) / mu)
            } else {
                Vector::zeros(d)
            };
            *memory = ResidualMemory {
                previous_value: value,
                previous_direction: Some(u),
                previous_mu: mu,
                initialized: true,
            };
            GradientEstimate { gradient, function_queries: 1, gradient_queries: 0 }
        }
    };
    Ok(estimate)
}

/// Monte-Carlo estimate of `E[f(x + mu u)]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothedValue {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Estimates the Gaussian-smoothed loss `f^s_{i,k}(x)` from `samples` draws.
#[allow(clippy::too_many_arguments)]
pub fn smoothed_value<R: Rng + ?Sized>(
    loss: &LossProcess,
    i: usize,
    k: usize,
    x: &Vector,
    mu: f64,
    samples: usize,
    rng: &mut R,
) -> Result<SmoothedValue> {
    check_dim(loss.dim(), x.len())?;
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::Usage(format!("smoothing radius must be positive, got {mu}")));
    }
    if samples == 0 {
        return Err(Error::Usage("smoothing needs at least one sample".into()));
    }
    let mut stats = RunningStats::default();
    for _ in 0..samples {
        let u = gaussian_direction(x.len(), rng);
        stats.push(loss.evaluate(i, k, &(x + u * mu))?);
    }
    Ok(SmoothedValue { mean: stats.mean(), std_error: stats.std_error(), samples })
}

/// Welford accumulator for a scalar sample.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningStats {
    count: usize,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, value: f64) {
        self.count += 1;
        let delta = value - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (value - self.mean);
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero for fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}
