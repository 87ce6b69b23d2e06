//! Monte-Carlo and exact checks of the convergence building blocks.
//!
//! Every check reports what it measured, the bound it was compared to and
//! the statistical slack allowed, so a failure says by how much.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{check_mixing_bound, ten_node_topology, Weighting};
use crate::harness::config::preset;
use crate::harness::run_replicate;
use crate::losses::{CustomLoss, LossProcess};
use crate::rng::{keyed_stream, Purpose};
use crate::smoothing::{estimate_gradient, smoothed_value, EstimatorKind, ResidualMemory, RunningStats};
use crate::Vector;

/// Arithmetic slack on the mixing bound.
pub const MIXING_SLACK: f64 = 1e-10;
/// Standard errors of Monte-Carlo slack on one-sided bounds.
pub const SE_MULTIPLIER: f64 = 3.0;
/// Largest acceptable per-coordinate z-score for unbiasedness.
pub const Z_LIMIT: f64 = 4.0;
/// Required one-point / residual variance ratio.
pub const VARIANCE_RATIO: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Fast,
    Full,
}

impl std::str::FromStr for Level {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "fast" => Ok(Level::Fast),
            "full" => Ok(Level::Full),
            other => Err(crate::Error::Usage(format!("unknown level {other:?} (expected fast or full)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = "<")]
    Below,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub relation: Relation,
    pub bound: f64,
    /// Slack added to the bound (statistical or arithmetic).
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, measured: f64, relation: Relation, bound: f64, tolerance: f64, detail: String) -> Self {
        let passed = match relation {
            Relation::AtMost => measured <= bound + tolerance,
            Relation::AtLeast => measured >= bound - tolerance,
            Relation::Below => measured < bound + tolerance,
        } && measured.is_finite();
        Check { name: name.into(), measured, relation, bound, tolerance, passed, detail }
    }
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let rel = match self.relation {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
            Relation::Below => "<",
        };
        write!(
            f,
            "{} {}: measured {:.6e} {rel} {:.6e} (tol {:.3e}) {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.bound,
            self.tolerance,
            self.detail
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub level: Level,
    pub checks: Vec<Check>,
    pub wall_time_seconds: f64,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// `max_ij |[W(k,s)]_ij - 1/n| <= Gamma gamma^(k-s)` on the builtin topology
/// for all `1 <= s <= k <= max_round`.
pub fn mixing_check(max_round: usize) -> Check {
    let graph = ten_node_topology(Weighting::Metropolis).expect("builtin topology is valid");
    let c = check_mixing_bound(&graph, max_round);
    Check::new(
        "mixing bound",
        c.worst_excess,
        Relation::AtMost,
        0.0,
        MIXING_SLACK,
        format!(
            "max deviation minus bound over {} pairs, worst at (k, s) = {:?}",
            c.pairs_checked, c.worst_pair
        ),
    )
}

/// `f(x) = L0 |x|_1 / sqrt(d)`, which is `L0`-Lipschitz.
pub fn scaled_l1(dim: usize, lipschitz: f64) -> LossProcess {
    let scale = lipschitz / (dim as f64).sqrt();
    LossProcess::Custom(CustomLoss::new(1, dim, move |_, _, x| scale * x.lp_norm(1)))
}

/// `|f^s(x) - f(x)| <= mu L0 sqrt(d)` at `points` random `x`, with
/// `SE_MULTIPLIER` standard errors of slack per point.
pub fn smoothing_error_check(mu: f64, samples: usize, points: usize, seed: u64) -> Check {
    let (d, l0) = (3, 2.0);
    let loss = scaled_l1(d, l0);
    let bound = mu * l0 * (d as f64).sqrt();
    let mut rng = keyed_stream(seed, Purpose::Auxiliary, 0, 0);
    let mut worst = f64::NEG_INFINITY;
    let mut worst_se = 0.0;
    for p in 0..points {
        let x = Vector::from_iterator(d, (0..d).map(|_| rng.random_range(-2.0..2.0)));
        let mut mc = keyed_stream(seed, Purpose::Perturbation, p, 0);
        let s = smoothed_value(&loss, 0, 1, &x, mu, samples, &mut mc).expect("valid smoothing inputs");
        let exact = loss.evaluate(0, 1, &x).expect("dimension matches");
        let excess = (s.mean - exact).abs() - SE_MULTIPLIER * s.std_error;
        if excess > worst {
            worst = excess;
            worst_se = s.std_error;
        }
    }
    Check::new(
        format!("smoothing error mu={mu}"),
        worst,
        Relation::AtMost,
        bound,
        0.0,
        format!("max over {points} points of |f^s - f| - 3 SE (SE there {worst_se:.2e}), N = {samples}"),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestFunction {
    Linear,
    Quadratic,
}

type GradientOracle = Box<dyn Fn(&Vector) -> Vector>;

/// A test function and its smoothed gradient.
fn test_function(kind: TestFunction) -> (LossProcess, GradientOracle) {
    match kind {
        TestFunction::Linear => {
            let a = Vector::from_row_slice(&[1.5, -2.0, 0.5]);
            let a2 = a.clone();
            (
                LossProcess::Custom(CustomLoss::new(1, 3, move |_, _, x| a.dot(x) + 0.7)),
                Box::new(move |_| a2.clone()),
            )
        }
        TestFunction::Quadratic => {
            // f = 1/2 x'Ax + b'x; smoothing adds a constant so the gradient is Ax + b
            let a = crate::Matrix::from_row_slice(3, 3, &[2.0, 0.5, 0.0, 0.5, 1.0, -0.3, 0.0, -0.3, 3.0]);
            let b = Vector::from_row_slice(&[-1.0, 0.25, 0.5]);
            let (a2, b2) = (a.clone(), b.clone());
            (
                LossProcess::Custom(CustomLoss::new(1, 3, move |_, _, x| 0.5 * x.dot(&(&a * x)) + b.dot(x))),
                Box::new(move |x| &a2 * x + &b2),
            )
        }
    }
}

/// Draws one residual estimate at `x` given a previous query near `x_prev`.
fn residual_draw<R: Rng>(loss: &LossProcess, x_prev: &Vector, x: &Vector, mu_prev: f64, mu: f64, rng: &mut R) -> Vector {
    let mut memory = ResidualMemory::default();
    estimate_gradient(EstimatorKind::OnePointResidual, loss, 0, 1, x_prev, mu_prev, &mut memory, rng)
        .expect("valid residual inputs");
    estimate_gradient(EstimatorKind::OnePointResidual, loss, 0, 2, x, mu, &mut memory, rng)
        .expect("valid residual inputs")
        .gradient
}

/// Per-coordinate z-score of the residual estimator's sample mean against
/// the smoothed gradient.
pub fn residual_unbiased_check(kind: TestFunction, samples: usize, seed: u64) -> Check {
    let (loss, grad) = test_function(kind);
    let mu = 0.1;
    let x = Vector::from_row_slice(&[0.3, -0.4, 0.8]);
    let x_prev = Vector::from_row_slice(&[0.25, -0.35, 0.9]);
    let truth = grad(&x);
    let mut stats = [RunningStats::default(); 3];
    let mut rng = keyed_stream(seed, Purpose::Perturbation, 0, 0);
    for _ in 0..samples {
        let g = residual_draw(&loss, &x_prev, &x, mu, mu, &mut rng);
        for (s, v) in stats.iter_mut().zip(g.iter()) {
            s.push(*v);
        }
    }
    let z = stats
        .iter()
        .zip(truth.iter())
        .map(|(s, t)| ((s.mean() - t) / s.std_error()).abs())
        .fold(0.0, f64::max);
    Check::new(
        format!("residual unbiasedness ({kind:?})").to_lowercase(),
        z,
        Relation::AtMost,
        Z_LIMIT,
        0.0,
        format!("max |z| over coordinates, N = {samples}"),
    )
}

/// Setup shared by the second-moment and variance checks: static
/// `f = |x|_1 / sqrt(2)` (so `L0 = 1`), consecutive points `delta = mu^2`
/// apart, `mu_{k-1} = mu_k = mu`.
pub struct MomentSetup {
    pub loss: LossProcess,
    pub x_prev: Vector,
    pub x: Vector,
    pub lipschitz: f64,
    pub mu: f64,
}

impl MomentSetup {
    pub fn new(mu: f64) -> Self {
        let delta = mu * mu;
        let x_prev = Vector::from_row_slice(&[0.5, 0.5]);
        let x = &x_prev + Vector::from_row_slice(&[delta, 0.0]);
        MomentSetup { loss: scaled_l1(2, 1.0), x_prev, x, lipschitz: 1.0, mu }
    }

    /// `3 d L0^2 |x_k - x_{k-1}|^2 / mu_k^2 + 12 (d+4)^2 L0^2 mu_{k-1}^2 / mu_k^2`.
    pub fn bound(&self) -> f64 {
        let d = self.x.len() as f64;
        let l2 = self.lipschitz * self.lipschitz;
        let step = (&self.x - &self.x_prev).norm_squared();
        3.0 * d * l2 * step / (self.mu * self.mu) + 12.0 * (d + 4.0).powi(2) * l2
    }

    /// Sample statistics of `|g|^2` and the coordinate-wise sample
    /// variance (trace of the covariance) for `kind`.
    pub fn moments(&self, kind: EstimatorKind, samples: usize, seed: u64) -> (RunningStats, f64) {
        let d = self.x.len();
        let mut sq = RunningStats::default();
        let mut coords = vec![RunningStats::default(); d];
        let mut rng = keyed_stream(seed, Purpose::Perturbation, kind as usize, 0);
        for _ in 0..samples {
            let g = match kind {
                EstimatorKind::OnePointResidual => residual_draw(&self.loss, &self.x_prev, &self.x, self.mu, self.mu, &mut rng),
                other => {
                    let mut memory = ResidualMemory::default();
                    estimate_gradient(other, &self.loss, 0, 1, &self.x, self.mu, &mut memory, &mut rng)
                        .expect("valid estimator inputs")
                        .gradient
                }
            };
            sq.push(g.norm_squared());
            for (s, v) in coords.iter_mut().zip(g.iter()) {
                s.push(*v);
            }
        }
        (sq, coords.iter().map(|s| s.variance()).sum())
    }
}

/// `E|g|^2` of the residual estimator against the second-moment bound.
pub fn second_moment_check(mu: f64, samples: usize, seed: u64) -> Check {
    let setup = MomentSetup::new(mu);
    let (sq, _) = setup.moments(EstimatorKind::OnePointResidual, samples, seed);
    Check::new(
        format!("residual second moment mu={mu}"),
        sq.mean(),
        Relation::AtMost,
        setup.bound(),
        SE_MULTIPLIER * sq.std_error(),
        format!("N = {samples}"),
    )
}

/// One-point variance over residual variance in the second-moment setup.
pub fn variance_ratio_check(mu: f64, samples: usize, seed: u64) -> Check {
    let setup = MomentSetup::new(mu);
    let (_, one) = setup.moments(EstimatorKind::OnePoint, samples, seed);
    let (_, res) = setup.moments(EstimatorKind::OnePointResidual, samples, seed);
    Check::new(
        format!("variance ratio one-point/residual mu={mu}"),
        one / res,
        Relation::AtLeast,
        VARIANCE_RATIO,
        0.0,
        format!("one-point {one:.3e}, residual {res:.3e}, N = {samples}"),
    )
}

/// Time-averaged consensus error of the residual method on the tracking
/// problem with `k^-1/2` schedules, at `long` rounds against `short` rounds.
pub fn consensus_trend_check(short: usize, long: usize, replicates: usize) -> Check {
    let mut cfg = preset("consensus").expect("consensus preset parses");
    cfg.horizon = long;
    let mut at_short = 0.0;
    let mut at_long = 0.0;
    for r in 0..replicates {
        let ledger = run_replicate(&cfg, EstimatorKind::OnePointResidual, r).expect("consensus preset runs");
        at_short += ledger.time_averaged_consensus(short).expect("short <= long");
        at_long += ledger.time_averaged_consensus(long).expect("long <= horizon");
    }
    at_short /= replicates as f64;
    at_long /= replicates as f64;
    Check::new(
        "consensus trend",
        at_long,
        Relation::Below,
        at_short,
        0.0,
        format!("time-averaged consensus at T = {long} vs T = {short}, {replicates} replicates"),
    )
}

pub fn verify_suite(level: Level) -> VerifyReport {
    let start = Instant::now();
    let (samples, points, long, replicates) = match level {
        Level::Fast => (20_000, 5, 500, 4),
        Level::Full => (100_000, 20, 2000, 20),
    };
    let mut checks = vec![mixing_check(200)];
    for mu in [0.5, 0.1, 0.01] {
        checks.push(smoothing_error_check(mu, samples, points, 11));
    }
    checks.push(residual_unbiased_check(TestFunction::Linear, 100_000, 12));
    checks.push(residual_unbiased_check(TestFunction::Quadratic, 100_000, 13));
    for mu in [0.1, 0.01] {
        checks.push(second_moment_check(mu, samples, 14));
    }
    checks.push(variance_ratio_check(0.01, samples, 15));
    checks.push(consensus_trend_check(long / 10, long, replicates));
    VerifyReport { level, checks, wall_time_seconds: start.elapsed().as_secs_f64() }
}
