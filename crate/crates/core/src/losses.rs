//! Time-varying per-agent loss oracles `f_{i,k}`.
//!
//! Agents are indexed `0..n`; benchmark formulas use the 1-based label
//! `i + 1`. Rounds are 1-based. Every oracle is a pure function of
//! `(agent, round, x)` and its seed, so a round's loss can be queried any
//! number of times and always answers the same.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, check_finite, Error, Result};
use crate::geometry::ConstraintSet;
use crate::rng::{keyed_stream, Purpose};
use crate::Vector;

/// Sensor positions of the ten-sensor tracking benchmark.
pub const SENSOR_POSITIONS: [[f64; 2]; 10] = [
    [1.0, 3.0],
    [2.0, 5.0],
    [5.0, 1.0],
    [2.0, 4.0],
    [3.0, 1.0],
    [2.0, 3.0],
    [2.0, 6.0],
    [4.0, 2.0],
    [1.0, 2.0],
    [1.0, 1.0],
];

/// Target position in round 1.
pub const TARGET_START: [f64; 2] = [0.8, 0.95];

/// Default number of grid points used for the loss-variation estimate (64^2 in 2-d).
pub const DEFAULT_GRID_POINTS: usize = 4096;

/// One step of the target recursion:
/// `x_{k+1} = x_k + [(-1)^q sin(k/50)/(10k), -q cos(k/70)/(40k)]`.
pub fn advance_target(position: &Vector, k: usize, coin: bool) -> Result<Vector> {
    check_dim(2, position.len())?;
    if k == 0 {
        return Err(Error::Usage("target recursion is defined for rounds k >= 1".into()));
    }
    let kf = k as f64;
    let q = if coin { 1.0 } else { 0.0 };
    let sign = if coin { -1.0 } else { 1.0 };
    Ok(Vector::from_row_slice(&[
        position[0] + sign * (kf / 50.0).sin() / (10.0 * kf),
        position[1] - q * (kf / 70.0).cos() / (40.0 * kf),
    ]))
}

/// Range-only tracking of a slowly moving 2-d target:
/// `f_{i,k}(x) = (|x - s_i|^2 - z_{i,k})^2 / 4` with `z_{i,k} = |x_k^* - s_i|^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetTracking {
    sensors: Vec<Vector>,
    /// `path[k - 1]` is the target in round `k`.
    path: Vec<Vector>,
}

impl TargetTracking {
    /// Ten-sensor benchmark with the target path precomputed for rounds
    /// `1..=horizon + 1`; the coins come from the seeded stream.
    pub fn new(horizon: usize, seed: u64) -> Result<Self> {
        let sensors = SENSOR_POSITIONS.iter().map(|s| Vector::from_row_slice(s)).collect();
        let start = Vector::from_row_slice(&TARGET_START);
        let coins = (1..=horizon)
            .map(|k| keyed_stream(seed, Purpose::TargetCoin, 0, k).random_bool(0.5))
            .collect::<Vec<_>>();
        Self::with_coins(sensors, start, &coins)
    }

    /// Explicit sensors, start and coin sequence; `coins[k - 1]` drives the
    /// move from round `k` to `k + 1`.
    pub fn with_coins(sensors: Vec<Vector>, start: Vector, coins: &[bool]) -> Result<Self> {
        if sensors.is_empty() {
            return Err(Error::Usage("at least one sensor is required".into()));
        }
        for s in &sensors {
            check_dim(2, s.len())?;
        }
        let mut path = Vec::with_capacity(coins.len() + 1);
        path.push(start);
        for (idx, &coin) in coins.iter().enumerate() {
            let next = advance_target(path.last().expect("path is non-empty"), idx + 1, coin)?;
            path.push(next);
        }
        Ok(TargetTracking { sensors, path })
    }

    pub fn sensors(&self) -> &[Vector] {
        &self.sensors
    }

    /// Target positions for rounds `1..=path.len()`.
    pub fn path(&self) -> &[Vector] {
        &self.path
    }

    pub fn target(&self, k: usize) -> Result<&Vector> {
        if k == 0 || k > self.path.len() {
            return Err(Error::RoundOutOfRange { round: k, max: self.path.len() });
        }
        Ok(&self.path[k - 1])
    }

    pub fn measurement(&self, i: usize, k: usize) -> Result<f64> {
        let s = self.sensor(i)?;
        Ok((self.target(k)? - s).norm_squared())
    }

    fn sensor(&self, i: usize) -> Result<&Vector> {
        self.sensors.get(i).ok_or(Error::AgentOutOfRange { agent: i, n: self.sensors.len() })
    }

    fn residual(&self, i: usize, k: usize, x: &Vector) -> Result<(f64, Vector)> {
        let z = self.measurement(i, k)?;
        let diff = x - self.sensor(i)?;
        Ok((diff.norm_squared() - z, diff))
    }
}

/// Nonconvex cubic-cosine benchmark:
/// `f_{i,k}(x) = (i/63) x1^3 + ((i-1)/15)(x1^2 + x2^2) - (2(i-3)/3) r_{i,k} cos(x2)`
/// with `r_{i,k} = atan(k)/2 + noise_std * xi_{i,k} / 2` and `xi_{i,k}` a
/// standard normal fixed per `(i, k)` by the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicCosine {
    pub n: usize,
    pub noise_std: f64,
    pub seed: u64,
}

impl CubicCosine {
    pub fn new(n: usize, noise_std: f64, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Usage("at least one agent is required".into()));
        }
        if !(noise_std.is_finite() && noise_std >= 0.0) {
            return Err(Error::Usage(format!("noise std must be non-negative, got {noise_std}")));
        }
        Ok(CubicCosine { n, noise_std, seed })
    }

    /// The committed coefficient `r_{i,k}` of round `k`.
    pub fn drift(&self, i: usize, k: usize) -> f64 {
        let xi: f64 = if self.noise_std == 0.0 {
            0.0
        } else {
            keyed_stream(self.seed, Purpose::LossNoise, i, k).sample(StandardNormal)
        };
        0.5 * (k as f64).atan() + 0.5 * self.noise_std * xi
    }

    fn coefficients(i: usize) -> (f64, f64, f64) {
        let label = (i + 1) as f64;
        (label / 63.0, (label - 1.0) / 15.0, 2.0 * (label - 3.0) / 3.0)
    }
}

type ValueFn = dyn Fn(usize, usize, &Vector) -> f64 + Send + Sync;
type GradientFn = dyn Fn(usize, usize, &Vector) -> Vector + Send + Sync;
type MinimizerFn = dyn Fn(usize) -> Vector + Send + Sync;

/// A programmatically registered loss, optionally with an analytic gradient
/// and a per-round global minimizer.
#[derive(Clone)]
pub struct CustomLoss {
    n: usize,
    dim: usize,
    value: Arc<ValueFn>,
    gradient: Option<Arc<GradientFn>>,
    minimizer: Option<Arc<MinimizerFn>>,
}

impl CustomLoss {
    /// `value(i, k, x)` must be deterministic.
    pub fn new(n: usize, dim: usize, value: impl Fn(usize, usize, &Vector) -> f64 + Send + Sync + 'static) -> Self {
        CustomLoss { n, dim, value: Arc::new(value), gradient: None, minimizer: None }
    }

    pub fn with_gradient(mut self, gradient: impl Fn(usize, usize, &Vector) -> Vector + Send + Sync + 'static) -> Self {
        self.gradient = Some(Arc::new(gradient));
        self
    }

    pub fn with_minimizer(mut self, minimizer: impl Fn(usize) -> Vector + Send + Sync + 'static) -> Self {
        self.minimizer = Some(Arc::new(minimizer));
        self
    }
}

impl fmt::Debug for CustomLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomLoss")
            .field("n", &self.n)
            .field("dim", &self.dim)
            .field("gradient", &self.gradient.is_some())
            .field("minimizer", &self.minimizer.is_some())
            .finish()
    }
}

/// A per-agent, time-varying loss oracle.
#[derive(Debug, Clone)]
pub enum LossProcess {
    TargetTracking(TargetTracking),
    CubicCosine(CubicCosine),
    Custom(CustomLoss),
}

impl LossProcess {
    pub fn n(&self) -> usize {
        match self {
            LossProcess::TargetTracking(t) => t.sensors.len(),
            LossProcess::CubicCosine(c) => c.n,
            LossProcess::Custom(c) => c.n,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            LossProcess::TargetTracking(_) | LossProcess::CubicCosine(_) => 2,
            LossProcess::Custom(c) => c.dim,
        }
    }

    /// Last valid round, if the process has one.
    pub fn last_round(&self) -> Option<usize> {
        match self {
            LossProcess::TargetTracking(t) => Some(t.path.len()),
            _ => None,
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            LossProcess::TargetTracking(_) => "target_tracking",
            LossProcess::CubicCosine(_) => "cubic_cosine",
            LossProcess::Custom(_) => "custom",
        }
    }

    pub fn has_gradient(&self) -> bool {
        !matches!(self, LossProcess::Custom(CustomLoss { gradient: None, .. }))
    }

    fn check_args(&self, i: usize, k: usize, x: &Vector) -> Result<()> {
        if i >= self.n() {
            return Err(Error::AgentOutOfRange { agent: i, n: self.n() });
        }
        let max = self.last_round().unwrap_or(usize::MAX);
        if k == 0 || k > max {
            return Err(Error::RoundOutOfRange { round: k, max });
        }
        check_dim(self.dim(), x.len())?;
        check_finite("loss argument", x.as_slice())
    }

    /// `f_{i,k}(x)`.
    pub fn evaluate(&self, i: usize, k: usize, x: &Vector) -> Result<f64> {
        self.check_args(i, k, x)?;
        Ok(match self {
            LossProcess::TargetTracking(t) => {
                let (r, _) = t.residual(i, k, x)?;
                0.25 * r * r
            }
            LossProcess::CubicCosine(c) => {
                let (a, b, w) = CubicCosine::coefficients(i);
                a * x[0].powi(3) + b * (x[0] * x[0] + x[1] * x[1]) - w * c.drift(i, k) * x[1].cos()
            }
            LossProcess::Custom(c) => (c.value)(i, k, x),
        })
    }

    /// `grad f_{i,k}(x)`; custom losses need a registered gradient.
    pub fn gradient(&self, i: usize, k: usize, x: &Vector) -> Result<Vector> {
        self.check_args(i, k, x)?;
        match self {
            LossProcess::TargetTracking(t) => {
                let (r, diff) = t.residual(i, k, x)?;
                Ok(diff * r)
            }
            LossProcess::CubicCosine(c) => {
                let (a, b, w) = CubicCosine::coefficients(i);
                Ok(Vector::from_row_slice(&[
                    3.0 * a * x[0] * x[0] + 2.0 * b * x[0],
                    2.0 * b * x[1] + w * c.drift(i, k) * x[1].sin(),
                ]))
            }
            LossProcess::Custom(c) => match &c.gradient {
                Some(g) => Ok(g(i, k, x)),
                None => Err(Error::Capability("custom loss has no analytic gradient".into())),
            },
        }
    }

    /// Global loss `f_k(x) = sum_i f_{i,k}(x)`.
    pub fn global_value(&self, k: usize, x: &Vector) -> Result<f64> {
        (0..self.n()).map(|i| self.evaluate(i, k, x)).sum()
    }

    pub fn global_gradient(&self, k: usize, x: &Vector) -> Result<Vector> {
        let mut g = Vector::zeros(self.dim());
        for i in 0..self.n() {
            g += self.gradient(i, k, x)?;
        }
        Ok(g)
    }

    /// A known minimizer of the global loss in round `k`, when the family has one.
    pub fn analytic_minimizer(&self, k: usize) -> Result<Option<Vector>> {
        match self {
            LossProcess::TargetTracking(t) => Ok(Some(t.target(k)?.clone())),
            LossProcess::CubicCosine(_) => Ok(None),
            LossProcess::Custom(c) => Ok(c.minimizer.as_ref().map(|m| m(k))),
        }
    }

    /// `theta_{i,k} = max_{x in grid, tau in 1..=k} |f_{i,tau+1}(x) - f_{i,tau}(x)|`,
    /// a lower estimate of the supremum over the set.
    pub fn theta(&self, i: usize, k: usize, grid: &[Vector]) -> Result<f64> {
        Ok(self.theta_profile(i, k, grid)?.last().copied().unwrap_or(0.0))
    }

    /// `theta_{i,1}, ..., theta_{i,k}` in one pass.
    pub fn theta_profile(&self, i: usize, k: usize, grid: &[Vector]) -> Result<Vec<f64>> {
        if grid.is_empty() {
            return Err(Error::Usage("theta needs a non-empty grid".into()));
        }
        let mut running = 0.0f64;
        let mut out = Vec::with_capacity(k);
        let mut prev: Vec<f64> = grid.iter().map(|x| self.evaluate(i, 1, x)).collect::<Result<_>>()?;
        for tau in 1..=k {
            let next: Vec<f64> = grid.iter().map(|x| self.evaluate(i, tau + 1, x)).collect::<Result<_>>()?;
            let gap = prev.iter().zip(&next).map(|(a, b)| (b - a).abs()).fold(0.0, f64::max);
            running = running.max(gap);
            out.push(running);
            prev = next;
        }
        Ok(out)
    }

    /// `Theta_T = T * sum_i theta_{i,T}`.
    pub fn big_theta(&self, horizon: usize, grid: &[Vector]) -> Result<f64> {
        let mut total = 0.0;
        for i in 0..self.n() {
            total += self.theta(i, horizon, grid)?;
        }
        Ok(horizon as f64 * total)
    }
}

/// `omega_T = sum_k sum_i |x*_{i,k+1} - x*_{i,k}|`; `minimizers[k][i]` is agent
/// `i`'s minimizer in the `k`-th listed round.
pub fn path_length(minimizers: &[Vec<Vector>]) -> f64 {
    minimizers
        .windows(2)
        .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (b - a).norm()).sum::<f64>())
        .sum()
}

fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let mut result = 0.0;
    let mut f = 1.0 / base as f64;
    while index > 0 {
        result += f * (index % base) as f64;
        index /= base;
        f /= base as f64;
    }
    result
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Deterministic Halton points inside `set`, rejection-sampled from its
/// bounding box. Points that cannot be found by rejection within the budget
/// are filled in by projecting further Halton points.
pub fn feasible_grid(set: &ConstraintSet, count: usize) -> Result<Vec<Vector>> {
    let d = set.dim();
    if d > PRIMES.len() {
        return Err(Error::Capability(format!("halton grid supports up to {} dimensions", PRIMES.len())));
    }
    let (lo, hi) = set.bounding_box();
    let point = |idx: u64| {
        Vector::from_iterator(d, (0..d).map(|j| lo[j] + (hi[j] - lo[j]) * radical_inverse(idx, PRIMES[j])))
    };
    let mut out = Vec::with_capacity(count);
    let mut idx = 1u64;
    let budget = 64 * count as u64 + 64;
    while out.len() < count && idx <= budget {
        let p = point(idx);
        if set.contains(&p, 0.0) {
            out.push(p);
        }
        idx += 1;
    }
    while out.len() < count {
        out.push(set.project(&point(idx))?);
        idx += 1;
    }
    Ok(out)
}

/// `max |f_{i,k}(x) - f_{i,k}(y)| / |x - y|` over `pairs` random feasible pairs,
/// all agents and the listed rounds.
pub fn estimate_lipschitz(
    loss: &LossProcess,
    rounds: &[usize],
    set: &ConstraintSet,
    pairs: usize,
    seed: u64,
) -> Result<f64> {
    let (lo, hi) = set.bounding_box();
    let d = set.dim();
    let mut rng = keyed_stream(seed, Purpose::Auxiliary, 0, 0);
    let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> Result<Vector> {
        let p = Vector::from_iterator(d, (0..d).map(|j| rng.random_range(lo[j]..hi[j])));
        set.project(&p)
    };
    let mut best = 0.0f64;
    for _ in 0..pairs {
        let x = draw(&mut rng)?;
        let y = draw(&mut rng)?;
        let dist = (&x - &y).norm();
        if dist == 0.0 {
            continue;
        }
        for &k in rounds {
            for i in 0..loss.n() {
                let ratio = (loss.evaluate(i, k, &x)? - loss.evaluate(i, k, &y)?).abs() / dist;
                best = best.max(ratio);
            }
        }
    }
    Ok(best)
}
