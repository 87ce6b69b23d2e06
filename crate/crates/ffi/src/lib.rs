//! C ABI over `opdopgd`.
//!
//! Objects are opaque heap handles created by `*_new` functions and released
//! with the matching `*_free`. Every fallible call returns an [`OpdStatus`];
//! on failure a message is kept per thread and can be read with
//! [`opd_last_error_message`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use opdopgd::graph::{ten_node_topology, GraphSequence, Weighting};
use opdopgd::harness::{preset, run_replicate, ExperimentConfig};
use opdopgd::losses::{CubicCosine, LossProcess, TargetTracking};
use opdopgd::metrics::{MinimizerMethod, RegretLedger, RegretMetric};
use opdopgd::optimizer::{run, AlgorithmConfig, Initialization, Schedule};
use opdopgd::{ConstraintSet, Error, EstimatorKind, Vector};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    OutOfRange = 4,
    Capability = 5,
    Config = 6,
    Diverged = 7,
    Io = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpdEstimator {
    FullGradient = 0,
    OnePoint = 1,
    TwoPoint = 2,
    OnePointResidual = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpdWeighting {
    Metropolis = 0,
    LazyUniform = 1,
    InNeighbor = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpdMetric {
    Convex = 0,
    Nonconvex = 1,
}

/// `scale / (k + offset)^exponent`; an exponent of 0 gives a constant.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpdSchedule {
    pub scale: f64,
    pub exponent: f64,
    pub offset: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct OpdRunConfig {
    pub estimator: OpdEstimator,
    pub alpha: OpdSchedule,
    pub mu: OpdSchedule,
    pub horizon: usize,
    pub metric: OpdMetric,
    pub tracked_agent: usize,
    /// Common starting point of length `dim`, projected onto the set.
    pub initial_point: *const f64,
    pub dim: usize,
}

pub struct OpdSet(ConstraintSet);
pub struct OpdGraph(GraphSequence);
pub struct OpdLoss(LossProcess);
pub struct OpdLedger(RegretLedger);
pub struct OpdExperiment(ExperimentConfig);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> OpdStatus {
    match e {
        Error::DimensionMismatch { .. } => OpdStatus::DimensionMismatch,
        Error::AgentOutOfRange { .. } | Error::RoundOutOfRange { .. } => OpdStatus::OutOfRange,
        Error::Capability(_) => OpdStatus::Capability,
        Error::Config(_) => OpdStatus::Config,
        Error::Diverged { .. } => OpdStatus::Diverged,
        Error::Io(_) => OpdStatus::Io,
        Error::NonFinite(_) | Error::InvalidSet(_) | Error::InvalidGraph(_) | Error::Usage(_) => {
            OpdStatus::InvalidArgument
        }
    }
}

struct Failure(OpdStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(OpdStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> OpdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            OpdStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            OpdStatus::Panic
        }
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn string<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(OpdStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn release<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

impl From<OpdEstimator> for EstimatorKind {
    fn from(e: OpdEstimator) -> Self {
        match e {
            OpdEstimator::FullGradient => EstimatorKind::FullGradient,
            OpdEstimator::OnePoint => EstimatorKind::OnePoint,
            OpdEstimator::TwoPoint => EstimatorKind::TwoPoint,
            OpdEstimator::OnePointResidual => EstimatorKind::OnePointResidual,
        }
    }
}

impl From<OpdSchedule> for Schedule {
    fn from(s: OpdSchedule) -> Self {
        Schedule::power_law(s.scale, s.exponent, s.offset)
    }
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len - 1` bytes) and returns the full length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn opd_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Static NUL-terminated version string.
#[no_mangle]
pub extern "C" fn opd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `lower` and `upper` must point to `dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn opd_set_box_new(
    dim: usize,
    lower: *const f64,
    upper: *const f64,
    out: *mut *mut OpdSet,
) -> OpdStatus {
    guard(|| {
        let lo = slice(lower, dim, "lower")?.to_vec();
        let hi = slice(upper, dim, "upper")?.to_vec();
        emit(out, OpdSet(ConstraintSet::boxed(lo, hi)?))
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn opd_set_l1_new(dim: usize, radius: f64, out: *mut *mut OpdSet) -> OpdStatus {
    guard(|| emit(out, OpdSet(ConstraintSet::l1_ball(dim, radius)?)))
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn opd_set_l2_new(dim: usize, radius: f64, out: *mut *mut OpdSet) -> OpdStatus {
    guard(|| emit(out, OpdSet(ConstraintSet::l2_ball(dim, radius)?)))
}

/// # Safety
/// `set` must be null or a handle from `opd_set_*_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn opd_set_free(set: *mut OpdSet) {
    release(set);
}

/// Dimension of the set, or 0 for a null handle.
///
/// # Safety
/// `set` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn opd_set_dim(set: *const OpdSet) -> usize {
    set.as_ref().map_or(0, |s| s.0.dim())
}

/// Euclidean projection of `point` onto the set, written to `out`.
///
/// # Safety
/// `point` and `out` must hold `len` doubles; `set` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn opd_set_project(
    set: *const OpdSet,
    point: *const f64,
    len: usize,
    out: *mut f64,
) -> OpdStatus {
    guard(|| {
        let set = handle(set, "set")?;
        let p = set.0.project(&Vector::from_row_slice(slice(point, len, "point")?))?;
        slice_mut(out, len, "out")?.copy_from_slice(p.as_slice());
        Ok(())
    })
}

/// A minimizer of `<direction, x>` over the set, written to `out`.
///
/// # Safety
/// `direction` and `out` must hold `len` doubles; `set` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn opd_set_linear_minimize(
    set: *const OpdSet,
    direction: *const f64,
    len: usize,
    out: *mut f64,
) -> OpdStatus {
    guard(|| {
        let set = handle(set, "set")?;
        let v = set.0.linear_minimize(&Vector::from_row_slice(slice(direction, len, "direction")?))?;
        slice_mut(out, len, "out")?.copy_from_slice(v.as_slice());
        Ok(())
    })
}

/// The builtin ten-agent, period-four topology.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn opd_graph_builtin_new(weighting: OpdWeighting, out: *mut *mut OpdGraph) -> OpdStatus {
    guard(|| {
        let w = match weighting {
            OpdWeighting::Metropolis => Weighting::Metropolis,
            OpdWeighting::LazyUniform => Weighting::LazyUniform,
            OpdWeighting::InNeighbor => Weighting::InNeighbor,
        };
        emit(out, OpdGraph(ten_node_topology(w)?))
    })
}

/// # Safety
/// `graph` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn opd_graph_free(graph: *mut OpdGraph) {
    release(graph);
}

/// # Safety
/// `graph` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn opd_graph_agents(graph: *const OpdGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.0.n())
}

/// `gamma` and `Gamma` of the sequence's mixing bound `Gamma gamma^(k-s)`.
///
/// # Safety
/// `graph` must be a live handle; `gamma` and `big_gamma` must be writable.
#[no_mangle]
pub unsafe extern "C" fn opd_graph_mixing_constants(
    graph: *const OpdGraph,
    gamma: *mut f64,
    big_gamma: *mut f64,
) -> OpdStatus {
    guard(|| {
        let c = handle(graph, "graph")?.0.mixing_constants();
        if gamma.is_null() || big_gamma.is_null() {
            return Err(null("output"));
        }
        *gamma = c.gamma;
        *big_gamma = c.big_gamma;
        Ok(())
    })
}

/// Target tracking losses valid for rounds `1..=horizon`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn opd_loss_target_tracking_new(horizon: usize, seed: u64, out: *mut *mut OpdLoss) -> OpdStatus {
    guard(|| emit(out, OpdLoss(LossProcess::TargetTracking(TargetTracking::new(horizon, seed)?))))
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn opd_loss_cubic_cosine_new(
    agents: usize,
    noise_std: f64,
    seed: u64,
    out: *mut *mut OpdLoss,
) -> OpdStatus {
    guard(|| emit(out, OpdLoss(LossProcess::CubicCosine(CubicCosine::new(agents, noise_std, seed)?))))
}

/// # Safety
/// `loss` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn opd_loss_free(loss: *mut OpdLoss) {
    release(loss);
}

/// `f_{agent,round}(x)` with 0-based agents and 1-based rounds.
///
/// # Safety
/// `x` must hold `len` doubles; `loss` must be live; `value` writable.
#[no_mangle]
pub unsafe extern "C" fn opd_loss_evaluate(
    loss: *const OpdLoss,
    agent: usize,
    round: usize,
    x: *const f64,
    len: usize,
    value: *mut f64,
) -> OpdStatus {
    guard(|| {
        let loss = handle(loss, "loss")?;
        let v = loss.0.evaluate(agent, round, &Vector::from_row_slice(slice(x, len, "x")?))?;
        if value.is_null() {
            return Err(null("value"));
        }
        *value = v;
        Ok(())
    })
}

/// Runs the algorithm once and returns the per-round ledger.
///
/// # Safety
/// All handles must be live; `config` must be valid with `initial_point`
/// holding `config.dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn opd_run(
    graph: *const OpdGraph,
    loss: *const OpdLoss,
    set: *const OpdSet,
    config: *const OpdRunConfig,
    seed: u64,
    out: *mut *mut OpdLedger,
) -> OpdStatus {
    guard(|| {
        let graph = handle(graph, "graph")?;
        let loss = handle(loss, "loss")?;
        let set = handle(set, "set")?;
        let c = handle(config, "config")?;
        let cfg = AlgorithmConfig {
            estimator: c.estimator.into(),
            alpha: c.alpha.into(),
            mu: c.mu.into(),
            horizon: c.horizon,
            metric: match c.metric {
                OpdMetric::Convex => RegretMetric::Convex,
                OpdMetric::Nonconvex => RegretMetric::Nonconvex,
            },
            tracked_agent: c.tracked_agent,
            initialization: Initialization::Point { point: slice(c.initial_point, c.dim, "initial_point")?.to_vec() },
            benchmark: MinimizerMethod::Analytic,
        };
        let ledger = run(&cfg, &graph.0, &loss.0, &set.0, seed)?;
        emit(out, OpdLedger(ledger))
    })
}

/// Parses a TOML experiment config.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn opd_experiment_from_toml(toml: *const c_char, out: *mut *mut OpdExperiment) -> OpdStatus {
    guard(|| {
        let cfg = ExperimentConfig::from_toml(string(toml, "toml")?)?;
        cfg.validate()?;
        emit(out, OpdExperiment(cfg))
    })
}

/// Loads a bundled preset by name.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn opd_experiment_preset(name: *const c_char, out: *mut *mut OpdExperiment) -> OpdStatus {
    guard(|| emit(out, OpdExperiment(preset(string(name, "name")?)?)))
}

/// # Safety
/// `experiment` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn opd_experiment_free(experiment: *mut OpdExperiment) {
    release(experiment);
}

/// Overrides the horizon of an experiment.
///
/// # Safety
/// `experiment` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn opd_experiment_set_horizon(experiment: *mut OpdExperiment, horizon: usize) -> OpdStatus {
    guard(|| {
        let exp = experiment.as_mut().ok_or_else(|| null("experiment"))?;
        exp.0.horizon = horizon;
        exp.0.validate()?;
        Ok(())
    })
}

/// Runs replicate `replicate` of `estimator` (seed = base seed + replicate).
///
/// # Safety
/// `experiment` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn opd_experiment_run_replicate(
    experiment: *const OpdExperiment,
    estimator: OpdEstimator,
    replicate: usize,
    out: *mut *mut OpdLedger,
) -> OpdStatus {
    guard(|| {
        let exp = handle(experiment, "experiment")?;
        emit(out, OpdLedger(run_replicate(&exp.0, estimator.into(), replicate)?))
    })
}

/// # Safety
/// `ledger` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn opd_ledger_free(ledger: *mut OpdLedger) {
    release(ledger);
}

/// Number of recorded rounds, or 0 for a null handle.
///
/// # Safety
/// `ledger` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn opd_ledger_len(ledger: *const OpdLedger) -> usize {
    ledger.as_ref().map_or(0, |l| l.0.len())
}

/// Cumulative regret after the last round, NaN for a null handle.
///
/// # Safety
/// `ledger` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn opd_ledger_final_regret(ledger: *const OpdLedger) -> f64 {
    ledger.as_ref().map_or(f64::NAN, |l| l.0.final_regret())
}

/// Copies the cumulative regret curve; `len` must equal the ledger length.
///
/// # Safety
/// `out` must hold `len` doubles; `ledger` must be live.
#[no_mangle]
pub unsafe extern "C" fn opd_ledger_cumulative(ledger: *const OpdLedger, out: *mut f64, len: usize) -> OpdStatus {
    guard(|| {
        let l = handle(ledger, "ledger")?;
        let curve = l.0.cumulative_curve();
        if len != curve.len() {
            return Err(Error::DimensionMismatch { expected: curve.len(), got: len }.into());
        }
        slice_mut(out, len, "out")?.copy_from_slice(&curve);
        Ok(())
    })
}

/// Copies the per-round consensus error; `len` must equal the ledger length.
///
/// # Safety
/// `out` must hold `len` doubles; `ledger` must be live.
#[no_mangle]
pub unsafe extern "C" fn opd_ledger_consensus(ledger: *const OpdLedger, out: *mut f64, len: usize) -> OpdStatus {
    guard(|| {
        let l = handle(ledger, "ledger")?;
        if len != l.0.len() {
            return Err(Error::DimensionMismatch { expected: l.0.len(), got: len }.into());
        }
        let dst = slice_mut(out, len, "out")?;
        for (d, r) in dst.iter_mut().zip(&l.0.records) {
            *d = r.consensus_error;
        }
        Ok(())
    })
}

/// Writes the ledger as CSV to `path`.
///
/// # Safety
/// `ledger` must be live; `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn opd_ledger_write_csv(ledger: *const OpdLedger, path: *const c_char) -> OpdStatus {
    guard(|| {
        let l = handle(ledger, "ledger")?;
        let path = string(path, "path")?;
        let file = std::fs::File::create(path).map_err(Error::from)?;
        l.0.write_csv(std::io::BufWriter::new(file)).map_err(Error::from)?;
        Ok(())
    })
}
