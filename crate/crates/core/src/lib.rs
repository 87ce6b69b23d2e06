//! Distributed online projected gradient descent with one-point residual
//! bandit feedback over time-varying directed graphs.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: feasible sets with exact projection and linear minimization.
//! - [`graph`]: periodic doubly stochastic weight sequences and mixing checks.
//! - [`losses`]: time-varying per-agent loss oracles and variation functionals.
//! - [`smoothing`]: Gaussian smoothing and the four gradient-feedback oracles.
//! - [`optimizer`]: the synchronous consensus + projection engine.
//! - [`metrics`]: dynamic regret instrumentation and the per-run ledger.
//! - [`harness`]: experiment configs, seeded replication, CSV/JSON output and
//!   the property-level verification suite.

pub mod error;
pub mod geometry;
pub mod graph;
pub mod harness;
pub mod losses;
pub mod metrics;
pub mod optimizer;
pub mod rng;
pub mod smoothing;

pub use error::{Error, Result};
pub use geometry::ConstraintSet;
pub use graph::{GraphSequence, MixingConstants, Weighting};
pub use losses::LossProcess;
pub use metrics::{RegretLedger, RegretMetric};
pub use optimizer::{AgentState, AlgorithmConfig, Schedule};
pub use smoothing::{EstimatorKind, ResidualMemory};

/// Dense vector type used for decisions, gradients and perturbations.
pub type Vector = nalgebra::DVector<f64>;
/// Dense matrix type used for mixing weights.
pub type Matrix = nalgebra::DMatrix<f64>;
