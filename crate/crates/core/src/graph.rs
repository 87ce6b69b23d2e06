//! Periodic sequences of weighted digraphs, transition products and the
//! geometric mixing bound.
//!
//! Entry `[W]_{i,j} > 0` means agent `i` receives from agent `j`. Edge lists
//! passed to the builders are `(from, to)` pairs.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Matrix;

/// Slack used when checking row and column sums.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// How per-snapshot weights are derived from an edge set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Metropolis weights on the symmetrized snapshot.
    Metropolis,
    /// `I/2 + A/2` with `A` uniform over the closed symmetrized neighbourhood.
    /// Only doubly stochastic on regular snapshots; irregular ones are rejected.
    LazyUniform,
    /// `1 / |in-neighbours including self|` on the directed snapshot. Row
    /// stochastic only in general; [`GraphSequence::validate`] reports the gap.
    InNeighbor,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingConstants {
    pub gamma: f64,
    pub big_gamma: f64,
}

impl MixingConstants {
    /// `gamma = (1 - zeta/(4n^2))^(1/U)`, `big_gamma = (1 - zeta/(4n^2))^(-2)`.
    pub fn from_parameters(n: usize, zeta: f64, window: usize) -> Self {
        let base = 1.0 - zeta / (4.0 * (n * n) as f64);
        MixingConstants {
            gamma: base.powf(1.0 / window as f64),
            big_gamma: base.powi(-2),
        }
    }

    /// The bound on `max_ij |[W(k,s)]_ij - 1/n|` for a gap of `k - s` rounds.
    pub fn bound(&self, gap: usize) -> f64 {
        self.big_gamma * self.gamma.powf(gap as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Shape { phase: usize, rows: usize, cols: usize },
    NegativeWeight { phase: usize, i: usize, j: usize, value: f64 },
    WeightFloor { phase: usize, i: usize, j: usize, value: f64, zeta: f64 },
    RowSum { phase: usize, row: usize, sum: f64 },
    ColumnSum { phase: usize, col: usize, sum: f64 },
    NotStronglyConnected { start_phase: usize, window: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Shape { phase, rows, cols } => write!(f, "phase {phase}: matrix is {rows}x{cols}"),
            Violation::NegativeWeight { phase, i, j, value } => {
                write!(f, "phase {phase}: negative weight W[{i},{j}] = {value}")
            }
            Violation::WeightFloor { phase, i, j, value, zeta } => {
                write!(f, "phase {phase}: W[{i},{j}] = {value} below floor {zeta}")
            }
            Violation::RowSum { phase, row, sum } => write!(f, "phase {phase}: row {row} sums to {sum}"),
            Violation::ColumnSum { phase, col, sum } => write!(f, "phase {phase}: column {col} sums to {sum}"),
            Violation::NotStronglyConnected { start_phase, window } => write!(
                f,
                "union over {window} rounds starting at phase {start_phase} is not strongly connected"
            ),
        }
    }
}

/// Violations found by [`GraphSequence::validate`]. Empty means the sequence
/// satisfies the weight floor, double stochasticity and windowed strong
/// connectivity.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has_stochasticity_violation(&self) -> bool {
        self.violations
            .iter()
            .any(|v| matches!(v, Violation::RowSum { .. } | Violation::ColumnSum { .. }))
    }

    pub fn has_connectivity_violation(&self) -> bool {
        self.violations
            .iter()
            .any(|v| matches!(v, Violation::NotStronglyConnected { .. }))
    }
}

/// A periodic schedule of `n x n` weight matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSequence {
    n: usize,
    snapshots: Vec<Matrix>,
    zeta: f64,
    window: usize,
}

impl GraphSequence {
    /// Wraps raw snapshots without rejecting invalid weights. `zeta` is the
    /// smallest positive entry; the connectivity window is `window` if given,
    /// otherwise the smallest `U` for which every `U`-round union is strongly
    /// connected (the period if none is).
    pub fn from_snapshots(snapshots: Vec<Matrix>, window: Option<usize>) -> Result<Self> {
        let Some(first) = snapshots.first() else {
            return Err(Error::InvalidGraph("at least one snapshot is required".into()));
        };
        let n = first.nrows();
        if n == 0 {
            return Err(Error::InvalidGraph("graph needs at least one agent".into()));
        }
        if window == Some(0) {
            return Err(Error::InvalidGraph("connectivity window must be positive".into()));
        }
        let zeta = snapshots
            .iter()
            .flat_map(|w| w.iter().copied())
            .filter(|&v| v > 0.0)
            .fold(f64::INFINITY, f64::min);
        let mut seq = GraphSequence {
            n,
            snapshots,
            zeta: if zeta.is_finite() { zeta } else { 0.0 },
            window: 1,
        };
        seq.window = match window {
            Some(u) => u,
            None => seq.minimal_window().unwrap_or(seq.period()),
        };
        Ok(seq)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn period(&self) -> usize {
        self.snapshots.len()
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn connectivity_window(&self) -> usize {
        self.window
    }

    pub fn snapshots(&self) -> &[Matrix] {
        &self.snapshots
    }

    /// `W_k`, i.e. `snapshots[k mod period]`.
    pub fn weight_matrix_at(&self, k: usize) -> &Matrix {
        &self.snapshots[k % self.period()]
    }

    /// The ordered product `W_k W_{k-1} ... W_s`.
    pub fn transition_product(&self, k: usize, s: usize) -> Result<Matrix> {
        if s > k {
            return Err(Error::Usage(format!("transition product needs s <= k, got s = {s}, k = {k}")));
        }
        let mut prod = self.weight_matrix_at(s).clone();
        for t in s + 1..=k {
            prod = self.weight_matrix_at(t) * prod;
        }
        Ok(prod)
    }

    pub fn mixing_constants(&self) -> MixingConstants {
        MixingConstants::from_parameters(self.n, self.zeta, self.window)
    }

    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let n = self.n;
        for (phase, w) in self.snapshots.iter().enumerate() {
            if w.nrows() != n || w.ncols() != n {
                violations.push(Violation::Shape { phase, rows: w.nrows(), cols: w.ncols() });
                continue;
            }
            for i in 0..n {
                for j in 0..n {
                    let value = w[(i, j)];
                    if value < 0.0 {
                        violations.push(Violation::NegativeWeight { phase, i, j, value });
                    } else if (i == j || value > 0.0) && value < self.zeta {
                        violations.push(Violation::WeightFloor { phase, i, j, value, zeta: self.zeta });
                    }
                }
            }
            for row in 0..n {
                let sum = w.row(row).sum();
                if (sum - 1.0).abs() > STOCHASTIC_TOL {
                    violations.push(Violation::RowSum { phase, row, sum });
                }
            }
            for col in 0..n {
                let sum = w.column(col).sum();
                if (sum - 1.0).abs() > STOCHASTIC_TOL {
                    violations.push(Violation::ColumnSum { phase, col, sum });
                }
            }
        }
        if violations.iter().all(|v| !matches!(v, Violation::Shape { .. })) {
            for start in 0..self.period() {
                if !self.window_connected(start, self.window) {
                    violations.push(Violation::NotStronglyConnected { start_phase: start, window: self.window });
                }
            }
        }
        ValidationReport { violations }
    }

    fn window_connected(&self, start: usize, len: usize) -> bool {
        let mut adj = vec![vec![false; self.n]; self.n];
        for t in start..start + len {
            let w = self.weight_matrix_at(t);
            for i in 0..self.n {
                for j in 0..self.n {
                    if i != j && w[(i, j)] > 0.0 {
                        // j sends to i
                        adj[j][i] = true;
                    }
                }
            }
        }
        strongly_connected(&adj)
    }

    fn minimal_window(&self) -> Option<usize> {
        (1..=self.period()).find(|&u| (0..self.period()).all(|s| self.window_connected(s, u)))
    }
}

fn reach_all(adj: &[Vec<bool>], forward: bool) -> bool {
    let n = adj.len();
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for v in 0..n {
            let edge = if forward { adj[u][v] } else { adj[v][u] };
            if edge && !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

fn strongly_connected(adj: &[Vec<bool>]) -> bool {
    adj.len() <= 1 || (reach_all(adj, true) && reach_all(adj, false))
}

/// Builds a periodic sequence whose phase `t` uses the edge set `parts[t]`.
///
/// Fails when an edge references a missing agent, when the union of all parts
/// is not strongly connected, or when `LazyUniform` meets an irregular
/// snapshot.
pub fn build_periodic_topology(n: usize, parts: &[Vec<(usize, usize)>], weighting: Weighting) -> Result<GraphSequence> {
    if n == 0 {
        return Err(Error::InvalidGraph("graph needs at least one agent".into()));
    }
    if parts.is_empty() {
        return Err(Error::InvalidGraph("at least one edge set is required".into()));
    }
    let mut union = vec![vec![false; n]; n];
    for (phase, edges) in parts.iter().enumerate() {
        for &(from, to) in edges {
            if from >= n || to >= n {
                return Err(Error::InvalidGraph(format!(
                    "phase {phase}: edge ({from}, {to}) references an agent outside 0..{n}"
                )));
            }
            if from != to {
                union[from][to] = true;
            }
        }
    }
    if !strongly_connected(&union) {
        return Err(Error::InvalidGraph("union of the edge sets is not strongly connected".into()));
    }
    let snapshots = parts
        .iter()
        .enumerate()
        .map(|(phase, edges)| weights_for(n, edges, weighting).map_err(|e| match e {
            Error::InvalidGraph(msg) => Error::InvalidGraph(format!("phase {phase}: {msg}")),
            other => other,
        }))
        .collect::<Result<Vec<_>>>()?;
    GraphSequence::from_snapshots(snapshots, None)
}

fn symmetric_neighbours(n: usize, edges: &[(usize, usize)]) -> Vec<BTreeSet<usize>> {
    let mut nb = vec![BTreeSet::new(); n];
    for &(a, b) in edges {
        if a != b {
            nb[a].insert(b);
            nb[b].insert(a);
        }
    }
    nb
}

fn weights_for(n: usize, edges: &[(usize, usize)], weighting: Weighting) -> Result<Matrix> {
    let mut w = Matrix::zeros(n, n);
    match weighting {
        Weighting::Metropolis => {
            let nb = symmetric_neighbours(n, edges);
            for i in 0..n {
                for &j in &nb[i] {
                    w[(i, j)] = 1.0 / (1.0 + nb[i].len().max(nb[j].len()) as f64);
                }
                w[(i, i)] = 1.0 - w.row(i).sum();
            }
        }
        Weighting::LazyUniform => {
            let nb = symmetric_neighbours(n, edges);
            let degree = nb[0].len();
            if nb.iter().any(|s| s.len() != degree) {
                return Err(Error::InvalidGraph(
                    "lazy uniform weights are only doubly stochastic on regular snapshots".into(),
                ));
            }
            let share = 0.5 / (degree + 1) as f64;
            for i in 0..n {
                w[(i, i)] = 0.5 + share;
                for &j in &nb[i] {
                    w[(i, j)] = share;
                }
            }
        }
        Weighting::InNeighbor => {
            let mut incoming = vec![BTreeSet::new(); n];
            for (i, set) in incoming.iter_mut().enumerate() {
                set.insert(i);
            }
            for &(from, to) in edges {
                incoming[to].insert(from);
            }
            for (i, set) in incoming.iter().enumerate() {
                let share = 1.0 / set.len() as f64;
                for &j in set {
                    w[(i, j)] = share;
                }
            }
        }
    }
    Ok(w)
}

/// Edge sets of the builtin 10-agent topology: a clockwise ring, a perfect
/// matching `{0-1, 2-3, ...}`, a counter-clockwise ring and the shifted
/// matching `{1-2, 3-4, ..., 9-0}`, switching with period 4.
pub fn ten_node_parts() -> Vec<Vec<(usize, usize)>> {
    let n = 10;
    let cw: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
    let ccw: Vec<_> = (0..n).map(|i| ((i + 1) % n, i)).collect();
    let matching = |offset: usize| -> Vec<(usize, usize)> {
        (0..n / 2)
            .flat_map(|p| {
                let a = (2 * p + offset) % n;
                let b = (2 * p + offset + 1) % n;
                [(a, b), (b, a)]
            })
            .collect()
    };
    vec![cw, matching(0), ccw, matching(1)]
}

/// The builtin 10-agent, period-4 topology.
pub fn ten_node_topology(weighting: Weighting) -> Result<GraphSequence> {
    build_periodic_topology(10, &ten_node_parts(), weighting)
}

/// Worst-case comparison of `max_ij |[W(k,s)]_ij - 1/n|` against
/// `big_gamma * gamma^(k-s)` over `1 <= s <= k <= max_round`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingCheck {
    /// Largest `deviation - bound` seen (negative when the bound holds everywhere).
    pub worst_excess: f64,
    /// Pair `(k, s)` attaining `worst_excess`.
    pub worst_pair: (usize, usize),
    pub pairs_checked: usize,
    /// Largest row/column-sum error of any product.
    pub worst_stochastic_error: f64,
}

pub fn check_mixing_bound(seq: &GraphSequence, max_round: usize) -> MixingCheck {
    let consts = seq.mixing_constants();
    let target = 1.0 / seq.n() as f64;
    let mut check = MixingCheck {
        worst_excess: f64::NEG_INFINITY,
        worst_pair: (0, 0),
        pairs_checked: 0,
        worst_stochastic_error: 0.0,
    };
    for s in 1..=max_round {
        let mut prod = seq.weight_matrix_at(s).clone();
        for k in s..=max_round {
            if k > s {
                prod = seq.weight_matrix_at(k) * &prod;
            }
            let dev = prod.iter().map(|v| (v - target).abs()).fold(0.0, f64::max);
            let excess = dev - consts.bound(k - s);
            if excess > check.worst_excess {
                check.worst_excess = excess;
                check.worst_pair = (k, s);
            }
            let stoch = (0..seq.n())
                .flat_map(|i| [(prod.row(i).sum() - 1.0).abs(), (prod.column(i).sum() - 1.0).abs()])
                .fold(0.0, f64::max);
            check.worst_stochastic_error = check.worst_stochastic_error.max(stoch);
            check.pairs_checked += 1;
        }
    }
    check
}
