//! Acceptance checks, one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_RED` fail on the reference configuration and
//! are reported as such without failing the process; any other failure
//! exits nonzero.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use opdopgd::geometry::ConstraintSet;
use opdopgd::graph::{ten_node_topology, Weighting};
use opdopgd::harness::{preset, run_experiment, ExperimentOutcome, MeanCurve};
use opdopgd::losses::{CustomLoss, LossProcess};
use opdopgd::rng::{keyed_stream, Purpose};
use opdopgd::smoothing::{estimate_gradient, smoothed_value, EstimatorKind, ResidualMemory, RunningStats};
use opdopgd::{Matrix, Vector};
use rand::Rng;

const KNOWN_RED: [u32; 2] = [6, 7];

const MIXING_SLACK: f64 = 1e-10;
const MIXING_ROUNDS: usize = 200;
const MIXING_BUDGET: Duration = Duration::from_secs(5);

const MC_SAMPLES: usize = 100_000;
const SE_SLACK: f64 = 3.0;
const SMOOTHING_RADII: [f64; 3] = [0.5, 0.1, 0.01];
const SMOOTHING_POINTS: usize = 20;
const SMOOTHING_BUDGET: Duration = Duration::from_secs(30);

const Z_LIMIT: f64 = 4.0;
const MOMENT_RADII: [f64; 2] = [0.1, 0.01];
const VARIANCE_RADIUS: f64 = 0.01;
const VARIANCE_RATIO: f64 = 10.0;

const FIGURE_BUDGET: Duration = Duration::from_secs(300);
const EARLY_HORIZON: usize = 200;
const FULL_HORIZON: usize = 2000;
const RESIDUAL_VS_TWO_POINT: f64 = 2.0;
const SUBLINEAR_FACTOR: f64 = 0.5;

const PROJECTION_POINTS: usize = 100;
const GRID_STEP: f64 = 0.01;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let graph = ten_node_topology(Weighting::Metropolis).unwrap();
    let n = graph.n();
    // zeta: smallest positive entry; U: the graph's connectivity window
    let zeta = graph
        .snapshots()
        .iter()
        .flat_map(|w| w.iter().copied())
        .filter(|&v| v > 0.0)
        .fold(f64::INFINITY, f64::min);
    let base = 1.0 - zeta / (4.0 * (n * n) as f64);
    let big_gamma = base.powi(-2);
    let gamma = base.powf(1.0 / graph.connectivity_window() as f64);
    let mut worst = f64::NEG_INFINITY;
    for s in 1..=MIXING_ROUNDS {
        let mut prod = Matrix::identity(n, n);
        for k in s..=MIXING_ROUNDS {
            prod = graph.weight_matrix_at(k) * prod;
            let dev = prod.iter().map(|v| (v - 1.0 / n as f64).abs()).fold(0.0, f64::max);
            worst = worst.max(dev - big_gamma * gamma.powi((k - s) as i32));
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= MIXING_SLACK && elapsed < MIXING_BUDGET,
        format!("max(deviation - bound) = {worst:.3e}, zeta = {zeta:.4}, {:.2}s", elapsed.as_secs_f64()),
    )
}

fn scaled_l1(d: usize, l0: f64) -> LossProcess {
    let c = l0 / (d as f64).sqrt();
    LossProcess::Custom(CustomLoss::new(1, d, move |_, _, x| c * x.iter().map(|v| v.abs()).sum::<f64>()))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let (d, l0) = (4, 1.5);
    let loss = scaled_l1(d, l0);
    let mut rng = keyed_stream(202, Purpose::Auxiliary, 0, 0);
    let points: Vec<Vector> =
        (0..SMOOTHING_POINTS).map(|_| Vector::from_iterator(d, (0..d).map(|_| rng.random_range(-1.0..1.0)))).collect();
    let mut ok = true;
    let mut worst_ratio = 0.0f64;
    for (m, &mu) in SMOOTHING_RADII.iter().enumerate() {
        for (p, x) in points.iter().enumerate() {
            let mut mc = keyed_stream(203, Purpose::Perturbation, p, m);
            let s = smoothed_value(&loss, 0, 1, x, mu, MC_SAMPLES, &mut mc).unwrap();
            let f = l0 / (d as f64).sqrt() * x.iter().map(|v| v.abs()).sum::<f64>();
            let allowed = mu * l0 * (d as f64).sqrt() + SE_SLACK * s.std_error;
            ok &= (s.mean - f).abs() <= allowed;
            worst_ratio = worst_ratio.max((s.mean - f).abs() / allowed);
        }
    }
    let elapsed = start.elapsed();
    outcome(
        ok && elapsed < SMOOTHING_BUDGET,
        format!("max |f^s - f| / allowance = {worst_ratio:.3}, {:.2}s", elapsed.as_secs_f64()),
    )
}

fn residual_pair<R: Rng>(loss: &LossProcess, prev: &Vector, x: &Vector, mu: f64, rng: &mut R) -> Vector {
    let mut memory = ResidualMemory::default();
    estimate_gradient(EstimatorKind::OnePointResidual, loss, 0, 1, prev, mu, &mut memory, rng).unwrap();
    estimate_gradient(EstimatorKind::OnePointResidual, loss, 0, 2, x, mu, &mut memory, rng).unwrap().gradient
}

fn criterion_3() -> Outcome {
    let a = Vector::from_row_slice(&[0.8, -1.2]);
    let q = Matrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]);
    let b = Vector::from_row_slice(&[0.5, -0.25]);
    let x = Vector::from_row_slice(&[0.4, 0.1]);
    let prev = Vector::from_row_slice(&[0.35, 0.2]);
    let (a2, q2, b2) = (a.clone(), q.clone(), b.clone());
    let linear = LossProcess::Custom(CustomLoss::new(1, 2, move |_, _, x| a2.dot(x) - 2.0));
    let quadratic = LossProcess::Custom(CustomLoss::new(1, 2, move |_, _, x| 0.5 * x.dot(&(&q2 * x)) + b2.dot(x)));
    // smoothing a quadratic only adds a constant, so its gradient is unchanged
    let cases = [("linear", linear, a.clone()), ("quadratic", quadratic, &q * &x + &b)];
    let mut worst = 0.0f64;
    for (c, (_, loss, truth)) in cases.iter().enumerate() {
        let mut rng = keyed_stream(303, Purpose::Perturbation, c, 0);
        let mut stats = [RunningStats::default(); 2];
        for _ in 0..MC_SAMPLES {
            let g = residual_pair(loss, &prev, &x, 0.2, &mut rng);
            stats[0].push(g[0]);
            stats[1].push(g[1]);
        }
        for j in 0..2 {
            worst = worst.max(((stats[j].mean() - truth[j]) / stats[j].std_error()).abs());
        }
    }
    outcome(worst <= Z_LIMIT, format!("max |z| = {worst:.3} over {} coordinates", 2 * cases.len()))
}

/// Static `|x|_1 / sqrt(2)` (L0 = 1), points `mu^2` apart, equal radii.
struct MomentCase {
    loss: LossProcess,
    prev: Vector,
    x: Vector,
    mu: f64,
}

impl MomentCase {
    fn new(mu: f64) -> Self {
        let prev = Vector::from_row_slice(&[0.5, 0.5]);
        let x = &prev + Vector::from_row_slice(&[0.0, mu * mu]);
        MomentCase { loss: scaled_l1(2, 1.0), prev, x, mu }
    }

    fn bound(&self) -> f64 {
        let d = 2.0;
        3.0 * d * (&self.x - &self.prev).norm_squared() / (self.mu * self.mu) + 12.0 * (d + 4.0) * (d + 4.0)
    }

    /// (mean and SE of |g|^2, total sample variance) of `kind`.
    fn sample(&self, kind: EstimatorKind, seed: u64) -> (f64, f64, f64) {
        let mut rng = keyed_stream(seed, Purpose::Perturbation, 0, 0);
        let mut sq = RunningStats::default();
        let mut coords = [RunningStats::default(); 2];
        for _ in 0..MC_SAMPLES {
            let g = match kind {
                EstimatorKind::OnePointResidual => residual_pair(&self.loss, &self.prev, &self.x, self.mu, &mut rng),
                _ => {
                    let mut memory = ResidualMemory::default();
                    estimate_gradient(kind, &self.loss, 0, 1, &self.x, self.mu, &mut memory, &mut rng).unwrap().gradient
                }
            };
            sq.push(g.norm_squared());
            coords[0].push(g[0]);
            coords[1].push(g[1]);
        }
        (sq.mean(), sq.std_error(), coords[0].variance() + coords[1].variance())
    }
}

fn criterion_4() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (idx, &mu) in MOMENT_RADII.iter().enumerate() {
        let case = MomentCase::new(mu);
        let (mean, se, _) = case.sample(EstimatorKind::OnePointResidual, 404 + idx as u64);
        ok &= mean <= case.bound() + SE_SLACK * se;
        parts.push(format!("mu={mu}: E|g|^2 = {mean:.3} vs bound {:.3}", case.bound()));
    }
    outcome(ok, parts.join("; "))
}

fn criterion_5() -> Outcome {
    let case = MomentCase::new(VARIANCE_RADIUS);
    let (_, _, one) = case.sample(EstimatorKind::OnePoint, 505);
    let (_, _, res) = case.sample(EstimatorKind::OnePointResidual, 506);
    let ratio = one / res;
    outcome(ratio > VARIANCE_RATIO, format!("variance one-point {one:.3e} / residual {res:.3e} = {ratio:.1}"))
}

fn curve(outcome: &ExperimentOutcome, kind: EstimatorKind) -> &MeanCurve {
    outcome.curves.iter().find(|c| c.estimator == kind).unwrap()
}

/// Ordering, residual-vs-two-point and sublinearity checks on a figure run.
fn figure_checks(out: &ExperimentOutcome, elapsed: Duration) -> Outcome {
    use EstimatorKind::*;
    let final_of = |k| curve(out, k).cumulative_regret[FULL_HORIZON - 1];
    let one = final_of(OnePoint);
    let others = [OnePointResidual, TwoPoint, FullGradient];
    let ordering = others.iter().all(|&k| one > final_of(k));
    let res = final_of(OnePointResidual);
    let two = final_of(TwoPoint);
    let within = res <= RESIDUAL_VS_TWO_POINT * two && two <= RESIDUAL_VS_TWO_POINT * res;
    let res_curve = curve(out, OnePointResidual);
    let early = res_curve.average_regret(EARLY_HORIZON).unwrap();
    let late = res_curve.average_regret(FULL_HORIZON).unwrap();
    let sublinear = late < SUBLINEAR_FACTOR * early;
    let fast = elapsed < FIGURE_BUDGET;
    let finals: Vec<String> =
        [FullGradient, TwoPoint, OnePointResidual, OnePoint].iter().map(|&k| format!("{}={:.1}", k.name(), final_of(k))).collect();
    outcome(
        ordering && within && sublinear && fast,
        format!(
            "ordering {} [{}]; residual/two-point {:.2} {}; DR/T {:.3} -> {:.3} {}; {:.1}s {}",
            mark(ordering),
            finals.join(", "),
            res / two,
            mark(within),
            early,
            late,
            mark(sublinear),
            elapsed.as_secs_f64(),
            mark(fast)
        ),
    )
}

fn mark(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "FAILED"
    }
}

fn run_preset(name: &str, dir: &Path) -> (ExperimentOutcome, Duration) {
    let start = Instant::now();
    let cfg = preset(name).unwrap();
    let out = run_experiment(&cfg, dir).unwrap();
    (out, start.elapsed())
}

fn criterion_6(dir: &Path) -> Outcome {
    let (out, elapsed) = run_preset("fig2", dir);
    figure_checks(&out, elapsed)
}

fn criterion_7(dir: &Path) -> Outcome {
    let (out, elapsed) = run_preset("fig3", dir);
    let mut negative = 0usize;
    let mut rows = 0usize;
    for kind in EstimatorKind::ALL {
        for r in 0..out.summary.config.replicates {
            let csv = fs::read_to_string(dir.join(kind.name()).join(format!("run_{r}.csv"))).unwrap();
            for line in csv.lines().skip(1) {
                let inc: f64 = line.split(',').nth(5).unwrap().parse().unwrap();
                rows += 1;
                if inc.is_nan() || inc < 0.0 {
                    negative += 1;
                }
            }
        }
    }
    let fig = figure_checks(&out, elapsed);
    outcome(
        fig.passed && negative == 0,
        format!("{}; negative increments {negative}/{rows}", fig.detail),
    )
}

fn criterion_8(dir: &Path) -> Outcome {
    let (out, _) = run_preset("consensus", dir);
    let c = curve(&out, EstimatorKind::OnePointResidual);
    let early = c.time_averaged_consensus(EARLY_HORIZON).unwrap();
    let late = c.time_averaged_consensus(FULL_HORIZON).unwrap();
    outcome(late < early, format!("time-averaged consensus {early:.4e} at T={EARLY_HORIZON}, {late:.4e} at T={FULL_HORIZON}"))
}

fn criterion_9() -> Outcome {
    let radius = 3.0;
    let l1 = ConstraintSet::l1_ball(2, radius).unwrap();
    let steps = (radius / GRID_STEP).round() as i64;
    let grid: Vec<(f64, f64)> = (-steps..=steps)
        .flat_map(|i| (-steps..=steps).map(move |j| (i as f64 * GRID_STEP, j as f64 * GRID_STEP)))
        .filter(|(a, b)| a.abs() + b.abs() <= radius + 1e-12)
        .collect();
    let mut rng = keyed_stream(909, Purpose::Auxiliary, 0, 0);
    let mut worst_gap = 0.0f64;
    let mut worst_dist = 0.0f64;
    let mut ok = true;
    for _ in 0..PROJECTION_POINTS {
        let y = Vector::from_row_slice(&[rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0)]);
        let p = l1.project(&y).unwrap();
        let (best, arg) = grid
            .iter()
            .map(|&(a, b)| ((a - y[0]).powi(2) + (b - y[1]).powi(2), (a, b)))
            .fold((f64::INFINITY, (0.0, 0.0)), |acc, v| if v.0 < acc.0 { v } else { acc });
        let dist = (&p - &y).norm();
        // the exact projection can never be beaten by a feasible grid point
        ok &= dist <= best.sqrt() + 1e-12 && p[0].abs() + p[1].abs() <= radius + 1e-12;
        worst_gap = worst_gap.max(best.sqrt() - dist);
        worst_dist = worst_dist.max(((p[0] - arg.0).powi(2) + (p[1] - arg.1).powi(2)).sqrt());
    }
    ok &= worst_dist <= GRID_STEP * 2f64.sqrt();
    let boxed = ConstraintSet::boxed(vec![-1.0, 0.5], vec![2.0, 4.0]).unwrap();
    for _ in 0..PROJECTION_POINTS {
        let y = Vector::from_row_slice(&[rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0)]);
        let p = boxed.project(&y).unwrap();
        ok &= p[0] == y[0].clamp(-1.0, 2.0) && p[1] == y[1].clamp(0.5, 4.0);
    }
    outcome(
        ok,
        format!("L1: max grid-value gap {worst_gap:.2e}, max distance to grid argmin {worst_dist:.2e}; box exact"),
    )
}

fn csv_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            for f in fs::read_dir(&path).unwrap() {
                let f = f.unwrap().path();
                if f.extension().is_some_and(|e| e == "csv") {
                    files.insert(f.strip_prefix(dir).unwrap().display().to_string(), fs::read(&f).unwrap());
                }
            }
        }
    }
    files
}

fn criterion_10(previous: &[(&str, &Path)]) -> Outcome {
    let mut compared = 0;
    let mut identical = true;
    for (name, first) in previous {
        let again = tempfile::tempdir().unwrap();
        run_preset(name, again.path());
        let a = csv_files(first);
        let b = csv_files(again.path());
        compared += a.len();
        identical &= !a.is_empty() && a == b;
    }
    outcome(identical, format!("{compared} CSV files byte-identical across reruns"))
}

fn main() -> ExitCode {
    let fig2 = tempfile::tempdir().unwrap();
    let fig3 = tempfile::tempdir().unwrap();
    let consensus = tempfile::tempdir().unwrap();
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut record = |n, name, o: Outcome| {
        let tag = match (o.passed, KNOWN_RED.contains(&n)) {
            (true, false) => "PASS",
            (true, true) => "PASS (listed as known red)",
            (false, true) => "FAIL (known red)",
            (false, false) => "FAIL",
        };
        println!("criterion {n:>2} {tag}: {name}: {}", o.detail);
        results.push((n, name, o));
    };
    record(1, "mixing bound", criterion_1());
    record(2, "smoothing error", criterion_2());
    record(3, "residual unbiasedness", criterion_3());
    record(4, "residual second moment", criterion_4());
    record(5, "variance reduction", criterion_5());
    record(6, "convex tracking benchmark", criterion_6(fig2.path()));
    record(7, "nonconvex benchmark", criterion_7(fig3.path()));
    record(8, "consensus trend", criterion_8(consensus.path()));
    record(9, "projection oracles", criterion_9());
    record(10, "determinism", criterion_10(&[("fig2", fig2.path()), ("fig3", fig3.path()), ("consensus", consensus.path())]));
    let unexpected: Vec<u32> =
        results.iter().filter(|(n, _, o)| !o.passed && !KNOWN_RED.contains(n)).map(|(n, _, _)| *n).collect();
    let passed = results.iter().filter(|(_, _, o)| o.passed).count();
    println!("{passed}/{} criteria passed", results.len());
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {unexpected:?}");
        ExitCode::FAILURE
    }
}
