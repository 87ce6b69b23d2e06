use std::ffi::{c_char, CStr, CString};
use std::ptr;

use opdopgd_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    unsafe {
        opd_last_error_message(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(opd_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn set_projection_and_linear_minimization() {
    unsafe {
        let mut set: *mut OpdSet = ptr::null_mut();
        assert_eq!(opd_set_l1_new(2, 1.0, &mut set), OpdStatus::Ok);
        assert_eq!(opd_set_dim(set), 2);
        let mut out = [0.0; 2];
        assert_eq!(opd_set_project(set, [3.0, 0.0].as_ptr(), 2, out.as_mut_ptr()), OpdStatus::Ok);
        assert_eq!(out, [1.0, 0.0]);
        assert_eq!(opd_set_linear_minimize(set, [0.5, -2.0].as_ptr(), 2, out.as_mut_ptr()), OpdStatus::Ok);
        assert_eq!(out, [0.0, 1.0]);
        assert_eq!(opd_set_project(set, [1.0, 2.0, 3.0].as_ptr(), 3, out.as_mut_ptr()), OpdStatus::DimensionMismatch);
        assert!(last_error().contains("dimension"));
        assert_eq!(opd_set_project(set, ptr::null(), 2, out.as_mut_ptr()), OpdStatus::NullPointer);
        opd_set_free(set);

        let mut boxed: *mut OpdSet = ptr::null_mut();
        assert_eq!(opd_set_box_new(2, [1.0, 0.0].as_ptr(), [0.0, 1.0].as_ptr(), &mut boxed), OpdStatus::InvalidArgument);
        assert!(boxed.is_null());
        assert_eq!(opd_set_box_new(2, [-1.0, 0.0].as_ptr(), [1.0, 2.0].as_ptr(), &mut boxed), OpdStatus::Ok);
        assert_eq!(opd_set_project(boxed, [5.0, -5.0].as_ptr(), 2, out.as_mut_ptr()), OpdStatus::Ok);
        assert_eq!(out, [1.0, 0.0]);
        opd_set_free(boxed);

        let mut l2: *mut OpdSet = ptr::null_mut();
        assert_eq!(opd_set_l2_new(2, -1.0, &mut l2), OpdStatus::InvalidArgument);
        opd_set_free(ptr::null_mut());
    }
}

#[test]
fn graph_constants() {
    unsafe {
        let mut g: *mut OpdGraph = ptr::null_mut();
        assert_eq!(opd_graph_builtin_new(OpdWeighting::Metropolis, &mut g), OpdStatus::Ok);
        assert_eq!(opd_graph_agents(g), 10);
        let (mut gamma, mut big) = (0.0, 0.0);
        assert_eq!(opd_graph_mixing_constants(g, &mut gamma, &mut big), OpdStatus::Ok);
        assert!(gamma > 0.0 && gamma < 1.0 && big > 1.0);
        assert_eq!(opd_graph_mixing_constants(g, ptr::null_mut(), &mut big), OpdStatus::NullPointer);
        opd_graph_free(g);
    }
}

#[test]
fn loss_evaluation_and_errors() {
    unsafe {
        let mut loss: *mut OpdLoss = ptr::null_mut();
        assert_eq!(opd_loss_target_tracking_new(10, 3, &mut loss), OpdStatus::Ok);
        let mut v = -1.0;
        assert_eq!(opd_loss_evaluate(loss, 0, 1, [1.0, 3.0].as_ptr(), 2, &mut v), OpdStatus::Ok);
        // agent 0 sits at (1, 3) and the target starts at (0.8, 0.95)
        let z: f64 = 0.2f64.powi(2) + 2.05f64.powi(2);
        assert!((v - 0.25 * z * z).abs() < 1e-12);
        assert_eq!(opd_loss_evaluate(loss, 10, 1, [0.0, 0.0].as_ptr(), 2, &mut v), OpdStatus::OutOfRange);
        assert_eq!(opd_loss_evaluate(loss, 0, 0, [0.0, 0.0].as_ptr(), 2, &mut v), OpdStatus::OutOfRange);
        opd_loss_free(loss);
    }
}

fn run_config(estimator: OpdEstimator, horizon: usize, start: &[f64; 2]) -> OpdRunConfig {
    OpdRunConfig {
        estimator,
        alpha: OpdSchedule { scale: 5e-3, exponent: 0.0, offset: 0.0 },
        mu: OpdSchedule { scale: 1e-3, exponent: 0.0, offset: 0.0 },
        horizon,
        metric: OpdMetric::Nonconvex,
        tracked_agent: 0,
        initial_point: start.as_ptr(),
        dim: 2,
    }
}

#[test]
fn run_and_read_the_ledger() {
    unsafe {
        let mut g: *mut OpdGraph = ptr::null_mut();
        let mut loss: *mut OpdLoss = ptr::null_mut();
        let mut set: *mut OpdSet = ptr::null_mut();
        opd_graph_builtin_new(OpdWeighting::Metropolis, &mut g);
        opd_loss_cubic_cosine_new(10, 1.0, 5, &mut loss);
        opd_set_box_new(2, [-3.0, -3.0].as_ptr(), [3.0, 3.0].as_ptr(), &mut set);
        let start = [1.0, -2.0];
        let cfg = run_config(OpdEstimator::TwoPoint, 25, &start);
        let mut ledger: *mut OpdLedger = ptr::null_mut();
        assert_eq!(opd_run(g, loss, set, &cfg, 9, &mut ledger), OpdStatus::Ok);
        assert_eq!(opd_ledger_len(ledger), 25);
        let mut curve = vec![0.0; 25];
        assert_eq!(opd_ledger_cumulative(ledger, curve.as_mut_ptr(), 25), OpdStatus::Ok);
        assert!(curve.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(curve[24], opd_ledger_final_regret(ledger));
        let mut cons = vec![0.0; 25];
        assert_eq!(opd_ledger_consensus(ledger, cons.as_mut_ptr(), 25), OpdStatus::Ok);
        assert_eq!(cons[0], 0.0);
        assert_eq!(opd_ledger_cumulative(ledger, curve.as_mut_ptr(), 24), OpdStatus::DimensionMismatch);

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("run.csv").to_str().unwrap()).unwrap();
        assert_eq!(opd_ledger_write_csv(ledger, path.as_ptr()), OpdStatus::Ok);
        let csv = std::fs::read_to_string(dir.path().join("run.csv")).unwrap();
        assert_eq!(csv.lines().count(), 26);
        opd_ledger_free(ledger);

        let bad = run_config(OpdEstimator::OnePoint, 0, &start);
        let mut none: *mut OpdLedger = ptr::null_mut();
        assert_eq!(opd_run(g, loss, set, &bad, 9, &mut none), OpdStatus::Config);
        assert!(none.is_null());
        assert!(last_error().contains("horizon"));
        assert_eq!(opd_run(ptr::null(), loss, set, &cfg, 9, &mut none), OpdStatus::NullPointer);

        opd_graph_free(g);
        opd_loss_free(loss);
        opd_set_free(set);
        opd_ledger_free(ptr::null_mut());
    }
}

#[test]
fn experiments_from_presets_and_toml() {
    unsafe {
        let mut exp: *mut OpdExperiment = ptr::null_mut();
        let name = CString::new("fig2").unwrap();
        assert_eq!(opd_experiment_preset(name.as_ptr(), &mut exp), OpdStatus::Ok);
        assert_eq!(opd_experiment_set_horizon(exp, 40), OpdStatus::Ok);
        assert_eq!(opd_experiment_set_horizon(exp, 0), OpdStatus::Config);
        assert_eq!(opd_experiment_set_horizon(exp, 40), OpdStatus::Ok);
        let mut a: *mut OpdLedger = ptr::null_mut();
        let mut b: *mut OpdLedger = ptr::null_mut();
        assert_eq!(opd_experiment_run_replicate(exp, OpdEstimator::OnePointResidual, 2, &mut a), OpdStatus::Ok);
        assert_eq!(opd_experiment_run_replicate(exp, OpdEstimator::OnePointResidual, 2, &mut b), OpdStatus::Ok);
        assert_eq!(opd_ledger_len(a), 40);
        assert_eq!(opd_ledger_final_regret(a), opd_ledger_final_regret(b));
        opd_ledger_free(a);
        opd_ledger_free(b);
        opd_experiment_free(exp);

        let unknown = CString::new("fig7").unwrap();
        assert_eq!(opd_experiment_preset(unknown.as_ptr(), &mut exp), OpdStatus::Config);
        let toml = CString::new("name = \"x\"\nhorizon = 0").unwrap();
        assert_eq!(opd_experiment_from_toml(toml.as_ptr(), &mut exp), OpdStatus::Config);
        assert_eq!(opd_experiment_from_toml(ptr::null(), &mut exp), OpdStatus::NullPointer);
    }
}

#[test]
fn error_message_truncates_and_reports_length() {
    unsafe {
        let mut set: *mut OpdSet = ptr::null_mut();
        assert_eq!(opd_set_l1_new(0, 1.0, &mut set), OpdStatus::InvalidArgument);
        let full = opd_last_error_message(ptr::null_mut(), 0);
        assert!(full > 4);
        let mut buf = [1 as c_char; 5];
        assert_eq!(opd_last_error_message(buf.as_mut_ptr(), 5), full);
        assert_eq!(buf[4], 0);
        assert_eq!(opd_set_l1_new(2, 1.0, &mut set), OpdStatus::Ok);
        assert_eq!(opd_last_error_message(ptr::null_mut(), 0), 0);
        opd_set_free(set);
    }
}
