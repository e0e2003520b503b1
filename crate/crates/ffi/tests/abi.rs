use std::ffi::{CStr, CString};
use std::ptr;

use degen_ffi::*;

fn last_error() -> String {
    let p = degen_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

unsafe fn fixture() -> (*mut DegenModel, *mut DegenDataset) {
    let mut ds = ptr::null_mut();
    assert_eq!(degen_dataset_synthetic(40, 4, 3, 1, &mut ds), DegenStatus::Ok);
    let hidden = [5usize];
    let mut m = ptr::null_mut();
    assert_eq!(
        degen_model_new(4, hidden.as_ptr(), 1, 3, DegenActivation::Tanh, 2, &mut m),
        DegenStatus::Ok
    );
    (m, ds)
}

#[test]
fn model_lifecycle_and_parameter_access() {
    unsafe {
        let (m, ds) = fixture();
        assert_eq!(degen_dataset_len(ds), 40);
        assert_eq!(degen_dataset_input_dim(ds), 4);
        let d = degen_model_param_count(m);
        assert_eq!(d, 4 * 5 + 5 + 5 * 3 + 3);

        let mut params = vec![0.0; d];
        assert_eq!(degen_model_get_params(m, params.as_mut_ptr(), d), DegenStatus::Ok);
        params[0] += 0.5;
        assert_eq!(degen_model_set_params(m, params.as_ptr(), d), DegenStatus::Ok);
        let mut back = vec![0.0; d];
        degen_model_get_params(m, back.as_mut_ptr(), d);
        assert_eq!(back, params);

        let mut loss = 0.0;
        assert_eq!(degen_model_loss(m, ds, &mut loss), DegenStatus::Ok);
        let mut g = vec![0.0; d];
        assert_eq!(degen_model_grad(m, ds, g.as_mut_ptr(), d), DegenStatus::Ok);
        let mut hv = vec![0.0; d];
        assert_eq!(degen_model_hvp(m, ds, g.as_ptr(), hv.as_mut_ptr(), d), DegenStatus::Ok);
        // g^T H g of a tanh net is not sign-definite; just check it ran.
        assert!(hv.iter().all(|v| v.is_finite()));

        let mut norm = 0.0;
        assert_eq!(degen_sgd_step(m, ds, 0.1, &mut norm), DegenStatus::Ok);
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 0.1 * gnorm).abs() < 1e-12 * norm.max(1.0));
        let mut after = 0.0;
        degen_model_loss(m, ds, &mut after);
        assert!(after < loss);

        let mut kappa = 0.0;
        assert_eq!(degen_ngd_step(m, ds, 0.1, 1e-2, 1e-10, &mut kappa), DegenStatus::Ok);
        assert!(kappa > 0.0);

        let (mut tr, mut se) = (0.0, 0.0);
        assert_eq!(degen_hessian_trace(m, ds, 50, 3, &mut tr, &mut se), DegenStatus::Ok);
        assert!(se > 0.0);

        let p = DegenSgldParams {
            step_size: 0.0,
            beta: 0.0,
            gamma: 0.0,
            num_chains: 2,
            draws_per_chain: 50,
            burn_in: 10,
            batch_size: 8,
            seed: 4,
        };
        let (mut lambda, mut lse) = (0.0, 0.0);
        assert_eq!(degen_llc_estimate(m, ds, &p, &mut lambda, &mut lse), DegenStatus::Ok);
        assert!(lambda.is_finite());

        degen_model_free(m);
        degen_dataset_free(ds);
    }
}

#[test]
fn errors_set_status_and_message() {
    unsafe {
        let (m, ds) = fixture();
        let d = degen_model_param_count(m);
        let mut small = vec![0.0; d - 1];
        assert_eq!(degen_model_get_params(m, small.as_mut_ptr(), d - 1), DegenStatus::BufferSize);
        assert!(last_error().contains("length"));

        assert_eq!(degen_model_loss(ptr::null(), ds, &mut 0.0), DegenStatus::NullPointer);
        assert!(last_error().contains("model"));

        let mut out = ptr::null_mut();
        assert_eq!(degen_dataset_synthetic(10, 1, 5, 0, &mut out), DegenStatus::Config);
        assert!(out.is_null());

        let img = CString::new("/nonexistent/images").unwrap();
        let lbl = CString::new("/nonexistent/labels").unwrap();
        assert_eq!(degen_dataset_load_idx(img.as_ptr(), lbl.as_ptr(), &mut out), DegenStatus::Io);

        let mut nan = vec![0.0; d];
        nan[0] = f64::NAN;
        assert_eq!(degen_model_set_params(m, nan.as_ptr(), d), DegenStatus::Numeric);

        assert_eq!(degen_sgd_step(m, ds, -1.0, ptr::null_mut()), DegenStatus::Config);

        let mut bic = 0.0;
        assert_eq!(degen_compute_bic(100, 1.0, 10, &mut bic), DegenStatus::Ok);
        assert!((bic - (100.0 + 5.0 * 100f64.ln())).abs() < 1e-12);
        assert_eq!(degen_compute_bic(0, 1.0, 10, &mut bic), DegenStatus::Config);

        degen_model_free(m);
        degen_dataset_free(ds);
        // Freeing null is a no-op.
        degen_model_free(ptr::null_mut());
        degen_dataset_free(ptr::null_mut());
    }
}

#[test]
fn train_from_config_writes_run_dir() {
    let toml = r#"
[run]
epochs = 1
[run.architecture]
hidden_layers = [3]
[run.optimizer]
kind = "sgd"
learning_rate = 0.1
batch_size = 8
[run.data.source]
kind = "synthetic"
n = 30
input_dim = 2
classes = 2
[run.data.split]
train_fraction = 0.7
[run.metrics]
llc_every = 1
[run.metrics.sgld]
num_chains = 1
draws_per_chain = 20
burn_in = 2
[run.metrics.hutchinson]
num_samples = 5
"#;
    let dir = tempfile::tempdir().unwrap();
    let cfg = CString::new(toml).unwrap();
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    let status = unsafe { degen_train_from_config(cfg.as_ptr(), out.as_ptr()) };
    assert_eq!(status, DegenStatus::Ok, "{}", last_error());
    assert!(dir.path().join("metrics.csv").exists());

    let broken = CString::new("[run]\nepochs = -1").unwrap();
    assert_eq!(unsafe { degen_train_from_config(broken.as_ptr(), out.as_ptr()) }, DegenStatus::Config);
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(degen_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/degen.h")).unwrap();
    for f in [
        "degen_last_error",
        "degen_version",
        "degen_dataset_load_idx",
        "degen_dataset_synthetic",
        "degen_dataset_free",
        "degen_model_new",
        "degen_model_free",
        "degen_model_grad",
        "degen_model_hvp",
        "degen_sgd_step",
        "degen_ngd_step",
        "degen_hessian_trace",
        "degen_llc_estimate",
        "degen_compute_bic",
        "degen_train_from_config",
        "typedef struct DegenModel DegenModel",
    ] {
        assert!(header.contains(f), "header lacks {f}");
    }
}
