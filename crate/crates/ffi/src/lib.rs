//! C interface to `degen`.
//!
//! Models and datasets are opaque heap handles created by `*_new` /
//! `*_load` functions and released with the matching `*_free`. Every
//! fallible function returns a [`DegenStatus`]; on failure the message is
//! available from [`degen_last_error`] on the same thread. Output values
//! are written only on success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use degen::data::{load_idx, synthetic_classification, Dataset};
use degen::harness::{run_training, write_run_dir, ExperimentFile, OutputFormat, RunManifest};
use degen::hessian::{hutchinson_trace, HutchinsonConfig, ProbeDistribution};
use degen::nn::{Activation, MlpArchitecture, MlpModel};
use degen::optim::{ngd_step, sgd_step, NgdConfig, SgdConfig};
use degen::slt::{compute_bic, estimate_llc, SgldConfig};
use degen::{rng, Error, ParamVector};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DegenStatus {
    Ok = 0,
    NullPointer = 1,
    Config = 2,
    Numeric = 3,
    Format = 4,
    Io = 5,
    /// Caller-provided buffer has the wrong length.
    BufferSize = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DegenActivation {
    Relu = 0,
    Tanh = 1,
}

/// Opaque model handle.
pub struct DegenModel {
    inner: MlpModel,
}

/// Opaque dataset handle.
pub struct DegenDataset {
    inner: Dataset,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> DegenStatus {
    match e {
        Error::NonFinite { .. } | Error::Solver { .. } | Error::Divergence { .. } => DegenStatus::Numeric,
        Error::RunAborted { source, .. } => status_of(source),
        Error::Format(_) | Error::Csv(_) | Error::Json(_) | Error::Consistency(_) => DegenStatus::Format,
        Error::Io { .. } => DegenStatus::Io,
        _ => DegenStatus::Config,
    }
}

enum Failure {
    Status(DegenStatus, String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn null(what: &str) -> Failure {
    Failure::Status(DegenStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DegenStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DegenStatus::Ok,
        Ok(Err(Failure::Status(s, msg))) => {
            set_last_error(msg);
            s
        }
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_last_error("internal panic".into());
            DegenStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn as_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    Ok(PathBuf::from(str_arg(p, what)?))
}

unsafe fn str_arg(p: *const c_char, what: &str) -> Result<String, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_string)
        .map_err(|_| Failure::Status(DegenStatus::Config, format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_out(out: *mut f64, len: usize, values: &[f64], what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    if len != values.len() {
        return Err(Failure::Status(
            DegenStatus::BufferSize,
            format!("{what} has length {len}, expected {}", values.len()),
        ));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), out, len);
    Ok(())
}

unsafe fn write_scalar<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    *as_mut(out, what)? = value;
    Ok(())
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn degen_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn degen_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

/// Loads an IDX image/label pair with pixels scaled to [0, 1].
///
/// # Safety
/// Paths must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn degen_dataset_load_idx(
    images_path: *const c_char,
    labels_path: *const c_char,
    out: *mut *mut DegenDataset,
) -> DegenStatus {
    guard(|| {
        let images = path_arg(images_path, "images_path")?;
        let labels = path_arg(labels_path, "labels_path")?;
        let out = as_mut(out, "out")?;
        let ds = load_idx(images, labels)?;
        *out = Box::into_raw(Box::new(DegenDataset { inner: ds }));
        Ok(())
    })
}

/// Seeded synthetic classification data in `[0, 1]^input_dim`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn degen_dataset_synthetic(
    n: usize,
    input_dim: usize,
    classes: usize,
    seed: u64,
    out: *mut *mut DegenDataset,
) -> DegenStatus {
    guard(|| {
        let out = as_mut(out, "out")?;
        let ds = synthetic_classification(n, input_dim, classes, seed)?;
        *out = Box::into_raw(Box::new(DegenDataset { inner: ds }));
        Ok(())
    })
}

/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn degen_dataset_len(dataset: *const DegenDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.inner.len())
}

/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn degen_dataset_input_dim(dataset: *const DegenDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.inner.input_dim())
}

/// # Safety
/// `dataset` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn degen_dataset_free(dataset: *mut DegenDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Glorot-initialised MLP with `num_hidden` hidden layers.
///
/// # Safety
/// `hidden` must point to `num_hidden` values (may be null when zero);
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn degen_model_new(
    input_dim: usize,
    hidden: *const usize,
    num_hidden: usize,
    classes: usize,
    activation: DegenActivation,
    seed: u64,
    out: *mut *mut DegenModel,
) -> DegenStatus {
    guard(|| {
        let out = as_mut(out, "out")?;
        let hidden = if num_hidden == 0 {
            Vec::new()
        } else {
            if hidden.is_null() {
                return Err(null("hidden"));
            }
            std::slice::from_raw_parts(hidden, num_hidden).to_vec()
        };
        let act = match activation {
            DegenActivation::Relu => Activation::Relu,
            DegenActivation::Tanh => Activation::Tanh,
        };
        let arch = MlpArchitecture::new(input_dim, hidden, classes, act)?;
        let model = MlpModel::init(arch, &mut rng::seeded(seed))?;
        *out = Box::into_raw(Box::new(DegenModel { inner: model }));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn degen_model_param_count(model: *const DegenModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.param_count())
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn degen_model_free(model: *mut DegenModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Copies the flat parameter vector into `out[0..len]`; `len` must equal
/// the parameter count.
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn degen_model_get_params(model: *const DegenModel, out: *mut f64, len: usize) -> DegenStatus {
    guard(|| {
        let m = as_ref(model, "model")?;
        write_out(out, len, m.inner.params().as_slice(), "out")
    })
}

/// # Safety
/// `params` must point to `len` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn degen_model_set_params(model: *mut DegenModel, params: *const f64, len: usize) -> DegenStatus {
    guard(|| {
        let m = as_mut(model, "model")?;
        let p = slice_arg(params, len, "params")?;
        m.inner.set_params(ParamVector::from_vec(p.to_vec()))?;
        Ok(())
    })
}

/// Mean negative log-likelihood over the whole dataset.
///
/// # Safety
/// Handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn degen_model_loss(
    model: *const DegenModel,
    dataset: *const DegenDataset,
    out: *mut f64,
) -> DegenStatus {
    guard(|| {
        let m = as_ref(model, "model")?;
        let d = as_ref(dataset, "dataset")?;
        let loss = m.inner.nll_loss(&d.inner.to_batch()?)?;
        write_scalar(out, loss, "out")
    })
}

/// Loss gradient over the whole dataset.
///
/// # Safety
/// Handles must be live; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn degen_model_grad(
    model: *const DegenModel,
    dataset: *const DegenDataset,
    out: *mut f64,
    len: usize,
) -> DegenStatus {
    guard(|| {
        let m = as_ref(model, "model")?;
        let d = as_ref(dataset, "dataset")?;
        let g = m.inner.grad(&d.inner.to_batch()?)?;
        write_out(out, len, g.as_slice(), "out")
    })
}

/// Loss Hessian times `v` over the whole dataset.
///
/// # Safety
/// Handles must be live; `v` and `out` must hold `len` doubles each.
#[no_mangle]
pub unsafe extern "C" fn degen_model_hvp(
    model: *const DegenModel,
    dataset: *const DegenDataset,
    v: *const f64,
    out: *mut f64,
    len: usize,
) -> DegenStatus {
    guard(|| {
        let m = as_ref(model, "model")?;
        let d = as_ref(dataset, "dataset")?;
        let v = ParamVector::from_vec(slice_arg(v, len, "v")?.to_vec());
        let hv = m.inner.hvp(&d.inner.to_batch()?, &v)?;
        write_out(out, len, hv.as_slice(), "out")
    })
}

/// One full-batch SGD step in place. Writes the step norm to
/// `update_norm` when non-null.
///
/// # Safety
/// Handles must be live.
#[no_mangle]
pub unsafe extern "C" fn degen_sgd_step(
    model: *mut DegenModel,
    dataset: *const DegenDataset,
    learning_rate: f64,
    update_norm: *mut f64,
) -> DegenStatus {
    guard(|| {
        let m = as_mut(model, "model")?;
        let d = as_ref(dataset, "dataset")?;
        let cfg = SgdConfig {
            learning_rate,
            batch_size: d.inner.len(),
        };
        cfg.validate()?;
        let step = sgd_step(&m.inner, &d.inner.to_batch()?, &cfg)?;
        m.inner.set_params(step.new_params)?;
        if let Some(u) = update_norm.as_mut() {
            *u = step.update_norm;
        }
        Ok(())
    })
}

/// One full-batch smoothed natural-gradient step in place (conjugate
/// gradient solve). Writes the smoothing used to `kappa` when non-null.
///
/// # Safety
/// Handles must be live.
#[no_mangle]
pub unsafe extern "C" fn degen_ngd_step(
    model: *mut DegenModel,
    dataset: *const DegenDataset,
    learning_rate: f64,
    alpha: f64,
    epsilon_smooth: f64,
    kappa: *mut f64,
) -> DegenStatus {
    guard(|| {
        let m = as_mut(model, "model")?;
        let d = as_ref(dataset, "dataset")?;
        let cfg = NgdConfig {
            learning_rate,
            alpha,
            epsilon_smooth,
            batch_size: d.inner.len(),
            ..NgdConfig::default()
        };
        cfg.validate()?;
        let step = ngd_step(&m.inner, &d.inner.to_batch()?, &cfg)?;
        m.inner.set_params(step.new_params)?;
        if let Some(k) = kappa.as_mut() {
            *k = step.kappa;
        }
        Ok(())
    })
}

/// Hutchinson estimate of the loss-Hessian trace over the dataset with
/// Gaussian probes.
///
/// # Safety
/// Handles must be live; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn degen_hessian_trace(
    model: *const DegenModel,
    dataset: *const DegenDataset,
    num_samples: usize,
    seed: u64,
    mean: *mut f64,
    std_error: *mut f64,
) -> DegenStatus {
    guard(|| {
        let m = as_ref(model, "model")?;
        let d = as_ref(dataset, "dataset")?;
        let cfg = HutchinsonConfig {
            num_samples,
            seed,
            probe_distribution: ProbeDistribution::Gaussian,
        };
        let est = hutchinson_trace(&m.inner, &d.inner.to_batch()?, &cfg)?;
        write_scalar(mean, est.mean, "mean")?;
        write_scalar(std_error, est.standard_error, "std_error")
    })
}

/// SGLD sampler settings; zero fields take the library defaults.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DegenSgldParams {
    pub step_size: f64,
    /// Inverse temperature; 0 means `1 / ln n`.
    pub beta: f64,
    pub gamma: f64,
    pub num_chains: usize,
    pub draws_per_chain: usize,
    pub burn_in: usize,
    pub batch_size: usize,
    pub seed: u64,
}

fn sgld_config(p: &DegenSgldParams) -> SgldConfig {
    let d = SgldConfig::default();
    let pick = |v: usize, default: usize| if v == 0 { default } else { v };
    SgldConfig {
        step_size: if p.step_size == 0.0 { d.step_size } else { p.step_size },
        beta: (p.beta != 0.0).then_some(p.beta),
        gamma: if p.gamma == 0.0 { d.gamma } else { p.gamma },
        num_chains: pick(p.num_chains, d.num_chains),
        draws_per_chain: pick(p.draws_per_chain, d.draws_per_chain),
        burn_in: pick(p.burn_in, d.burn_in),
        batch_size: pick(p.batch_size, d.batch_size),
        seed: p.seed,
        ..d
    }
}

/// Local learning-coefficient estimate at the model's current parameters.
///
/// # Safety
/// Handles must be live; `params` may be null for all defaults; outputs
/// writable.
#[no_mangle]
pub unsafe extern "C" fn degen_llc_estimate(
    model: *const DegenModel,
    dataset: *const DegenDataset,
    params: *const DegenSgldParams,
    lambda_hat: *mut f64,
    std_error: *mut f64,
) -> DegenStatus {
    guard(|| {
        let m = as_ref(model, "model")?;
        let d = as_ref(dataset, "dataset")?;
        let cfg = params.as_ref().map_or_else(SgldConfig::default, sgld_config);
        let est = estimate_llc(&m.inner, &d.inner, &cfg)?;
        write_scalar(lambda_hat, est.lambda_hat, "lambda_hat")?;
        write_scalar(std_error, est.std_error, "std_error")
    })
}

/// `n L + (d / 2) ln n`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn degen_compute_bic(n: usize, loss: f64, d: usize, out: *mut f64) -> DegenStatus {
    guard(|| write_scalar(out, compute_bic(n, loss, d)?, "out"))
}

/// Runs the `[run]` table of a TOML configuration and writes the run
/// directory (metrics CSV, manifest, checkpoints) to `out_dir`.
///
/// # Safety
/// Both arguments must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn degen_train_from_config(config_toml: *const c_char, out_dir: *const c_char) -> DegenStatus {
    guard(|| {
        let text = str_arg(config_toml, "config_toml")?;
        let dir = path_arg(out_dir, "out_dir")?;
        let file = ExperimentFile::from_toml(&text)?;
        let data = file.run.data.load()?;
        let start = std::time::Instant::now();
        let out = run_training(&file.run, &data)?;
        let manifest = RunManifest::new("train", file.run.seed, &file, start.elapsed().as_secs_f64())?;
        write_run_dir(&dir, &out, &manifest, OutputFormat::Csv)?;
        Ok(())
    })
}
