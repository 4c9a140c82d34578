//! C ABI over the training and audit pipeline.
//!
//! Conventions: opaque handles created and freed by this library, status
//! codes for every fallible call, and a per-thread error message retrievable
//! with `irm_last_error`. Strings returned by the library are freed with
//! `irm_string_free`; handles with their matching `*_free`.

use irmkit::envsynth::{read_env_dir, synth_benchmark, write_env_dir, EnvDataset, EnvRole};
use irmkit::error::Error;
use irmkit::matrix::Matrix;
use irmkit::metrics::{self, DataSplit};
use irmkit::trainer::{self, HyperParams, TrainedModel};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;

/// Status code returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IrmStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    InvalidArgument = 5,
    Shape = 6,
    Capacity = 7,
    Divergence = 8,
    UndefinedMetric = 9,
    Config = 10,
    Internal = 11,
}

/// Opaque set of environments.
pub struct IrmEnvs {
    envs: Vec<EnvDataset>,
}

/// Opaque trained model.
pub struct IrmModel {
    model: TrainedModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message).unwrap_or_else(|_| CString::new("invalid error").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> IrmStatus {
    match err {
        Error::Io(_) => IrmStatus::Io,
        Error::Parse { .. } => IrmStatus::Parse,
        Error::Schema(_) | Error::Format(_) => IrmStatus::Parse,
        Error::Range { .. } | Error::Argument(_) => IrmStatus::InvalidArgument,
        Error::Shape { .. } => IrmStatus::Shape,
        Error::Capacity { .. } => IrmStatus::Capacity,
        Error::Divergence { .. } => IrmStatus::Divergence,
        Error::UndefinedMetric { .. } => IrmStatus::UndefinedMetric,
        Error::NoCandidates => IrmStatus::Internal,
        Error::Config(_) => IrmStatus::Config,
    }
}

fn fail(err: Error) -> IrmStatus {
    let status = status_of(&err);
    set_error(err.to_string());
    status
}

fn fail_with(status: IrmStatus, message: &str) -> IrmStatus {
    set_error(message.to_string());
    status
}

/// # Safety
/// `ptr` must be null or a NUL-terminated string valid for the call.
unsafe fn cstr_arg<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, IrmStatus> {
    if ptr.is_null() {
        return Err(fail_with(
            IrmStatus::NullArgument,
            &format!("{name} must not be null"),
        ));
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        fail_with(
            IrmStatus::InvalidUtf8,
            &format!("{name} is not valid UTF-8"),
        )
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn irm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message for the most recent failure on this thread, or null if none.
/// Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn irm_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(std::ptr::null(), |c| c.as_ptr())
    })
}

/// Free a string returned by this library.
///
/// # Safety
/// `s` must be null or a pointer previously returned by a function of this
/// library that documents `irm_string_free` ownership, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn irm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Build the synthetic benchmark. `config_json` holds
/// `{"n_per_env":…,"d_noise":…,"q":…}` with an optional `"specs"` list; the
/// default schedule is p = 0.2, 0.1 (train) and 0.9 (test).
///
/// # Safety
/// `config_json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn irm_envs_synth(
    config_json: *const c_char,
    seed: u64,
    out: *mut *mut IrmEnvs,
) -> IrmStatus {
    if out.is_null() {
        return fail_with(IrmStatus::NullArgument, "out must not be null");
    }
    let text = match cstr_arg(config_json, "config_json") {
        Ok(t) => t,
        Err(status) => return status,
    };
    #[derive(serde::Deserialize)]
    struct SynthJson {
        n_per_env: usize,
        #[serde(default)]
        d_noise: usize,
        q: f64,
        #[serde(default = "irmkit::envsynth::default_specs")]
        specs: Vec<irmkit::envsynth::EnvSpec>,
    }
    let cfg: SynthJson = match serde_json::from_str(text) {
        Ok(c) => c,
        Err(e) => return fail(Error::Config(e.to_string())),
    };
    match synth_benchmark(cfg.n_per_env, cfg.d_noise, cfg.q, &cfg.specs, seed) {
        Ok(envs) => {
            *out = Box::into_raw(Box::new(IrmEnvs { envs }));
            IrmStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Load an environment directory written by `irm_envs_save` or the CLI.
///
/// # Safety
/// `dir` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn irm_envs_load(dir: *const c_char, out: *mut *mut IrmEnvs) -> IrmStatus {
    if out.is_null() {
        return fail_with(IrmStatus::NullArgument, "out must not be null");
    }
    let dir = match cstr_arg(dir, "dir") {
        Ok(d) => PathBuf::from(d),
        Err(status) => return status,
    };
    match read_env_dir(&dir) {
        Ok(envs) => {
            *out = Box::into_raw(Box::new(IrmEnvs { envs }));
            IrmStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Write the environment set (manifest plus IRMB sidecars) to a directory.
///
/// # Safety
/// `envs` must be a live handle from this library; `dir` a NUL-terminated
/// string.
#[no_mangle]
pub unsafe extern "C" fn irm_envs_save(envs: *const IrmEnvs, dir: *const c_char) -> IrmStatus {
    if envs.is_null() {
        return fail_with(IrmStatus::NullArgument, "envs must not be null");
    }
    let dir = match cstr_arg(dir, "dir") {
        Ok(d) => PathBuf::from(d),
        Err(status) => return status,
    };
    match write_env_dir(&dir, &(*envs).envs) {
        Ok(()) => IrmStatus::Ok,
        Err(e) => fail(e),
    }
}

/// Number of environments in the set; 0 for null.
///
/// # Safety
/// `envs` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn irm_envs_count(envs: *const IrmEnvs) -> usize {
    if envs.is_null() {
        0
    } else {
        (*envs).envs.len()
    }
}

/// Feature dimension of the set; -1 for null or empty.
///
/// # Safety
/// `envs` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn irm_envs_dim(envs: *const IrmEnvs) -> i64 {
    if envs.is_null() {
        return -1;
    }
    (*envs).envs.first().map_or(-1, |e| e.dim() as i64)
}

/// # Safety
/// `envs` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn irm_envs_free(envs: *mut IrmEnvs) {
    if !envs.is_null() {
        drop(Box::from_raw(envs));
    }
}

/// Train on the train-role environments of the set. `hp_json` holds the
/// hyperparameters, e.g. `{"learning_rate":0.01,"iterations":2000,"l2":0.0,
/// "penalty_lambda":10000.0,"anneal_iters":100,"mode":"irm"}`.
///
/// # Safety
/// `envs` must be a live handle, `hp_json` a NUL-terminated string, `out` a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn irm_train(
    envs: *const IrmEnvs,
    hp_json: *const c_char,
    seed: u64,
    out: *mut *mut IrmModel,
) -> IrmStatus {
    if envs.is_null() || out.is_null() {
        return fail_with(IrmStatus::NullArgument, "envs and out must not be null");
    }
    let text = match cstr_arg(hp_json, "hp_json") {
        Ok(t) => t,
        Err(status) => return status,
    };
    let hp: HyperParams = match serde_json::from_str(text) {
        Ok(h) => h,
        Err(e) => return fail(Error::Config(e.to_string())),
    };
    let train_envs: Vec<EnvDataset> = (*envs)
        .envs
        .iter()
        .filter(|e| e.spec.role == EnvRole::Train)
        .cloned()
        .collect();
    match trainer::train(&train_envs, &hp, seed) {
        Ok(model) => {
            *out = Box::into_raw(Box::new(IrmModel { model }));
            IrmStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// # Safety
/// `model` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn irm_model_save(model: *const IrmModel, path: *const c_char) -> IrmStatus {
    if model.is_null() {
        return fail_with(IrmStatus::NullArgument, "model must not be null");
    }
    let path = match cstr_arg(path, "path") {
        Ok(p) => PathBuf::from(p),
        Err(status) => return status,
    };
    match trainer::save_model(&(*model).model, &path) {
        Ok(()) => IrmStatus::Ok,
        Err(e) => fail(e),
    }
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn irm_model_load(path: *const c_char, out: *mut *mut IrmModel) -> IrmStatus {
    if out.is_null() {
        return fail_with(IrmStatus::NullArgument, "out must not be null");
    }
    let path = match cstr_arg(path, "path") {
        Ok(p) => PathBuf::from(p),
        Err(status) => return status,
    };
    match trainer::load_model(&path) {
        Ok(model) => {
            *out = Box::into_raw(Box::new(IrmModel { model }));
            IrmStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Weight dimension of the model; -1 for null.
///
/// # Safety
/// `model` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn irm_model_dim(model: *const IrmModel) -> i64 {
    if model.is_null() {
        return -1;
    }
    (*model).model.params.theta.len() as i64
}

/// # Safety
/// `model` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn irm_model_free(model: *mut IrmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Classify `rows` samples of `cols` features (row-major) into
/// `out_labels[0..rows]` as 0/1.
///
/// # Safety
/// `features` must point to `rows*cols` readable floats and `out_labels` to
/// `rows` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn irm_model_predict(
    model: *const IrmModel,
    features: *const f32,
    rows: usize,
    cols: usize,
    out_labels: *mut u8,
) -> IrmStatus {
    if model.is_null() || (features.is_null() && rows * cols > 0) || out_labels.is_null() {
        return fail_with(IrmStatus::NullArgument, "null argument to predict");
    }
    let data = std::slice::from_raw_parts(features, rows * cols).to_vec();
    let matrix = match Matrix::from_vec(rows, cols, data) {
        Ok(m) => m,
        Err(e) => return fail(e),
    };
    match trainer::predict(&(*model).model, &matrix) {
        Ok(labels) => {
            std::ptr::copy_nonoverlapping(labels.as_ptr(), out_labels, rows);
            IrmStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Evaluate the model on environment `env_index` of the set and return the
/// report (accuracy, Δ_DP, Δ_EO, cell counts) as a JSON string owned by the
/// caller; free it with `irm_string_free`.
///
/// # Safety
/// `model` and `envs` must be live handles and `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn irm_evaluate(
    model: *const IrmModel,
    envs: *const IrmEnvs,
    env_index: usize,
    out_json: *mut *mut c_char,
) -> IrmStatus {
    if model.is_null() || envs.is_null() || out_json.is_null() {
        return fail_with(IrmStatus::NullArgument, "null argument to evaluate");
    }
    let set = &(*envs).envs;
    let Some(env) = set.get(env_index) else {
        return fail_with(
            IrmStatus::InvalidArgument,
            &format!(
                "env_index {env_index} out of range ({} environments)",
                set.len()
            ),
        );
    };
    let report = match metrics::evaluate(&(*model).model, &DataSplit::from_env(env)) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    let json = match serde_json::to_string(&report) {
        Ok(j) => j,
        Err(e) => return fail(Error::Schema(e.to_string())),
    };
    match CString::new(json) {
        Ok(c) => {
            *out_json = c.into_raw();
            IrmStatus::Ok
        }
        Err(_) => fail_with(IrmStatus::Internal, "report contained interior NUL"),
    }
}

unsafe fn metric_slices<'a>(
    ptrs: &[(*const u8, &str)],
    n: usize,
) -> Result<Vec<&'a [u8]>, IrmStatus> {
    let mut out = Vec::with_capacity(ptrs.len());
    for &(p, name) in ptrs {
        if p.is_null() {
            return Err(fail_with(
                IrmStatus::NullArgument,
                &format!("{name} must not be null"),
            ));
        }
        out.push(std::slice::from_raw_parts(p, n));
    }
    Ok(out)
}

/// Fraction of agreements between `yhat` and `y`.
///
/// # Safety
/// Both arrays must hold `n` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn irm_metric_accuracy(
    yhat: *const u8,
    y: *const u8,
    n: usize,
    out: *mut f64,
) -> IrmStatus {
    if out.is_null() {
        return fail_with(IrmStatus::NullArgument, "out must not be null");
    }
    let slices = match metric_slices(&[(yhat, "yhat"), (y, "y")], n) {
        Ok(s) => s,
        Err(status) => return status,
    };
    match metrics::accuracy(slices[0], slices[1]) {
        Ok(v) => {
            *out = v;
            IrmStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Demographic parity distance |P(ŷ=1|a=0) − P(ŷ=1|a=1)|.
///
/// # Safety
/// Both arrays must hold `n` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn irm_metric_delta_dp(
    yhat: *const u8,
    a: *const u8,
    n: usize,
    out: *mut f64,
) -> IrmStatus {
    if out.is_null() {
        return fail_with(IrmStatus::NullArgument, "out must not be null");
    }
    let slices = match metric_slices(&[(yhat, "yhat"), (a, "a")], n) {
        Ok(s) => s,
        Err(status) => return status,
    };
    match metrics::delta_dp(slices[0], slices[1]) {
        Ok(v) => {
            *out = v;
            IrmStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Equalized odds distance: half FPR gap plus half FNR gap.
///
/// # Safety
/// All three arrays must hold `n` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn irm_metric_delta_eo(
    yhat: *const u8,
    y: *const u8,
    a: *const u8,
    n: usize,
    out: *mut f64,
) -> IrmStatus {
    if out.is_null() {
        return fail_with(IrmStatus::NullArgument, "out must not be null");
    }
    let slices = match metric_slices(&[(yhat, "yhat"), (y, "y"), (a, "a")], n) {
        Ok(s) => s,
        Err(status) => return status,
    };
    match metrics::delta_eo(slices[0], slices[1], slices[2]) {
        Ok(v) => {
            *out = v;
            IrmStatus::Ok
        }
        Err(e) => fail(e),
    }
}
