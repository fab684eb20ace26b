//! C ABI for `enns-core`.
//!
//! Datasets and models are opaque handles created by `enns_*_new`/`load`
//! calls and released with the matching `_free`. Every fallible call returns
//! an [`EnnsStatus`]; on failure, `enns_last_error_message` describes the
//! error for the calling thread. Feature indices are 0-based.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use enns_core::dnp::{self, DnpConfig};
use enns_core::ensemble::{self, EnnsConfig, Resampling};
use enns_core::estimate::{self, Estimator, SparsityMode, SparsitySpec};
use enns_core::io::{self, StoredModel};
use enns_core::nn::{self, Activation, NetworkArchitecture, TrainOptions};
use enns_core::theory::{self, SignalProfile};
use enns_core::{Dataset, Error, ErrorKind, Task};
use ndarray::{Array1, Array2, ArrayView2, Axis};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnnsStatus {
    Ok = 0,
    /// Invalid argument, shape mismatch or null pointer.
    InvalidArgument = 1,
    /// Malformed data or unreadable file.
    DataError = 2,
    /// Divergence, non-finite values or quadrature failure.
    NumericalError = 3,
    /// Output buffer too small; the required length is still written.
    BufferTooSmall = 4,
    /// Internal panic caught at the boundary.
    Panic = 5,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnnsTask {
    Regression = 0,
    Classification = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnnsActivation {
    Relu = 0,
    Sigmoid = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnnsEstimator {
    Plain = 0,
    /// Soft-thresholding at the given percentile of each weight matrix.
    L1Percentile = 1,
    /// Soft-thresholding at `lambda * learning_rate`.
    L1Lambda = 2,
}

/// Opaque dataset handle.
pub struct EnnsDataset(Dataset);

/// Opaque fitted-model handle.
pub struct EnnsModel(StoredModel);

/// Network and selection settings shared by `enns_select` and `enns_dnp_select`.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct EnnsSelectOptions {
    /// Number of features to select.
    pub target: usize,
    pub num_bags: usize,
    pub appearance_proportion: f64,
    /// Features requested per round; 0 requests all that are missing.
    pub per_round: usize,
    /// Observations per bag; 0 uses `n`.
    pub bootstrap_size: usize,
    /// Non-zero draws bags without replacement.
    pub subsample: i32,
    pub num_dropouts: usize,
    pub dropout_rate: f64,
    pub norm_q: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Hidden layer widths (`hidden_len` entries).
    pub hidden: *const usize,
    pub hidden_len: usize,
    pub activation: EnnsActivation,
    pub seed: u64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct EnnsFitOptions {
    pub estimator: EnnsEstimator,
    /// Percentile or lambda, applied to every weight matrix.
    pub sparsity: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub patience: usize,
    pub validation_fraction: f64,
    pub hidden: *const usize,
    pub hidden_len: usize,
    pub activation: EnnsActivation,
    pub seed: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

enum Failure {
    Core(Error),
    Arg(String),
    Small,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type FfiResult<T> = Result<T, Failure>;

fn guard<F: FnOnce() -> FfiResult<()>>(f: F) -> EnnsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            EnnsStatus::Ok
        }
        Ok(Err(Failure::Core(e))) => {
            set_last_error(&e.to_string());
            match e.kind() {
                ErrorKind::Usage => EnnsStatus::InvalidArgument,
                ErrorKind::Data => EnnsStatus::DataError,
                ErrorKind::Numerical => EnnsStatus::NumericalError,
            }
        }
        Ok(Err(Failure::Arg(msg))) => {
            set_last_error(&msg);
            EnnsStatus::InvalidArgument
        }
        Ok(Err(Failure::Small)) => {
            set_last_error("output buffer too small");
            EnnsStatus::BufferTooSmall
        }
        Err(_) => {
            set_last_error("internal panic");
            EnnsStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, name: &str) -> FfiResult<()> {
    if p.is_null() {
        Err(Failure::Arg(format!("`{name}` is null")))
    } else {
        Ok(())
    }
}

/// # Safety
/// `p` must be null or point to `len` readable values.
unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> FfiResult<&'a [T]> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(p, name)?;
    Ok(std::slice::from_raw_parts(p, len))
}

/// # Safety
/// `p` must be null or a NUL-terminated string.
unsafe fn path_arg<'a>(p: *const c_char) -> FfiResult<&'a Path> {
    non_null(p, "path")?;
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Arg("path is not valid UTF-8".into()))?;
    Ok(Path::new(s))
}

fn activation(a: EnnsActivation) -> Activation {
    match a {
        EnnsActivation::Relu => Activation::Relu,
        EnnsActivation::Sigmoid => Activation::Sigmoid,
    }
}

fn write_indices(indices: &[usize], out: *mut usize, capacity: usize, out_len: *mut usize) -> FfiResult<()> {
    non_null(out_len, "out_len")?;
    // SAFETY: checked non-null above.
    unsafe { *out_len = indices.len() };
    if indices.len() > capacity {
        return Err(Failure::Small);
    }
    if !indices.is_empty() {
        non_null(out, "out")?;
        // SAFETY: the caller provides `capacity ≥ indices.len()` writable slots.
        unsafe { ptr::copy_nonoverlapping(indices.as_ptr(), out, indices.len()) };
    }
    Ok(())
}

/// Static version string.
#[no_mangle]
pub extern "C" fn enns_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread ("" after a success).
/// The pointer is valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn enns_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Copies an `n × p` row-major design and a length-`n` response into a new dataset.
///
/// # Safety
/// `x` must hold `n·p` values, `y` `n` values, `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn enns_dataset_new(
    x: *const f64,
    y: *const f64,
    n: usize,
    p: usize,
    task: EnnsTask,
    out: *mut *mut EnnsDataset,
) -> EnnsStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let len = n.checked_mul(p).ok_or_else(|| Failure::Arg("n·p overflows".into()))?;
        let xs = slice(x, len, "x")?;
        let ys = slice(y, n, "y")?;
        let x = Array2::from_shape_vec((n, p), xs.to_vec()).map_err(|e| Failure::Arg(e.to_string()))?;
        let task = match task {
            EnnsTask::Regression => Task::Regression,
            EnnsTask::Classification => Task::Classification,
        };
        let ds = Dataset::new(x, Array1::from(ys.to_vec()), task)?;
        *out = Box::into_raw(Box::new(EnnsDataset(ds)));
        Ok(())
    })
}

/// # Safety
/// `ds` must be null or a handle from `enns_dataset_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn enns_dataset_free(ds: *mut EnnsDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// # Safety
/// `ds` must be a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn enns_dataset_n(ds: *const EnnsDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.n())
}

/// # Safety
/// `ds` must be a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn enns_dataset_p(ds: *const EnnsDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.p())
}

/// Defaults: 10 bags, proportion 0.3, 5 dropout draws at rate 0.5, `q = 2`,
/// learning rate 0.05, 50 epochs, one hidden layer of 16 ReLU units.
#[no_mangle]
pub extern "C" fn enns_select_options_default() -> EnnsSelectOptions {
    static HIDDEN: [usize; 1] = [16];
    EnnsSelectOptions {
        target: 1,
        num_bags: 10,
        appearance_proportion: 0.3,
        per_round: 0,
        bootstrap_size: 0,
        subsample: 0,
        num_dropouts: 5,
        dropout_rate: 0.5,
        norm_q: 2.0,
        learning_rate: 0.05,
        epochs: 50,
        hidden: HIDDEN.as_ptr(),
        hidden_len: HIDDEN.len(),
        activation: EnnsActivation::Relu,
        seed: 0,
    }
}

/// Plain estimator, learning rate 0.05, 200 epochs, one hidden layer of 16 ReLU units.
#[no_mangle]
pub extern "C" fn enns_fit_options_default() -> EnnsFitOptions {
    static HIDDEN: [usize; 1] = [16];
    EnnsFitOptions {
        estimator: EnnsEstimator::Plain,
        sparsity: 0.0,
        learning_rate: 0.05,
        epochs: 200,
        patience: 0,
        validation_fraction: 0.0,
        hidden: HIDDEN.as_ptr(),
        hidden_len: HIDDEN.len(),
        activation: EnnsActivation::Relu,
        seed: 0,
    }
}

unsafe fn selection_setup<'a>(
    ds: *const EnnsDataset,
    opts: *const EnnsSelectOptions,
) -> FfiResult<(&'a Dataset, EnnsSelectOptions, NetworkArchitecture, DnpConfig)> {
    non_null(ds, "dataset")?;
    non_null(opts, "options")?;
    let data = &(*ds).0;
    let o = *opts;
    let hidden = slice(o.hidden, o.hidden_len, "hidden")?.to_vec();
    let arch = NetworkArchitecture::new(data.p(), hidden, activation(o.activation), data.task())?;
    let dnp = DnpConfig {
        norm_q: o.norm_q,
        num_dropouts: o.num_dropouts,
        dropout_rate: o.dropout_rate,
        train_opts: TrainOptions {
            learning_rate: o.learning_rate,
            max_epochs: o.epochs,
            ..TrainOptions::default()
        },
    };
    Ok((data, o, arch, dnp))
}

/// Ensemble selection. Writes up to `capacity` 0-based indices in selection
/// order to `out` and their count to `out_len`.
///
/// # Safety
/// `ds` must be live, `opts` readable, `out` writable for `capacity` values.
#[no_mangle]
pub unsafe extern "C" fn enns_select(
    ds: *const EnnsDataset,
    opts: *const EnnsSelectOptions,
    out: *mut usize,
    capacity: usize,
    out_len: *mut usize,
) -> EnnsStatus {
    guard(|| {
        let (data, o, arch, dnp) = selection_setup(ds, opts)?;
        let cfg = EnnsConfig {
            num_bags: o.num_bags,
            bootstrap_size: (o.bootstrap_size > 0).then_some(o.bootstrap_size),
            resampling: if o.subsample != 0 { Resampling::Subsample } else { Resampling::Bootstrap },
            appearance_proportion: o.appearance_proportion,
            target: o.target,
            per_round: (o.per_round > 0).then_some(o.per_round),
            dnp,
            seed: o.seed,
        };
        let report = ensemble::enns_select(data, &arch, &cfg)?;
        write_indices(&report.selected, out, capacity, out_len)
    })
}

/// Single stage-wise run of `target` steps (bag-related options are ignored).
///
/// # Safety
/// As for [`enns_select`].
#[no_mangle]
pub unsafe extern "C" fn enns_dnp_select(
    ds: *const EnnsDataset,
    opts: *const EnnsSelectOptions,
    out: *mut usize,
    capacity: usize,
    out_len: *mut usize,
) -> EnnsStatus {
    guard(|| {
        let (data, o, arch, dnp) = selection_setup(ds, opts)?;
        let selected = dnp::dnp_run(data, &arch, o.target, &dnp, ensemble::bag_seed(o.seed, 0, 0))?;
        write_indices(&selected, out, capacity, out_len)
    })
}

/// Fits a network on the 0-based columns `selected` of `ds`.
///
/// # Safety
/// `ds` must be live, `selected` readable for `len` values, `opts` readable, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn enns_fit(
    ds: *const EnnsDataset,
    selected: *const usize,
    len: usize,
    opts: *const EnnsFitOptions,
    out: *mut *mut EnnsModel,
) -> EnnsStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = ptr::null_mut();
        non_null(ds, "dataset")?;
        non_null(opts, "options")?;
        let data = &(*ds).0;
        let o = *opts;
        let cols = slice(selected, len, "selected")?.to_vec();
        if cols.is_empty() {
            return Err(Failure::Arg("no columns selected".into()));
        }
        let sub = data.select_columns(&cols)?;
        let hidden = slice(o.hidden, o.hidden_len, "hidden")?.to_vec();
        let arch = NetworkArchitecture::new(cols.len(), hidden, activation(o.activation), data.task())?;
        let estimator = match o.estimator {
            EnnsEstimator::Plain => Estimator::Plain,
            EnnsEstimator::L1Percentile => Estimator::L1(SparsitySpec::uniform(SparsityMode::Percentile, o.sparsity, &arch)),
            EnnsEstimator::L1Lambda => Estimator::L1(SparsitySpec::uniform(SparsityMode::ExplicitLambda, o.sparsity, &arch)),
        };
        let train = TrainOptions {
            learning_rate: o.learning_rate,
            max_epochs: o.epochs,
            patience: o.patience,
            validation_fraction: o.validation_fraction,
            rng_seed: o.seed,
            ..TrainOptions::default()
        };
        let params = estimate::fit_model(&sub, &arch, &estimator, &train)?;
        *out = Box::into_raw(Box::new(EnnsModel(StoredModel {
            architecture: arch,
            selected: cols,
            parameters: params,
        })));
        Ok(())
    })
}

/// Predicts from a full `n × p` row-major design (the model reads its own
/// selected columns). Classification models return probabilities.
///
/// # Safety
/// `model` must be live, `x` readable for `n·p` values, `out` writable for `n` values.
#[no_mangle]
pub unsafe extern "C" fn enns_model_predict(
    model: *const EnnsModel,
    x: *const f64,
    n: usize,
    p: usize,
    out: *mut f64,
) -> EnnsStatus {
    guard(|| {
        non_null(model, "model")?;
        let m = &(*model).0;
        let len = n.checked_mul(p).ok_or_else(|| Failure::Arg("n·p overflows".into()))?;
        let xs = slice(x, len, "x")?;
        if let Some(&j) = m.selected.iter().find(|&&j| j >= p) {
            return Err(Failure::Arg(format!("model reads column {j} but the design has {p}")));
        }
        let view = ArrayView2::from_shape((n, p), xs).map_err(|e| Failure::Arg(e.to_string()))?;
        let pred = nn::predict(&m.parameters, &m.architecture, view.select(Axis(1), &m.selected).view())?;
        if n > 0 {
            non_null(out, "out")?;
            ptr::copy_nonoverlapping(pred.as_ptr(), out, n);
        }
        Ok(())
    })
}

/// Number of input columns the model reads.
///
/// # Safety
/// `model` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn enns_model_input_dim(model: *const EnnsModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.selected.len())
}

/// # Safety
/// `model` must be live and `path` a NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn enns_model_save(model: *const EnnsModel, path: *const c_char) -> EnnsStatus {
    guard(|| {
        non_null(model, "model")?;
        io::save_model(path_arg(path)?, &(*model).0)?;
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated UTF-8 string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn enns_model_load(path: *const c_char, out: *mut *mut EnnsModel) -> EnnsStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let m = io::load_model(path_arg(path)?)?;
        *out = Box::into_raw(Box::new(EnnsModel(m)));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn enns_model_free(model: *mut EnnsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

fn write_f64(out: *mut f64, v: f64) -> FfiResult<()> {
    non_null(out, "out")?;
    // SAFETY: checked non-null.
    unsafe { *out = v };
    Ok(())
}

/// CDF of `|N(mu, sigma²)|` at `x ≥ 0`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn enns_folded_normal_cdf(x: f64, mu: f64, sigma: f64, out: *mut f64) -> EnnsStatus {
    guard(|| write_f64(out, theory::folded_normal_cdf(x, mu, sigma)?))
}

/// `P(X₁ > a, X₂ > b)` for a standard bivariate normal with correlation `rho`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn enns_orthant_prob(a: f64, b: f64, rho: f64, out: *mut f64) -> EnnsStatus {
    guard(|| write_f64(out, theory::orthant_prob(a, b, rho)?))
}

/// Probability that column `j` has the smaller null-model criterion than column `k`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn enns_prob_select_over(beta_j: f64, beta_k: f64, sigma: f64, out: *mut f64) -> EnnsStatus {
    guard(|| write_f64(out, theory::prob_select_over(beta_j, beta_k, sigma)?))
}

/// Probability that the first admitted column lies in the support
/// (the first `s` of the `p` coefficients in `betas`).
///
/// # Safety
/// `betas` must be readable for `p` values and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn enns_prob_first_correct(
    betas: *const f64,
    p: usize,
    s: usize,
    sigma: f64,
    out: *mut f64,
) -> EnnsStatus {
    guard(|| {
        let profile = SignalProfile::new(slice(betas, p, "betas")?.to_vec(), sigma, s)?;
        write_f64(out, theory::prob_first_correct(&profile)?)
    })
}
