//! C ABI over `harmonic-core`.
//!
//! Every fallible function returns an [`HmStatus`]. On failure the message is
//! kept per thread and read back with [`hm_last_error`]. Models are opaque
//! [`HmModel`] handles released with [`hm_model_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use harmonic_core::data::Line;
use harmonic_core::error::Error;
use harmonic_core::filtersim::{run_case, Band, FilterCase, SimConfig};
use harmonic_core::neural::{build_model, param_count, Model, ModelKind, Shape, Tensor};
use harmonic_core::signal::{self, HarmonicSpectrum, Waveform};
use harmonic_core::train::Checkpoint;
use ndarray::{Array2, Array3};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Shape = 4,
    NonFinite = 5,
    Parse = 6,
    Corrupt = 7,
    Version = 8,
    Io = 9,
    Config = 10,
    Panic = 11,
}

/// Architecture selector for [`hm_model_param_count`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HmModelKind {
    DenseMlp = 0,
    LstmOnly = 1,
    LstmDense = 2,
    GruDense = 3,
    Seq2seq = 4,
}

impl From<HmModelKind> for ModelKind {
    fn from(k: HmModelKind) -> ModelKind {
        match k {
            HmModelKind::DenseMlp => ModelKind::DenseMlp,
            HmModelKind::LstmOnly => ModelKind::LstmOnly,
            HmModelKind::LstmDense => ModelKind::LstmDense,
            HmModelKind::GruDense => ModelKind::GruDense,
            HmModelKind::Seq2seq => ModelKind::Seq2Seq,
        }
    }
}

/// THD percentages of one filter simulation.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HmFilterThd {
    pub pre: f64,
    pub post: f64,
    pub ideal: f64,
}

/// A trained network loaded from a checkpoint.
pub struct HmModel {
    model: Model,
    input_len: usize,
    output_len: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> HmStatus {
    match e {
        Error::Domain(_) => HmStatus::Domain,
        Error::InvalidArgument(_) => HmStatus::InvalidArgument,
        Error::Shape { .. } => HmStatus::Shape,
        Error::NonFinite(_) => HmStatus::NonFinite,
        Error::Schema { .. } | Error::Parse { .. } => HmStatus::Parse,
        Error::Corrupt { .. } => HmStatus::Corrupt,
        Error::Version { .. } => HmStatus::Version,
        Error::Config(_) => HmStatus::Config,
        Error::Io { .. } => HmStatus::Io,
    }
}

enum Fail {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Fail {
        Fail::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> HmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HmStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            HmStatus::NullPointer
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            HmStatus::Panic
        }
    }
}

/// Borrows `len` values; a null pointer is allowed only when `len` is 0.
unsafe fn input<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn hm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// THD in percent of a fundamental magnitude and `count` harmonic
/// magnitudes at the given orders (each ≥ 2, no repeats).
///
/// # Safety
/// `orders` and `magnitudes` must point to `count` values; `out_pct` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn hm_thd(
    fundamental: f64,
    orders: *const u32,
    magnitudes: *const f64,
    count: usize,
    out_pct: *mut f64,
) -> HmStatus {
    guard(|| {
        let orders = input(orders, count, "orders")?;
        let mags = input(magnitudes, count, "magnitudes")?;
        let out = output(out_pct, "out_pct")?;
        let pairs: Vec<(u32, f64)> = orders.iter().copied().zip(mags.iter().copied()).collect();
        *out = signal::thd(&HarmonicSpectrum::from_magnitudes(fundamental, &pairs)?)?;
        Ok(())
    })
}

/// `|actual − predicted| / |actual| · 100`; fails with `Domain` when
/// `actual` is zero.
///
/// # Safety
/// `out_pct` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hm_relative_error(actual: f64, predicted: f64, out_pct: *mut f64) -> HmStatus {
    guard(|| {
        let out = output(out_pct, "out_pct")?;
        *out = signal::relative_error(actual, predicted)?;
        Ok(())
    })
}

/// Magnitudes of orders `1..=max_order` in a window holding a whole number
/// of fundamental cycles. `out_magnitudes[0]` is the fundamental.
///
/// # Safety
/// `samples` must point to `len` values and `out_magnitudes` to `max_order`
/// writable values.
#[no_mangle]
pub unsafe extern "C" fn hm_extract_harmonics(
    samples: *const f64,
    len: usize,
    sample_rate: f64,
    fundamental_freq: f64,
    max_order: u32,
    out_magnitudes: *mut f64,
) -> HmStatus {
    guard(|| {
        let samples = input(samples, len, "samples")?;
        if out_magnitudes.is_null() {
            return Err(Fail::Null("out_magnitudes"));
        }
        let w = Waveform::new(samples.to_vec(), sample_rate, fundamental_freq)?;
        let s = signal::extract_harmonics(&w, max_order)?;
        let out = slice::from_raw_parts_mut(out_magnitudes, max_order as usize);
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = s.magnitude(i as u32 + 1);
        }
        Ok(())
    })
}

/// Trainable parameter count of a full-size architecture.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hm_model_param_count(kind: HmModelKind, out: *mut usize) -> HmStatus {
    guard(|| {
        let out = output(out, "out")?;
        *out = param_count(&build_model(kind.into()))?;
        Ok(())
    })
}

/// Loads a checkpoint file into a new handle stored in `*out`.
///
/// # Safety
/// `path` must be a NUL-terminated UTF-8 string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hm_model_load(path: *const c_char, out: *mut *mut HmModel) -> HmStatus {
    guard(|| {
        if path.is_null() {
            return Err(Fail::Null("path"));
        }
        let slot = output(out, "out")?;
        *slot = ptr::null_mut();
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Error::invalid("path is not valid UTF-8"))?;
        let model = Checkpoint::load(Path::new(path))?.model()?;
        let input_len = match model.spec.input {
            Shape::Flat(f) => f,
            Shape::Seq(t, f) => t * f,
        };
        let output_len = model.predict(&batch_tensor(model.spec.input, &vec![0.0; input_len], 1))?.ncols();
        *slot = Box::into_raw(Box::new(HmModel {
            model,
            input_len,
            output_len,
        }));
        Ok(())
    })
}

/// Values per input sample: features for flat models, steps × features for
/// sequence models.
///
/// # Safety
/// `model` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn hm_model_input_len(model: *const HmModel) -> usize {
    model.as_ref().map_or(0, |m| m.input_len)
}

/// Values per output sample.
///
/// # Safety
/// `model` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn hm_model_output_len(model: *const HmModel) -> usize {
    model.as_ref().map_or(0, |m| m.output_len)
}

fn batch_tensor(shape: Shape, values: &[f64], batch: usize) -> Tensor {
    match shape {
        Shape::Flat(f) => Tensor::Flat(Array2::from_shape_vec((batch, f), values.to_vec()).expect("length checked")),
        // Callers pass sample-major (batch, step, feature); the network runs time-major.
        Shape::Seq(t, f) => Tensor::Seq(Array3::from_shape_fn((t, batch, f), |(s, b, k)| values[(b * t + s) * f + k])),
    }
}

/// Runs inference on `batch` samples laid out sample-major, in the scaled
/// units the model was trained on. Writes `batch · output_len` values.
///
/// # Safety
/// `model` must be a live handle, `input` must hold `batch · input_len`
/// values and `output` must have room for `output_cap` values.
#[no_mangle]
pub unsafe extern "C" fn hm_model_predict(
    model: *const HmModel,
    input: *const f64,
    batch: usize,
    output: *mut f64,
    output_cap: usize,
) -> HmStatus {
    guard(|| {
        let m = model.as_ref().ok_or(Fail::Null("model"))?;
        if batch == 0 {
            return Err(Error::invalid("batch must be >= 1").into());
        }
        let values = self::input(input, batch * m.input_len, "input")?;
        let need = batch * m.output_len;
        if output_cap < need {
            return Err(Error::shape(format!("output capacity >= {need}"), output_cap.to_string()).into());
        }
        if output.is_null() {
            return Err(Fail::Null("output"));
        }
        let pred = m.model.predict(&batch_tensor(m.model.spec.input, values, batch))?;
        let out = slice::from_raw_parts_mut(output, need);
        for (slot, v) in out.iter_mut().zip(pred.iter()) {
            *slot = *v;
        }
        Ok(())
    })
}

/// Releases a handle from [`hm_model_load`]. NULL is ignored.
///
/// # Safety
/// `model` must come from [`hm_model_load`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn hm_model_free(model: *mut HmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Simulates the hysteresis filter on one load with the default
/// simulation settings and a band of `band_fraction` × fundamental.
/// `actual` and `predicted` hold the 3rd, 5th and 7th magnitudes.
///
/// # Safety
/// `actual` and `predicted` must each point to 3 values; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn hm_filter_simulate(
    fundamental: f64,
    actual: *const f64,
    predicted: *const f64,
    band_fraction: f64,
    out: *mut HmFilterThd,
) -> HmStatus {
    guard(|| {
        let a = input(actual, 3, "actual")?;
        let p = input(predicted, 3, "predicted")?;
        let out = output(out, "out")?;
        let case = FilterCase {
            case: 1,
            line: Line::L1,
            fundamental,
            actual: [a[0], a[1], a[2]],
            predicted: [p[0], p[1], p[2]],
        };
        let cfg = SimConfig {
            band: Band::Relative(band_fraction),
            ..SimConfig::default()
        };
        let r = run_case(&case, &cfg)?;
        *out = HmFilterThd {
            pre: r.thd_pre,
            post: r.thd_post,
            ideal: r.thd_ideal,
        };
        Ok(())
    })
}
