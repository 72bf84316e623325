//! C ABI for the volt4d engine.
//!
//! Callers work with opaque handles (`V4dModel`, `V4dDataset`) and status
//! codes; every failing call stores a thread-local message retrievable via
//! [`v4d_last_error_message`]. Panics never cross the boundary. The matching
//! header is generated into `include/volt4d.h` at build time.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use volt4d::error::Error;
use volt4d::layers::checkpoint::{apply_checkpoint, load_checkpoint};
use volt4d::synthgen::{build_dataset, read_dataset, Dataset, DatasetConfig};
use volt4d::tensor::Tensor;
use volt4d::zoo::{build_model, ArchId, Model, ModelConfig};

/// Status code returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum V4dStatus {
    Ok = 0,
    /// A pointer argument was null.
    NullPointer = 1,
    /// An argument value was rejected (bad arch name, bad configuration,
    /// out-of-range geometry, empty input).
    InvalidArgument = 2,
    /// Tensor or buffer dimensions did not match.
    Shape = 3,
    /// Filesystem failure.
    Io = 4,
    /// A file exists but its contents are malformed, corrupt, or of a
    /// foreign version.
    Format = 5,
    /// A numeric invariant broke (non-finite loss, undefined correlation).
    Numeric = 6,
    /// An internal panic was caught at the boundary.
    Panic = 7,
}

fn status_of(err: &Error) -> V4dStatus {
    match err {
        Error::InvalidShape(_) | Error::ShapeMismatch { .. } | Error::InvalidAxis { .. } => {
            V4dStatus::Shape
        }
        Error::Io { .. } => V4dStatus::Io,
        Error::Format { .. } | Error::Checksum { .. } | Error::Version { .. } => V4dStatus::Format,
        Error::EmptyTape | Error::NanLoss { .. } | Error::UndefinedCorrelation => {
            V4dStatus::Numeric
        }
        _ => V4dStatus::InvalidArgument,
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn fail(status: V4dStatus, message: impl std::fmt::Display) -> V4dStatus {
    let text = message.to_string().replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(text).unwrap_or_default();
    });
    status
}

fn fail_with(err: Error) -> V4dStatus {
    let status = status_of(&err);
    fail(status, err)
}

/// Message for the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread. Never null; empty
/// before the first failure.
#[no_mangle]
pub extern "C" fn v4d_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

fn guarded(f: impl FnOnce() -> V4dStatus) -> V4dStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(V4dStatus::Panic, "internal panic caught at the C boundary"),
    }
}

/// # Safety
/// `ptr` must be null or a NUL-terminated string.
unsafe fn required_str<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, V4dStatus> {
    if ptr.is_null() {
        return Err(fail(V4dStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| fail(V4dStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

fn required_out<T>(ptr: *mut T, what: &str) -> Result<(), V4dStatus> {
    if ptr.is_null() {
        Err(fail(V4dStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// models

/// Opaque trained or freshly initialized network.
pub struct V4dModel {
    inner: Model,
}

fn model_config(volume_size: usize, sequence_length: usize) -> ModelConfig {
    ModelConfig {
        volume_size,
        sequence_length,
        ..ModelConfig::desk()
    }
}

/// Build a freshly initialized model. `arch` is one of `2-path-cnn3d`,
/// `n-path-cnn3d`, `cnn4d`, `n-path-cnn4d`, `gru-cnn3d`. On success `*out`
/// owns the model; release it with [`v4d_model_free`].
///
/// # Safety
/// `arch` must be null or NUL-terminated; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn v4d_model_build(
    arch: *const c_char,
    seed: u64,
    volume_size: usize,
    sequence_length: usize,
    out: *mut *mut V4dModel,
) -> V4dStatus {
    guarded(|| {
        if required_out(out, "out").is_err() {
            return V4dStatus::NullPointer;
        }
        let arch_name = match required_str(arch, "arch") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let arch = match ArchId::parse(arch_name) {
            Ok(a) => a,
            Err(e) => return fail_with(e),
        };
        match build_model(arch, &model_config(volume_size, sequence_length), seed) {
            Ok(model) => {
                *out = Box::into_raw(Box::new(V4dModel { inner: model }));
                V4dStatus::Ok
            }
            Err(e) => fail_with(e),
        }
    })
}

/// Build a model from a checkpoint file. The architecture and seed come
/// from the checkpoint; the volume dimensions must match the ones it was
/// trained with.
///
/// # Safety
/// `path` must be null or NUL-terminated; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn v4d_model_load(
    path: *const c_char,
    volume_size: usize,
    sequence_length: usize,
    out: *mut *mut V4dModel,
) -> V4dStatus {
    guarded(|| {
        if required_out(out, "out").is_err() {
            return V4dStatus::NullPointer;
        }
        let path = match required_str(path, "path") {
            Ok(s) => PathBuf::from(s),
            Err(status) => return status,
        };
        let build = || -> volt4d::error::Result<Model> {
            let loaded = load_checkpoint(&path)?;
            let arch = ArchId::parse(&loaded.meta.arch)?;
            let mut model = build_model(
                arch,
                &model_config(volume_size, sequence_length),
                loaded.meta.seed,
            )?;
            apply_checkpoint(&mut model.store, &loaded)?;
            Ok(model)
        };
        match build() {
            Ok(model) => {
                *out = Box::into_raw(Box::new(V4dModel { inner: model }));
                V4dStatus::Ok
            }
            Err(e) => fail_with(e),
        }
    })
}

/// Release a model. Null is a no-op.
///
/// # Safety
/// `model` must be null or a pointer returned by a `v4d_model_*`
/// constructor, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn v4d_model_free(model: *mut V4dModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of trainable scalars.
///
/// # Safety
/// Pointers must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn v4d_model_parameter_count(
    model: *const V4dModel,
    out: *mut u64,
) -> V4dStatus {
    guarded(|| {
        if model.is_null() || required_out(out, "out").is_err() {
            return fail(V4dStatus::NullPointer, "model or out is null");
        }
        *out = (*model).inner.count_parameters() as u64;
        V4dStatus::Ok
    })
}

/// Architecture name, written NUL-terminated into `buf` (capacity
/// `buf_len`).
///
/// # Safety
/// `buf` must point to at least `buf_len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn v4d_model_arch(
    model: *const V4dModel,
    buf: *mut c_char,
    buf_len: usize,
) -> V4dStatus {
    guarded(|| {
        if model.is_null() || buf.is_null() {
            return fail(V4dStatus::NullPointer, "model or buf is null");
        }
        let name = (*model).inner.arch.name();
        if buf_len < name.len() + 1 {
            return fail(
                V4dStatus::InvalidArgument,
                format!("buffer of {buf_len} bytes cannot hold '{name}'"),
            );
        }
        std::ptr::copy_nonoverlapping(name.as_ptr(), buf as *mut u8, name.len());
        *buf.add(name.len()) = 0;
        V4dStatus::Ok
    })
}

/// Run one forward pass. `volumes` holds `sequence_length * volume_size^3`
/// doubles in (time, depth, height, width) order with a single channel;
/// `out_motion` receives 9 doubles: ds_now, ds_plus1, ds_plus2 as
/// (z, y, x) mm triples.
///
/// # Safety
/// `volumes` must point to `volumes_len` readable doubles and `out_motion`
/// to 9 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn v4d_model_predict(
    model: *const V4dModel,
    volumes: *const f64,
    volumes_len: usize,
    out_motion: *mut f64,
) -> V4dStatus {
    guarded(|| {
        if model.is_null() || volumes.is_null() || out_motion.is_null() {
            return fail(V4dStatus::NullPointer, "model, volumes, or out_motion is null");
        }
        let model = &(*model).inner;
        let t = model.config.sequence_length;
        let s = model.config.volume_size;
        let expected = t * s * s * s;
        if volumes_len != expected {
            return fail(
                V4dStatus::Shape,
                format!(
                    "volumes_len {volumes_len} != sequence_length*volume_size^3 = {expected}"
                ),
            );
        }
        let data = std::slice::from_raw_parts(volumes, volumes_len);
        let seq = match Tensor::from_vec(&[t, 1, s, s, s], data.to_vec()) {
            Ok(t) => t,
            Err(e) => return fail_with(e),
        };
        match model.forward(&seq) {
            Ok(pred) => {
                let flat = pred.to_flat();
                std::ptr::copy_nonoverlapping(flat.as_ptr(), out_motion, 9);
                V4dStatus::Ok
            }
            Err(e) => fail_with(e),
        }
    })
}

// ---------------------------------------------------------------------------
// datasets

/// Opaque handle to a generated dataset directory.
pub struct V4dDataset {
    inner: Dataset,
}

/// Shape and split summary of an open dataset.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct V4dDatasetInfo {
    pub rois: u32,
    pub trajectories_per_roi: u32,
    pub volume_size: u64,
    pub sequence_length: u64,
    pub train_rois: u32,
    pub val_rois: u32,
    pub test_rois: u32,
    pub master_seed: u64,
    pub noise_sigma: f64,
}

/// Generate a dataset into `dir` (created if needed).
///
/// # Safety
/// `dir` must be null or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn v4d_generate_dataset(
    dir: *const c_char,
    rois: u32,
    trajectories: u32,
    volume_size: usize,
    val_rois: u32,
    test_rois: u32,
    noise_sigma: f64,
    seed: u64,
) -> V4dStatus {
    guarded(|| {
        let dir = match required_str(dir, "dir") {
            Ok(s) => PathBuf::from(s),
            Err(status) => return status,
        };
        let cfg = DatasetConfig {
            rois,
            trajectories_per_roi: trajectories,
            volume_size,
            sequence_length: volt4d::synthgen::TRAJECTORY_SAMPLES - 2,
            val_rois,
            test_rois,
            noise_sigma,
            master_seed: seed,
        };
        match build_dataset(&cfg, &dir) {
            Ok(_) => V4dStatus::Ok,
            Err(e) => fail_with(e),
        }
    })
}

/// Open a dataset directory. Release with [`v4d_dataset_free`].
///
/// # Safety
/// `dir` must be null or NUL-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn v4d_dataset_open(
    dir: *const c_char,
    out: *mut *mut V4dDataset,
) -> V4dStatus {
    guarded(|| {
        if required_out(out, "out").is_err() {
            return V4dStatus::NullPointer;
        }
        let dir = match required_str(dir, "dir") {
            Ok(s) => PathBuf::from(s),
            Err(status) => return status,
        };
        match read_dataset(&dir) {
            Ok(ds) => {
                *out = Box::into_raw(Box::new(V4dDataset { inner: ds }));
                V4dStatus::Ok
            }
            Err(e) => fail_with(e),
        }
    })
}

/// Release a dataset handle. Null is a no-op.
///
/// # Safety
/// `dataset` must be null or an unfreed pointer from [`v4d_dataset_open`].
#[no_mangle]
pub unsafe extern "C" fn v4d_dataset_free(dataset: *mut V4dDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Fill `info` with the dataset's shape and split counts.
///
/// # Safety
/// Pointers must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn v4d_dataset_info(
    dataset: *const V4dDataset,
    info: *mut V4dDatasetInfo,
) -> V4dStatus {
    guarded(|| {
        if dataset.is_null() || required_out(info, "info").is_err() {
            return fail(V4dStatus::NullPointer, "dataset or info is null");
        }
        let m = (*dataset).inner.manifest();
        *info = V4dDatasetInfo {
            rois: m.rois,
            trajectories_per_roi: m.trajectories_per_roi,
            volume_size: m.volume_size as u64,
            sequence_length: m.sequence_length as u64,
            train_rois: m.train.len() as u32,
            val_rois: m.val.len() as u32,
            test_rois: m.test.len() as u32,
            master_seed: m.master_seed,
            noise_sigma: m.noise_sigma,
        };
        V4dStatus::Ok
    })
}

/// Which split a ROI belongs to: 0 train, 1 val, 2 test.
///
/// # Safety
/// Pointers must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn v4d_dataset_roi_split(
    dataset: *const V4dDataset,
    roi: u32,
    split_out: *mut u32,
) -> V4dStatus {
    guarded(|| {
        if dataset.is_null() || required_out(split_out, "split_out").is_err() {
            return fail(V4dStatus::NullPointer, "dataset or split_out is null");
        }
        let m = (*dataset).inner.manifest();
        let split = if m.train.contains(&roi) {
            0
        } else if m.val.contains(&roi) {
            1
        } else if m.test.contains(&roi) {
            2
        } else {
            return fail(
                V4dStatus::InvalidArgument,
                format!("roi {roi} is out of range (dataset has {})", m.rois),
            );
        };
        *split_out = split;
        V4dStatus::Ok
    })
}

/// Load one sample. `volumes` receives `sequence_length * volume_size^3`
/// doubles (time-major, single channel) and `labels` receives 9 doubles.
///
/// # Safety
/// `volumes` must point to `volumes_len` writable doubles and `labels` to 9
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn v4d_dataset_sample(
    dataset: *const V4dDataset,
    roi: u32,
    trajectory: u32,
    volumes: *mut f64,
    volumes_len: usize,
    labels: *mut f64,
) -> V4dStatus {
    guarded(|| {
        if dataset.is_null() || volumes.is_null() || labels.is_null() {
            return fail(V4dStatus::NullPointer, "dataset, volumes, or labels is null");
        }
        let ds = &(*dataset).inner;
        let sample = match ds.load_sample(roi, trajectory) {
            Ok(s) => s,
            Err(e) => return fail_with(e),
        };
        let data = sample.sequence.data();
        if volumes_len != data.len() {
            return fail(
                V4dStatus::Shape,
                format!("volumes_len {volumes_len} != sample length {}", data.len()),
            );
        }
        std::ptr::copy_nonoverlapping(data.as_ptr(), volumes, data.len());
        let flat = sample.labels.to_flat();
        std::ptr::copy_nonoverlapping(flat.as_ptr(), labels, 9);
        V4dStatus::Ok
    })
}
