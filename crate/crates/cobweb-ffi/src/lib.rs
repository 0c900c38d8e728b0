//! C ABI for the cobweb concept-formation library.
//!
//! Handles are opaque pointers owned by the caller and released with
//! the matching `_free` function. Fallible calls return a
//! [`CobwebStatus`]; on failure a thread-local message is retrievable
//! via `cobweb_last_error` (caller frees it with `cobweb_string_free`,
//! like every other string returned here).
//!
//! Instances cross the boundary as flat JSON objects mapping attribute
//! names to either strings (nominal) or numbers (continuous):
//! `{"color": "red", "size": 2.5}`.
//!
//! The matching declarations live in `include/cobweb.h`, which is
//! maintained by hand and checked against the exported symbols by a
//! test in this crate.

use cobweb_core::conv::ConvCobwebModel;
use cobweb_core::image::{Digit, LabeledImage};
use cobweb_core::instance::{AttributeValue, Instance};
use cobweb_core::models::ModelFile;
use cobweb_core::tree::{CobwebTree, NodeId};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CobwebStatus {
    CobwebOk = 0,
    CobwebNullPointer = 1,
    CobwebInvalidArgument = 2,
    CobwebParseError = 3,
    CobwebModelError = 4,
    CobwebNoPrediction = 5,
    CobwebPanic = 6,
}

use CobwebStatus::*;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let message = message.into();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(message).ok();
    });
}

fn guard(body: impl FnOnce() -> CobwebStatus) -> CobwebStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic in cobweb library".into());
            set_error(msg);
            CobwebPanic
        }
    }
}

/// # Safety
/// `s` must be null or a NUL-terminated string valid for the call.
unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, CobwebStatus> {
    if s.is_null() {
        set_error("null string argument");
        return Err(CobwebNullPointer);
    }
    CStr::from_ptr(s).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8");
        CobwebInvalidArgument
    })
}

fn parse_instance(json: &str) -> Result<Instance, CobwebStatus> {
    let value: serde_json::Value = serde_json::from_str(json).map_err(|e| {
        set_error(format!("malformed instance JSON: {e}"));
        CobwebParseError
    })?;
    let serde_json::Value::Object(map) = value else {
        set_error("instance JSON must be an object");
        return Err(CobwebParseError);
    };
    let mut inst = Instance::new();
    for (name, v) in map {
        let value = match v {
            serde_json::Value::String(s) => AttributeValue::Nominal(s),
            serde_json::Value::Number(n) => match n.as_f64() {
                Some(x) if x.is_finite() => AttributeValue::Continuous(x),
                _ => {
                    set_error(format!("attribute '{name}' is not a finite number"));
                    return Err(CobwebParseError);
                }
            },
            _ => {
                set_error(format!("attribute '{name}' must be a string or a number"));
                return Err(CobwebParseError);
            }
        };
        if inst.insert(&name, value).is_err() {
            set_error(format!("duplicate attribute '{name}'"));
            return Err(CobwebParseError);
        }
    }
    Ok(inst)
}

fn export_string(s: String) -> *mut c_char {
    CString::new(s).map_or(std::ptr::null_mut(), CString::into_raw)
}

/// Last error message for this thread, as a newly allocated string the
/// caller frees with `cobweb_string_free`; null if no error was
/// recorded.
#[no_mangle]
pub extern "C" fn cobweb_last_error() -> *mut c_char {
    LAST_ERROR.with(|slot| match &*slot.borrow() {
        Some(msg) => msg.clone().into_raw(),
        None => std::ptr::null_mut(),
    })
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must be null or a pointer previously returned by this library
/// and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cobweb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ---- concept trees ----

/// New empty tree; `acuity` must be positive. Null on invalid input.
#[no_mangle]
pub extern "C" fn cobweb_tree_new(acuity: f64) -> *mut CobwebTree {
    if !(acuity > 0.0) {
        set_error("acuity must be positive");
        return std::ptr::null_mut();
    }
    Box::into_raw(Box::new(CobwebTree::new(acuity)))
}

/// # Safety
/// `tree` must be null or a live pointer from `cobweb_tree_new` /
/// `cobweb_tree_from_json`, not freed twice.
#[no_mangle]
pub unsafe extern "C" fn cobweb_tree_free(tree: *mut CobwebTree) {
    if !tree.is_null() {
        drop(Box::from_raw(tree));
    }
}

/// Fit one instance; writes the housing leaf id to `out_node`.
///
/// # Safety
/// `tree` and `out_node` must be valid; `instance_json` must be a
/// readable NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cobweb_tree_ifit_json(
    tree: *mut CobwebTree,
    instance_json: *const c_char,
    out_node: *mut u32,
) -> CobwebStatus {
    guard(|| {
        let Some(tree) = tree.as_mut() else {
            set_error("null tree handle");
            return CobwebNullPointer;
        };
        let json = match read_str(instance_json) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let inst = match parse_instance(json) {
            Ok(i) => i,
            Err(status) => return status,
        };
        match tree.ifit(&inst) {
            Ok(node) => {
                if !out_node.is_null() {
                    *out_node = node.value();
                }
                CobwebOk
            }
            Err(e) => {
                set_error(e.to_string());
                CobwebModelError
            }
        }
    })
}

/// Sort an instance without modifying the tree; writes the terminal
/// concept id to `out_node`.
///
/// # Safety
/// As for `cobweb_tree_ifit_json`.
#[no_mangle]
pub unsafe extern "C" fn cobweb_tree_categorize_json(
    tree: *const CobwebTree,
    instance_json: *const c_char,
    out_node: *mut u32,
) -> CobwebStatus {
    guard(|| {
        let Some(tree) = tree.as_ref() else {
            set_error("null tree handle");
            return CobwebNullPointer;
        };
        let json = match read_str(instance_json) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let inst = match parse_instance(json) {
            Ok(i) => i,
            Err(status) => return status,
        };
        match tree.categorize(&inst) {
            Ok(node) => {
                if !out_node.is_null() {
                    *out_node = node.value();
                }
                CobwebOk
            }
            Err(e) => {
                set_error(e.to_string());
                CobwebModelError
            }
        }
    })
}

/// Predict the target attribute. On success writes a newly allocated
/// value string to `out_value` (numeric text for continuous targets);
/// returns `COBWEB_NO_PREDICTION` when the tree has no opinion.
///
/// # Safety
/// As for `cobweb_tree_ifit_json`; `target` must be a readable string
/// and `out_value` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cobweb_tree_predict_json(
    tree: *const CobwebTree,
    instance_json: *const c_char,
    target: *const c_char,
    out_value: *mut *mut c_char,
) -> CobwebStatus {
    guard(|| {
        let Some(tree) = tree.as_ref() else {
            set_error("null tree handle");
            return CobwebNullPointer;
        };
        if out_value.is_null() {
            set_error("null out_value");
            return CobwebNullPointer;
        }
        let json = match read_str(instance_json) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let target = match read_str(target) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let inst = match parse_instance(json) {
            Ok(i) => i,
            Err(status) => return status,
        };
        match tree.predict(&inst, target) {
            Ok(Some(value)) => {
                *out_value = export_string(value.to_string());
                CobwebOk
            }
            Ok(None) => {
                *out_value = std::ptr::null_mut();
                CobwebNoPrediction
            }
            Err(e) => {
                set_error(e.to_string());
                CobwebModelError
            }
        }
    })
}

/// Canonical JSON document for the tree (caller frees).
///
/// # Safety
/// `tree` must be a live tree pointer.
#[no_mangle]
pub unsafe extern "C" fn cobweb_tree_to_json(tree: *const CobwebTree) -> *mut c_char {
    match tree.as_ref() {
        Some(tree) => export_string(tree.to_json_string()),
        None => {
            set_error("null tree handle");
            std::ptr::null_mut()
        }
    }
}

/// Parse a canonical tree document; null plus last-error on failure.
///
/// # Safety
/// `doc` must be a readable NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cobweb_tree_from_json(doc: *const c_char) -> *mut CobwebTree {
    let Ok(doc) = read_str(doc) else {
        return std::ptr::null_mut();
    };
    match CobwebTree::from_json_str(doc) {
        Ok(tree) => Box::into_raw(Box::new(tree)),
        Err(e) => {
            set_error(e.to_string());
            std::ptr::null_mut()
        }
    }
}

/// Number of live concepts.
///
/// # Safety
/// `tree` must be a live tree pointer.
#[no_mangle]
pub unsafe extern "C" fn cobweb_tree_node_count(tree: *const CobwebTree) -> u32 {
    tree.as_ref().map_or(0, |t| t.node_count() as u32)
}

/// Instances fitted so far (the root count).
///
/// # Safety
/// `tree` must be a live tree pointer.
#[no_mangle]
pub unsafe extern "C" fn cobweb_tree_total_instances(tree: *const CobwebTree) -> u64 {
    tree.as_ref().map_or(0, |t| t.total_instances())
}

/// Children of a concept, written into `out_children` (capacity
/// `cap`); returns the child count, or u32::MAX for a stale/unknown id.
///
/// # Safety
/// `tree` must be live; `out_children` must point to `cap` writable
/// u32 slots (or be null when `cap` is 0).
#[no_mangle]
pub unsafe extern "C" fn cobweb_tree_children(
    tree: *const CobwebTree,
    node: u32,
    out_children: *mut u32,
    cap: usize,
) -> u32 {
    let Some(tree) = tree.as_ref() else {
        set_error("null tree handle");
        return u32::MAX;
    };
    match tree.children(NodeId::from_value(node)) {
        Ok(children) => {
            for (i, ch) in children.iter().take(cap).enumerate() {
                *out_children.add(i) = ch.value();
            }
            children.len() as u32
        }
        Err(e) => {
            set_error(e.to_string());
            u32::MAX
        }
    }
}

// ---- convolutional models ----

/// A Convolutional Cobweb model behind the C boundary.
pub struct CobwebConvModel {
    inner: ConvCobwebModel,
}

/// New model for `rows`×`cols` images with k×k filters; null plus
/// last-error on invalid geometry.
#[no_mangle]
pub extern "C" fn cobweb_conv_new(
    rows: usize,
    cols: usize,
    filter_size: usize,
    acuity: f64,
) -> *mut CobwebConvModel {
    if !(acuity > 0.0) {
        set_error("acuity must be positive");
        return std::ptr::null_mut();
    }
    match ConvCobwebModel::new(rows, cols, filter_size, acuity) {
        Ok(inner) => Box::into_raw(Box::new(CobwebConvModel { inner })),
        Err(e) => {
            set_error(e.to_string());
            std::ptr::null_mut()
        }
    }
}

/// # Safety
/// `model` must be null or a live pointer from `cobweb_conv_new` /
/// `cobweb_conv_from_json`, not freed twice.
#[no_mangle]
pub unsafe extern "C" fn cobweb_conv_free(model: *mut CobwebConvModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

unsafe fn read_image(
    model: &ConvCobwebModel,
    pixels: *const f64,
    len: usize,
    label: Option<Digit>,
) -> Result<LabeledImage, CobwebStatus> {
    if pixels.is_null() {
        set_error("null pixel buffer");
        return Err(CobwebNullPointer);
    }
    if len != model.rows() * model.cols() {
        set_error(format!(
            "pixel buffer holds {len} values but the model expects {}",
            model.rows() * model.cols()
        ));
        return Err(CobwebInvalidArgument);
    }
    let slice = std::slice::from_raw_parts(pixels, len);
    if !slice.iter().all(|p| p.is_finite()) {
        set_error("pixel buffer contains non-finite values");
        return Err(CobwebInvalidArgument);
    }
    Ok(LabeledImage::new(
        model.rows(),
        model.cols(),
        slice.to_vec(),
        label,
    ))
}

/// Fit one labeled image; `pixels` is row-major with
/// `rows × cols` entries and `label` is a digit 0–9.
///
/// # Safety
/// `model` must be live; `pixels` must point to `len` readable f64s.
#[no_mangle]
pub unsafe extern "C" fn cobweb_conv_fit_image(
    model: *mut CobwebConvModel,
    pixels: *const f64,
    len: usize,
    label: u8,
) -> CobwebStatus {
    guard(|| {
        let Some(model) = model.as_mut() else {
            set_error("null model handle");
            return CobwebNullPointer;
        };
        let Some(digit) = Digit::new(label) else {
            set_error(format!("label {label} out of range 0-9"));
            return CobwebInvalidArgument;
        };
        let image = match read_image(&model.inner, pixels, len, Some(digit)) {
            Ok(img) => img,
            Err(status) => return status,
        };
        match model.inner.fit_image(&image) {
            Ok(_) => CobwebOk,
            Err(e) => {
                set_error(e.to_string());
                CobwebModelError
            }
        }
    })
}

/// Predict the digit label for an image without modifying the model;
/// writes 0–9 to `out_label`, or returns `COBWEB_NO_PREDICTION`.
///
/// # Safety
/// As for `cobweb_conv_fit_image`; `out_label` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cobweb_conv_predict_image(
    model: *const CobwebConvModel,
    pixels: *const f64,
    len: usize,
    out_label: *mut u8,
) -> CobwebStatus {
    guard(|| {
        let Some(model) = model.as_ref() else {
            set_error("null model handle");
            return CobwebNullPointer;
        };
        let image = match read_image(&model.inner, pixels, len, None) {
            Ok(img) => img,
            Err(status) => return status,
        };
        match model.inner.predict_image(&image) {
            Ok(Some(digit)) => {
                if !out_label.is_null() {
                    *out_label = digit.value();
                }
                CobwebOk
            }
            Ok(None) => CobwebNoPrediction,
            Err(e) => {
                set_error(e.to_string());
                CobwebModelError
            }
        }
    })
}

/// Serialize the model as a single JSON document (caller frees).
///
/// # Safety
/// `model` must be a live model pointer.
#[no_mangle]
pub unsafe extern "C" fn cobweb_conv_to_json(model: *const CobwebConvModel) -> *mut c_char {
    let Some(model) = model.as_ref() else {
        set_error("null model handle");
        return std::ptr::null_mut();
    };
    export_string(cobweb_core::models::conv_model_to_json(&model.inner))
}

/// Parse a serialized convolutional model; null plus last-error on
/// failure (including a cobweb3 document, which has no filter
/// hierarchy).
///
/// # Safety
/// `doc` must be a readable NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cobweb_conv_from_json(doc: *const c_char) -> *mut CobwebConvModel {
    let Ok(doc) = read_str(doc) else {
        return std::ptr::null_mut();
    };
    match ModelFile::from_json_str(doc) {
        Ok(ModelFile::ConvCobweb(inner)) => Box::into_raw(Box::new(CobwebConvModel { inner })),
        Ok(_) => {
            set_error("document is not a convcobweb model");
            std::ptr::null_mut()
        }
        Err(e) => {
            set_error(e.to_string());
            std::ptr::null_mut()
        }
    }
}

/// Filter-hierarchy size, for quick introspection.
///
/// # Safety
/// `model` must be a live model pointer.
#[no_mangle]
pub unsafe extern "C" fn cobweb_conv_filter_count(model: *const CobwebConvModel) -> u32 {
    model
        .as_ref()
        .map_or(0, |m| m.inner.filters().node_count() as u32)
}
