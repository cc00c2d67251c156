//! C ABI over `cow_centerline`.
//!
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `*_free` function. Every fallible call returns a [`CowStatus`];
//! on failure [`cow_last_error_message`] describes what went wrong on the
//! calling thread. Strings returned through out-parameters are freed with
//! [`cow_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use cow_centerline::morphometry::solve_bifurcation_exponent;
use cow_centerline::pipeline::export::{feature_json, node_json, variant_json};
use cow_centerline::pipeline::{load_mask, process_mask, write_bundle, CaseResult, PipelineConfig, PipelineError};
use cow_centerline::volume_io::{Grid, LabeledMask, Volume};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CowStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ParseError = 3,
    StageError = 4,
    IoError = 5,
    Panic = 6,
}

/// A labeled segmentation mask.
pub struct CowVolume(LabeledMask);

/// A processed case: centerline graph, nodes, variants and features.
pub struct CowGraph(CaseResult);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = s);
}

fn fail(status: CowStatus, msg: impl Into<String>) -> CowStatus {
    set_error(msg);
    status
}

fn pipeline_status(e: PipelineError) -> CowStatus {
    let status = match e {
        PipelineError::Parse(_) => CowStatus::ParseError,
        PipelineError::Config(_) => CowStatus::InvalidArgument,
        PipelineError::Stage { .. } => CowStatus::StageError,
        PipelineError::Io { .. } => CowStatus::IoError,
    };
    fail(status, e.to_string())
}

/// Run `f`, turning a panic into `CowStatus::Panic`.
fn guard(f: impl FnOnce() -> CowStatus) -> CowStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(CowStatus::Panic, format!("internal error: {msg}"))
        }
    }
}

/// # Safety
/// `s` is null or a NUL-terminated string.
unsafe fn str_arg<'a>(s: *const c_char, what: &str) -> Result<&'a str, CowStatus> {
    if s.is_null() {
        return Err(fail(CowStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(CowStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// # Safety
/// `out` is null or valid for a write of one `T`.
unsafe fn put<T>(out: *mut T, value: T) -> CowStatus {
    if out.is_null() {
        return fail(CowStatus::NullPointer, "output pointer is null");
    }
    out.write(value);
    CowStatus::Ok
}

fn string_out(v: &serde_json::Value) -> *mut c_char {
    CString::new(v.to_string()).map_or(ptr::null_mut(), CString::into_raw)
}

/// Message for the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cow_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn cow_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Read a NIfTI-1 label mask.
///
/// # Safety
/// `path` is a NUL-terminated string; `out` is valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn cow_volume_read_nifti(path: *const c_char, out: *mut *mut CowVolume) -> CowStatus {
    guard(|| {
        let path = match str_arg(path, "path") {
            Ok(p) => PathBuf::from(p),
            Err(s) => return s,
        };
        match load_mask(&path) {
            Ok(m) => put(out, Box::into_raw(Box::new(CowVolume(m)))),
            Err(e) => pipeline_status(e),
        }
    })
}

/// Build a mask from x-fastest label codes.
///
/// # Safety
/// `dims` and `spacing` point to 3 values each; `labels` points to `len`
/// bytes; `out` is valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn cow_volume_from_labels(
    dims: *const usize,
    spacing: *const f64,
    labels: *const u8,
    len: usize,
    out: *mut *mut CowVolume,
) -> CowStatus {
    guard(|| {
        if dims.is_null() || spacing.is_null() || labels.is_null() {
            return fail(CowStatus::NullPointer, "dims, spacing and labels must be non-null");
        }
        let d = [*dims, *dims.add(1), *dims.add(2)];
        let s = [*spacing, *spacing.add(1), *spacing.add(2)];
        let grid = Grid::new(d, s);
        if let Err(e) = grid.validate() {
            return fail(CowStatus::InvalidArgument, e.to_string());
        }
        let data = std::slice::from_raw_parts(labels, len).to_vec();
        let mask = Volume::new(grid, data).and_then(LabeledMask::new);
        match mask {
            Ok(m) => put(out, Box::into_raw(Box::new(CowVolume(m)))),
            Err(e) => fail(CowStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Grid dimensions of a mask.
///
/// # Safety
/// `v` is a live handle; `dims` is valid for 3 writes.
#[no_mangle]
pub unsafe extern "C" fn cow_volume_dims(v: *const CowVolume, dims: *mut usize) -> CowStatus {
    guard(|| {
        let Some(v) = v.as_ref() else {
            return fail(CowStatus::NullPointer, "volume is null");
        };
        if dims.is_null() {
            return fail(CowStatus::NullPointer, "dims is null");
        }
        for (i, d) in v.0.grid().dims.iter().enumerate() {
            dims.add(i).write(*d);
        }
        CowStatus::Ok
    })
}

/// # Safety
/// `v` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cow_volume_free(v: *mut CowVolume) {
    if !v.is_null() {
        drop(Box::from_raw(v));
    }
}

/// Run the full pipeline on a mask. `config_toml` may be null for the
/// defaults.
///
/// # Safety
/// `v` is a live handle; `config_toml` is null or NUL-terminated; `out` is
/// valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn cow_pipeline_run(
    v: *const CowVolume,
    config_toml: *const c_char,
    out: *mut *mut CowGraph,
) -> CowStatus {
    guard(|| {
        let Some(v) = v.as_ref() else {
            return fail(CowStatus::NullPointer, "volume is null");
        };
        let cfg = if config_toml.is_null() {
            PipelineConfig::default()
        } else {
            let text = match str_arg(config_toml, "config") {
                Ok(t) => t,
                Err(s) => return s,
            };
            match PipelineConfig::from_toml(text) {
                Ok(c) => c,
                Err(e) => return fail(CowStatus::InvalidArgument, format!("config: {e}")),
            }
        };
        match process_mask(&v.0, None, &cfg) {
            Ok(r) => put(out, Box::into_raw(Box::new(CowGraph(r)))),
            Err(e) => pipeline_status(e),
        }
    })
}

/// # Safety
/// `g` is a live handle; `out` is valid for one write.
#[no_mangle]
pub unsafe extern "C" fn cow_graph_node_count(g: *const CowGraph, out: *mut usize) -> CowStatus {
    guard(|| match g.as_ref() {
        Some(g) => put(out, g.0.graph.nodes.len()),
        None => fail(CowStatus::NullPointer, "graph is null"),
    })
}

/// # Safety
/// `g` is a live handle; `out` is valid for one write.
#[no_mangle]
pub unsafe extern "C" fn cow_graph_edge_count(g: *const CowGraph, out: *mut usize) -> CowStatus {
    guard(|| match g.as_ref() {
        Some(g) => put(out, g.0.graph.edges.len()),
        None => fail(CowStatus::NullPointer, "graph is null"),
    })
}

/// Segment label of edge `index`.
///
/// # Safety
/// `g` is a live handle; `out` is valid for one write.
#[no_mangle]
pub unsafe extern "C" fn cow_graph_edge_label(g: *const CowGraph, index: usize, out: *mut u8) -> CowStatus {
    guard(|| {
        let Some(g) = g.as_ref() else {
            return fail(CowStatus::NullPointer, "graph is null");
        };
        match g.0.graph.edges.get(index) {
            Some(e) => put(out, e.label),
            None => fail(CowStatus::InvalidArgument, format!("edge {index} out of range")),
        }
    })
}

/// nodes.json, variants.json or features.json content of a result.
///
/// # Safety
/// `g` is a live handle; `out` is valid for one pointer write.
unsafe fn json_out(g: *const CowGraph, out: *mut *mut c_char, f: impl FnOnce(&CaseResult) -> serde_json::Value) -> CowStatus {
    guard(|| {
        let Some(g) = g.as_ref() else {
            return fail(CowStatus::NullPointer, "graph is null");
        };
        put(out, string_out(&f(&g.0)))
    })
}

/// # Safety
/// See [`cow_graph_edge_count`]; free the string with [`cow_string_free`].
#[no_mangle]
pub unsafe extern "C" fn cow_graph_nodes_json(g: *const CowGraph, out: *mut *mut c_char) -> CowStatus {
    json_out(g, out, |r| node_json(&r.nodes.nodes))
}

/// # Safety
/// See [`cow_graph_edge_count`]; free the string with [`cow_string_free`].
#[no_mangle]
pub unsafe extern "C" fn cow_graph_variants_json(g: *const CowGraph, out: *mut *mut c_char) -> CowStatus {
    json_out(g, out, |r| variant_json(&r.variants))
}

/// # Safety
/// See [`cow_graph_edge_count`]; free the string with [`cow_string_free`].
#[no_mangle]
pub unsafe extern "C" fn cow_graph_features_json(g: *const CowGraph, out: *mut *mut c_char) -> CowStatus {
    json_out(g, out, |r| feature_json(&r.features))
}

/// Write graph.vtk, nodes.json, variants.json, features.json and
/// skeleton.nii into `dir`, creating it if needed.
///
/// # Safety
/// `g` is a live handle; `dir` is NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn cow_graph_write_bundle(g: *const CowGraph, dir: *const c_char) -> CowStatus {
    guard(|| {
        let Some(g) = g.as_ref() else {
            return fail(CowStatus::NullPointer, "graph is null");
        };
        let dir = match str_arg(dir, "dir") {
            Ok(d) => PathBuf::from(d),
            Err(s) => return s,
        };
        match write_bundle(&g.0, &dir) {
            Ok(()) => CowStatus::Ok,
            Err(e) => pipeline_status(e),
        }
    })
}

/// # Safety
/// `g` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cow_graph_free(g: *mut CowGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// # Safety
/// `s` is null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cow_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Exponent x with r_p^x = r_c1^x + r_c2^x.
///
/// # Safety
/// `out` is valid for one write.
#[no_mangle]
pub unsafe extern "C" fn cow_bifurcation_exponent(r_p: f64, r_c1: f64, r_c2: f64, out: *mut f64) -> CowStatus {
    guard(|| match solve_bifurcation_exponent(r_p, r_c1, r_c2) {
        Ok(x) => put(out, x),
        Err(e) => fail(CowStatus::InvalidArgument, e.to_string()),
    })
}
