//! C ABI over the topicflow library.
//!
//! Handles are opaque and owned by the caller once returned; free them with
//! the matching `*_free`. Every fallible call returns a [`TnStatus`]; on
//! failure [`tn_last_error`] describes it. No panic crosses the boundary.

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use topicflow::graph::{self, GraphError, Partition, WeightedGraph};
use topicflow::pipeline::{self, FailureKind, PipelineConfig};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    GraphError = 3,
    /// Correlation undefined: constant or too short input.
    Undefined = 4,
    PipelineInput = 5,
    PipelineInternal = 6,
    Panic = 7,
}

/// Opaque weighted graph.
pub struct TnGraph(WeightedGraph);

/// Opaque node-to-community assignment.
pub struct TnPartition(Partition);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: TnStatus, msg: impl Into<String>) -> TnStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> TnStatus) -> TnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(TnStatus::Panic, "internal panic"),
    }
}

fn graph_failure(e: GraphError) -> TnStatus {
    fail(TnStatus::GraphError, e.to_string())
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, TnStatus> {
    if p.is_null() {
        return Err(fail(TnStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(TnStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], TnStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(TnStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

macro_rules! try_ffi {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(TnStatus::NullPointer, concat!(stringify!($p), " is null"));
        })+
    };
}

/// Message for the last failure on this thread, or null. Valid until the
/// next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn tn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Static, NUL-terminated library version.
#[no_mangle]
pub extern "C" fn tn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// New empty graph; null only on allocation failure.
#[no_mangle]
pub extern "C" fn tn_graph_new(directed: bool) -> *mut TnGraph {
    let g = if directed { WeightedGraph::directed() } else { WeightedGraph::undirected() };
    Box::into_raw(Box::new(TnGraph(g)))
}

/// # Safety
/// `g` must come from [`tn_graph_new`] and not be freed already; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn tn_graph_free(g: *mut TnGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Adds a node with a unique label and writes its index.
///
/// # Safety
/// `g` must be a live graph, `label` a NUL-terminated string and
/// `out_index` writable.
#[no_mangle]
pub unsafe extern "C" fn tn_graph_add_node(g: *mut TnGraph, label: *const c_char, out_index: *mut usize) -> TnStatus {
    guard(|| {
        non_null!(g, out_index);
        let label = try_ffi!(str_arg(label, "label"));
        match (*g).0.add_node(label) {
            Ok(i) => {
                *out_index = i;
                TnStatus::Ok
            }
            Err(e) => graph_failure(e),
        }
    })
}

/// Adds an edge with a positive finite weight.
///
/// # Safety
/// `g` must be a live graph.
#[no_mangle]
pub unsafe extern "C" fn tn_graph_add_edge(g: *mut TnGraph, u: usize, v: usize, weight: f64) -> TnStatus {
    guard(|| {
        non_null!(g);
        match (*g).0.add_edge(u, v, weight) {
            Ok(()) => TnStatus::Ok,
            Err(e) => graph_failure(e),
        }
    })
}

/// # Safety
/// `g` must be a live graph or null (yields 0).
#[no_mangle]
pub unsafe extern "C" fn tn_graph_node_count(g: *const TnGraph) -> usize {
    g.as_ref().map_or(0, |g| g.0.node_count())
}

/// # Safety
/// `g` must be a live graph or null (yields 0).
#[no_mangle]
pub unsafe extern "C" fn tn_graph_edge_count(g: *const TnGraph) -> usize {
    g.as_ref().map_or(0, |g| g.0.edge_count())
}

/// Modularity of the partition given by `assignment[node] = community`.
///
/// # Safety
/// `g` must be a live graph, `assignment` must hold `len` values and `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn tn_modularity(g: *const TnGraph, assignment: *const usize, len: usize, out: *mut f64) -> TnStatus {
    guard(|| {
        non_null!(g, out);
        let a = try_ffi!(slice_arg(assignment, len, "assignment"));
        match graph::modularity(&(*g).0, &Partition::from_assignment(a)) {
            Ok(q) => {
                *out = q;
                TnStatus::Ok
            }
            Err(e) => graph_failure(e),
        }
    })
}

/// Louvain communities of an undirected graph.
///
/// # Safety
/// `g` must be a live graph and `out` writable; on success `*out` owns a
/// partition to release with [`tn_partition_free`].
#[no_mangle]
pub unsafe extern "C" fn tn_louvain(g: *const TnGraph, seed: u64, out: *mut *mut TnPartition) -> TnStatus {
    guard(|| {
        non_null!(g, out);
        match graph::louvain(&(*g).0, seed) {
            Ok(p) => {
                *out = Box::into_raw(Box::new(TnPartition(p)));
                TnStatus::Ok
            }
            Err(e) => graph_failure(e),
        }
    })
}

/// # Safety
/// `p` must come from [`tn_louvain`] and not be freed already; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn tn_partition_free(p: *mut TnPartition) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// # Safety
/// `p` must be a live partition or null (yields 0).
#[no_mangle]
pub unsafe extern "C" fn tn_partition_len(p: *const TnPartition) -> usize {
    p.as_ref().map_or(0, |p| p.0.len())
}

/// # Safety
/// `p` must be a live partition or null (yields 0).
#[no_mangle]
pub unsafe extern "C" fn tn_partition_community_count(p: *const TnPartition) -> usize {
    p.as_ref().map_or(0, |p| p.0.community_count())
}

/// Community ids are dense, numbered by first appearance.
///
/// # Safety
/// `p` must be a live partition and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tn_partition_community_of(p: *const TnPartition, node: usize, out: *mut usize) -> TnStatus {
    guard(|| {
        non_null!(p, out);
        let p = &(*p).0;
        if node >= p.len() {
            return fail(TnStatus::InvalidArgument, format!("node {node} out of range"));
        }
        *out = p.community_of(node);
        TnStatus::Ok
    })
}

/// Pearson correlation of two length-`n` vectors.
///
/// # Safety
/// `x` and `y` must each hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tn_pearson(x: *const f64, y: *const f64, n: usize, out: *mut f64) -> TnStatus {
    guard(|| {
        non_null!(out);
        let x = try_ffi!(slice_arg(x, n, "x"));
        let y = try_ffi!(slice_arg(y, n, "y"));
        match graph::pearson(x, y) {
            Ok(r) => {
                *out = r;
                TnStatus::Ok
            }
            Err(e) => fail(TnStatus::Undefined, e.to_string()),
        }
    })
}

unsafe fn string_set<'a>(items: *const *const c_char, len: usize, what: &str) -> Result<BTreeSet<&'a str>, TnStatus> {
    slice_arg(items, len, what)?.iter().map(|&s| str_arg(s, what)).collect()
}

/// Jaccard similarity of two string sets; duplicates count once.
///
/// # Safety
/// `a` and `b` must hold `na` and `nb` NUL-terminated strings; `out` must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn tn_jaccard(
    a: *const *const c_char,
    na: usize,
    b: *const *const c_char,
    nb: usize,
    out: *mut f64,
) -> TnStatus {
    guard(|| {
        non_null!(out);
        let a = try_ffi!(string_set(a, na, "a"));
        let b = try_ffi!(string_set(b, nb, "b"));
        *out = graph::jaccard(&a, &b);
        TnStatus::Ok
    })
}

/// Runs the whole pipeline from a JSON configuration and writes the
/// artifact directory path. Partial artifacts stay on failure.
///
/// # Safety
/// `config_json` must be a NUL-terminated string and `out_dir` writable; on
/// success `*out_dir` must be released with [`tn_string_free`].
#[no_mangle]
pub unsafe extern "C" fn tn_run_pipeline(config_json: *const c_char, out_dir: *mut *mut c_char) -> TnStatus {
    guard(|| {
        non_null!(out_dir);
        let text = try_ffi!(str_arg(config_json, "config_json"));
        let cfg = match PipelineConfig::from_json(text) {
            Ok(c) => c,
            Err(e) => return fail(TnStatus::PipelineInput, e.to_string()),
        };
        match pipeline::run_pipeline(&cfg) {
            Ok(outcome) => {
                let path = outcome.dir.to_string_lossy().into_owned();
                match CString::new(path) {
                    Ok(c) => {
                        *out_dir = c.into_raw();
                        TnStatus::Ok
                    }
                    Err(_) => fail(TnStatus::PipelineInternal, "artifact path contains NUL"),
                }
            }
            Err((e, _)) => {
                let status = match e.kind {
                    FailureKind::Input => TnStatus::PipelineInput,
                    FailureKind::Internal => TnStatus::PipelineInternal,
                };
                fail(status, e.to_string())
            }
        }
    })
}

/// # Safety
/// `s` must come from this library and not be freed already; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn tn_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
