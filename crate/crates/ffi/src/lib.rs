//! C interface to shadownet.
//!
//! Every function returns an [`SnStatus`]. On failure a description is
//! available from [`sn_last_error`] on the same thread until the next call.
//! Objects are opaque handles released with their matching `_free`
//! function; strings returned through `char **` are released with
//! [`sn_string_free`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use shadownet::costmodel::{network_cost, CostParams, CostReport};
use shadownet::netgraph::{gen_weights, parse_graph, rewrite, Array, NetworkGraph, Pass, WeightStore};
use shadownet::ring::RingParams;
use shadownet::secure::secure_run;
use shadownet::transport::TransportKind;
use shadownet::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Validate = 4,
    Io = 5,
    Params = 6,
    Shape = 7,
    Unpriced = 8,
    SelectorMiss = 9,
    MissingWeights = 10,
    Format = 11,
    Protocol = 12,
    Transport = 13,
    BufferTooSmall = 14,
    Panic = 15,
}

/// A parsed, validated network graph.
pub struct SnGraph {
    graph: NetworkGraph,
}

/// A set of named weight tensors.
pub struct SnWeights {
    weights: WeightStore,
}

/// A per-layer cost report.
pub struct SnCostReport {
    report: CostReport,
    json: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(e: &Error) -> SnStatus {
    match e {
        Error::Parse(_) | Error::Json(_) | Error::Cycle { .. } => SnStatus::Parse,
        Error::Validate(_) | Error::Structure(_) => SnStatus::Validate,
        Error::Io(_) => SnStatus::Io,
        Error::Params(_) | Error::Range { .. } => SnStatus::Params,
        Error::Shape(_) => SnStatus::Shape,
        Error::Unpriced { .. } => SnStatus::Unpriced,
        Error::SelectorMiss(_) => SnStatus::SelectorMiss,
        Error::MissingWeights(_) => SnStatus::MissingWeights,
        Error::Format(_) => SnStatus::Format,
        Error::ProtocolMisuse(_) => SnStatus::Protocol,
        Error::Transport { .. } => SnStatus::Transport,
    }
}

struct Fail(SnStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            SnStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            SnStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(SnStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(SnStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref()
        .ok_or_else(|| Fail(SnStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut()
        .ok_or_else(|| Fail(SnStatus::NullPointer, format!("{what} is null")))
}

fn c_string(s: String) -> Result<CString, Fail> {
    CString::new(s).map_err(|_| Fail(SnStatus::Format, "string contains NUL".into()))
}

/// Description of the last failure on this thread; empty after success.
/// The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn sn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub unsafe extern "C" fn sn_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parse a graph from JSON text.
#[no_mangle]
pub unsafe extern "C" fn sn_graph_from_json(json: *const c_char, out: *mut *mut SnGraph) -> SnStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let graph = parse_graph(str_arg(json, "json")?)?;
        *out = Box::into_raw(Box::new(SnGraph { graph }));
        Ok(())
    })
}

/// Read and parse a graph file.
#[no_mangle]
pub unsafe extern "C" fn sn_graph_load(path: *const c_char, out: *mut *mut SnGraph) -> SnStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let text = std::fs::read_to_string(str_arg(path, "path")?).map_err(Error::from)?;
        let graph = parse_graph(&text)?;
        *out = Box::into_raw(Box::new(SnGraph { graph }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sn_graph_free(graph: *mut SnGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

#[no_mangle]
pub unsafe extern "C" fn sn_graph_layer_count(graph: *const SnGraph, out: *mut usize) -> SnStatus {
    guard(|| {
        *out_arg(out, "out")? = ref_arg(graph, "graph")?.graph.layers.len();
        Ok(())
    })
}

/// Serialize a graph to JSON. Free the result with [`sn_string_free`].
#[no_mangle]
pub unsafe extern "C" fn sn_graph_to_json(graph: *const SnGraph, out: *mut *mut c_char) -> SnStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = c_string(ref_arg(graph, "graph")?.graph.to_json())?.into_raw();
        Ok(())
    })
}

/// Apply one rewrite pass such as `pa_replace(second,0.5)`, producing a
/// new graph. A pass that matches nothing yields `SN_STATUS_SELECTOR_MISS`.
#[no_mangle]
pub unsafe extern "C" fn sn_graph_rewrite(
    graph: *const SnGraph,
    pass: *const c_char,
    out: *mut *mut SnGraph,
) -> SnStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let g = &ref_arg(graph, "graph")?.graph;
        let pass = Pass::parse(str_arg(pass, "pass")?)?;
        *out = Box::into_raw(Box::new(SnGraph {
            graph: rewrite(g, &pass)?,
        }));
        Ok(())
    })
}

/// Price every layer with ring width `bits` and comparison field `field`.
#[no_mangle]
pub unsafe extern "C" fn sn_cost_analyze(
    graph: *const SnGraph,
    bits: u32,
    field: u64,
    out: *mut *mut SnCostReport,
) -> SnStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let g = &ref_arg(graph, "graph")?.graph;
        RingParams::new(bits, field, 0)?;
        let report = network_cost(g, &CostParams::new(bits, field))?;
        let json = c_string(report.to_json())?;
        *out = Box::into_raw(Box::new(SnCostReport { report, json }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sn_cost_free(report: *mut SnCostReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

#[no_mangle]
pub unsafe extern "C" fn sn_cost_total_rounds(report: *const SnCostReport, out: *mut u64) -> SnStatus {
    guard(|| {
        *out_arg(out, "out")? = ref_arg(report, "report")?.report.total_rounds;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sn_cost_total_bits(report: *const SnCostReport, out: *mut f64) -> SnStatus {
    guard(|| {
        *out_arg(out, "out")? = ref_arg(report, "report")?.report.total_bits;
        Ok(())
    })
}

/// Total communication in MB (10^6 bytes).
#[no_mangle]
pub unsafe extern "C" fn sn_cost_total_mb(report: *const SnCostReport, out: *mut f64) -> SnStatus {
    guard(|| {
        *out_arg(out, "out")? = ref_arg(report, "report")?.report.total_mb();
        Ok(())
    })
}

/// The report as JSON. The string is owned by the report.
#[no_mangle]
pub unsafe extern "C" fn sn_cost_json(report: *const SnCostReport, out: *mut *const c_char) -> SnStatus {
    guard(|| {
        *out_arg(out, "out")? = ref_arg(report, "report")?.json.as_ptr();
        Ok(())
    })
}

/// Random weights for every parametric layer of `graph`.
#[no_mangle]
pub unsafe extern "C" fn sn_weights_generate(graph: *const SnGraph, seed: u64, out: *mut *mut SnWeights) -> SnStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let weights = gen_weights(&ref_arg(graph, "graph")?.graph, seed)?;
        *out = Box::into_raw(Box::new(SnWeights { weights }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sn_weights_load(path: *const c_char, out: *mut *mut SnWeights) -> SnStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let weights = WeightStore::load(str_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(SnWeights { weights }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sn_weights_save(weights: *const SnWeights, path: *const c_char) -> SnStatus {
    guard(|| {
        ref_arg(weights, "weights")?.weights.save(str_arg(path, "path")?)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sn_weights_free(weights: *mut SnWeights) {
    if !weights.is_null() {
        drop(Box::from_raw(weights));
    }
}

/// Run `graph` securely with all three parties in this process, using the
/// default ring (64 bits, 13 fractional bits).
///
/// `input` holds the graph's input tensor in row-major HWC order. The
/// decoded output is written to `output` (capacity `output_cap`) and its
/// length to `output_len`; if the buffer is too small the call fails with
/// `SN_STATUS_BUFFER_TOO_SMALL` after setting `output_len`. `rounds` and
/// `bytes` receive the measured totals and may be null.
#[no_mangle]
pub unsafe extern "C" fn sn_secure_run(
    graph: *const SnGraph,
    weights: *const SnWeights,
    input: *const f32,
    input_len: usize,
    seed: u64,
    output: *mut f64,
    output_cap: usize,
    output_len: *mut usize,
    rounds: *mut u64,
    bytes: *mut u64,
) -> SnStatus {
    guard(|| {
        let g = &ref_arg(graph, "graph")?.graph;
        let w = &ref_arg(weights, "weights")?.weights;
        let output_len = out_arg(output_len, "output_len")?;
        if input.is_null() {
            return Err(Fail(SnStatus::NullPointer, "input is null".into()));
        }
        let data = std::slice::from_raw_parts(input, input_len).to_vec();
        let x = Array::new(g.input_shape.clone(), data)?;
        w.check_against(g)?;
        let params = RingParams::default();
        let run = secure_run(g, w, &x, TransportKind::InProcess, seed, params)?;
        let values = run.decoded(&params);
        *output_len = values.len();
        if let Some(r) = rounds.as_mut() {
            *r = run.totals.rounds;
        }
        if let Some(b) = bytes.as_mut() {
            *b = run.totals.bytes;
        }
        if values.len() > output_cap || output.is_null() {
            return Err(Fail(
                SnStatus::BufferTooSmall,
                format!("output needs {} values, buffer holds {}", values.len(), output_cap),
            ));
        }
        ptr::copy_nonoverlapping(values.as_ptr(), output, values.len());
        Ok(())
    })
}
