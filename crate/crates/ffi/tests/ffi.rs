use std::ffi::{CStr, CString};
use std::ptr;

use shadownet_ffi::*;

const SMALL: &str = r#"{
  "name": "small",
  "input_shape": [6, 6, 2],
  "layers": [
    {"name": "c1", "kind": "conv2d", "params": {"out_channels": 4, "kernel": 3, "padding": 1}},
    {"name": "a1", "kind": "relu"},
    {"name": "p1", "kind": "maxpool", "params": {"kernel": 2, "stride": 2}},
    {"name": "f", "kind": "flatten"},
    {"name": "fc", "kind": "fullyconnected", "params": {"out_features": 3}}
  ]
}"#;

fn last_error() -> String {
    unsafe { CStr::from_ptr(sn_last_error()) }.to_string_lossy().into_owned()
}

fn small() -> *mut SnGraph {
    let json = CString::new(SMALL).unwrap();
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { sn_graph_from_json(json.as_ptr(), &mut g) }, SnStatus::Ok);
    assert!(!g.is_null());
    g
}

#[test]
fn graph_round_trip() {
    unsafe {
        let g = small();
        let mut n = 0;
        assert_eq!(sn_graph_layer_count(g, &mut n), SnStatus::Ok);
        assert_eq!(n, 5);

        let mut text = ptr::null_mut();
        assert_eq!(sn_graph_to_json(g, &mut text), SnStatus::Ok);
        let mut again = ptr::null_mut();
        assert_eq!(sn_graph_from_json(text, &mut again), SnStatus::Ok);
        sn_string_free(text);
        assert_eq!(sn_graph_layer_count(again, &mut n), SnStatus::Ok);
        assert_eq!(n, 5);
        sn_graph_free(again);
        sn_graph_free(g);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut g = ptr::null_mut();
        let bad = CString::new(r#"{"name":"b","input_shape":[4],"layers":[{"name":"a","kind":"nope"}]}"#).unwrap();
        let st = sn_graph_from_json(bad.as_ptr(), &mut g);
        assert!(matches!(st, SnStatus::Parse | SnStatus::Validate), "{st:?}");
        assert!(g.is_null());
        assert!(!last_error().is_empty());

        assert_eq!(sn_graph_from_json(ptr::null(), &mut g), SnStatus::NullPointer);
        let bytes = [0xffu8, 0];
        assert_eq!(sn_graph_from_json(bytes.as_ptr().cast(), &mut g), SnStatus::InvalidUtf8);

        let missing = CString::new("/nonexistent/graph.json").unwrap();
        assert_eq!(sn_graph_load(missing.as_ptr(), &mut g), SnStatus::Io);

        let ok = small();
        assert!(last_error().is_empty());
        let pass = CString::new("maxpool_to_avgpool").unwrap();
        let mut out = ptr::null_mut();
        assert_eq!(sn_graph_rewrite(ok, pass.as_ptr(), &mut out), SnStatus::Ok);
        let pass = CString::new("pa_replace(second,0.5)").unwrap();
        let mut miss = ptr::null_mut();
        assert_eq!(sn_graph_rewrite(out, pass.as_ptr(), &mut miss), SnStatus::SelectorMiss);
        assert!(miss.is_null());
        sn_graph_free(out);
        sn_graph_free(ok);
    }
}

#[test]
fn cost_report() {
    unsafe {
        let path = CString::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../core/graphs/toy.json")).unwrap();
        let mut g = ptr::null_mut();
        assert_eq!(sn_graph_load(path.as_ptr(), &mut g), SnStatus::Ok);
        let mut r = ptr::null_mut();
        assert_eq!(sn_cost_analyze(g, 64, 67, &mut r), SnStatus::Ok);
        let (mut rounds, mut mb, mut bits) = (0u64, 0f64, 0f64);
        assert_eq!(sn_cost_total_rounds(r, &mut rounds), SnStatus::Ok);
        assert_eq!(sn_cost_total_mb(r, &mut mb), SnStatus::Ok);
        assert_eq!(sn_cost_total_bits(r, &mut bits), SnStatus::Ok);
        assert_eq!(rounds, 12);
        assert!((mb - 10.087).abs() < 1e-3, "{mb}");
        assert!((bits / 8e6 - mb).abs() < 1e-9);

        let mut json = ptr::null();
        assert_eq!(sn_cost_json(r, &mut json), SnStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(CStr::from_ptr(json).to_str().unwrap()).unwrap();
        assert!(v.is_object());
        sn_cost_free(r);

        let mut bad = ptr::null_mut();
        assert_eq!(sn_cost_analyze(g, 0, 67, &mut bad), SnStatus::Params);
        sn_graph_free(g);
    }
}

#[test]
fn secure_run_matches_core() {
    unsafe {
        let g = small();
        let mut w = ptr::null_mut();
        assert_eq!(sn_weights_generate(g, 5, &mut w), SnStatus::Ok);

        let dir = tempfile::tempdir().unwrap();
        let file = CString::new(dir.path().join("w.bin").to_str().unwrap()).unwrap();
        assert_eq!(sn_weights_save(w, file.as_ptr()), SnStatus::Ok);
        let mut loaded = ptr::null_mut();
        assert_eq!(sn_weights_load(file.as_ptr(), &mut loaded), SnStatus::Ok);

        let input = shadownet::netgraph::gen_input(&[6, 6, 2], 9);
        let mut out = [0f64; 3];
        let (mut len, mut rounds, mut bytes) = (0usize, 0u64, 0u64);
        let st = sn_secure_run(
            g, loaded, input.data.as_ptr(), input.data.len(), 1,
            out.as_mut_ptr(), out.len(), &mut len, &mut rounds, &mut bytes,
        );
        assert_eq!(st, SnStatus::Ok, "{}", last_error());
        assert_eq!(len, 3);
        assert!(rounds > 0 && bytes > 0);

        let graph = shadownet::netgraph::parse_graph(SMALL).unwrap();
        let weights = shadownet::netgraph::gen_weights(&graph, 5).unwrap();
        let params = shadownet::ring::RingParams::default();
        let want = shadownet::secure::secure_run(
            &graph, &weights, &input, shadownet::transport::TransportKind::InProcess, 1, params,
        )
        .unwrap();
        assert_eq!(want.decoded(&params), out.to_vec());
        assert_eq!(want.totals.rounds, rounds);
        assert_eq!(want.totals.bytes, bytes);

        let mut small_buf = [0f64; 2];
        let st = sn_secure_run(
            g, loaded, input.data.as_ptr(), input.data.len(), 1,
            small_buf.as_mut_ptr(), small_buf.len(), &mut len, ptr::null_mut(), ptr::null_mut(),
        );
        assert_eq!(st, SnStatus::BufferTooSmall);
        assert_eq!(len, 3);

        let st = sn_secure_run(
            g, loaded, input.data.as_ptr(), 5, 1,
            out.as_mut_ptr(), out.len(), &mut len, ptr::null_mut(), ptr::null_mut(),
        );
        assert_eq!(st, SnStatus::Shape, "{}", last_error());

        sn_weights_free(loaded);
        sn_weights_free(w);
        sn_graph_free(g);
    }
}

#[test]
fn version_is_set() {
    let v = unsafe { CStr::from_ptr(sn_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/shadownet.h")).unwrap();
    for name in [
        "typedef struct SnGraph SnGraph",
        "typedef struct SnWeights SnWeights",
        "typedef struct SnCostReport SnCostReport",
        "SN_STATUS_OK = 0",
        "SN_STATUS_SELECTOR_MISS",
        "sn_last_error(void)",
        "sn_graph_from_json(",
        "sn_graph_rewrite(",
        "sn_cost_analyze(",
        "sn_weights_generate(",
        "sn_secure_run(",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}
