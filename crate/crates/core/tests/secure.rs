use shadownet::netgraph::{
    block_graph, eval_fixed, encode_array, gen_input, gen_weights, parse_graph, BlockKind, BlockTemplate, Profile,
    Variant,
};
use shadownet::ring::RingParams;
use shadownet::secure::{compare, secure_run, ulp_distance};
use shadownet::transport::TransportKind;

const MIXED: &str = r#"{
  "name": "mixed",
  "input_shape": [6, 6, 2],
  "layers": [
    {"name": "c1", "kind": "conv2d", "params": {"out_channels": 4, "kernel": 3, "padding": 1}},
    {"name": "a1", "kind": "relu"},
    {"name": "p1", "kind": "maxpool", "params": {"kernel": 2, "stride": 2}},
    {"name": "dw", "kind": "dwconv2d", "params": {"kernel": 3, "stride": 1, "padding": 1}},
    {"name": "a2", "kind": "leakyrelu"},
    {"name": "a3", "kind": "partial_activation", "params": {"ratio": 0.5, "inner": "relu6"}},
    {"name": "p2", "kind": "avgpool", "params": {"kernel": 3, "stride": 3}},
    {"name": "f", "kind": "flatten"},
    {"name": "fc", "kind": "fullyconnected", "params": {"out_features": 3}}
  ]
}"#;

#[test]
fn mixed_network_matches_oracle_within_budget() {
    let g = parse_graph(MIXED).unwrap();
    let w = gen_weights(&g, 3).unwrap();
    let r = compare(&g, &w, 3, 11, RingParams::default()).unwrap();
    assert!(r.pass, "{r:?}");
    assert!(r.max_float_error < 0.01, "{r:?}");
}

#[test]
fn blocks_match_oracle() {
    let p = RingParams::default();
    for (kind, shape) in [
        (BlockKind::Fire { squeeze: 4, expand1: 4, expand3: 4 }, vec![4, 4, 6]),
        (BlockKind::ShuffleUnit { out_channels: 8, downsample: false }, vec![4, 4, 8]),
        (BlockKind::ShuffleUnit { out_channels: 8, downsample: true }, vec![4, 4, 4]),
        (BlockKind::InvertedResidual { expansion: 2, out_channels: 4, stride: 1 }, vec![4, 4, 4]),
    ] {
        for variant in [Variant::Original, Variant::Crypto] {
            let g = block_graph(&BlockTemplate::new(kind.clone(), variant, Profile::Cifar), shape.clone()).unwrap();
            let w = gen_weights(&g, 5).unwrap();
            let r = compare(&g, &w, 1, 2, p).unwrap();
            assert!(r.pass, "{kind:?} {variant:?}: {r:?}");
        }
    }
}

#[test]
fn output_is_deterministic_and_close() {
    let g = parse_graph(MIXED).unwrap();
    let w = gen_weights(&g, 3).unwrap();
    let x = gen_input(&g.input_shape, 9);
    let p = RingParams::default();
    let a = secure_run(&g, &w, &x, TransportKind::InProcess, 4, p).unwrap();
    let b = secure_run(&g, &w, &x, TransportKind::InProcess, 4, p).unwrap();
    assert_eq!(a.transcript, b.transcript);
    assert_eq!(a.output, b.output);
    let oracle = eval_fixed(&g, &w, &encode_array(&x, &p).unwrap(), &p).unwrap();
    assert_eq!(oracle.shape(), &[3]);
    for (&s, &o) in a.output.data().iter().zip(oracle.data()) {
        assert!(ulp_distance(s, o, 64) <= 8);
    }
    let per_layer: u64 = a.layers.iter().map(|(_, m)| m.rounds).sum();
    assert_eq!(per_layer + 2, a.totals.rounds);
}

#[test]
fn batchnorm_is_refused() {
    let g = parse_graph(
        r#"{"name":"bn","input_shape":[4,4,2],"layers":[
        {"name":"c","kind":"conv2d","params":{"out_channels":2,"kernel":1}},
        {"name":"bn","kind":"batchnorm"}]}"#,
    )
    .unwrap();
    let w = gen_weights(&g, 1).unwrap();
    let x = gen_input(&g.input_shape, 1);
    let e = secure_run(&g, &w, &x, TransportKind::InProcess, 1, RingParams::default()).unwrap_err();
    assert!(e.to_string().contains("folded"), "{e}");
}
