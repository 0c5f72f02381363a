use std::path::PathBuf;

use shadownet::costmodel::{network_cost, CostParams};
use shadownet::netgraph::{
    eval_float, fold_batchnorm, gen_input, gen_weights, parse_graph, rewrite, rewrite_all, zoo, FloatTensor, LayerKind,
    NetworkGraph, Pass, Profile, Variant, WeightStore,
};
use shadownet::Error;

fn graphs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("graphs")
}

fn passes(list: &[&str]) -> Vec<Pass> {
    list.iter().map(|s| Pass::parse(s).unwrap()).collect()
}

#[test]
fn shipped_files_match_the_builders() {
    let mut all = zoo::shipped().unwrap();
    all.push(("toy".into(), zoo::toy()));
    assert_eq!(all.len(), 13);
    for (stem, g) in all {
        let path = graphs_dir().join(format!("{stem}.json"));
        let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(text, g.to_json(), "{stem} is stale; rerun the export_zoo example");
        assert_eq!(parse_graph(&text).unwrap(), g);
    }
}

fn same_layers(a: &NetworkGraph, b: &NetworkGraph) {
    assert_eq!(a.layers.len(), b.layers.len(), "{} vs {}", a.name, b.name);
    for (x, y) in a.layers.iter().zip(&b.layers) {
        assert_eq!(x, y);
    }
}

#[test]
fn rewrites_reproduce_crypto_variants() {
    let cases: [(&str, Vec<&str>); 6] = [
        ("mobilenetv2_cifar", vec!["relu6_to_relu", "remove_activation(first)", "pa_replace(second,0.5)"]),
        ("mobilenetv2_mnist", vec!["relu6_to_relu", "remove_activation(first)", "pa_replace(second,0.25)"]),
        ("squeezenet_cifar", vec!["remove_activation(first)", "pa_replace(second,0.5)", "maxpool_to_avgpool"]),
        ("squeezenet_mnist", vec!["remove_activation(second)", "pa_replace(first,0.25)", "maxpool_to_avgpool"]),
        ("shufflenetv2_cifar", vec!["remove_activation(second)", "pa_replace(first,0.5)"]),
        ("shufflenetv2_mnist", vec!["remove_activation(second)", "pa_replace(first,0.25)"]),
    ];
    let shipped: std::collections::HashMap<_, _> = zoo::shipped().unwrap().into_iter().collect();
    for (stem, list) in cases {
        let orig = &shipped[&format!("{stem}.orig")];
        let crypto = &shipped[&format!("{stem}.crypto")];
        same_layers(&rewrite_all(orig, &passes(&list)).unwrap(), crypto);
    }
}

#[test]
fn selector_miss_is_reported() {
    let g = zoo::toy();
    assert!(matches!(
        rewrite(&g, &Pass::parse("relu6_to_relu").unwrap()),
        Err(Error::SelectorMiss(_))
    ));
    assert!(matches!(
        rewrite(&g, &Pass::parse("remove_activation(first)").unwrap()),
        Err(Error::SelectorMiss(_))
    ));
    let r = rewrite(&g, &Pass::parse("pa_replace(name:^relu$,0.5)").unwrap()).unwrap();
    assert!(matches!(r.layers[1].kind, LayerKind::PartialActivation(_)));
    let gone = rewrite(&g, &Pass::parse("pa_replace(all,0)").unwrap()).unwrap();
    assert_eq!(gone.layers.len(), 1);
}

#[test]
fn relu6_to_relu_halves_activation_bits() {
    let g = zoo::mobilenetv2(Variant::Original, Profile::Cifar).unwrap();
    let p = CostParams::new(64, 67);
    let before = network_cost(&g, &p).unwrap();
    let after = network_cost(&rewrite(&g, &Pass::Relu6ToRelu).unwrap(), &p).unwrap();
    assert!((before.activation_bits() - 2.0 * after.activation_bits()).abs() < 1.0);
}

#[test]
fn parse_errors() {
    let cyc = r#"{"name":"c","input_shape":[4],"layers":[
        {"name":"a","kind":"relu","inputs":["b"]},
        {"name":"b","kind":"relu","inputs":["a"]}]}"#;
    assert!(matches!(parse_graph(cyc), Err(Error::Cycle { .. })));
    let unknown = r#"{"name":"u","input_shape":[4],"layers":[{"name":"a","kind":"gelu"}]}"#;
    assert!(matches!(parse_graph(unknown), Err(Error::Validate(_))));
    let dup = r#"{"name":"d","input_shape":[4],"layers":[{"name":"a","kind":"relu"},{"name":"a","kind":"relu"}]}"#;
    assert!(parse_graph(dup).is_err());
    let bad_param = r#"{"name":"p","input_shape":[4,4,1],"layers":[{"name":"a","kind":"conv2d","params":{"kernal":3}}]}"#;
    assert!(parse_graph(bad_param).is_err());
    let mismatch = r#"{"name":"m","input_shape":[4,4,2],"layers":[
        {"name":"a","kind":"conv2d","params":{"out_channels":3,"kernel":1}},
        {"name":"b","kind":"residual_add","inputs":["input","a"]}]}"#;
    assert!(parse_graph(mismatch).is_err());
    assert!(parse_graph("not json").is_err());
}

#[test]
fn folding_batchnorm_preserves_float_outputs() {
    let g = parse_graph(
        r#"{"name":"bn","input_shape":[5,5,3],"layers":[
        {"name":"c","kind":"conv2d","params":{"out_channels":4,"kernel":3,"padding":1}},
        {"name":"bn","kind":"batchnorm"},
        {"name":"r","kind":"relu"},
        {"name":"d","kind":"dwconv2d","params":{"kernel":3,"padding":1,"bias":false}},
        {"name":"bn2","kind":"batchnorm","params":{"eps":0.001}}]}"#,
    )
    .unwrap();
    let w = gen_weights(&g, 4).unwrap();
    let (fg, fw) = fold_batchnorm(&g, &w).unwrap();
    assert_eq!(fg.layers.len(), 3);
    assert!(fg.layers.iter().all(|l| !matches!(l.kind, LayerKind::BatchNorm(_))));
    let x = gen_input(&g.input_shape, 2);
    let x = FloatTensor {
        shape: x.shape.clone(),
        data: x.to_f64(),
    };
    let a = eval_float(&g, &w, &x).unwrap();
    let b = eval_float(&fg, &fw, &x).unwrap();
    assert_eq!(a.shape, b.shape);
    for (u, v) in a.data.iter().zip(&b.data) {
        assert!((u - v).abs() < 1e-4, "{u} vs {v}");
    }
}

#[test]
fn folding_rejects_shared_convolutions() {
    let g = parse_graph(
        r#"{"name":"bn","input_shape":[4,4,2],"layers":[
        {"name":"c","kind":"conv2d","params":{"out_channels":2,"kernel":1}},
        {"name":"bn","kind":"batchnorm"},
        {"name":"add","kind":"residual_add","inputs":["c","bn"]}]}"#,
    )
    .unwrap();
    let w = gen_weights(&g, 1).unwrap();
    assert!(matches!(fold_batchnorm(&g, &w), Err(Error::Structure(_))));
}

#[test]
fn weights_round_trip_and_validate() {
    let g = zoo::toy();
    let w = gen_weights(&g, 7).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.bin");
    w.save(&path).unwrap();
    let back = WeightStore::load(&path).unwrap();
    assert_eq!(back, w);
    back.check_against(&g).unwrap();
    let mut short = back.clone();
    short.remove("conv.bias");
    assert!(matches!(short.check_against(&g), Err(Error::MissingWeights(_))));
    let mut bytes = std::fs::read(&path).unwrap();
    bytes[0] = b'X';
    assert!(WeightStore::from_bytes(&bytes).is_err());
    assert!(WeightStore::from_bytes(&bytes[..10]).is_err());
}

#[test]
fn crypto_variants_keep_output_shapes() {
    for (stem, g) in zoo::shipped().unwrap() {
        assert_eq!(g.output_shape().unwrap(), vec![10], "{stem}");
    }
}
