use shadownet::costmodel::{
    activation_cost, conv_cost, drelu_cost, leaky_relu_cost, maxpool_cost, network_cost, partial_activation_cost,
    relu6_cost, relu_cost, scalar_matmul_cost, CostParams, Phase,
};
use shadownet::netgraph::{parse_graph, zoo, Profile, Variant};
use shadownet::protocols::ActivationKind;
use shadownet::Error;

fn p() -> CostParams {
    CostParams::new(64, 67)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

#[test]
fn conv_example() {
    let c = conv_cost(32, 3, 3, 16, &p());
    assert_eq!(c.rounds, 2);
    assert_eq!(c.bits, 4_642_816.0);
    assert!(close(c.mb(&p()), 0.580352));
}

#[test]
fn relu_example() {
    let r = relu_cost(32 * 32 * 16, &p());
    assert_eq!(r.rounds, 10);
    assert!((r.mb(&p()) - 9.50648).abs() < 1e-4);
    let c = conv_cost(32, 3, 3, 16, &p());
    assert_eq!(r.rounds, 5 * c.rounds);
    assert!((r.bits / c.bits - 16.38).abs() < 0.01);
}

#[test]
fn maxpool_example() {
    let m = maxpool_cost(768, 2, &p());
    assert_eq!(m.rounds, 27);
    assert!((m.mb(&p()) - 1.429).abs() < 1e-3);
    assert_eq!(maxpool_cost(768, 1, &p()).rounds, 0);
}

#[test]
fn activation_identities() {
    for n in [1, 7, 16384, 100_000] {
        let r = relu_cost(n, &p());
        assert_eq!(relu6_cost(n, &p()).bits, 2.0 * r.bits);
        assert_eq!(relu6_cost(n, &p()).rounds, 2 * r.rounds);
        assert_eq!(leaky_relu_cost(n, &p()).bits, r.bits);
        assert_eq!(leaky_relu_cost(n, &p()).rounds, r.rounds);
        let d = drelu_cost(n, &p());
        let m = scalar_matmul_cost(&p());
        assert_eq!(r.rounds, d.rounds + m.rounds);
        assert!(close(r.bits, d.bits + n as f64 * m.bits));
    }
    assert_eq!(activation_cost(ActivationKind::None, 10, &p()).bits, 0.0);
}

#[test]
fn partial_activation_scales_with_activated_channels() {
    let full = relu_cost(1000, &p());
    let half = partial_activation_cost(1000, 10, 0.5, ActivationKind::Relu, &p());
    assert_eq!(half.rounds, full.rounds);
    assert!(close(half.bits, full.bits / 2.0));
    let q = partial_activation_cost(1000, 10, 0.25, ActivationKind::Relu, &p());
    assert!(close(q.bits, full.bits * 3.0 / 10.0));
    let none = partial_activation_cost(1000, 10, 0.0, ActivationKind::Relu, &p());
    assert_eq!((none.rounds, none.bits, none.phase), (0, 0.0, Phase::Local));
}

#[test]
fn toy_network_totals() {
    let r = network_cost(&zoo::toy(), &p()).unwrap();
    assert_eq!(r.total_rounds, 12);
    assert!((r.total_mb() - 10.08).abs() < 0.01);
    assert!(r.to_text().contains("total: 12 rounds, 10.087 MB"));
    let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
    assert_eq!(json["total_rounds"], 12);
    assert!((json["total_mb"].as_f64().unwrap() - r.total_mb()).abs() < 1e-12);
}

#[test]
fn ring_width_scales_linear_costs() {
    let a = conv_cost(8, 3, 4, 4, &CostParams::new(32, 67));
    let b = conv_cost(8, 3, 4, 4, &CostParams::new(64, 67));
    assert!(close(2.0 * a.bits, b.bits));
}

#[test]
fn crypto_variants_are_cheaper() {
    type B = fn(Variant, Profile) -> shadownet::Result<shadownet::netgraph::NetworkGraph>;
    let builders: [B; 3] = [zoo::squeezenet, zoo::shufflenetv2, zoo::mobilenetv2];
    for b in builders {
        for profile in [Profile::Cifar, Profile::Mnist] {
            let o = network_cost(&b(Variant::Original, profile).unwrap(), &p()).unwrap();
            let c = network_cost(&b(Variant::Crypto, profile).unwrap(), &p()).unwrap();
            assert!(c.total_rounds < o.total_rounds, "{}", o.graph);
            assert!(c.total_bits < o.total_bits, "{}", o.graph);
        }
    }
}

#[test]
fn mobilenet_reference_totals() {
    let o = network_cost(&zoo::mobilenetv2(Variant::Original, Profile::Cifar).unwrap(), &p()).unwrap();
    let c = network_cost(&zoo::mobilenetv2(Variant::Crypto, Profile::Cifar).unwrap(), &p()).unwrap();
    assert_eq!((o.total_rounds, c.total_rounds), (806, 296));
    assert!((o.total_mb() - 1898.8).abs() < 0.1);
    assert!((c.total_mb() - 376.0).abs() < 0.1);
}

#[test]
fn batchnorm_is_unpriced_and_depthwise_is_flagged() {
    let g = parse_graph(
        r#"{"name":"bn","input_shape":[4,4,2],"layers":[
        {"name":"d","kind":"dwconv2d","params":{"kernel":3,"padding":1}},
        {"name":"bn","kind":"batchnorm"}]}"#,
    )
    .unwrap();
    assert!(matches!(network_cost(&g, &p()), Err(Error::Unpriced { .. })));
    let mut g2 = g.clone();
    g2.layers.pop();
    let r = network_cost(&g2, &p()).unwrap();
    assert!(r.layers[0].note.is_some());
    assert!(close(r.layers[0].bits, 2.0 * conv_cost(4, 3, 1, 1, &p()).bits));
}
