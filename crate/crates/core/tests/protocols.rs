mod common;

use common::*;
use shadownet::netgraph::{encode_array, eval_fixed, gen_input, gen_weights, parse_graph};
use shadownet::protocols::{
    avgpool, global_avgpool, open, pi_conv2d, pi_drelu, pi_dwconv2d, pi_fully_connected, pi_leaky_relu, pi_matmul,
    pi_maxpool, pi_mul, pi_partial_activation, pi_relu, pi_relu6, reveal_to, share_inputs, ActivationKind,
    PartialActivationSpec, Secret,
};
use shadownet::ring::{encode_fixed, Prg, RingParams};
use shadownet::transport::{measured_cost, open_session, PartyId, TransportKind};

fn p64() -> RingParams {
    RingParams::default()
}

#[test]
fn matmul_and_mul_are_exact_in_the_ring() {
    let p = p64();
    let mut rng = Prg::from_u64(1);
    let a = rng.ring_tensor(64, vec![3, 5]);
    let b = rng.ring_tensor(64, vec![5, 2]);
    let c = rng.ring_tensor(64, vec![3, 5]);
    let s = sim(p, 2, &[a.clone(), b.clone(), c.clone()], |s, x| {
        Ok(vec![pi_matmul(s, &x[0], &x[1])?, pi_mul(s, &x[0], &x[2])?])
    });
    assert_eq!(s.outputs[0], a.matmul(&b).unwrap());
    assert_eq!(s.outputs[1], a.mul(&c).unwrap());
    assert_eq!(s.rounds, 4);
}

#[test]
fn matmul_shape_mismatch_is_an_error() {
    let a = tensor(64, vec![2, 3], vec![0; 6]);
    let r = shadownet::protocols::simulate(TransportKind::InProcess, 1, p64(), &[a.clone(), a], |s, x| {
        Ok(vec![pi_matmul(s, &x[0], &x[1])?])
    });
    assert!(r.is_err());
}

#[test]
fn round_counts() {
    let p = p64();
    let x = tensor(64, vec![4, 4, 4], random_fixed(64, 8.0, &p, 3));
    let rounds = |f: &(dyn Fn(&mut shadownet::transport::Session, &Secret) -> shadownet::Result<Secret> + Sync)| {
        sim(p, 1, &[x.clone()], |s, i| Ok(vec![f(s, &i[0])?])).rounds
    };
    assert_eq!(rounds(&|s, a| pi_drelu(s, a)), 2);
    assert_eq!(rounds(&|s, a| pi_relu(s, a)), 4);
    assert_eq!(rounds(&|s, a| pi_relu6(s, a)), 8);
    assert_eq!(rounds(&|s, a| pi_leaky_relu(s, a)), 4);
    assert_eq!(rounds(&|s, a| pi_maxpool(s, a, 2, 2)), 12);
    let spec = PartialActivationSpec::new(0.5, ActivationKind::Relu).unwrap();
    assert_eq!(rounds(&|s, a| pi_partial_activation(s, a, &spec)), 4);
}

#[test]
fn leaky_relu_within_one_ulp() {
    let p = p64();
    let vals = random_fixed(2000, 100.0, &p, 8);
    let x = tensor(64, vec![vals.len()], vals.clone());
    let s = sim(p, 4, &[x], |s, i| Ok(vec![pi_leaky_relu(s, &i[0])?]));
    for (v, got) in vals.iter().zip(s.outputs[0].data()) {
        let want = leaky_ref(*v, &p);
        assert!((signed(*got, 64) - want).abs() <= 1, "{v}");
    }
}

#[test]
fn relu6_matches_clamp() {
    let p = p64();
    let vals = random_fixed(2000, 12.0, &p, 5);
    let x = tensor(64, vec![vals.len()], vals.clone());
    let s = sim(p, 4, &[x], |s, i| Ok(vec![pi_relu6(s, &i[0])?]));
    let want: Vec<u64> = vals.iter().map(|&v| relu6_ref(v, &p)).collect();
    assert_eq!(s.outputs[0].data(), &want[..]);
}

#[test]
fn maxpool_matches_window_max() {
    let p = p64();
    let vals = random_fixed(6 * 6 * 3, 50.0, &p, 6);
    let x = tensor(64, vec![6, 6, 3], vals.clone());
    let s = sim(p, 2, &[x], |s, i| Ok(vec![pi_maxpool(s, &i[0], 3, 3)?]));
    assert_eq!(s.outputs[0].shape(), &[2, 2, 3]);
    for oy in 0..2 {
        for ox in 0..2 {
            for c in 0..3 {
                let mut m = i64::MIN;
                for ky in 0..3 {
                    for kx in 0..3 {
                        m = m.max(signed(vals[((oy * 3 + ky) * 6 + ox * 3 + kx) * 3 + c], 64));
                    }
                }
                assert_eq!(signed(s.outputs[0].data()[(oy * 2 + ox) * 3 + c], 64), m);
            }
        }
    }
    assert_eq!(s.rounds, 4 * 8);
}

#[test]
fn partial_activation_touches_leading_channels_only() {
    let p = p64();
    let vals = random_fixed(5 * 8, 4.0, &p, 10);
    let x = tensor(64, vec![5, 8], vals.clone());
    for ratio in [0.0, 0.3, 0.5, 1.0] {
        let spec = PartialActivationSpec::new(ratio, ActivationKind::Relu6).unwrap();
        let k = spec.activated(8);
        let s = sim(p, 1, &[x.clone()], |s, i| Ok(vec![pi_partial_activation(s, &i[0], &spec)?]));
        for (i, (&v, &got)) in vals.iter().zip(s.outputs[0].data()).enumerate() {
            let want = if i % 8 < k { relu6_ref(v, &p) } else { v };
            assert_eq!(got, want, "ratio {ratio} index {i}");
        }
        assert_eq!(s.rounds, if k == 0 { 0 } else { 8 });
    }
    assert!(PartialActivationSpec::new(1.5, ActivationKind::Relu).is_err());
}

fn single_layer(kind: &str, params: &str, shape: &str) -> shadownet::netgraph::NetworkGraph {
    parse_graph(&format!(
        r#"{{"name":"one","input_shape":{shape},"layers":[{{"name":"l","kind":"{kind}","params":{params}}}]}}"#
    ))
    .unwrap()
}

fn against_oracle(g: &shadownet::netgraph::NetworkGraph) {
    let p = p64();
    let w = gen_weights(g, 17).unwrap();
    let x = encode_array(&gen_input(&g.input_shape, 3), &p).unwrap();
    let want = eval_fixed(g, &w, &x, &p).unwrap();
    let mut inputs = vec![x];
    let mut names = Vec::new();
    for (k, a) in w.entries() {
        names.push(k.clone());
        inputs.push(encode_array(a, &p).unwrap());
    }
    let kind = g.layers[0].kind.clone();
    let s = sim(p, 5, &inputs, |s, i| {
        let get = |suffix: &str| names.iter().position(|n| n.ends_with(suffix)).map(|j| &i[j + 1]);
        let out = match &kind {
            shadownet::netgraph::LayerKind::Conv2d(c) => {
                pi_conv2d(s, &i[0], get(".kernel").unwrap(), get(".bias"), c.stride, c.padding)?
            }
            shadownet::netgraph::LayerKind::DwConv2d(c) => {
                pi_dwconv2d(s, &i[0], get(".kernel").unwrap(), get(".bias"), c.stride, c.padding)?
            }
            shadownet::netgraph::LayerKind::FullyConnected(_) => {
                pi_fully_connected(s, &i[0], get(".kernel").unwrap(), get(".bias"))?
            }
            shadownet::netgraph::LayerKind::AvgPool(a) => avgpool(&i[0], a.kernel, a.stride, s.params())?,
            shadownet::netgraph::LayerKind::GlobalAvgPool => global_avgpool(&i[0], s.params())?,
            k => panic!("unexpected {k:?}"),
        };
        Ok(vec![out])
    });
    assert_eq!(s.outputs[0].shape(), want.shape());
    for (&a, &b) in s.outputs[0].data().iter().zip(want.data()) {
        assert!(ulp_diff(a, b, 64) <= 1, "{}: {} vs {}", g.layers[0].kind.name(), a, b);
    }
    let linear = matches!(
        kind,
        shadownet::netgraph::LayerKind::Conv2d(_)
            | shadownet::netgraph::LayerKind::DwConv2d(_)
            | shadownet::netgraph::LayerKind::FullyConnected(_)
    );
    assert_eq!(s.rounds, if linear { 2 } else { 0 });
}

#[test]
fn linear_layers_match_oracle() {
    against_oracle(&single_layer("conv2d", r#"{"out_channels":5,"kernel":3,"stride":2,"padding":1}"#, "[7,7,3]"));
    against_oracle(&single_layer("conv2d", r#"{"out_channels":4,"kernel":1,"bias":false}"#, "[4,4,6]"));
    against_oracle(&single_layer("dwconv2d", r#"{"kernel":3,"stride":1,"padding":1}"#, "[5,5,4]"));
    against_oracle(&single_layer("fullyconnected", r#"{"out_features":7}"#, "[12]"));
    against_oracle(&single_layer("avgpool", r#"{"kernel":2,"stride":2}"#, "[4,4,3]"));
    against_oracle(&single_layer("globalavgpool", "{}", "[3,3,2]"));
}

#[test]
fn sharing_and_revealing() {
    let p = p64();
    let v = tensor(64, vec![3], vec![encode_fixed(1.5, &p).unwrap(), 7, 9]);
    let mut c = open_session(TransportKind::InProcess, 1, p).unwrap();
    let outs = c
        .run(|s| {
            let mine = (s.id() == PartyId::P1).then_some(&v);
            let x = share_inputs(s, &[(PartyId::P1, vec![3], mine)], "input-share")?.remove(0);
            let to_p0 = reveal_to(s, &x, PartyId::P0, "output")?;
            let both = open(s, &x, "output")?;
            Ok((to_p0, both))
        })
        .unwrap();
    assert_eq!(outs[0].0.as_ref(), Some(&v));
    assert!(outs[1].0.is_none() && outs[2].0.is_none());
    assert_eq!(outs[0].1.as_ref(), Some(&v));
    assert_eq!(outs[1].1.as_ref(), Some(&v));
    let t = c.transcript();
    assert_eq!(measured_cost(&t, Some("input-share")).rounds, 1);
    assert_eq!(measured_cost(&t, Some("output")).rounds, 2);
}

#[test]
fn p2_never_receives_value_shares() {
    let p = p64();
    let x = tensor(64, vec![16], random_fixed(16, 3.0, &p, 1));
    let s = sim(p, 1, &[x.clone(), x], |s, i| {
        let a = pi_relu6(s, &i[0])?;
        Ok(vec![pi_matmul(s, &a.reshape(vec![4, 4])?, &i[1].reshape(vec![4, 4])?)?])
    });
    for r in s.transcript.records() {
        if r.to == 2 {
            assert_eq!(r.tag, "ideal-drelu");
        }
    }
}
