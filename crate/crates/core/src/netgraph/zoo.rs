//! Downscaled SqueezeNet v1.0, ShuffleNetV2 1.0x and MobileNetV2 for 32x32
//! inputs, plus the small reference nets used in examples and tests.

use serde_json::Value;

use super::blocks::{make_block, BlockKind, BlockTemplate, GraphBuilder, Profile, Variant};
use super::spec::{ConvParams, LayerKind, NetworkGraph, PoolParams};
use crate::error::Result;

const CAVEAT: &str = "channel widths follow the base architecture with the small-input edits \
(3x3 stride-1 stem, 2x2 pools, no stem pool); exact reference widths are unknown";

fn input_shape(profile: Profile) -> Vec<usize> {
    match profile {
        Profile::Cifar => vec![32, 32, 3],
        Profile::Mnist => vec![32, 32, 1],
    }
}

fn stem_activation(variant: Variant, base: LayerKind) -> Option<LayerKind> {
    match (variant, base) {
        (Variant::Crypto, LayerKind::Relu6) => Some(LayerKind::Relu),
        (_, k) => Some(k),
    }
}

fn finish(mut b: GraphBuilder, arch: &str, variant: Variant, profile: Profile) -> Result<NetworkGraph> {
    let tag = match variant {
        Variant::Original => "orig",
        Variant::Crypto => "crypto",
    };
    b.graph.name = format!("{arch}_{}.{tag}", profile.name());
    let m = &mut b.graph.metadata;
    m.insert("architecture".into(), Value::from(arch));
    m.insert("variant".into(), Value::from(tag));
    m.insert("profile".into(), Value::from(profile.name()));
    m.insert("caveat".into(), Value::from(CAVEAT));
    if profile == Profile::Mnist {
        m.insert("input".into(), Value::from("28x28 digits zero-padded to 32x32"));
    }
    b.finish()
}

pub fn squeezenet(variant: Variant, profile: Profile) -> Result<NetworkGraph> {
    let mut b = GraphBuilder::new("squeezenet", input_shape(profile));
    let pool = |b: &mut GraphBuilder, name: &str| {
        let kind = match variant {
            Variant::Original => LayerKind::MaxPool(PoolParams { kernel: 2, stride: 2 }),
            Variant::Crypto => LayerKind::AvgPool(PoolParams { kernel: 2, stride: 2 }),
        };
        b.then(name, kind);
    };
    let c = b.conv("conv1", "input", 96, 3, 1);
    b.activation("conv1_act", &c, stem_activation(variant, LayerKind::Relu), None);
    pool(&mut b, "pool1");
    let fires = [
        (16, 64),
        (16, 64),
        (32, 128),
        (32, 128),
        (48, 192),
        (48, 192),
        (64, 256),
        (64, 256),
    ];
    let mut shape = vec![16, 16, 96];
    for (i, &(s, e)) in fires.iter().enumerate() {
        let t = BlockTemplate::new(
            BlockKind::Fire {
                squeeze: s,
                expand1: e,
                expand3: e,
            },
            variant,
            profile,
        );
        let from = b.last.clone();
        make_block(&mut b, &t, &format!("fire{}", i + 2), &from, &shape)?;
        shape[2] = 2 * e;
        if i == 2 || i == 6 {
            pool(&mut b, &format!("pool{}", if i == 2 { 4 } else { 8 }));
            shape[0] /= 2;
            shape[1] /= 2;
        }
    }
    let from = b.last.clone();
    let c = b.conv("conv10", &from, 10, 1, 1);
    b.activation("conv10_act", &c, stem_activation(variant, LayerKind::Relu), None);
    b.then("gap", LayerKind::GlobalAvgPool);
    finish(b, "squeezenet", variant, profile)
}

pub fn shufflenetv2(variant: Variant, profile: Profile) -> Result<NetworkGraph> {
    let mut b = GraphBuilder::new("shufflenetv2", input_shape(profile));
    let c = b.conv("conv1", "input", 24, 3, 1);
    b.activation("conv1_act", &c, stem_activation(variant, LayerKind::Relu), None);
    let mut shape = vec![32, 32, 24];
    for (stage, (&repeats, &width)) in [4usize, 8, 4].iter().zip(&[116usize, 232, 464]).enumerate() {
        for unit in 0..repeats {
            let t = BlockTemplate::new(
                BlockKind::ShuffleUnit {
                    out_channels: width,
                    downsample: unit == 0,
                },
                variant,
                profile,
            );
            let from = b.last.clone();
            make_block(&mut b, &t, &format!("stage{}_{}", stage + 2, unit + 1), &from, &shape)?;
            if unit == 0 {
                shape[0] /= 2;
                shape[1] /= 2;
            }
            shape[2] = width;
        }
    }
    let from = b.last.clone();
    let c = b.conv("conv5", &from, 1024, 1, 1);
    b.activation("conv5_act", &c, stem_activation(variant, LayerKind::Relu), None);
    b.then("gap", LayerKind::GlobalAvgPool);
    b.fc("fc", 10);
    finish(b, "shufflenetv2", variant, profile)
}

pub fn mobilenetv2(variant: Variant, profile: Profile) -> Result<NetworkGraph> {
    let mut b = GraphBuilder::new("mobilenetv2", input_shape(profile));
    let c = b.conv("conv1", "input", 32, 3, 1);
    b.activation("conv1_act", &c, stem_activation(variant, LayerKind::Relu6), None);
    let cfg = [
        (1, 16, 1, 1),
        (6, 24, 2, 1),
        (6, 32, 3, 2),
        (6, 64, 4, 2),
        (6, 96, 3, 1),
        (6, 160, 3, 2),
        (6, 320, 1, 1),
    ];
    let mut shape = vec![32, 32, 32];
    let mut idx = 0;
    for (t, c, n, s) in cfg {
        for i in 0..n {
            let stride = if i == 0 { s } else { 1 };
            let tpl = BlockTemplate::new(
                BlockKind::InvertedResidual {
                    expansion: t,
                    out_channels: c,
                    stride,
                },
                variant,
                profile,
            );
            idx += 1;
            let from = b.last.clone();
            make_block(&mut b, &tpl, &format!("block{idx}"), &from, &shape)?;
            shape[0] /= stride;
            shape[1] /= stride;
            shape[2] = c;
        }
    }
    let from = b.last.clone();
    let c = b.conv("conv_head", &from, 1280, 1, 1);
    b.activation("conv_head_act", &c, stem_activation(variant, LayerKind::Relu6), None);
    b.then("gap", LayerKind::GlobalAvgPool);
    b.fc("fc", 10);
    finish(b, "mobilenetv2", variant, profile)
}

/// A 3x3 convolution with 16 outputs on a 32x32x3 input followed by ReLU.
pub fn toy() -> NetworkGraph {
    let mut b = GraphBuilder::new("toy", vec![32, 32, 3]);
    b.then(
        "conv",
        LayerKind::Conv2d(ConvParams {
            out_channels: 16,
            kernel: 3,
            stride: 1,
            padding: 1,
            bias: true,
        }),
    );
    b.then("relu", LayerKind::Relu);
    b.finish().expect("toy graph is valid")
}

/// Every shipped graph as `(file stem, graph)`.
pub fn shipped() -> Result<Vec<(String, NetworkGraph)>> {
    let mut out = Vec::new();
    type Builder = fn(Variant, Profile) -> Result<NetworkGraph>;
    let archs: [(&str, Builder); 3] = [
        ("squeezenet", squeezenet),
        ("shufflenetv2", shufflenetv2),
        ("mobilenetv2", mobilenetv2),
    ];
    for (arch, build) in archs {
        for profile in [Profile::Cifar, Profile::Mnist] {
            for (variant, tag) in [(Variant::Original, "orig"), (Variant::Crypto, "crypto")] {
                out.push((format!("{arch}_{}.{tag}", profile.name()), build(variant, profile)?));
            }
        }
    }
    Ok(out)
}
