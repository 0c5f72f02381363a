//! Fire modules, ShuffleNetV2 units and inverted residual blocks in their
//! original and crypto-oriented forms.

use super::spec::{
    ConvParams, DwConvParams, FcParams, Layer, LayerKind, NetworkGraph, PartialParams, PoolParams, ShuffleParams,
    SplitParams, INPUT,
};
use crate::error::{Error, Result};
use crate::protocols::ActivationKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Original,
    Crypto,
}

/// Dataset profile of a crypto variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Profile {
    Cifar,
    Mnist,
}

impl Profile {
    pub fn pa_ratio(self) -> f64 {
        match self {
            Profile::Cifar => 0.5,
            Profile::Mnist => 0.25,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Profile::Cifar => "cifar",
            Profile::Mnist => "mnist",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BlockKind {
    Fire {
        squeeze: usize,
        expand1: usize,
        expand3: usize,
    },
    ShuffleUnit {
        out_channels: usize,
        downsample: bool,
    },
    InvertedResidual {
        expansion: usize,
        out_channels: usize,
        stride: usize,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockTemplate {
    pub kind: BlockKind,
    pub variant: Variant,
    pub profile: Profile,
    pub pa_ratio: f64,
}

impl BlockTemplate {
    pub fn new(kind: BlockKind, variant: Variant, profile: Profile) -> Self {
        BlockTemplate {
            kind,
            variant,
            profile,
            pa_ratio: profile.pa_ratio(),
        }
    }

    /// The activation slot the crypto variant removes; the other slot
    /// becomes a partial activation.
    pub fn removed_slot(&self) -> u8 {
        match (&self.kind, self.profile) {
            (BlockKind::Fire { .. }, Profile::Cifar) => 1,
            (BlockKind::Fire { .. }, Profile::Mnist) => 2,
            (BlockKind::ShuffleUnit { .. }, _) => 2,
            (BlockKind::InvertedResidual { .. }, _) => 1,
        }
    }

    fn base_activation(&self) -> ActivationKind {
        match self.kind {
            BlockKind::InvertedResidual { .. } => ActivationKind::Relu6,
            _ => ActivationKind::Relu,
        }
    }
}

/// Appends layers to a graph, tracking the most recent output.
pub struct GraphBuilder {
    pub graph: NetworkGraph,
    pub last: String,
    block: Option<String>,
}

impl GraphBuilder {
    pub fn new(name: &str, input_shape: Vec<usize>) -> Self {
        GraphBuilder {
            graph: NetworkGraph::new(name, input_shape),
            last: INPUT.to_string(),
            block: None,
        }
    }

    pub fn push(&mut self, name: impl Into<String>, kind: LayerKind, inputs: Vec<String>) -> String {
        let name = name.into();
        let mut layer = Layer::new(name.clone(), kind, inputs);
        layer.block = self.block.clone();
        self.graph.layers.push(layer);
        self.last = name.clone();
        name
    }

    pub fn then(&mut self, name: impl Into<String>, kind: LayerKind) -> String {
        let from = self.last.clone();
        self.push(name, kind, vec![from])
    }

    pub fn conv(&mut self, name: &str, from: &str, out: usize, kernel: usize, stride: usize) -> String {
        let kind = LayerKind::Conv2d(ConvParams {
            out_channels: out,
            kernel,
            stride,
            padding: kernel / 2,
            bias: true,
        });
        self.push(name, kind, vec![from.to_string()])
    }

    pub fn dwconv(&mut self, name: &str, from: &str, kernel: usize, stride: usize) -> String {
        let kind = LayerKind::DwConv2d(DwConvParams {
            kernel,
            stride,
            padding: kernel / 2,
            bias: true,
        });
        self.push(name, kind, vec![from.to_string()])
    }

    pub fn maxpool(&mut self, name: &str, kernel: usize) -> String {
        self.then(name, LayerKind::MaxPool(PoolParams { kernel, stride: kernel }))
    }

    pub fn fc(&mut self, name: &str, out: usize) -> String {
        self.then(
            name,
            LayerKind::FullyConnected(FcParams {
                out_features: out,
                bias: true,
            }),
        )
    }

    /// Activation layer following `from`; `None` adds nothing and returns
    /// `from`.
    pub fn activation(&mut self, name: &str, from: &str, kind: Option<LayerKind>, slot: Option<u8>) -> String {
        match kind {
            None => from.to_string(),
            Some(kind) => {
                let n = self.push(name, kind, vec![from.to_string()]);
                self.graph.layers.last_mut().unwrap().slot = slot;
                n
            }
        }
    }

    pub fn finish(self) -> Result<NetworkGraph> {
        self.graph.validate()?;
        Ok(self.graph)
    }
}

fn slot_activation(t: &BlockTemplate, slot: u8) -> Option<LayerKind> {
    match t.variant {
        Variant::Original => LayerKind::from_activation(t.base_activation()),
        Variant::Crypto if slot == t.removed_slot() => None,
        Variant::Crypto => Some(LayerKind::PartialActivation(PartialParams {
            ratio: t.pa_ratio,
            inner: ActivationKind::Relu,
        })),
    }
}

/// Append one block reading `from`, whose shape is `in_shape`. Layer names
/// are prefixed with `prefix`. Returns the block's output layer name.
pub fn make_block(b: &mut GraphBuilder, t: &BlockTemplate, prefix: &str, from: &str, in_shape: &[usize]) -> Result<String> {
    let cin = *in_shape
        .last()
        .ok_or_else(|| Error::Shape("block input needs a channel axis".into()))?;
    if t.variant == Variant::Crypto && !(0.0..=1.0).contains(&t.pa_ratio) {
        return Err(Error::Params(format!("partial activation ratio {} is outside [0, 1]", t.pa_ratio)));
    }
    let n = |s: &str| format!("{prefix}_{s}");
    b.block = Some(prefix.to_string());
    let out = match t.kind {
        BlockKind::Fire {
            squeeze,
            expand1,
            expand3,
        } => {
            if t.variant == Variant::Crypto && (squeeze < 2 || expand1 < 2 || expand3 < 2) {
                return Err(Error::Params(format!("fire module {prefix} is too narrow to split")));
            }
            let s = b.conv(&n("squeeze"), from, squeeze, 1, 1);
            let s = b.activation(&n("squeeze_act"), &s, slot_activation(t, 1), Some(1));
            let e1 = b.conv(&n("expand1x1"), &s, expand1, 1, 1);
            let e1 = b.activation(&n("expand1x1_act"), &e1, slot_activation(t, 2), Some(2));
            let e3 = b.conv(&n("expand3x3"), &s, expand3, 3, 1);
            let e3 = b.activation(&n("expand3x3_act"), &e3, slot_activation(t, 2), Some(2));
            b.push(n("concat"), LayerKind::Concat, vec![e1, e3])
        }
        BlockKind::ShuffleUnit {
            out_channels,
            downsample,
        } => {
            if out_channels % 2 != 0 {
                return Err(Error::Params(format!("shuffle unit {prefix} needs an even channel count")));
            }
            let half = out_channels / 2;
            let (left, right_in) = if downsample {
                let l = b.dwconv(&n("left_dw"), from, 3, 2);
                let l = b.conv(&n("left_conv"), &l, half, 1, 1);
                let l = b.activation(&n("left_act"), &l, slot_activation(t, 2), Some(2));
                (l, from.to_string())
            } else {
                if cin != out_channels {
                    return Err(Error::Params(format!(
                        "shuffle unit {prefix}: {cin} input channels but {out_channels} outputs without downsampling"
                    )));
                }
                let split = b.push(
                    n("split"),
                    LayerKind::ChannelSplit(SplitParams {
                        fractions: vec![0.5, 0.5],
                    }),
                    vec![from.to_string()],
                );
                (format!("{split}:0"), format!("{split}:1"))
            };
            let stride = if downsample { 2 } else { 1 };
            let r = b.conv(&n("conv1"), &right_in, half, 1, 1);
            let r = b.activation(&n("act1"), &r, slot_activation(t, 1), Some(1));
            let r = b.dwconv(&n("dw"), &r, 3, stride);
            let r = b.conv(&n("conv2"), &r, half, 1, 1);
            let r = b.activation(&n("act2"), &r, slot_activation(t, 2), Some(2));
            let cat = b.push(n("concat"), LayerKind::Concat, vec![left, r]);
            b.push(n("shuffle"), LayerKind::ChannelShuffle(ShuffleParams { groups: 2 }), vec![cat])
        }
        BlockKind::InvertedResidual {
            expansion,
            out_channels,
            stride,
        } => {
            let hidden = cin * expansion;
            let mut x = from.to_string();
            if expansion != 1 {
                x = b.conv(&n("expand"), &x, hidden, 1, 1);
                x = b.activation(&n("expand_act"), &x, slot_activation(t, 1), Some(1));
            }
            x = b.dwconv(&n("dw"), &x, 3, stride);
            x = b.activation(&n("dw_act"), &x, slot_activation(t, 2), Some(2));
            x = b.conv(&n("project"), &x, out_channels, 1, 1);
            if stride == 1 && cin == out_channels {
                x = b.push(n("add"), LayerKind::ResidualAdd, vec![from.to_string(), x]);
            }
            x
        }
    };
    b.block = None;
    Ok(out)
}

/// A graph holding a single block applied to an input of `in_shape`.
pub fn block_graph(t: &BlockTemplate, in_shape: Vec<usize>) -> Result<NetworkGraph> {
    let mut b = GraphBuilder::new("block", in_shape.clone());
    make_block(&mut b, t, "b", INPUT, &in_shape)?;
    b.finish()
}
