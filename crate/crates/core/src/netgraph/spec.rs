use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::protocols::layout::Window;
use crate::protocols::{activated_channels, ActivationKind};

/// Name by which layers refer to the network input.
pub const INPUT: &str = "input";

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

fn default_eps() -> f64 {
    1e-5
}

fn relu() -> ActivationKind {
    ActivationKind::Relu
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvParams {
    pub out_channels: usize,
    pub kernel: usize,
    #[serde(default = "one")]
    pub stride: usize,
    #[serde(default)]
    pub padding: usize,
    #[serde(default = "yes")]
    pub bias: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DwConvParams {
    pub kernel: usize,
    #[serde(default = "one")]
    pub stride: usize,
    #[serde(default)]
    pub padding: usize,
    #[serde(default = "yes")]
    pub bias: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FcParams {
    pub out_features: usize,
    #[serde(default = "yes")]
    pub bias: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolParams {
    pub kernel: usize,
    pub stride: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialParams {
    pub ratio: f64,
    #[serde(default = "relu")]
    pub inner: ActivationKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitParams {
    pub fractions: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShuffleParams {
    pub groups: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BnParams {
    #[serde(default = "default_eps")]
    pub eps: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LayerKind {
    Conv2d(ConvParams),
    DwConv2d(DwConvParams),
    FullyConnected(FcParams),
    Relu,
    Relu6,
    LeakyRelu,
    PartialActivation(PartialParams),
    MaxPool(PoolParams),
    AvgPool(PoolParams),
    GlobalAvgPool,
    ChannelSplit(SplitParams),
    Concat,
    ChannelShuffle(ShuffleParams),
    ResidualAdd,
    Flatten,
    BatchNorm(BnParams),
}

pub const KIND_NAMES: [&str; 16] = [
    "conv2d",
    "dwconv2d",
    "fullyconnected",
    "relu",
    "relu6",
    "leakyrelu",
    "partial_activation",
    "maxpool",
    "avgpool",
    "globalavgpool",
    "channel_split",
    "concat",
    "channel_shuffle",
    "residual_add",
    "flatten",
    "batchnorm",
];

impl LayerKind {
    pub fn name(&self) -> &'static str {
        match self {
            LayerKind::Conv2d(_) => "conv2d",
            LayerKind::DwConv2d(_) => "dwconv2d",
            LayerKind::FullyConnected(_) => "fullyconnected",
            LayerKind::Relu => "relu",
            LayerKind::Relu6 => "relu6",
            LayerKind::LeakyRelu => "leakyrelu",
            LayerKind::PartialActivation(_) => "partial_activation",
            LayerKind::MaxPool(_) => "maxpool",
            LayerKind::AvgPool(_) => "avgpool",
            LayerKind::GlobalAvgPool => "globalavgpool",
            LayerKind::ChannelSplit(_) => "channel_split",
            LayerKind::Concat => "concat",
            LayerKind::ChannelShuffle(_) => "channel_shuffle",
            LayerKind::ResidualAdd => "residual_add",
            LayerKind::Flatten => "flatten",
            LayerKind::BatchNorm(_) => "batchnorm",
        }
    }

    fn params_value(&self) -> Value {
        let v = match self {
            LayerKind::Conv2d(p) => serde_json::to_value(p),
            LayerKind::DwConv2d(p) => serde_json::to_value(p),
            LayerKind::FullyConnected(p) => serde_json::to_value(p),
            LayerKind::PartialActivation(p) => serde_json::to_value(p),
            LayerKind::MaxPool(p) | LayerKind::AvgPool(p) => serde_json::to_value(p),
            LayerKind::ChannelSplit(p) => serde_json::to_value(p),
            LayerKind::ChannelShuffle(p) => serde_json::to_value(p),
            LayerKind::BatchNorm(p) => serde_json::to_value(p),
            _ => return Value::Object(Default::default()),
        };
        v.expect("parameter structs serialize")
    }

    fn from_parts(kind: &str, params: Value) -> std::result::Result<LayerKind, String> {
        fn p<T: serde::de::DeserializeOwned>(v: Value) -> std::result::Result<T, String> {
            serde_json::from_value(v).map_err(|e| e.to_string())
        }
        let empty = |v: &Value| match v {
            Value::Object(m) if m.is_empty() => Ok(()),
            Value::Null => Ok(()),
            _ => Err(format!("`{kind}` takes no parameters")),
        };
        Ok(match kind {
            "conv2d" => LayerKind::Conv2d(p(params)?),
            "dwconv2d" => LayerKind::DwConv2d(p(params)?),
            "fullyconnected" => LayerKind::FullyConnected(p(params)?),
            "partial_activation" => LayerKind::PartialActivation(p(params)?),
            "maxpool" => LayerKind::MaxPool(p(params)?),
            "avgpool" => LayerKind::AvgPool(p(params)?),
            "channel_split" => LayerKind::ChannelSplit(p(params)?),
            "channel_shuffle" => LayerKind::ChannelShuffle(p(params)?),
            "batchnorm" => LayerKind::BatchNorm(p(params)?),
            simple => {
                let k = match simple {
                    "relu" => LayerKind::Relu,
                    "relu6" => LayerKind::Relu6,
                    "leakyrelu" => LayerKind::LeakyRelu,
                    "globalavgpool" => LayerKind::GlobalAvgPool,
                    "concat" => LayerKind::Concat,
                    "residual_add" => LayerKind::ResidualAdd,
                    "flatten" => LayerKind::Flatten,
                    other => return Err(format!("unknown kind `{other}`")),
                };
                empty(&params)?;
                k
            }
        })
    }

    /// The element-wise activation this layer applies, if it is one.
    pub fn activation(&self) -> Option<ActivationKind> {
        match self {
            LayerKind::Relu => Some(ActivationKind::Relu),
            LayerKind::Relu6 => Some(ActivationKind::Relu6),
            LayerKind::LeakyRelu => Some(ActivationKind::LeakyRelu),
            LayerKind::PartialActivation(p) => Some(p.inner),
            _ => None,
        }
    }

    pub fn is_activation(&self) -> bool {
        self.activation().is_some()
    }

    pub fn from_activation(kind: ActivationKind) -> Option<LayerKind> {
        match kind {
            ActivationKind::Relu => Some(LayerKind::Relu),
            ActivationKind::Relu6 => Some(LayerKind::Relu6),
            ActivationKind::LeakyRelu => Some(LayerKind::LeakyRelu),
            ActivationKind::None => None,
        }
    }

    /// Names of the weight arrays the layer owns.
    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            LayerKind::Conv2d(ConvParams { bias: true, .. })
            | LayerKind::DwConv2d(DwConvParams { bias: true, .. })
            | LayerKind::FullyConnected(FcParams { bias: true, .. }) => &["kernel", "bias"],
            LayerKind::Conv2d(_) | LayerKind::DwConv2d(_) | LayerKind::FullyConnected(_) => &["kernel"],
            LayerKind::BatchNorm(_) => &["gamma", "beta", "mean", "var"],
            _ => &[],
        }
    }

    pub fn output_ports(&self) -> usize {
        match self {
            LayerKind::ChannelSplit(p) => p.fractions.len(),
            _ => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub name: String,
    pub kind: LayerKind,
    /// `"input"`, a layer name, or `"name:k"` for port `k` of a split.
    pub inputs: Vec<String>,
    /// Block the layer belongs to, if any.
    pub block: Option<String>,
    /// Position of an activation within its block (1 = first, 2 = second).
    pub slot: Option<u8>,
}

impl Layer {
    pub fn new(name: impl Into<String>, kind: LayerKind, inputs: Vec<String>) -> Layer {
        Layer {
            name: name.into(),
            kind,
            inputs,
            block: None,
            slot: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkGraph {
    pub name: String,
    pub input_shape: Vec<usize>,
    pub layers: Vec<Layer>,
    pub metadata: BTreeMap<String, Value>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGraph {
    name: String,
    input_shape: Vec<usize>,
    layers: Vec<RawLayer>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    metadata: BTreeMap<String, Value>,
}

fn no_params(v: &Value) -> bool {
    matches!(v, Value::Object(m) if m.is_empty())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLayer {
    name: String,
    kind: String,
    #[serde(default = "empty_object", skip_serializing_if = "no_params")]
    params: Value,
    #[serde(default)]
    inputs: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    block: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    slot: Option<u8>,
}

fn empty_object() -> Value {
    Value::Object(Default::default())
}

/// Split `"name:k"` into `("name", k)`; a bare name is port 0.
pub fn parse_ref(r: &str) -> (&str, Option<usize>) {
    if let Some((name, port)) = r.rsplit_once(':') {
        if let Ok(k) = port.parse() {
            return (name, Some(k));
        }
    }
    (r, None)
}

/// Parse and validate a graph document.
pub fn parse_graph(text: &str) -> Result<NetworkGraph> {
    let raw: RawGraph = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let mut problems = Vec::new();
    let mut layers = Vec::with_capacity(raw.layers.len());
    let mut prev = INPUT.to_string();
    for (i, rl) in raw.layers.into_iter().enumerate() {
        let label = if rl.name.is_empty() {
            format!("#{i}")
        } else {
            rl.name.clone()
        };
        let kind = match LayerKind::from_parts(&rl.kind, rl.params) {
            Ok(k) => Some(k),
            Err(e) => {
                problems.push(format!("layer `{label}`: {e}"));
                None
            }
        };
        let inputs = rl.inputs.unwrap_or_else(|| vec![prev.clone()]);
        prev = rl.name.clone();
        if let Some(kind) = kind {
            layers.push(Layer {
                name: rl.name,
                kind,
                inputs,
                block: rl.block,
                slot: rl.slot,
            });
        }
    }
    let mut g = NetworkGraph {
        name: raw.name,
        input_shape: raw.input_shape,
        layers,
        metadata: raw.metadata,
    };
    if !problems.is_empty() {
        // Still report structural problems of the layers that did parse.
        if let Err(Error::Validate(more)) = g.check_names() {
            problems.extend(more);
        }
        return Err(Error::Validate(problems));
    }
    g.check_names()?;
    g.sort_topologically()?;
    g.validate()?;
    Ok(g)
}

impl NetworkGraph {
    pub fn new(name: impl Into<String>, input_shape: Vec<usize>) -> NetworkGraph {
        NetworkGraph {
            name: name.into(),
            input_shape,
            layers: Vec::new(),
            metadata: BTreeMap::new(),
        }
    }

    pub fn to_json(&self) -> String {
        let raw = RawGraph {
            name: self.name.clone(),
            input_shape: self.input_shape.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| RawLayer {
                    name: l.name.clone(),
                    kind: l.kind.name().to_string(),
                    params: l.kind.params_value(),
                    inputs: Some(l.inputs.clone()),
                    block: l.block.clone(),
                    slot: l.slot,
                })
                .collect(),
            metadata: self.metadata.clone(),
        };
        let mut s = serde_json::to_string_pretty(&raw).expect("graph serializes");
        s.push('\n');
        s
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.layers.iter().position(|l| l.name == name)
    }

    pub fn layer(&self, name: &str) -> Option<&Layer> {
        self.layers.iter().find(|l| l.name == name)
    }

    /// Names of the layers (or `input`) that the graph's result comes from.
    pub fn output_name(&self) -> &str {
        self.layers.last().map(|l| l.name.as_str()).unwrap_or(INPUT)
    }

    fn check_names(&self) -> Result<()> {
        let mut problems = Vec::new();
        let mut seen = HashSet::new();
        for l in &self.layers {
            if l.name.is_empty() {
                problems.push("a layer has an empty name".to_string());
            } else if l.name == INPUT {
                problems.push(format!("layer name `{INPUT}` is reserved"));
            } else if l.name.contains(':') {
                problems.push(format!("layer name `{}` must not contain ':'", l.name));
            } else if !seen.insert(l.name.as_str()) {
                problems.push(format!("duplicate layer name `{}`", l.name));
            }
        }
        for l in &self.layers {
            for r in &l.inputs {
                let (name, _) = parse_ref(r);
                if name != INPUT && !seen.contains(name) {
                    problems.push(format!("layer `{}` reads unknown layer `{}`", l.name, name));
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validate(problems))
        }
    }

    /// Reorder layers so that every layer follows its inputs, keeping the
    /// document order where possible. Fails on a cycle, naming an edge
    /// that closes it.
    fn sort_topologically(&mut self) -> Result<()> {
        let index: HashMap<&str, usize> = self
            .layers
            .iter()
            .enumerate()
            .map(|(i, l)| (l.name.as_str(), i))
            .collect();
        let deps: Vec<Vec<usize>> = self
            .layers
            .iter()
            .map(|l| {
                l.inputs
                    .iter()
                    .filter_map(|r| index.get(parse_ref(r).0).copied())
                    .collect()
            })
            .collect();

        // 0 = unvisited, 1 = on stack, 2 = done
        let mut state = vec![0u8; self.layers.len()];
        let mut order = Vec::with_capacity(self.layers.len());
        for start in 0..self.layers.len() {
            if state[start] != 0 {
                continue;
            }
            let mut stack = vec![(start, 0usize)];
            state[start] = 1;
            while let Some(&mut (node, ref mut next)) = stack.last_mut() {
                if *next < deps[node].len() {
                    let dep = deps[node][*next];
                    *next += 1;
                    match state[dep] {
                        0 => {
                            state[dep] = 1;
                            stack.push((dep, 0));
                        }
                        1 => {
                            return Err(Error::Cycle {
                                from: self.layers[dep].name.clone(),
                                to: self.layers[node].name.clone(),
                            })
                        }
                        _ => {}
                    }
                } else {
                    state[node] = 2;
                    order.push(node);
                    stack.pop();
                }
            }
        }
        let mut slots: Vec<Option<Layer>> = std::mem::take(&mut self.layers).into_iter().map(Some).collect();
        self.layers = order.into_iter().map(|i| slots[i].take().unwrap()).collect();
        Ok(())
    }

    /// Check arity, shapes and the single-output rule, collecting every
    /// problem found.
    pub fn validate(&self) -> Result<()> {
        self.check_names()?;
        let mut problems = Vec::new();
        if self.input_shape.is_empty() || self.input_shape.contains(&0) {
            problems.push(format!("input shape {:?} must be non-empty and positive", self.input_shape));
        }
        let (_, shape_problems) = self.infer_shapes();
        problems.extend(shape_problems);

        if !self.layers.is_empty() {
            let mut consumed = HashSet::new();
            for l in &self.layers {
                for r in &l.inputs {
                    consumed.insert(parse_ref(r).0);
                }
            }
            let sinks: Vec<&str> = self
                .layers
                .iter()
                .map(|l| l.name.as_str())
                .filter(|n| !consumed.contains(n))
                .collect();
            if sinks.len() != 1 {
                problems.push(format!("graph must have exactly one output layer, found {sinks:?}"));
            } else if sinks[0] != self.output_name() {
                problems.push(format!("output layer `{}` must come last", sinks[0]));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validate(problems))
        }
    }

    /// Output shapes of every layer port, in layer order.
    pub fn shapes(&self) -> Result<Vec<Vec<Vec<usize>>>> {
        let (shapes, problems) = self.infer_shapes();
        if !problems.is_empty() {
            return Err(Error::Validate(problems));
        }
        Ok(shapes.into_iter().map(|s| s.expect("no problems")).collect())
    }

    pub fn output_shape(&self) -> Result<Vec<usize>> {
        let shapes = self.shapes()?;
        Ok(shapes.last().map(|s| s[0].clone()).unwrap_or_else(|| self.input_shape.clone()))
    }

    /// Shapes of the tensors a layer reads.
    pub fn input_shapes_of(&self, shapes: &[Vec<Vec<usize>>], layer: &Layer) -> Result<Vec<Vec<usize>>> {
        layer
            .inputs
            .iter()
            .map(|r| self.resolve_shape(shapes, r))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Shape(format!("layer `{}`: {e}", layer.name)))
    }

    fn resolve_shape(&self, shapes: &[Vec<Vec<usize>>], r: &str) -> std::result::Result<Vec<usize>, String> {
        let (name, port) = parse_ref(r);
        if name == INPUT {
            return Ok(self.input_shape.clone());
        }
        let i = self
            .index_of(name)
            .ok_or_else(|| format!("unknown layer `{name}`"))?;
        let ports = shapes.get(i).ok_or_else(|| format!("`{name}` is not computed yet"))?;
        match (port, ports.len()) {
            (None, 1) => Ok(ports[0].clone()),
            (None, _) => Err(format!("`{name}` has {} outputs; pick one with `{name}:k`", ports.len())),
            (Some(k), n) if k < n => Ok(ports[k].clone()),
            (Some(k), n) => Err(format!("`{name}` has {n} outputs, port {k} does not exist")),
        }
    }

    fn infer_shapes(&self) -> (Vec<Option<Vec<Vec<usize>>>>, Vec<String>) {
        let mut problems = Vec::new();
        let mut out: Vec<Option<Vec<Vec<usize>>>> = Vec::with_capacity(self.layers.len());
        let index: HashMap<&str, usize> = self
            .layers
            .iter()
            .enumerate()
            .map(|(i, l)| (l.name.as_str(), i))
            .collect();
        for (i, l) in self.layers.iter().enumerate() {
            let mut ins = Vec::with_capacity(l.inputs.len());
            let mut ok = true;
            for r in &l.inputs {
                let (name, port) = parse_ref(r);
                let ports = if name == INPUT {
                    Some(vec![self.input_shape.clone()])
                } else {
                    match index.get(name) {
                        Some(&j) if j < i => out[j].clone(),
                        Some(_) => {
                            problems.push(format!("layer `{}` reads `{}` before it is computed", l.name, name));
                            None
                        }
                        None => None,
                    }
                };
                let Some(ports) = ports else {
                    ok = false;
                    continue;
                };
                match (port, ports.len()) {
                    (None, 1) => ins.push(ports[0].clone()),
                    (Some(k), n) if k < n => ins.push(ports[k].clone()),
                    (None, n) => {
                        problems.push(format!("layer `{}`: `{}` has {} outputs, pick one with `:k`", l.name, name, n));
                        ok = false;
                    }
                    (Some(k), _) => {
                        problems.push(format!("layer `{}`: `{}` has no output port {}", l.name, name, k));
                        ok = false;
                    }
                }
            }
            if !ok {
                out.push(None);
                continue;
            }
            match layer_shape(&l.kind, &ins) {
                Ok(s) => out.push(Some(s)),
                Err(e) => {
                    problems.push(format!("layer `{}` ({}): {}", l.name, l.kind.name(), e));
                    out.push(None);
                }
            }
        }
        (out, problems)
    }

    /// Expected shapes of the weight arrays of layer `i`.
    pub fn param_shapes(&self, shapes: &[Vec<Vec<usize>>], i: usize) -> Result<Vec<(&'static str, Vec<usize>)>> {
        let l = &self.layers[i];
        let ins = self.input_shapes_of(shapes, l)?;
        let x = &ins[0];
        let last = *x.last().unwrap_or(&1);
        let shapes = match &l.kind {
            LayerKind::Conv2d(p) => vec![("kernel", vec![p.kernel, p.kernel, last, p.out_channels]), ("bias", vec![p.out_channels])],
            LayerKind::DwConv2d(p) => vec![("kernel", vec![p.kernel, p.kernel, last]), ("bias", vec![last])],
            LayerKind::FullyConnected(p) => {
                vec![("kernel", vec![x.iter().product(), p.out_features]), ("bias", vec![p.out_features])]
            }
            LayerKind::BatchNorm(_) => ["gamma", "beta", "mean", "var"].iter().map(|&n| (n, vec![last])).collect(),
            _ => Vec::new(),
        };
        let names = l.kind.param_names();
        Ok(shapes.into_iter().filter(|(n, _)| names.contains(n)).collect())
    }
}

fn spatial(x: &[usize]) -> std::result::Result<(usize, usize, usize), String> {
    match *x {
        [h, w, c] => Ok((h, w, c)),
        _ => Err(format!("expects an HxWxC input, got {x:?}")),
    }
}

/// Sizes of the parts of a channel split: `floor(f * C)` each, with the
/// remainder going to the last part.
pub fn split_sizes(fractions: &[f64], channels: usize) -> std::result::Result<Vec<usize>, String> {
    if fractions.len() < 2 {
        return Err("channel_split needs at least two fractions".into());
    }
    if fractions.iter().any(|f| !(*f > 0.0 && *f < 1.0)) {
        return Err(format!("fractions {fractions:?} must lie strictly between 0 and 1"));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(format!("fractions {fractions:?} sum to {total}, not 1"));
    }
    let mut sizes: Vec<usize> = fractions[..fractions.len() - 1]
        .iter()
        .map(|f| (f * channels as f64 + 1e-9).floor() as usize)
        .collect();
    let used: usize = sizes.iter().sum();
    if used >= channels {
        return Err(format!("cannot split {channels} channels by {fractions:?}"));
    }
    sizes.push(channels - used);
    if sizes.contains(&0) {
        return Err(format!("splitting {channels} channels by {fractions:?} leaves an empty part"));
    }
    Ok(sizes)
}

fn layer_shape(kind: &LayerKind, ins: &[Vec<usize>]) -> std::result::Result<Vec<Vec<usize>>, String> {
    let arity_ok = match kind {
        LayerKind::Concat => ins.len() >= 2,
        LayerKind::ResidualAdd => ins.len() == 2,
        _ => ins.len() == 1,
    };
    if !arity_ok {
        return Err(format!("wrong number of inputs ({})", ins.len()));
    }
    let x = &ins[0];
    let win = |kernel, stride, padding| Window {
        kernel,
        stride,
        padding,
    };
    let shape = match kind {
        LayerKind::Conv2d(p) => {
            let (h, w, _) = spatial(x)?;
            if p.out_channels == 0 {
                return Err("out_channels must be positive".into());
            }
            let wdw = win(p.kernel, p.stride, p.padding);
            let oh = wdw.output_dim(h).map_err(|e| e.to_string())?;
            let ow = wdw.output_dim(w).map_err(|e| e.to_string())?;
            vec![oh, ow, p.out_channels]
        }
        LayerKind::DwConv2d(p) => {
            let (h, w, c) = spatial(x)?;
            let wdw = win(p.kernel, p.stride, p.padding);
            let oh = wdw.output_dim(h).map_err(|e| e.to_string())?;
            let ow = wdw.output_dim(w).map_err(|e| e.to_string())?;
            vec![oh, ow, c]
        }
        LayerKind::FullyConnected(p) => {
            if p.out_features == 0 {
                return Err("out_features must be positive".into());
            }
            vec![p.out_features]
        }
        LayerKind::Relu | LayerKind::Relu6 | LayerKind::LeakyRelu => x.clone(),
        LayerKind::PartialActivation(p) => {
            if !(0.0..=1.0).contains(&p.ratio) {
                return Err(format!("ratio {} is outside [0, 1]", p.ratio));
            }
            let c = *x.last().ok_or("needs a channel axis")?;
            let _ = activated_channels(p.ratio, c);
            x.clone()
        }
        LayerKind::MaxPool(p) | LayerKind::AvgPool(p) => {
            let (h, w, c) = spatial(x)?;
            let wdw = win(p.kernel, p.stride, 0);
            let oh = wdw.output_dim_exact(h).map_err(|e| e.to_string())?;
            let ow = wdw.output_dim_exact(w).map_err(|e| e.to_string())?;
            vec![oh, ow, c]
        }
        LayerKind::GlobalAvgPool => {
            let (_, _, c) = spatial(x)?;
            vec![c]
        }
        LayerKind::ChannelSplit(p) => {
            let c = *x.last().ok_or("needs a channel axis")?;
            let sizes = split_sizes(&p.fractions, c)?;
            return Ok(sizes
                .into_iter()
                .map(|s| {
                    let mut y = x.clone();
                    *y.last_mut().unwrap() = s;
                    y
                })
                .collect());
        }
        LayerKind::Concat => {
            let lead = &x[..x.len().saturating_sub(1)];
            let mut total = 0;
            for s in ins {
                if s.is_empty() || &s[..s.len() - 1] != lead {
                    return Err(format!("channel mismatch: cannot concatenate {:?}", ins));
                }
                total += s[s.len() - 1];
            }
            let mut y = lead.to_vec();
            y.push(total);
            y
        }
        LayerKind::ChannelShuffle(p) => {
            let c = *x.last().ok_or("needs a channel axis")?;
            if p.groups == 0 || c % p.groups != 0 {
                return Err(format!("{c} channels are not divisible into {} groups", p.groups));
            }
            x.clone()
        }
        LayerKind::ResidualAdd => {
            if ins[0] != ins[1] {
                return Err(format!("channel mismatch: {:?} + {:?}", ins[0], ins[1]));
            }
            x.clone()
        }
        LayerKind::Flatten => vec![x.iter().product()],
        LayerKind::BatchNorm(p) => {
            if p.eps <= 0.0 {
                return Err("eps must be positive".into());
            }
            x.clone()
        }
    };
    Ok(vec![shape])
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "name": "toy",
        "input_shape": [4, 4, 1],
        "layers": [
            {"name": "c1", "kind": "conv2d", "params": {"out_channels": 2, "kernel": 3, "padding": 1}},
            {"name": "r1", "kind": "relu"}
        ]
    }"#;

    #[test]
    fn minimal_document() {
        let g = parse_graph(MINIMAL).unwrap();
        assert_eq!(g.layers.len(), 2);
        assert_eq!(g.layers[1].inputs, vec!["c1".to_string()]);
        assert_eq!(g.output_shape().unwrap(), vec![4, 4, 2]);
        assert_eq!(parse_graph(&g.to_json()).unwrap(), g);
    }

    #[test]
    fn cycle_names_back_edge() {
        let doc = r#"{"name": "c", "input_shape": [2, 2, 1], "layers": [
            {"name": "a", "kind": "relu", "inputs": ["b"]},
            {"name": "b", "kind": "relu", "inputs": ["a"]}
        ]}"#;
        match parse_graph(doc).unwrap_err() {
            Error::Cycle { from, to } => assert_eq!((from.as_str(), to.as_str()), ("a", "b")),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn every_problem_is_listed() {
        let doc = r#"{"name": "bad", "input_shape": [4, 4, 3], "layers": [
            {"name": "a", "kind": "warp"},
            {"name": "b", "kind": "conv2d", "params": {"out_channels": 2, "kernel": 1}, "inputs": ["input"]},
            {"name": "c", "kind": "conv2d", "params": {"out_channels": 3, "kernel": 1}, "inputs": ["input"]},
            {"name": "d", "kind": "residual_add", "inputs": ["b", "c"]}
        ]}"#;
        let Error::Validate(list) = parse_graph(doc).unwrap_err() else {
            panic!("expected a validation error")
        };
        assert!(list.iter().any(|m| m.contains("unknown kind `warp`")));

        let doc = doc.replace("\"warp\"", "\"relu\"");
        let Error::Validate(list) = parse_graph(&doc).unwrap_err() else {
            panic!("expected a validation error")
        };
        assert!(list.iter().any(|m| m.contains("channel mismatch")), "{list:?}");
        assert!(list.iter().any(|m| m.contains("exactly one output")), "{list:?}");
    }

    #[test]
    fn split_remainder_goes_last() {
        assert_eq!(split_sizes(&[0.5, 0.5], 5).unwrap(), vec![2, 3]);
        assert_eq!(split_sizes(&[0.25, 0.75], 4).unwrap(), vec![1, 3]);
        assert!(split_sizes(&[0.5, 0.4], 4).is_err());
    }
}
