//! Secure evaluation of a whole network by the three parties.
//!
//! P0 shares its weights and P1 its input in one round (`input-share`),
//! every layer then runs its protocol on shares, and the result is revealed
//! to P1 (`output`). Batch norm must be folded beforehand.

use std::collections::HashMap;

use crate::costmodel::MeasuredTotals;
use crate::error::{Error, Result};
use crate::netgraph::{encode_array, parse_ref, split_sizes, Array, LayerKind, NetworkGraph, WeightStore, INPUT};
use crate::protocols::layout::{channel_shuffle, channel_slice};
use crate::protocols::{
    avgpool, global_avgpool, pi_activation, pi_conv2d, pi_dwconv2d, pi_fully_connected, pi_maxpool,
    pi_partial_activation, reveal_to, share_inputs, PartialActivationSpec, Secret, TAG_OFFLINE,
};
use crate::ring::{RingParams, RingTensor};
use crate::transport::{measured_cost, open_session, MeasuredCost, PartyId, Session, Transcript, TransportKind};

pub const TAG_INPUT: &str = "input-share";
pub const TAG_OUTPUT: &str = "output";

/// What one party ends up with.
#[derive(Clone, Debug)]
pub struct PartyResult {
    /// The revealed output (P1 only).
    pub output: Option<RingTensor>,
    /// Round range `[start, end)` each layer occupied.
    pub layer_rounds: Vec<(String, u64, u64)>,
}

/// The private inputs a party brings.
#[derive(Clone, Copy, Debug, Default)]
pub struct PartyInputs<'a> {
    /// P0: the model weights.
    pub weights: Option<&'a WeightStore>,
    /// P1: the input tensor.
    pub input: Option<&'a Array>,
}

/// Run the network as party `sess.id()`.
pub fn run_party(sess: &mut Session, graph: &NetworkGraph, mine: PartyInputs<'_>) -> Result<PartyResult> {
    let me = sess.id();
    let params = *sess.params();
    let shapes = graph.shapes()?;
    if let Some(l) = graph.layers.iter().find(|l| matches!(l.kind, LayerKind::BatchNorm(_))) {
        return Err(Error::Structure(format!(
            "batchnorm layer `{}` must be folded before secure evaluation",
            l.name
        )));
    }

    // Everything P0 owns, in layer order, then P1's input.
    let mut plain: Vec<Option<RingTensor>> = Vec::new();
    let mut items: Vec<(PartyId, Vec<usize>, String)> = Vec::new();
    for (i, l) in graph.layers.iter().enumerate() {
        for (param, shape) in graph.param_shapes(&shapes, i)? {
            let key = format!("{}.{}", l.name, param);
            let value = if me == PartyId::P0 {
                let w = mine
                    .weights
                    .ok_or_else(|| Error::ProtocolMisuse("P0 must supply the weights".into()))?;
                let a = w.param(&l.name, param)?;
                if a.shape != shape {
                    return Err(Error::Shape(format!(
                        "weights `{key}` have shape {:?}, layer expects {:?}",
                        a.shape, shape
                    )));
                }
                Some(encode_array(a, &params)?)
            } else {
                None
            };
            plain.push(value);
            items.push((PartyId::P0, shape, key));
        }
    }
    let input_value = if me == PartyId::P1 {
        let x = mine
            .input
            .ok_or_else(|| Error::ProtocolMisuse("P1 must supply the input".into()))?;
        if x.shape != graph.input_shape {
            return Err(Error::Shape(format!(
                "input shape {:?} does not match graph input {:?}",
                x.shape, graph.input_shape
            )));
        }
        Some(encode_array(x, &params)?)
    } else {
        None
    };
    plain.push(input_value);
    items.push((PartyId::P1, graph.input_shape.clone(), INPUT.to_string()));

    let requests: Vec<(PartyId, Vec<usize>, Option<&RingTensor>)> = items
        .iter()
        .zip(&plain)
        .map(|((owner, shape, _), v)| (*owner, shape.clone(), v.as_ref()))
        .collect();
    let shared = share_inputs(sess, &requests, TAG_INPUT)?;
    let mut params_by_name: HashMap<String, Secret> = items.into_iter().map(|(_, _, k)| k).zip(shared).collect();
    let input = params_by_name.remove(INPUT).expect("input was shared");

    let mut values: HashMap<String, Vec<Secret>> = HashMap::new();
    values.insert(INPUT.to_string(), vec![input]);
    let mut layer_rounds = Vec::with_capacity(graph.layers.len());
    for l in &graph.layers {
        let start = sess.round();
        let ins: Vec<&Secret> = l
            .inputs
            .iter()
            .map(|r| {
                let (name, port) = parse_ref(r);
                values
                    .get(name)
                    .and_then(|p| p.get(port.unwrap_or(0)))
                    .ok_or_else(|| Error::Structure(format!("layer `{}` reads missing `{}`", l.name, r)))
            })
            .collect::<Result<_>>()?;
        let x = ins[0];
        let w = |p: &str| params_by_name.get(&format!("{}.{}", l.name, p));
        let out = match &l.kind {
            LayerKind::Conv2d(c) => vec![pi_conv2d(sess, x, w("kernel").unwrap(), w("bias"), c.stride, c.padding)?],
            LayerKind::DwConv2d(c) => vec![pi_dwconv2d(sess, x, w("kernel").unwrap(), w("bias"), c.stride, c.padding)?],
            LayerKind::FullyConnected(_) => vec![pi_fully_connected(sess, x, w("kernel").unwrap(), w("bias"))?],
            LayerKind::Relu | LayerKind::Relu6 | LayerKind::LeakyRelu => {
                vec![pi_activation(sess, l.kind.activation().unwrap(), x)?]
            }
            LayerKind::PartialActivation(p) => {
                let spec = PartialActivationSpec::new(p.ratio, p.inner)?;
                vec![pi_partial_activation(sess, x, &spec)?]
            }
            LayerKind::MaxPool(p) => vec![pi_maxpool(sess, x, p.kernel, p.stride)?],
            LayerKind::AvgPool(p) => vec![avgpool(x, p.kernel, p.stride, &params)?],
            LayerKind::GlobalAvgPool => vec![global_avgpool(x, &params)?],
            LayerKind::ChannelSplit(p) => {
                let c = *x.shape().last().unwrap();
                let mut start = 0;
                let mut parts = Vec::new();
                for s in split_sizes(&p.fractions, c).map_err(Error::Shape)? {
                    let (idx, shape) = channel_slice(x.shape(), start, start + s)?;
                    parts.push(x.gather(&idx, shape)?);
                    start += s;
                }
                parts
            }
            LayerKind::Concat => vec![Secret::concat_last(&ins.iter().map(|s| (*s).clone()).collect::<Vec<_>>())?],
            LayerKind::ChannelShuffle(p) => {
                let idx = channel_shuffle(x.shape(), p.groups)?;
                vec![x.gather(&idx, x.shape().to_vec())?]
            }
            LayerKind::ResidualAdd => vec![x.add(ins[1])?],
            LayerKind::Flatten => vec![x.reshape(vec![x.len()])?],
            LayerKind::BatchNorm(_) => unreachable!("rejected above"),
        };
        values.insert(l.name.clone(), out);
        layer_rounds.push((l.name.clone(), start, sess.round()));
    }
    let result = values
        .remove(graph.output_name())
        .and_then(|mut v| (!v.is_empty()).then(|| v.swap_remove(0)))
        .ok_or_else(|| Error::Structure("graph produced no output".into()))?;
    let output = reveal_to(sess, &result, PartyId::P1, TAG_OUTPUT)?;
    Ok(PartyResult { output, layer_rounds })
}

/// Outcome of an in-process secure run.
#[derive(Clone, Debug)]
pub struct SecureRun {
    pub output: RingTensor,
    pub transcript: Transcript,
    /// Measured cost of each layer.
    pub layers: Vec<(String, MeasuredCost)>,
    pub totals: MeasuredTotals,
}

impl SecureRun {
    pub fn decoded(&self, params: &RingParams) -> Vec<f64> {
        self.output
            .data()
            .iter()
            .map(|&v| crate::ring::decode_fixed(v, params))
            .collect()
    }
}

/// Summaries computed from a transcript and per-layer round ranges.
pub fn summarize(transcript: &Transcript, layer_rounds: &[(String, u64, u64)]) -> (Vec<(String, MeasuredCost)>, MeasuredTotals) {
    let layers = layer_rounds
        .iter()
        .map(|(n, s, e)| (n.clone(), measured_cost(&transcript.rounds_between(*s, *e), None)))
        .collect();
    let all = measured_cost(transcript, None);
    let totals = MeasuredTotals {
        rounds: all.rounds,
        bytes: all.bytes,
        offline_bytes: measured_cost(transcript, Some(TAG_OFFLINE)).bytes,
    };
    (layers, totals)
}

/// Run all three parties in this process.
pub fn secure_run(
    graph: &NetworkGraph,
    weights: &WeightStore,
    input: &Array,
    kind: TransportKind,
    seed: u64,
    params: RingParams,
) -> Result<SecureRun> {
    let mut cluster = open_session(kind, seed, params)?;
    let [_, r1, _] = cluster.run(|s| {
        let mine = match s.id() {
            PartyId::P0 => PartyInputs {
                weights: Some(weights),
                input: None,
            },
            PartyId::P1 => PartyInputs {
                weights: None,
                input: Some(input),
            },
            _ => PartyInputs::default(),
        };
        run_party(s, graph, mine)
    })?;
    let transcript = cluster.transcript();
    let (layers, totals) = summarize(&transcript, &r1.layer_rounds);
    Ok(SecureRun {
        output: r1.output.expect("P1 receives the output"),
        transcript,
        layers,
        totals,
    })
}

/// Worst-case deviation, in ULPs, of the secure output from the exact
/// fixed-point oracle.
///
/// Each truncation may land one above the exact floor, and an error `e` in
/// a linear layer's input grows to at most `ceil(L * e)` where `L` is the
/// largest absolute row sum of its weights.
pub fn ulp_budget(graph: &NetworkGraph, weights: &WeightStore, params: &RingParams) -> Result<u64> {
    let shapes = graph.shapes()?;
    let scale = (params.scale as f64).exp2();
    let mut err: HashMap<&str, u64> = HashMap::new();
    err.insert(INPUT, 0);
    let grow = |e: u64, gain: f64| (e as f64 * gain - 1e-9).ceil().max(0.0) as u64 + 1;
    for l in &graph.layers {
        let ins: Vec<u64> = l.inputs.iter().map(|r| err[parse_ref(r).0]).collect();
        let e = ins.iter().copied().max().unwrap_or(0);
        let gain_of = |param: &str| -> Result<f64> {
            let a = weights.param(&l.name, param)?;
            let outs = *a.shape.last().unwrap_or(&1);
            let mut rows = vec![0.0f64; outs.max(1)];
            for (i, &w) in a.data.iter().enumerate() {
                rows[i % outs] += (w as f64 * scale).round().abs() / scale;
            }
            Ok(rows.into_iter().fold(0.0, f64::max))
        };
        let out = match &l.kind {
            LayerKind::Conv2d(_) | LayerKind::DwConv2d(_) | LayerKind::FullyConnected(_) => grow(e, gain_of("kernel")?),
            LayerKind::LeakyRelu => e + 1,
            LayerKind::PartialActivation(p) if p.inner == crate::protocols::ActivationKind::LeakyRelu => e + 1,
            LayerKind::AvgPool(p) => {
                let n = p.kernel * p.kernel;
                grow(e, n as f64 * averaging_weight(n, params)?)
            }
            LayerKind::GlobalAvgPool => {
                let s = &graph.input_shapes_of(&shapes, l)?[0];
                let n = s[0] * s[1];
                grow(e, n as f64 * averaging_weight(n, params)?)
            }
            LayerKind::ResidualAdd => ins.iter().sum(),
            _ => e,
        };
        err.insert(&l.name, out);
    }
    Ok(err[graph.output_name()])
}

fn averaging_weight(n: usize, params: &RingParams) -> Result<f64> {
    Ok(crate::ring::decode_fixed(crate::ring::encode_fixed(1.0 / n as f64, params)?, params))
}

/// Result of checking secure runs against the fixed-point oracle.
#[derive(Clone, Debug, serde::Serialize)]
pub struct CompareReport {
    pub graph: String,
    pub samples: usize,
    /// Largest elementwise deviation seen, in ULPs.
    pub max_deviation: u64,
    pub budget: u64,
    /// Largest deviation from the double-precision evaluation, as a real.
    pub max_float_error: f64,
    pub pass: bool,
}

impl CompareReport {
    pub fn to_text(&self) -> String {
        format!(
            "graph: {}\nsamples: {}\nmax deviation: {} ulp (budget {})\nmax error vs float: {:.6}\nverdict: {}\n",
            self.graph,
            self.samples,
            self.max_deviation,
            self.budget,
            self.max_float_error,
            if self.pass { "pass" } else { "fail" }
        )
    }
}

/// Signed distance between two ring values, in ULPs.
pub fn ulp_distance(a: u64, b: u64, bits: u32) -> u64 {
    let mask = if bits == 64 { u64::MAX } else { (1u64 << bits) - 1 };
    let d = a.wrapping_sub(b) & mask;
    crate::ring::to_signed(d, bits).unsigned_abs()
}

/// Run the network securely on `n` random inputs and compare each output
/// with the fixed-point and floating-point plaintext evaluations.
pub fn compare(
    graph: &NetworkGraph,
    weights: &WeightStore,
    n: usize,
    seed: u64,
    params: RingParams,
) -> Result<CompareReport> {
    weights.check_against(graph)?;
    let budget = ulp_budget(graph, weights, &params)?;
    let mut max_deviation = 0;
    let mut max_float_error = 0.0f64;
    for i in 0..n {
        let sample_seed = seed.wrapping_add(i as u64);
        let x = crate::netgraph::gen_input(&graph.input_shape, sample_seed ^ 0x1a2b_3c4d);
        let secure = secure_run(graph, weights, &x, TransportKind::InProcess, sample_seed, params)?;
        let oracle = crate::netgraph::eval_fixed(graph, weights, &encode_array(&x, &params)?, &params)?;
        for (&a, &b) in secure.output.data().iter().zip(oracle.data()) {
            max_deviation = max_deviation.max(ulp_distance(a, b, params.bits));
        }
        let float = crate::netgraph::eval_float(
            graph,
            weights,
            &crate::netgraph::FloatTensor {
                shape: x.shape.clone(),
                data: x.to_f64(),
            },
        )?;
        for (a, b) in secure.decoded(&params).iter().zip(&float.data) {
            max_float_error = max_float_error.max((a - b).abs());
        }
    }
    Ok(CompareReport {
        graph: graph.name.clone(),
        samples: n,
        max_deviation,
        budget,
        max_float_error,
        pass: max_deviation <= budget,
    })
}
