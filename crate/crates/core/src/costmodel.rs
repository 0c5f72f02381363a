//! Analytic round and communication cost of secure layers.
//!
//! Element-wise layers cost a constant number of rounds regardless of
//! their size; bits grow linearly. Layers compose sequentially, so a
//! network costs the sum of its layers, parallel branches included.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netgraph::{LayerKind, NetworkGraph};
use crate::protocols::{activated_channels, ActivationKind};
use crate::ring::RingParams;
use crate::transport::MeasuredCost;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    pub bits: u32,
    pub field: u64,
    /// `log2(field)`, not rounded.
    pub log_p: f64,
    /// Bytes per megabyte.
    pub mb_unit: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        CostParams::new(64, 67)
    }
}

impl CostParams {
    pub fn new(bits: u32, field: u64) -> Self {
        CostParams {
            bits,
            field,
            log_p: (field as f64).log2(),
            mb_unit: 1e6,
        }
    }

    pub fn from_ring(p: &RingParams) -> Self {
        CostParams::new(p.bits, p.field)
    }

    fn l(&self) -> f64 {
        self.bits as f64
    }

    /// Bits per element of one ReLU.
    pub fn relu_bits(&self) -> f64 {
        8.0 * self.l() * self.log_p + 24.0 * self.l()
    }

    pub fn drelu_bits(&self) -> f64 {
        8.0 * self.l() * self.log_p + 19.0 * self.l()
    }

    pub fn compare_bits(&self) -> f64 {
        8.0 * self.l() * self.log_p + 29.0 * self.l()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Online,
    Offline,
    Local,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerCost {
    pub name: String,
    pub kind: String,
    pub rounds: u64,
    pub bits: f64,
    pub phase: Phase,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measured: Option<MeasuredCost>,
}

impl LayerCost {
    fn online(kind: &str, rounds: u64, bits: f64) -> LayerCost {
        if rounds == 0 && bits == 0.0 {
            return LayerCost::local(kind);
        }
        LayerCost {
            name: String::new(),
            kind: kind.to_string(),
            rounds,
            bits,
            phase: Phase::Online,
            note: None,
            measured: None,
        }
    }

    fn local(kind: &str) -> LayerCost {
        LayerCost {
            name: String::new(),
            kind: kind.to_string(),
            rounds: 0,
            bits: 0.0,
            phase: Phase::Local,
            note: None,
            measured: None,
        }
    }

    pub fn bytes(&self) -> f64 {
        self.bits / 8.0
    }

    pub fn mb(&self, p: &CostParams) -> f64 {
        self.bytes() / p.mb_unit
    }
}

/// Convolution of an `m x m x i` input with `o` kernels of size `f x f`.
pub fn conv_cost(m: usize, f: usize, i: usize, o: usize, p: &CostParams) -> LayerCost {
    conv_cost_area(m * m, f, i, o, p)
}

/// Like [`conv_cost`] with `area` output positions (`m^2` for square maps).
pub fn conv_cost_area(area: usize, f: usize, i: usize, o: usize, p: &CostParams) -> LayerCost {
    let (a, f2, i, o) = (area as f64, (f * f) as f64, i as f64, o as f64);
    LayerCost::online("conv2d", 2, (2.0 * a * f2 * i + 2.0 * f2 * o * i + a * o) * p.l())
}

/// One scalar product (the `m = f = i = o = 1` convolution).
pub fn scalar_matmul_cost(p: &CostParams) -> LayerCost {
    let mut c = conv_cost(1, 1, 1, 1, p);
    c.kind = "matmul".into();
    c
}

pub fn relu_cost(n: usize, p: &CostParams) -> LayerCost {
    LayerCost::online("relu", if n > 0 { 10 } else { 0 }, n as f64 * p.relu_bits())
}

pub fn drelu_cost(n: usize, p: &CostParams) -> LayerCost {
    LayerCost::online("drelu", if n > 0 { 8 } else { 0 }, n as f64 * p.drelu_bits())
}

pub fn relu6_cost(n: usize, p: &CostParams) -> LayerCost {
    let r = relu_cost(n, p);
    LayerCost::online("relu6", 2 * r.rounds, 2.0 * r.bits)
}

pub fn leaky_relu_cost(n: usize, p: &CostParams) -> LayerCost {
    let r = relu_cost(n, p);
    LayerCost::online("leakyrelu", r.rounds, r.bits)
}

pub fn activation_cost(kind: ActivationKind, n: usize, p: &CostParams) -> LayerCost {
    match kind {
        ActivationKind::Relu => relu_cost(n, p),
        ActivationKind::Relu6 => relu6_cost(n, p),
        ActivationKind::LeakyRelu => leaky_relu_cost(n, p),
        ActivationKind::None => LayerCost::local("none"),
    }
}

/// Max pooling with an `f x f` window producing `n_out` elements.
pub fn maxpool_cost(n_out: usize, f: usize, p: &CostParams) -> LayerCost {
    let stages = (f * f).saturating_sub(1);
    if n_out == 0 {
        return LayerCost::local("maxpool");
    }
    LayerCost::online(
        "maxpool",
        9 * stages as u64,
        n_out as f64 * p.compare_bits() * stages as f64,
    )
}

pub fn avgpool_cost() -> LayerCost {
    LayerCost::local("avgpool")
}

/// `n` elements over `channels` channels, activating `ceil(ratio * C)`.
pub fn partial_activation_cost(n: usize, channels: usize, ratio: f64, inner: ActivationKind, p: &CostParams) -> LayerCost {
    let k = activated_channels(ratio, channels);
    let full = activation_cost(inner, n, p);
    if k == 0 || full.rounds == 0 {
        return LayerCost::local("partial_activation");
    }
    LayerCost::online(
        "partial_activation",
        full.rounds,
        full.bits * k as f64 / channels as f64,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub graph: String,
    pub params: CostParams,
    pub layers: Vec<LayerCost>,
    pub total_rounds: u64,
    pub total_bits: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measured: Option<MeasuredTotals>,
}

/// Transcript figures for a whole secure run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasuredTotals {
    pub rounds: u64,
    pub bytes: u64,
    /// Bytes of dealer traffic tagged `offline`.
    pub offline_bytes: u64,
}

impl CostReport {
    pub fn from_layers(graph: &str, params: CostParams, layers: Vec<LayerCost>) -> CostReport {
        let total_rounds = layers.iter().map(|l| l.rounds).sum();
        let total_bits = layers.iter().map(|l| l.bits).sum();
        CostReport {
            graph: graph.to_string(),
            params,
            layers,
            total_rounds,
            total_bits,
            measured: None,
        }
    }

    pub fn total_bytes(&self) -> f64 {
        self.total_bits / 8.0
    }

    pub fn total_mb(&self) -> f64 {
        self.total_bytes() / self.params.mb_unit
    }

    /// Bits spent in activation layers.
    pub fn activation_bits(&self) -> f64 {
        self.layers
            .iter()
            .filter(|l| matches!(l.kind.as_str(), "relu" | "relu6" | "leakyrelu" | "partial_activation"))
            .map(|l| l.bits)
            .sum()
    }

    pub fn to_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report serializes");
        let p = &self.params;
        if let Some(rows) = v["layers"].as_array_mut() {
            for (row, l) in rows.iter_mut().zip(&self.layers) {
                row["bytes"] = l.bytes().into();
                row["mb"] = l.mb(p).into();
            }
        }
        v["total_bytes"] = self.total_bytes().into();
        v["total_mb"] = self.total_mb().into();
        let mut s = serde_json::to_string_pretty(&v).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let p = &self.params;
        let with_measured = self.layers.iter().any(|l| l.measured.is_some());
        let mut rows: Vec<Vec<String>> = vec![{
            let mut h = vec!["layer", "kind", "rounds", "bits", "MB", "phase"];
            if with_measured {
                h.extend(["meas.rounds", "meas.bytes"]);
            }
            h.push("note");
            h.into_iter().map(String::from).collect()
        }];
        for l in &self.layers {
            let mut r = vec![
                l.name.clone(),
                l.kind.clone(),
                l.rounds.to_string(),
                format!("{:.1}", l.bits),
                format!("{:.3}", l.mb(p)),
                format!("{:?}", l.phase).to_lowercase(),
            ];
            if with_measured {
                match l.measured {
                    Some(m) => r.extend([m.rounds.to_string(), m.bytes.to_string()]),
                    None => r.extend([String::new(), String::new()]),
                }
            }
            r.push(l.note.clone().unwrap_or_default());
            rows.push(r);
        }
        let cols = rows[0].len();
        let widths: Vec<usize> = (0..cols)
            .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        writeln!(out, "graph: {}", self.graph).unwrap();
        for r in &rows {
            let line: Vec<String> = r
                .iter()
                .enumerate()
                .map(|(c, s)| {
                    if (2..5).contains(&c) || (with_measured && (6..8).contains(&c)) {
                        format!("{s:>w$}", w = widths[c])
                    } else {
                        format!("{s:<w$}", w = widths[c])
                    }
                })
                .collect();
            writeln!(out, "{}", line.join("  ").trim_end()).unwrap();
        }
        writeln!(
            out,
            "total: {} rounds, {:.3} MB ({:.1} bits)",
            self.total_rounds,
            self.total_mb(),
            self.total_bits
        )
        .unwrap();
        if let Some(m) = &self.measured {
            writeln!(
                out,
                "measured: {} rounds, {} bytes ({} offline)",
                m.rounds, m.bytes, m.offline_bytes
            )
            .unwrap();
        }
        out
    }
}

/// Price every layer of a validated graph.
pub fn network_cost(graph: &NetworkGraph, p: &CostParams) -> Result<CostReport> {
    let shapes = graph.shapes()?;
    let mut layers = Vec::with_capacity(graph.layers.len());
    for (idx, l) in graph.layers.iter().enumerate() {
        let ins = graph.input_shapes_of(&shapes, l)?;
        let x = &ins[0];
        let out = &shapes[idx][0];
        let n: usize = x.iter().product();
        let channels = *x.last().unwrap_or(&1);
        let area = |s: &[usize]| s[0] * s[1];
        let mut cost = match &l.kind {
            LayerKind::Conv2d(c) => conv_cost_area(area(out), c.kernel, channels, c.out_channels, p),
            LayerKind::DwConv2d(c) => {
                let one = conv_cost_area(area(out), c.kernel, 1, 1, p);
                let mut cost = LayerCost::online("dwconv2d", one.rounds, one.bits * channels as f64);
                cost.note = Some("depthwise priced per channel (extrapolated)".into());
                cost
            }
            LayerKind::FullyConnected(c) => {
                let mut cost = conv_cost_area(1, 1, n, c.out_features, p);
                cost.kind = "fullyconnected".into();
                cost
            }
            LayerKind::Relu => relu_cost(n, p),
            LayerKind::Relu6 => relu6_cost(n, p),
            LayerKind::LeakyRelu => leaky_relu_cost(n, p),
            LayerKind::PartialActivation(pa) => partial_activation_cost(n, channels, pa.ratio, pa.inner, p),
            LayerKind::MaxPool(pool) => maxpool_cost(out.iter().product(), pool.kernel, p),
            LayerKind::AvgPool(_) => avgpool_cost(),
            LayerKind::BatchNorm(_) => {
                return Err(Error::Unpriced {
                    layer: l.name.clone(),
                    kind: l.kind.name().into(),
                })
            }
            other => LayerCost::local(other.name()),
        };
        cost.name = l.name.clone();
        cost.kind = l.kind.name().to_string();
        layers.push(cost);
    }
    Ok(CostReport::from_layers(&graph.name, *p, layers))
}
