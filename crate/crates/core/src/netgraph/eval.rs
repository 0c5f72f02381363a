//! Plaintext reference evaluation, in double precision or in the exact
//! fixed-point ring semantics the secure path follows (products truncated
//! exactly instead of share-locally).

use std::collections::HashMap;

use super::spec::{parse_ref, split_sizes, Layer, LayerKind, NetworkGraph, INPUT};
use super::weights::{Array, WeightStore};
use crate::error::{Error, Result};
use crate::protocols::{activated_channels, heaviside, ActivationKind, LEAKY_SLOPE};
use crate::ring::{encode_fixed, to_signed, truncate_value, RingParams, RingTensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EvalMode {
    Float,
    Fixed(RingParams),
}

#[derive(Clone, Debug, PartialEq)]
pub struct FloatTensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Evaluated {
    Float(FloatTensor),
    Fixed(RingTensor),
}

impl Evaluated {
    /// Values as reals (fixed-point results are decoded).
    pub fn to_f64(&self, params: &RingParams) -> Vec<f64> {
        match self {
            Evaluated::Float(t) => t.data.clone(),
            Evaluated::Fixed(t) => t.data().iter().map(|&v| crate::ring::decode_fixed(v, params)).collect(),
        }
    }
}

pub fn eval_plaintext(graph: &NetworkGraph, weights: &WeightStore, input: &Array, mode: EvalMode) -> Result<Evaluated> {
    match mode {
        EvalMode::Float => {
            let x = FloatTensor {
                shape: input.shape.clone(),
                data: input.to_f64(),
            };
            eval_float(graph, weights, &x).map(Evaluated::Float)
        }
        EvalMode::Fixed(params) => {
            let x = encode_array(input, &params)?;
            eval_fixed(graph, weights, &x, &params).map(Evaluated::Fixed)
        }
    }
}

/// Fixed-point encoding of a real array.
pub fn encode_array(a: &Array, params: &RingParams) -> Result<RingTensor> {
    let data = a
        .data
        .iter()
        .map(|&v| encode_fixed(v as f64, params))
        .collect::<Result<Vec<_>>>()?;
    RingTensor::new(params.bits, a.shape.clone(), data)
}

trait Domain {
    type V: Copy;
    fn weights(&self, a: &Array) -> Result<Vec<Self::V>>;
    fn zero(&self) -> Self::V;
    fn add(&self, a: Self::V, b: Self::V) -> Self::V;
    fn mul(&self, a: Self::V, b: Self::V) -> Self::V;
    /// Applied once after a sum of products.
    fn rescale(&self, v: Self::V) -> Self::V;
    fn activate(&self, kind: ActivationKind, v: Self::V) -> Result<Self::V>;
    fn max(&self, a: Self::V, b: Self::V) -> Self::V;
    fn reciprocal(&self, n: usize) -> Result<Self::V>;
    fn batchnorm(&self, layer: &str, x: Self::V, gamma: f64, beta: f64, mean: f64, var: f64, eps: f64) -> Result<Self::V>;
}

struct Float;

impl Domain for Float {
    type V = f64;
    fn weights(&self, a: &Array) -> Result<Vec<f64>> {
        Ok(a.to_f64())
    }
    fn zero(&self) -> f64 {
        0.0
    }
    fn add(&self, a: f64, b: f64) -> f64 {
        a + b
    }
    fn mul(&self, a: f64, b: f64) -> f64 {
        a * b
    }
    fn rescale(&self, v: f64) -> f64 {
        v
    }
    fn activate(&self, kind: ActivationKind, v: f64) -> Result<f64> {
        Ok(match kind {
            ActivationKind::Relu => v.max(0.0),
            ActivationKind::Relu6 => v.clamp(0.0, 6.0),
            ActivationKind::LeakyRelu => v.max(LEAKY_SLOPE * v),
            ActivationKind::None => v,
        })
    }
    fn max(&self, a: f64, b: f64) -> f64 {
        a.max(b)
    }
    fn reciprocal(&self, n: usize) -> Result<f64> {
        Ok(1.0 / n as f64)
    }
    fn batchnorm(&self, _: &str, x: f64, gamma: f64, beta: f64, mean: f64, var: f64, eps: f64) -> Result<f64> {
        Ok(gamma * (x - mean) / (var + eps).sqrt() + beta)
    }
}

struct Fixed {
    params: RingParams,
    mask: u64,
}

impl Fixed {
    fn signed(&self, v: u64) -> i64 {
        to_signed(v, self.params.bits)
    }
}

impl Domain for Fixed {
    type V = u64;
    fn weights(&self, a: &Array) -> Result<Vec<u64>> {
        a.data.iter().map(|&v| encode_fixed(v as f64, &self.params)).collect()
    }
    fn zero(&self) -> u64 {
        0
    }
    fn add(&self, a: u64, b: u64) -> u64 {
        a.wrapping_add(b) & self.mask
    }
    fn mul(&self, a: u64, b: u64) -> u64 {
        a.wrapping_mul(b) & self.mask
    }
    fn rescale(&self, v: u64) -> u64 {
        truncate_value(v, &self.params)
    }
    fn activate(&self, kind: ActivationKind, v: u64) -> Result<u64> {
        let p = &self.params;
        Ok(match kind {
            ActivationKind::Relu => {
                if self.signed(v) >= 0 {
                    v
                } else {
                    0
                }
            }
            ActivationKind::Relu6 => {
                let six = encode_fixed(6.0, p)?;
                let s = self.signed(v);
                if s < 0 {
                    0
                } else if s > self.signed(six) {
                    six
                } else {
                    v
                }
            }
            ActivationKind::LeakyRelu => {
                let lo = encode_fixed(LEAKY_SLOPE, p)?;
                let hi = encode_fixed(1.0 - LEAKY_SLOPE, p)?;
                let coeff = self.add(self.mul(hi, heaviside(v, p.bits)), lo);
                self.rescale(self.mul(v, coeff))
            }
            ActivationKind::None => v,
        })
    }
    fn max(&self, a: u64, b: u64) -> u64 {
        if self.signed(a) >= self.signed(b) {
            a
        } else {
            b
        }
    }
    fn reciprocal(&self, n: usize) -> Result<u64> {
        encode_fixed(1.0 / n as f64, &self.params)
    }
    fn batchnorm(&self, layer: &str, _: u64, _: f64, _: f64, _: f64, _: f64, _: f64) -> Result<u64> {
        Err(Error::Structure(format!(
            "batchnorm layer `{layer}` must be folded before fixed-point evaluation"
        )))
    }
}

pub fn eval_float(graph: &NetworkGraph, weights: &WeightStore, input: &FloatTensor) -> Result<FloatTensor> {
    let (shape, data) = run(graph, weights, &Float, &input.shape, input.data.clone())?;
    Ok(FloatTensor { shape, data })
}

pub fn eval_fixed(graph: &NetworkGraph, weights: &WeightStore, input: &RingTensor, params: &RingParams) -> Result<RingTensor> {
    if input.bits() != params.bits {
        return Err(Error::Params(format!(
            "input has {} bits, evaluation uses {}",
            input.bits(),
            params.bits
        )));
    }
    let dom = Fixed {
        params: *params,
        mask: params.mask(),
    };
    let (shape, data) = run(graph, weights, &dom, input.shape(), input.data().to_vec())?;
    RingTensor::new(params.bits, shape, data)
}

type Value<V> = (Vec<usize>, Vec<V>);

fn run<D: Domain>(graph: &NetworkGraph, weights: &WeightStore, dom: &D, in_shape: &[usize], input: Vec<D::V>) -> Result<Value<D::V>> {
    if in_shape != graph.input_shape.as_slice() {
        return Err(Error::Shape(format!(
            "input shape {:?} does not match graph input {:?}",
            in_shape, graph.input_shape
        )));
    }
    let mut values: HashMap<String, Vec<Value<D::V>>> = HashMap::new();
    values.insert(INPUT.to_string(), vec![(in_shape.to_vec(), input)]);
    for l in &graph.layers {
        let ins = l
            .inputs
            .iter()
            .map(|r| {
                let (name, port) = parse_ref(r);
                values
                    .get(name)
                    .and_then(|ports| ports.get(port.unwrap_or(0)))
                    .ok_or_else(|| Error::Structure(format!("layer `{}` reads missing `{}`", l.name, r)))
            })
            .collect::<Result<Vec<_>>>()?;
        let out = eval_layer(dom, weights, l, &ins)?;
        values.insert(l.name.clone(), out);
    }
    let mut last = values
        .remove(graph.output_name())
        .ok_or_else(|| Error::Structure("graph produced no output".into()))?;
    Ok(last.swap_remove(0))
}

fn dims3(shape: &[usize], layer: &Layer) -> Result<(usize, usize, usize)> {
    match *shape {
        [h, w, c] => Ok((h, w, c)),
        _ => Err(Error::Shape(format!("layer `{}` expects HxWxC, got {:?}", layer.name, shape))),
    }
}

fn out_dim(input: usize, k: usize, s: usize, p: usize) -> usize {
    (input + 2 * p - k) / s + 1
}

#[allow(clippy::too_many_arguments)]
fn conv_loop<D: Domain>(
    dom: &D,
    x: &[D::V],
    (h, w, c): (usize, usize, usize),
    kernel: &[D::V],
    bias: Option<&[D::V]>,
    k: usize,
    stride: usize,
    pad: usize,
    out_c: usize,
    depthwise: bool,
) -> Value<D::V> {
    let oh = out_dim(h, k, stride, pad);
    let ow = out_dim(w, k, stride, pad);
    let mut y = Vec::with_capacity(oh * ow * out_c);
    for oy in 0..oh {
        for ox in 0..ow {
            for oc in 0..out_c {
                let mut acc = dom.zero();
                for ky in 0..k {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    if iy < 0 || iy as usize >= h {
                        continue;
                    }
                    for kx in 0..k {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        if ix < 0 || ix as usize >= w {
                            continue;
                        }
                        let base = (iy as usize * w + ix as usize) * c;
                        if depthwise {
                            let kv = kernel[(ky * k + kx) * c + oc];
                            acc = dom.add(acc, dom.mul(x[base + oc], kv));
                        } else {
                            for ic in 0..c {
                                let kv = kernel[((ky * k + kx) * c + ic) * out_c + oc];
                                acc = dom.add(acc, dom.mul(x[base + ic], kv));
                            }
                        }
                    }
                }
                let mut v = dom.rescale(acc);
                if let Some(b) = bias {
                    v = dom.add(v, b[oc]);
                }
                y.push(v);
            }
        }
    }
    (vec![oh, ow, out_c], y)
}

fn param<D: Domain>(dom: &D, weights: &WeightStore, layer: &Layer, name: &str, want: &[usize]) -> Result<Vec<D::V>> {
    let a = weights.param(&layer.name, name)?;
    if a.shape != want {
        return Err(Error::Shape(format!(
            "weights `{}.{}` have shape {:?}, layer expects {:?}",
            layer.name, name, a.shape, want
        )));
    }
    dom.weights(a)
}

fn pool_loop<D: Domain>(
    x: &[D::V],
    (h, w, c): (usize, usize, usize),
    k: usize,
    stride: usize,
    mut fold: impl FnMut(&[D::V]) -> D::V,
) -> Value<D::V> {
    let oh = out_dim(h, k, stride, 0);
    let ow = out_dim(w, k, stride, 0);
    let mut y = Vec::with_capacity(oh * ow * c);
    let mut window = Vec::with_capacity(k * k);
    for oy in 0..oh {
        for ox in 0..ow {
            for ch in 0..c {
                window.clear();
                for ky in 0..k {
                    for kx in 0..k {
                        window.push(x[((oy * stride + ky) * w + ox * stride + kx) * c + ch]);
                    }
                }
                y.push(fold(&window));
            }
        }
    }
    (vec![oh, ow, c], y)
}

fn eval_layer<D: Domain>(dom: &D, weights: &WeightStore, l: &Layer, ins: &[&Value<D::V>]) -> Result<Vec<Value<D::V>>> {
    let (shape, x) = (&ins[0].0, &ins[0].1);
    let last = *shape.last().unwrap_or(&1);
    let one = |v: Value<D::V>| Ok(vec![v]);
    match &l.kind {
        LayerKind::Conv2d(p) => {
            let dims = dims3(shape, l)?;
            let kernel = param(dom, weights, l, "kernel", &[p.kernel, p.kernel, dims.2, p.out_channels])?;
            let bias = if p.bias {
                Some(param(dom, weights, l, "bias", &[p.out_channels])?)
            } else {
                None
            };
            one(conv_loop(dom, x, dims, &kernel, bias.as_deref(), p.kernel, p.stride, p.padding, p.out_channels, false))
        }
        LayerKind::DwConv2d(p) => {
            let dims = dims3(shape, l)?;
            let kernel = param(dom, weights, l, "kernel", &[p.kernel, p.kernel, dims.2])?;
            let bias = if p.bias { Some(param(dom, weights, l, "bias", &[dims.2])?) } else { None };
            one(conv_loop(dom, x, dims, &kernel, bias.as_deref(), p.kernel, p.stride, p.padding, dims.2, true))
        }
        LayerKind::FullyConnected(p) => {
            let n = x.len();
            let kernel = param(dom, weights, l, "kernel", &[n, p.out_features])?;
            let bias = if p.bias {
                Some(param(dom, weights, l, "bias", &[p.out_features])?)
            } else {
                None
            };
            let mut y = Vec::with_capacity(p.out_features);
            for o in 0..p.out_features {
                let mut acc = dom.zero();
                for (i, &xv) in x.iter().enumerate() {
                    acc = dom.add(acc, dom.mul(xv, kernel[i * p.out_features + o]));
                }
                let mut v = dom.rescale(acc);
                if let Some(b) = &bias {
                    v = dom.add(v, b[o]);
                }
                y.push(v);
            }
            one((vec![p.out_features], y))
        }
        LayerKind::Relu | LayerKind::Relu6 | LayerKind::LeakyRelu => {
            let kind = l.kind.activation().unwrap();
            let y = x.iter().map(|&v| dom.activate(kind, v)).collect::<Result<_>>()?;
            one((shape.clone(), y))
        }
        LayerKind::PartialActivation(p) => {
            let k = if p.inner == ActivationKind::None {
                0
            } else {
                activated_channels(p.ratio, last)
            };
            let y = x
                .iter()
                .enumerate()
                .map(|(i, &v)| if i % last < k { dom.activate(p.inner, v) } else { Ok(v) })
                .collect::<Result<_>>()?;
            one((shape.clone(), y))
        }
        LayerKind::MaxPool(p) => {
            let dims = dims3(shape, l)?;
            one(pool_loop::<D>(x, dims, p.kernel, p.stride, |win| {
                win[1..].iter().fold(win[0], |m, &v| dom.max(v, m))
            }))
        }
        LayerKind::AvgPool(p) => {
            let dims = dims3(shape, l)?;
            let inv = dom.reciprocal(p.kernel * p.kernel)?;
            one(pool_loop::<D>(x, dims, p.kernel, p.stride, |win| {
                let sum = win.iter().fold(dom.zero(), |s, &v| dom.add(s, v));
                dom.rescale(dom.mul(sum, inv))
            }))
        }
        LayerKind::GlobalAvgPool => {
            let (h, w, c) = dims3(shape, l)?;
            let inv = dom.reciprocal(h * w)?;
            let y = (0..c)
                .map(|ch| {
                    let sum = (0..h * w).fold(dom.zero(), |s, pos| dom.add(s, x[pos * c + ch]));
                    dom.rescale(dom.mul(sum, inv))
                })
                .collect();
            one((vec![c], y))
        }
        LayerKind::ChannelSplit(p) => {
            let sizes = split_sizes(&p.fractions, last).map_err(Error::Shape)?;
            let rows = x.len() / last;
            let mut start = 0;
            let mut outs = Vec::with_capacity(sizes.len());
            for s in sizes {
                let mut y = Vec::with_capacity(rows * s);
                for r in 0..rows {
                    y.extend_from_slice(&x[r * last + start..r * last + start + s]);
                }
                let mut sh = shape.clone();
                *sh.last_mut().unwrap() = s;
                outs.push((sh, y));
                start += s;
            }
            Ok(outs)
        }
        LayerKind::Concat => {
            let rows = x.len() / last;
            let total: usize = ins.iter().map(|v| *v.0.last().unwrap()).sum();
            let mut y = Vec::with_capacity(rows * total);
            for r in 0..rows {
                for v in ins {
                    let c = *v.0.last().unwrap();
                    y.extend_from_slice(&v.1[r * c..(r + 1) * c]);
                }
            }
            let mut sh = shape.clone();
            *sh.last_mut().unwrap() = total;
            one((sh, y))
        }
        LayerKind::ChannelShuffle(p) => {
            let per = last / p.groups;
            let mut y = Vec::with_capacity(x.len());
            for row in x.chunks(last) {
                for k in 0..last {
                    y.push(row[(k % p.groups) * per + k / p.groups]);
                }
            }
            one((shape.clone(), y))
        }
        LayerKind::ResidualAdd => {
            let b = &ins[1].1;
            one((shape.clone(), x.iter().zip(b).map(|(&a, &b)| dom.add(a, b)).collect()))
        }
        LayerKind::Flatten => one((vec![x.len()], x.clone())),
        LayerKind::BatchNorm(p) => {
            let get = |n: &str| -> Result<Vec<f64>> {
                let a = weights.param(&l.name, n)?;
                if a.shape != [last] {
                    return Err(Error::Shape(format!("weights `{}.{}` have shape {:?}", l.name, n, a.shape)));
                }
                Ok(a.to_f64())
            };
            let (g, b, m, v) = (get("gamma")?, get("beta")?, get("mean")?, get("var")?);
            let y = x
                .iter()
                .enumerate()
                .map(|(i, &xv)| {
                    let c = i % last;
                    dom.batchnorm(&l.name, xv, g[c], b[c], m[c], v[c], p.eps)
                })
                .collect::<Result<_>>()?;
            one((shape.clone(), y))
        }
    }
}
