use std::collections::HashMap;

use super::spec::{parse_ref, LayerKind, NetworkGraph};
use super::weights::{Array, WeightStore};
use crate::error::{Error, Result};

/// Fold every batch-norm layer into the convolution feeding it.
///
/// Each bn layer must read a `conv2d` or `dwconv2d` whose only consumer is
/// that bn layer; anything else is a structure error.
pub fn fold_batchnorm(graph: &NetworkGraph, weights: &WeightStore) -> Result<(NetworkGraph, WeightStore)> {
    let mut g = graph.clone();
    let mut w = weights.clone();
    let mut consumers: HashMap<String, usize> = HashMap::new();
    for l in &g.layers {
        for r in &l.inputs {
            *consumers.entry(parse_ref(r).0.to_string()).or_default() += 1;
        }
    }
    let shapes = g.shapes()?;
    let mut renames: HashMap<String, String> = HashMap::new();
    let mut drop = vec![false; g.layers.len()];
    for i in 0..g.layers.len() {
        let LayerKind::BatchNorm(bn) = &g.layers[i].kind else {
            continue;
        };
        let eps = bn.eps;
        let bn_name = g.layers[i].name.clone();
        let src = match g.layers[i].inputs.as_slice() {
            [one] => parse_ref(one).0.to_string(),
            _ => return Err(Error::Structure(format!("batchnorm `{bn_name}` must have one input"))),
        };
        let j = g.index_of(&src).filter(|&j| {
            matches!(g.layers[j].kind, LayerKind::Conv2d(_) | LayerKind::DwConv2d(_))
                && consumers.get(&src) == Some(&1)
        });
        let Some(j) = j else {
            return Err(Error::Structure(format!(
                "batchnorm `{bn_name}` does not directly follow a convolution"
            )));
        };
        let channels = *shapes[j][0].last().unwrap();
        let get = |n: &str| -> Result<Vec<f64>> { Ok(w.param(&bn_name, n)?.to_f64()) };
        let (gamma, beta, mean, var) = (get("gamma")?, get("beta")?, get("mean")?, get("var")?);
        let scale: Vec<f64> = (0..channels).map(|c| gamma[c] / (var[c] + eps).sqrt()).collect();

        let kernel = w.param(&src, "kernel")?.clone();
        let data: Vec<f64> = kernel
            .to_f64()
            .iter()
            .enumerate()
            .map(|(idx, &v)| v * scale[idx % channels])
            .collect();
        let old_bias = match w.get(&format!("{src}.bias")) {
            Some(b) => b.to_f64(),
            None => vec![0.0; channels],
        };
        let bias: Vec<f64> = (0..channels)
            .map(|c| (old_bias[c] - mean[c]) * scale[c] + beta[c])
            .collect();
        w.insert(format!("{src}.kernel"), Array::from_f64(kernel.shape.clone(), &data)?);
        w.insert(format!("{src}.bias"), Array::from_f64(vec![channels], &bias)?);
        for p in ["gamma", "beta", "mean", "var"] {
            w.remove(&format!("{bn_name}.{p}"));
        }
        match &mut g.layers[j].kind {
            LayerKind::Conv2d(p) => p.bias = true,
            LayerKind::DwConv2d(p) => p.bias = true,
            _ => unreachable!(),
        }
        renames.insert(bn_name, src);
        drop[i] = true;
    }
    let mut keep = drop.iter().map(|d| !d);
    g.layers.retain(|_| keep.next().unwrap());
    for l in &mut g.layers {
        for r in &mut l.inputs {
            if let Some(to) = renames.get(parse_ref(r).0) {
                *r = to.clone();
            }
        }
    }
    g.validate()?;
    Ok((g, w))
}
