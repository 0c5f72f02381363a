use super::beaver::pi_mul;
use super::drelu::pi_drelu;
use super::layout::{hwc, pool_offsets, Window};
use super::Secret;
use crate::error::{Error, Result};
use crate::ring::{encode_fixed, RingParams};
use crate::transport::Session;

fn candidates(x: &Secret, win: Window) -> Result<(Vec<Secret>, Vec<usize>)> {
    let (maps, out_shape) = pool_offsets(x.shape(), win)?;
    let cands = maps
        .iter()
        .map(|m| x.gather(m, out_shape.clone()))
        .collect::<Result<Vec<_>>>()?;
    Ok((cands, out_shape))
}

/// Max pooling over an HWC tensor. Every window is reduced by `f*f - 1`
/// sequential pairwise maxima `b + H(a - b) * (a - b)`; all windows share
/// each stage's rounds. Exact.
pub fn pi_maxpool(sess: &mut Session, x: &Secret, kernel: usize, stride: usize) -> Result<Secret> {
    let win = Window {
        kernel,
        stride,
        padding: 0,
    };
    let (cands, _) = candidates(x, win)?;
    let mut iter = cands.into_iter();
    let mut best = iter.next().ok_or_else(|| Error::Shape("empty pooling window".into()))?;
    for a in iter {
        let diff = a.sub(&best)?;
        let bit = pi_drelu(sess, &diff)?;
        best = best.add(&pi_mul(sess, &bit, &diff)?)?;
    }
    Ok(best)
}

/// Average pooling, computed locally: window sum times `encode(1/f^2)`,
/// then truncation.
pub fn avgpool(x: &Secret, kernel: usize, stride: usize, params: &RingParams) -> Result<Secret> {
    let win = Window {
        kernel,
        stride,
        padding: 0,
    };
    let (cands, _) = candidates(x, win)?;
    let mut sum = cands[0].clone();
    for c in &cands[1..] {
        sum = sum.add(c)?;
    }
    let inv = encode_fixed(1.0 / (kernel * kernel) as f64, params)?;
    Ok(sum.scale(inv).truncate(params))
}

/// Mean over the spatial axes of an HWC tensor, giving `[C]`. Local.
pub fn global_avgpool(x: &Secret, params: &RingParams) -> Result<Secret> {
    let (h, w, c) = hwc(x.shape())?;
    let mut sum: Option<Secret> = None;
    for pos in 0..h * w {
        let idx: Vec<Option<usize>> = (0..c).map(|ch| Some(pos * c + ch)).collect();
        let plane = x.gather(&idx, vec![c])?;
        sum = Some(match sum {
            None => plane,
            Some(s) => s.add(&plane)?,
        });
    }
    let sum = sum.ok_or_else(|| Error::Shape("global pooling over an empty tensor".into()))?;
    let inv = encode_fixed(1.0 / (h * w) as f64, params)?;
    Ok(sum.scale(inv).truncate(params))
}
