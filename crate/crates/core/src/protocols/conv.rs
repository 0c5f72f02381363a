use super::beaver::{beaver_products, pi_matmul, ProductDims};
use super::layout::{hwc, im2col, im2col_channel, Window};
use super::Secret;
use crate::error::{Error, Result};
use crate::ring::RingParams;
use crate::transport::Session;

fn add_bias(y: Secret, bias: Option<&Secret>) -> Result<Secret> {
    let Some(b) = bias else { return Ok(y) };
    let rows = y.shape()[0];
    let cols = y.shape()[1];
    if b.shape() != [cols] {
        return Err(Error::Shape(format!("bias {:?} does not match {} outputs", b.shape(), cols)));
    }
    let idx: Vec<Option<usize>> = (0..rows * cols).map(|i| Some(i % cols)).collect();
    y.add(&b.gather(&idx, vec![rows, cols])?)
}

/// Convolution of an HWC input with an HWIO kernel, lowered to im2col and a
/// single Beaver matrix product (two rounds). The product is truncated once
/// and the bias, encoded at the working scale, is added afterwards.
pub fn pi_conv2d(
    sess: &mut Session,
    x: &Secret,
    kernel: &Secret,
    bias: Option<&Secret>,
    stride: usize,
    padding: usize,
) -> Result<Secret> {
    let params = *sess.params();
    let (_, _, cin) = hwc(x.shape())?;
    let (f, f2, ki, o) = match *kernel.shape() {
        [a, b, c, d] => (a, b, c, d),
        _ => return Err(Error::Shape(format!("conv kernel {:?} is not f x f x i x o", kernel.shape()))),
    };
    if f != f2 || ki != cin {
        return Err(Error::Shape(format!(
            "conv kernel {:?} does not fit input {:?}",
            kernel.shape(),
            x.shape()
        )));
    }
    let win = Window {
        kernel: f,
        stride,
        padding,
    };
    let (idx, oh, ow) = im2col(x.shape(), win)?;
    let cols = x.gather(&idx, vec![oh * ow, f * f * cin])?;
    let k = kernel.reshape(vec![f * f * cin, o])?;
    let y = pi_matmul(sess, &cols, &k)?.truncate(&params);
    add_bias(y, bias)?.reshape(vec![oh, ow, o])
}

/// Depthwise convolution with an `f x f x C` kernel: one Beaver product per
/// channel, all sharing the same two rounds.
pub fn pi_dwconv2d(
    sess: &mut Session,
    x: &Secret,
    kernel: &Secret,
    bias: Option<&Secret>,
    stride: usize,
    padding: usize,
) -> Result<Secret> {
    let params = *sess.params();
    let (h, w, c) = hwc(x.shape())?;
    let f = match *kernel.shape() {
        [a, b, kc] if a == b && kc == c => a,
        _ => {
            return Err(Error::Shape(format!(
                "depthwise kernel {:?} does not fit input {:?}",
                kernel.shape(),
                x.shape()
            )))
        }
    };
    let win = Window {
        kernel: f,
        stride,
        padding,
    };
    let oh = win.output_dim(h)?;
    let ow = win.output_dim(w)?;
    let m = oh * ow;
    let mut lefts = Vec::with_capacity(c);
    let mut rights = Vec::with_capacity(c);
    for ch in 0..c {
        let idx = im2col_channel(x.shape(), win, ch)?;
        lefts.push(x.gather(&idx, vec![m, f * f])?);
        let kidx: Vec<Option<usize>> = (0..f * f).map(|t| Some(t * c + ch)).collect();
        rights.push(kernel.gather(&kidx, vec![f * f, 1])?);
    }
    let dims = ProductDims::MatMul { m, k: f * f, n: 1 };
    let items: Vec<(&Secret, &Secret, ProductDims)> = lefts
        .iter()
        .zip(&rights)
        .map(|(l, r)| (l, r, dims.clone()))
        .collect();
    let cols = beaver_products(sess, &items)?;
    let y = Secret::concat_last(&cols)?.truncate(&params);
    add_bias(y, bias)?.reshape(vec![oh, ow, c])
}

/// Fully connected layer: `[n_in] x [n_in, n_out] -> [n_out]`.
pub fn pi_fully_connected(sess: &mut Session, x: &Secret, weight: &Secret, bias: Option<&Secret>) -> Result<Secret> {
    let params: RingParams = *sess.params();
    let n_in = x.len();
    let row = x.reshape(vec![1, n_in])?;
    let y = pi_matmul(sess, &row, weight)?.truncate(&params);
    let n_out = y.shape()[1];
    add_bias(y, bias)?.reshape(vec![n_out])
}
