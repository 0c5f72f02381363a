//! Index maps for local re-layout of HWC tensors (im2col, pooling windows,
//! channel slicing and shuffling). Shares are re-laid out by gathering, so
//! every map here is a zero-communication operation.

use crate::error::{Error, Result};

/// Spatial geometry of a sliding-window operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Window {
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl Window {
    pub fn output_dim(&self, input: usize) -> Result<usize> {
        let padded = input + 2 * self.padding;
        if self.kernel == 0 || self.stride == 0 || padded < self.kernel {
            return Err(Error::Shape(format!(
                "window {}x{} stride {} does not fit input {} (padding {})",
                self.kernel, self.kernel, self.stride, input, self.padding
            )));
        }
        Ok((padded - self.kernel) / self.stride + 1)
    }

    /// Like [`Window::output_dim`] but requires the windows to tile the
    /// input exactly.
    pub fn output_dim_exact(&self, input: usize) -> Result<usize> {
        let out = self.output_dim(input)?;
        if (input + 2 * self.padding - self.kernel) % self.stride != 0 {
            return Err(Error::Shape(format!(
                "input {} is not divisible by kernel {} / stride {}",
                input, self.kernel, self.stride
            )));
        }
        Ok(out)
    }
}

pub fn hwc(shape: &[usize]) -> Result<(usize, usize, usize)> {
    match *shape {
        [h, w, c] => Ok((h, w, c)),
        _ => Err(Error::Shape(format!("expected an HxWxC tensor, got {shape:?}"))),
    }
}

/// im2col over all channels: rows are output positions (row-major), columns
/// run over (ky, kx, channel). Returns the map and `(out_h, out_w)`.
pub fn im2col(shape: &[usize], win: Window) -> Result<(Vec<Option<usize>>, usize, usize)> {
    let (h, w, c) = hwc(shape)?;
    let oh = win.output_dim(h)?;
    let ow = win.output_dim(w)?;
    let k = win.kernel;
    let mut idx = Vec::with_capacity(oh * ow * k * k * c);
    for oy in 0..oh {
        for ox in 0..ow {
            for ky in 0..k {
                for kx in 0..k {
                    let y = (oy * win.stride + ky) as isize - win.padding as isize;
                    let x = (ox * win.stride + kx) as isize - win.padding as isize;
                    let inside = y >= 0 && x >= 0 && (y as usize) < h && (x as usize) < w;
                    for ch in 0..c {
                        idx.push(inside.then(|| (y as usize * w + x as usize) * c + ch));
                    }
                }
            }
        }
    }
    Ok((idx, oh, ow))
}

/// im2col restricted to one channel: `out_h*out_w` rows by `k*k` columns.
pub fn im2col_channel(shape: &[usize], win: Window, channel: usize) -> Result<Vec<Option<usize>>> {
    let (h, w, c) = hwc(shape)?;
    let oh = win.output_dim(h)?;
    let ow = win.output_dim(w)?;
    let k = win.kernel;
    let mut idx = Vec::with_capacity(oh * ow * k * k);
    for oy in 0..oh {
        for ox in 0..ow {
            for ky in 0..k {
                for kx in 0..k {
                    let y = (oy * win.stride + ky) as isize - win.padding as isize;
                    let x = (ox * win.stride + kx) as isize - win.padding as isize;
                    let inside = y >= 0 && x >= 0 && (y as usize) < h && (x as usize) < w;
                    idx.push(inside.then(|| (y as usize * w + x as usize) * c + channel));
                }
            }
        }
    }
    Ok(idx)
}

/// For pooling: one map per window offset; map `t` picks the `t`-th
/// element of every window, laid out as the HWC output.
pub fn pool_offsets(shape: &[usize], win: Window) -> Result<(Vec<Vec<Option<usize>>>, Vec<usize>)> {
    let (h, w, c) = hwc(shape)?;
    let oh = win.output_dim_exact(h)?;
    let ow = win.output_dim_exact(w)?;
    let k = win.kernel;
    let mut maps = Vec::with_capacity(k * k);
    for ky in 0..k {
        for kx in 0..k {
            let mut idx = Vec::with_capacity(oh * ow * c);
            for oy in 0..oh {
                for ox in 0..ow {
                    let y = (oy * win.stride + ky) as isize - win.padding as isize;
                    let x = (ox * win.stride + kx) as isize - win.padding as isize;
                    let inside = y >= 0 && x >= 0 && (y as usize) < h && (x as usize) < w;
                    for ch in 0..c {
                        idx.push(inside.then(|| (y as usize * w + x as usize) * c + ch));
                    }
                }
            }
            maps.push(idx);
        }
    }
    Ok((maps, vec![oh, ow, c]))
}

/// Channels `[start, end)` of a tensor whose last axis is channels.
pub fn channel_slice(shape: &[usize], start: usize, end: usize) -> Result<(Vec<Option<usize>>, Vec<usize>)> {
    let c = *shape.last().ok_or_else(|| Error::Shape("scalar has no channels".into()))?;
    if start > end || end > c {
        return Err(Error::Shape(format!("channel range {start}..{end} outside 0..{c}")));
    }
    let rows: usize = shape[..shape.len() - 1].iter().product();
    let width = end - start;
    let mut idx = Vec::with_capacity(rows * width);
    for r in 0..rows {
        for ch in start..end {
            idx.push(Some(r * c + ch));
        }
    }
    let mut out = shape.to_vec();
    *out.last_mut().unwrap() = width;
    Ok((idx, out))
}

/// Channel shuffle with `groups` groups: view channels as
/// `(groups, C/groups)`, transpose, flatten.
pub fn channel_shuffle(shape: &[usize], groups: usize) -> Result<Vec<Option<usize>>> {
    let c = *shape.last().ok_or_else(|| Error::Shape("scalar has no channels".into()))?;
    if groups == 0 || c % groups != 0 {
        return Err(Error::Shape(format!("{c} channels cannot be split into {groups} groups")));
    }
    let per = c / groups;
    let rows: usize = shape[..shape.len() - 1].iter().product();
    let mut idx = Vec::with_capacity(rows * c);
    for r in 0..rows {
        for k in 0..c {
            let (j, g) = (k / groups, k % groups);
            idx.push(Some(r * c + g * per + j));
        }
    }
    Ok(idx)
}
