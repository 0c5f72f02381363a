use super::params::{mask, word_bytes};
use crate::error::{Error, Result};

/// Row-major tensor of elements of `Z_{2^bits}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RingTensor {
    bits: u32,
    shape: Vec<usize>,
    data: Vec<u64>,
}

/// Elementwise operation selector for [`ring_arith`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RingOp {
    Add,
    Sub,
    Neg,
    Mul,
    ScalarMul,
}

/// Right-hand operand of [`ring_arith`].
#[derive(Clone, Debug)]
pub enum Operand<'a> {
    Tensor(&'a RingTensor),
    Scalar(u64),
}

/// Single entry point for local wrapping arithmetic.
///
/// Tensor operands must have identical shapes; a scalar operand is
/// broadcast. `Neg` ignores the right-hand side.
pub fn ring_arith(op: RingOp, a: &RingTensor, b: Operand<'_>) -> Result<RingTensor> {
    match (op, b) {
        (RingOp::Neg, _) => Ok(a.neg()),
        (RingOp::Add, Operand::Tensor(b)) => a.add(b),
        (RingOp::Add, Operand::Scalar(s)) => Ok(a.add_scalar(s)),
        (RingOp::Sub, Operand::Tensor(b)) => a.sub(b),
        (RingOp::Sub, Operand::Scalar(s)) => Ok(a.add_scalar(s.wrapping_neg())),
        (RingOp::Mul, Operand::Tensor(b)) => a.mul(b),
        (RingOp::Mul, Operand::Scalar(s)) | (RingOp::ScalarMul, Operand::Scalar(s)) => {
            Ok(a.scalar_mul(s))
        }
        (RingOp::ScalarMul, Operand::Tensor(b)) => {
            if b.len() != 1 {
                return Err(Error::Shape(format!(
                    "scalar multiply expects a one-element operand, got shape {:?}",
                    b.shape
                )));
            }
            Ok(a.scalar_mul(b.data[0]))
        }
    }
}

impl RingTensor {
    pub fn new(bits: u32, shape: Vec<usize>, data: Vec<u64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Shape(format!(
                "shape {:?} needs {} elements, got {}",
                shape,
                n,
                data.len()
            )));
        }
        let m = mask(bits);
        let data = data.into_iter().map(|v| v & m).collect();
        Ok(RingTensor { bits, shape, data })
    }

    pub fn zeros(bits: u32, shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        RingTensor {
            bits,
            shape,
            data: vec![0; n],
        }
    }

    pub fn filled(bits: u32, shape: Vec<usize>, value: u64) -> Self {
        let n = shape.iter().product();
        RingTensor {
            bits,
            shape,
            data: vec![value & mask(bits); n],
        }
    }

    pub fn scalar(bits: u32, value: u64) -> Self {
        Self::filled(bits, vec![1], value)
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[u64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(Error::Shape(format!(
                "cannot reshape {:?} into {:?}",
                self.shape, shape
            )));
        }
        self.shape = shape;
        Ok(self)
    }

    fn check_same(&self, other: &RingTensor, what: &str) -> Result<()> {
        if self.bits != other.bits {
            return Err(Error::Shape(format!(
                "{what}: ring widths differ ({} vs {})",
                self.bits, other.bits
            )));
        }
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "{what}: shapes differ ({:?} vs {:?})",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    fn zip_with(&self, other: &RingTensor, what: &str, f: impl Fn(u64, u64) -> u64) -> Result<Self> {
        self.check_same(other, what)?;
        let m = mask(self.bits);
        Ok(RingTensor {
            bits: self.bits,
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b) & m)
                .collect(),
        })
    }

    pub fn map(&self, f: impl Fn(u64) -> u64) -> Self {
        let m = mask(self.bits);
        RingTensor {
            bits: self.bits,
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v) & m).collect(),
        }
    }

    pub fn add(&self, other: &RingTensor) -> Result<Self> {
        self.zip_with(other, "add", u64::wrapping_add)
    }

    pub fn sub(&self, other: &RingTensor) -> Result<Self> {
        self.zip_with(other, "sub", u64::wrapping_sub)
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&self, other: &RingTensor) -> Result<Self> {
        self.zip_with(other, "mul", u64::wrapping_mul)
    }

    pub fn neg(&self) -> Self {
        self.map(u64::wrapping_neg)
    }

    pub fn add_scalar(&self, s: u64) -> Self {
        self.map(|v| v.wrapping_add(s))
    }

    pub fn scalar_mul(&self, s: u64) -> Self {
        self.map(|v| v.wrapping_mul(s))
    }

    /// Matrix product of a `[m, k]` tensor with a `[k, n]` tensor.
    pub fn matmul(&self, other: &RingTensor) -> Result<Self> {
        if self.bits != other.bits {
            return Err(Error::Shape("matmul: ring widths differ".into()));
        }
        let (m, k) = match self.shape.as_slice() {
            &[m, k] => (m, k),
            s => return Err(Error::Shape(format!("matmul: left operand is not 2-D: {s:?}"))),
        };
        let (k2, n) = match other.shape.as_slice() {
            &[k2, n] => (k2, n),
            s => return Err(Error::Shape(format!("matmul: right operand is not 2-D: {s:?}"))),
        };
        if k != k2 {
            return Err(Error::Shape(format!(
                "matmul: inner dimensions disagree ({m}x{k} by {k2}x{n})"
            )));
        }
        let mut out = vec![0u64; m * n];
        for i in 0..m {
            let row = &self.data[i * k..(i + 1) * k];
            let acc = &mut out[i * n..(i + 1) * n];
            for (p, &a) in row.iter().enumerate() {
                if a == 0 {
                    continue;
                }
                let brow = &other.data[p * n..(p + 1) * n];
                for (o, &b) in acc.iter_mut().zip(brow) {
                    *o = o.wrapping_add(a.wrapping_mul(b));
                }
            }
        }
        let msk = mask(self.bits);
        out.iter_mut().for_each(|v| *v &= msk);
        Ok(RingTensor {
            bits: self.bits,
            shape: vec![m, n],
            data: out,
        })
    }

    /// Build a tensor by reading `self` at the given flat indices; `None`
    /// produces a zero (used for padding).
    pub fn gather(&self, indices: &[Option<usize>], shape: Vec<usize>) -> Result<Self> {
        let data = indices
            .iter()
            .map(|ix| ix.map_or(0, |i| self.data[i]))
            .collect();
        RingTensor::new(self.bits, shape, data)
    }

    /// Little-endian wire words, `ceil(bits/8)` bytes per element, no header.
    pub fn to_words(&self) -> Vec<u8> {
        encode_words(&self.data, self.bits)
    }

    pub fn from_words(bits: u32, shape: Vec<usize>, bytes: &[u8]) -> Result<Self> {
        let n: usize = shape.iter().product();
        let data = decode_words(bytes, bits, n)?;
        RingTensor::new(bits, shape, data)
    }

    /// Fixture encoding: `u64` rank, `u64` per dimension, then the
    /// little-endian words.
    pub fn to_fixture_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 * (1 + self.shape.len()) + self.data.len() * 8);
        out.extend_from_slice(&(self.shape.len() as u64).to_le_bytes());
        for &d in &self.shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        out.extend(self.to_words());
        out
    }

    pub fn from_fixture_bytes(bits: u32, bytes: &[u8]) -> Result<Self> {
        let read_u64 = |at: usize| -> Result<u64> {
            bytes
                .get(at..at + 8)
                .map(|b| u64::from_le_bytes(b.try_into().unwrap()))
                .ok_or_else(|| Error::Format("truncated fixture header".into()))
        };
        let rank = read_u64(0)? as usize;
        let mut shape = Vec::with_capacity(rank);
        for i in 0..rank {
            shape.push(read_u64(8 + 8 * i)? as usize);
        }
        Self::from_words(bits, shape, &bytes[8 * (rank + 1)..])
    }
}

pub(crate) fn encode_words(data: &[u64], bits: u32) -> Vec<u8> {
    let wb = word_bytes(bits);
    let mut out = Vec::with_capacity(data.len() * wb);
    for v in data {
        out.extend_from_slice(&v.to_le_bytes()[..wb]);
    }
    out
}

pub(crate) fn decode_words(bytes: &[u8], bits: u32, n: usize) -> Result<Vec<u64>> {
    let wb = word_bytes(bits);
    if bytes.len() != n * wb {
        return Err(Error::Format(format!(
            "expected {} bytes for {} words of {} bits, got {}",
            n * wb,
            n,
            bits,
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(wb)
        .map(|c| {
            let mut w = [0u8; 8];
            w[..wb].copy_from_slice(c);
            u64::from_le_bytes(w)
        })
        .collect())
}
