//! Beaver-triple multiplication with P2 as the dealer.
//!
//! Round 1 (tag `offline`): P2 sends each share holder its halves of
//! `(U, V, W = U*V)`. Round 2 (tag `matmul-open`): P0 and P1 swap
//! `A - U` and `B - V`, after which each computes its share of `A*B`
//! locally. Any number of independent products share the same two rounds.

use super::Secret;
use crate::error::{Error, Result};
use crate::ring::{share, RingTensor};
use crate::transport::{PartyId, RoundPlan, Session};

pub const TAG_OFFLINE: &str = "offline";
pub const TAG_OPEN: &str = "matmul-open";

/// Shape of one product.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ProductDims {
    /// `[m, k] x [k, n]` matrix product.
    MatMul { m: usize, k: usize, n: usize },
    /// Elementwise product of two tensors of the same shape.
    Hadamard { shape: Vec<usize> },
}

impl ProductDims {
    pub fn left_shape(&self) -> Vec<usize> {
        match self {
            ProductDims::MatMul { m, k, .. } => vec![*m, *k],
            ProductDims::Hadamard { shape } => shape.clone(),
        }
    }

    pub fn right_shape(&self) -> Vec<usize> {
        match self {
            ProductDims::MatMul { k, n, .. } => vec![*k, *n],
            ProductDims::Hadamard { shape } => shape.clone(),
        }
    }

    pub fn output_shape(&self) -> Vec<usize> {
        match self {
            ProductDims::MatMul { m, n, .. } => vec![*m, *n],
            ProductDims::Hadamard { shape } => shape.clone(),
        }
    }

    fn apply(&self, a: &RingTensor, b: &RingTensor) -> Result<RingTensor> {
        match self {
            ProductDims::MatMul { .. } => a.matmul(b),
            ProductDims::Hadamard { .. } => a.mul(b),
        }
    }
}

/// One share holder's halves of a multiplication triple.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TripleShare {
    pub u: RingTensor,
    pub v: RingTensor,
    pub w: RingTensor,
}

/// P2 deals one triple per entry of `dims` in a single round. Share
/// holders get their halves; P2 gets `None`s.
pub fn deal_triples(sess: &mut Session, dims: &[ProductDims]) -> Result<Vec<Option<TripleShare>>> {
    let me = sess.id();
    let bits = sess.params().bits;
    let mut to_p0 = Vec::new();
    let mut to_p1 = Vec::new();
    if me == PartyId::P2 {
        for d in dims {
            let u = sess.rng().ring_tensor(bits, d.left_shape());
            let v = sess.rng().ring_tensor(bits, d.right_shape());
            let w = d.apply(&u, &v)?;
            for t in [&u, &v, &w] {
                let (s0, s1) = share(t, sess.rng());
                to_p0.extend(s0.payload().to_words());
                to_p1.extend(s1.payload().to_words());
            }
        }
    }
    let plan = RoundPlan::new()
        .send_from(me, PartyId::P2, PartyId::P0, TAG_OFFLINE, || to_p0)
        .send_from(me, PartyId::P2, PartyId::P1, TAG_OFFLINE, || to_p1);
    let mut delivered = sess.exchange(plan)?;
    if !me.is_share_holder() {
        return Ok(vec![None; dims.len()]);
    }
    let bytes = delivered.take(PartyId::P2)?;
    let wb = sess.params().word_bytes();
    let mut at = 0usize;
    let mut next = |shape: Vec<usize>| -> Result<RingTensor> {
        let n: usize = shape.iter().product();
        let end = at + n * wb;
        let slice = bytes
            .get(at..end)
            .ok_or_else(|| Error::ProtocolMisuse("short triple payload".into()))?;
        at = end;
        RingTensor::from_words(bits, shape, slice)
    };
    let mut out = Vec::with_capacity(dims.len());
    for d in dims {
        let u = next(d.left_shape())?;
        let v = next(d.right_shape())?;
        let w = next(d.output_shape())?;
        out.push(Some(TripleShare { u, v, w }));
    }
    Ok(out)
}

/// Multiply several independent pairs of secrets in exactly two rounds.
pub fn beaver_products(sess: &mut Session, items: &[(&Secret, &Secret, ProductDims)]) -> Result<Vec<Secret>> {
    for (a, b, d) in items {
        if a.shape() != d.left_shape().as_slice() || b.shape() != d.right_shape().as_slice() {
            return Err(Error::Shape(format!(
                "product operands {:?} x {:?} do not match {:?}",
                a.shape(),
                b.shape(),
                d
            )));
        }
    }
    let dims: Vec<ProductDims> = items.iter().map(|(_, _, d)| d.clone()).collect();
    let triples = deal_triples(sess, &dims)?;

    let me = sess.id();
    let bits = sess.params().bits;
    let mut masked = Vec::new();
    let mut mine: Vec<(RingTensor, RingTensor)> = Vec::new();
    if me.is_share_holder() {
        for ((a, b, _), t) in items.iter().zip(&triples) {
            let t = t.as_ref().expect("share holders receive triples");
            let e = a.payload()?.sub(&t.u)?;
            let f = b.payload()?.sub(&t.v)?;
            masked.extend(e.to_words());
            masked.extend(f.to_words());
            mine.push((e, f));
        }
    }
    let plan = RoundPlan::new()
        .send_from(me, PartyId::P0, PartyId::P1, TAG_OPEN, || masked.clone())
        .send_from(me, PartyId::P1, PartyId::P0, TAG_OPEN, || masked.clone());
    let mut delivered = sess.exchange(plan)?;
    if !me.is_share_holder() {
        return Ok(dims.iter().map(|d| Secret::shape_only(d.output_shape())).collect());
    }

    let theirs = delivered.take(me.peer())?;
    let wb = sess.params().word_bytes();
    let mut at = 0usize;
    let mut out = Vec::with_capacity(items.len());
    for ((e0, f0), (d, t)) in mine.into_iter().zip(dims.iter().zip(triples)) {
        let t = t.expect("share holders receive triples");
        let take = |at: &mut usize, shape: Vec<usize>| -> Result<RingTensor> {
            let n: usize = shape.iter().product();
            let slice = theirs
                .get(*at..*at + n * wb)
                .ok_or_else(|| Error::ProtocolMisuse("short masked opening".into()))?;
            *at += n * wb;
            RingTensor::from_words(bits, shape, slice)
        };
        let e = e0.add(&take(&mut at, d.left_shape())?)?;
        let f = f0.add(&take(&mut at, d.right_shape())?)?;
        let mut z = t.w.add(&d.apply(&e, &t.v)?)?.add(&d.apply(&t.u, &f)?)?;
        if me == PartyId::P0 {
            z = z.add(&d.apply(&e, &f)?)?;
        }
        out.push(Secret::for_party(me, Some(z), d.output_shape())?);
    }
    Ok(out)
}

/// Matrix product of a `[m, k]` and a `[k, n]` secret. No rescaling is
/// applied; callers truncate when both operands carry a fixed-point scale.
pub fn pi_matmul(sess: &mut Session, a: &Secret, b: &Secret) -> Result<Secret> {
    let (m, k) = match *a.shape() {
        [m, k] => (m, k),
        _ => return Err(Error::Shape(format!("matmul: left operand {:?} is not 2-D", a.shape()))),
    };
    let (k2, n) = match *b.shape() {
        [k2, n] => (k2, n),
        _ => return Err(Error::Shape(format!("matmul: right operand {:?} is not 2-D", b.shape()))),
    };
    if k != k2 {
        return Err(Error::Shape(format!("matmul: inner dimensions disagree ({m}x{k} by {k2}x{n})")));
    }
    let mut out = beaver_products(sess, &[(a, b, ProductDims::MatMul { m, k, n })])?;
    Ok(out.pop().unwrap())
}

/// Elementwise product of two secrets of the same shape.
pub fn pi_mul(sess: &mut Session, a: &Secret, b: &Secret) -> Result<Secret> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!(
            "elementwise product of {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let d = ProductDims::Hadamard {
        shape: a.shape().to_vec(),
    };
    let mut out = beaver_products(sess, &[(a, b, d)])?;
    Ok(out.pop().unwrap())
}
