//! DReLU realized as an ideal functionality hosted by P2.
//!
//! P0 and P1 re-randomize their shares with a fresh sharing of zero and
//! send them to P2, which reconstructs, evaluates the Heaviside step
//! (`H(x) = 1` for `x >= 0`), reshares the bits and sends them back. The
//! result is a share of the bit as a plain ring integer (not fixed-point
//! scaled), so multiplying by it never needs truncation.
//!
//! Measured cost is two rounds; the analytic cost of a cryptographic
//! DReLU is charged separately by the cost model.

use super::Secret;
use crate::error::Result;
use crate::ring::{share, RingTensor};
use crate::transport::{PartyId, RoundPlan, Session};

pub const TAG_DRELU: &str = "ideal-drelu";

/// Heaviside step of a signed ring value.
pub fn heaviside(v: u64, bits: u32) -> u64 {
    (v >> (bits - 1) & 1) ^ 1
}

pub fn pi_drelu(sess: &mut Session, a: &Secret) -> Result<Secret> {
    let me = sess.id();
    let bits = sess.params().bits;
    let shape = a.shape().to_vec();

    let submitted = a.add_zero_share(sess)?;
    let plan = RoundPlan::new()
        .send_from(me, PartyId::P0, PartyId::P2, TAG_DRELU, || submitted.words())
        .send_from(me, PartyId::P1, PartyId::P2, TAG_DRELU, || submitted.words());
    let mut delivered = sess.exchange(plan)?;

    let mut back = [Vec::new(), Vec::new()];
    if me == PartyId::P2 {
        let x0 = RingTensor::from_words(bits, shape.clone(), &delivered.take(PartyId::P0)?)?;
        let x1 = RingTensor::from_words(bits, shape.clone(), &delivered.take(PartyId::P1)?)?;
        let h = x0.add(&x1)?.map(|v| heaviside(v, bits));
        let (s0, s1) = share(&h, sess.rng());
        back = [s0.payload().to_words(), s1.payload().to_words()];
    }
    let [b0, b1] = back;
    let plan = RoundPlan::new()
        .send_from(me, PartyId::P2, PartyId::P0, TAG_DRELU, || b0)
        .send_from(me, PartyId::P2, PartyId::P1, TAG_DRELU, || b1);
    let mut delivered = sess.exchange(plan)?;
    let payload = if me.is_share_holder() {
        Some(RingTensor::from_words(bits, shape.clone(), &delivered.take(PartyId::P2)?)?)
    } else {
        None
    };
    Secret::for_party(me, payload, shape)
}
