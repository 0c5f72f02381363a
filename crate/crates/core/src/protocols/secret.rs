use crate::error::{Error, Result};
use crate::ring::{share, truncate_share, RingParams, RingTensor, ShareHalf};
use crate::transport::{PartyId, RoundPlan, Session};

/// One party's handle on a secret-shared tensor.
///
/// P0 and P1 hold a [`ShareHalf`]; P2 tracks only the public shape so
/// that it can follow the protocol schedule.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Secret {
    shape: Vec<usize>,
    share: Option<ShareHalf>,
}

impl Secret {
    pub fn from_share(share: ShareHalf) -> Secret {
        Secret {
            shape: share.shape().to_vec(),
            share: Some(share),
        }
    }

    pub fn shape_only(shape: Vec<usize>) -> Secret {
        Secret { shape, share: None }
    }

    /// Wrap this party's payload (None on P2).
    pub fn for_party(id: PartyId, payload: Option<RingTensor>, shape: Vec<usize>) -> Result<Secret> {
        match (id.is_share_holder(), payload) {
            (true, Some(p)) => {
                if p.shape() != shape.as_slice() {
                    return Err(Error::Shape(format!(
                        "payload shape {:?} does not match {:?}",
                        p.shape(),
                        shape
                    )));
                }
                Ok(Secret::from_share(ShareHalf::new(id.as_u8(), p)?))
            }
            (false, _) => Ok(Secret::shape_only(shape)),
            (true, None) => Err(Error::ProtocolMisuse(format!("{id} must hold a share"))),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn share(&self) -> Option<&ShareHalf> {
        self.share.as_ref()
    }

    pub(crate) fn payload(&self) -> Result<&RingTensor> {
        self.share
            .as_ref()
            .map(|s| s.payload())
            .ok_or_else(|| Error::ProtocolMisuse("P2 holds no share".into()))
    }

    fn owner(&self) -> Option<u8> {
        self.share.as_ref().map(|s| s.owner())
    }

    fn with_payload(&self, shape: Vec<usize>, f: impl FnOnce(&RingTensor) -> Result<RingTensor>) -> Result<Secret> {
        match &self.share {
            None => Ok(Secret::shape_only(shape)),
            Some(s) => {
                let p = f(s.payload())?;
                if p.shape() != shape.as_slice() {
                    return Err(Error::Shape(format!(
                        "local op produced {:?}, expected {:?}",
                        p.shape(),
                        shape
                    )));
                }
                Ok(Secret {
                    shape,
                    share: Some(ShareHalf::new(s.owner(), p)?),
                })
            }
        }
    }

    fn check_shape(&self, other: &Secret, what: &str) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "{what}: shapes differ ({:?} vs {:?})",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Secret) -> Result<Secret> {
        self.check_shape(other, "add")?;
        let rhs = other.share.as_ref().map(|s| s.payload().clone());
        self.with_payload(self.shape.clone(), |p| p.add(rhs.as_ref().expect("both hold shares")))
    }

    pub fn sub(&self, other: &Secret) -> Result<Secret> {
        self.check_shape(other, "sub")?;
        let rhs = other.share.as_ref().map(|s| s.payload().clone());
        self.with_payload(self.shape.clone(), |p| p.sub(rhs.as_ref().expect("both hold shares")))
    }

    pub fn neg(&self) -> Secret {
        self.with_payload(self.shape.clone(), |p| Ok(p.neg()))
            .expect("negation keeps shape")
    }

    /// Add a public constant to every element (only party 0 applies it).
    pub fn add_public(&self, c: u64) -> Secret {
        let owner = self.owner();
        self.with_payload(self.shape.clone(), |p| {
            Ok(if owner == Some(0) { p.add_scalar(c) } else { p.clone() })
        })
        .expect("shape kept")
    }

    /// Multiply by a public ring scalar.
    pub fn scale(&self, c: u64) -> Secret {
        self.with_payload(self.shape.clone(), |p| Ok(p.scalar_mul(c)))
            .expect("shape kept")
    }

    /// Add this party's half of a zero sharing.
    pub fn add_zero_share(&self, sess: &mut Session) -> Result<Secret> {
        if !sess.id().is_share_holder() {
            return Ok(self.clone());
        }
        let u = sess.zero_share(self.shape.clone())?;
        self.with_payload(self.shape.clone(), |p| p.add(&u))
    }

    pub fn truncate(&self, params: &RingParams) -> Secret {
        match &self.share {
            None => self.clone(),
            Some(s) => Secret {
                shape: self.shape.clone(),
                share: Some(truncate_share(s, params)),
            },
        }
    }

    pub fn reshape(&self, shape: Vec<usize>) -> Result<Secret> {
        let n: usize = shape.iter().product();
        if n != self.len() {
            return Err(Error::Shape(format!("cannot reshape {:?} into {:?}", self.shape, shape)));
        }
        self.with_payload(shape.clone(), |p| p.clone().reshape(shape.clone()))
    }

    /// Local re-indexing; `None` entries read as zero.
    pub fn gather(&self, indices: &[Option<usize>], shape: Vec<usize>) -> Result<Secret> {
        let n = self.len();
        if let Some(bad) = indices.iter().flatten().find(|&&i| i >= n) {
            return Err(Error::Shape(format!("gather index {bad} out of range {n}")));
        }
        self.with_payload(shape.clone(), |p| p.gather(indices, shape.clone()))
    }

    /// Concatenate along the last axis. All parts must agree on the
    /// leading dimensions.
    pub fn concat_last(parts: &[Secret]) -> Result<Secret> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Shape("concat of zero tensors".into()))?;
        let lead = &first.shape[..first.shape.len() - 1];
        let mut widths = Vec::with_capacity(parts.len());
        for p in parts {
            if p.shape.len() != first.shape.len() || &p.shape[..p.shape.len() - 1] != lead {
                return Err(Error::Shape(format!(
                    "concat: leading dims differ ({:?} vs {:?})",
                    first.shape, p.shape
                )));
            }
            widths.push(*p.shape.last().unwrap());
        }
        let total: usize = widths.iter().sum();
        let rows: usize = lead.iter().product();
        let mut shape = lead.to_vec();
        shape.push(total);
        if first.share.is_none() {
            return Ok(Secret::shape_only(shape));
        }
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for (p, &w) in parts.iter().zip(&widths) {
                data.extend_from_slice(&p.payload()?.data()[r * w..(r + 1) * w]);
            }
        }
        let bits = first.payload()?.bits();
        Ok(Secret::from_share(ShareHalf::new(
            first.owner().unwrap(),
            RingTensor::new(bits, shape, data)?,
        )?))
    }

    pub(crate) fn words(&self) -> Vec<u8> {
        self.share.as_ref().map(|s| s.payload().to_words()).unwrap_or_default()
    }
}

/// Secret-share tensors owned by P0 and/or P1 in a single round.
///
/// Each item names its owner, its shape and (on the owner only) its
/// plaintext. The owner keeps one half and sends the other to its peer.
pub fn share_inputs(
    sess: &mut Session,
    items: &[(PartyId, Vec<usize>, Option<&RingTensor>)],
    tag: &str,
) -> Result<Vec<Secret>> {
    let me = sess.id();
    let bits = sess.params().bits;
    let mut kept: Vec<Option<RingTensor>> = vec![None; items.len()];
    let mut outgoing: Vec<u8> = Vec::new();
    let mut senders = [false; 2];
    for (i, (owner, shape, value)) in items.iter().enumerate() {
        if !owner.is_share_holder() {
            return Err(Error::ProtocolMisuse("only P0 or P1 can own an input".into()));
        }
        senders[owner.index()] = true;
        if *owner == me {
            let x = value.ok_or_else(|| Error::ProtocolMisuse(format!("{me} must supply its input")))?;
            if x.shape() != shape.as_slice() {
                return Err(Error::Shape(format!("input shape {:?} != {:?}", x.shape(), shape)));
            }
            let (a, b) = share(x, sess.rng());
            // The owner keeps the half labelled with its own id.
            let (mine, theirs) = if me == PartyId::P0 { (a, b) } else { (b, a) };
            kept[i] = Some(mine.into_payload());
            outgoing.extend(theirs.payload().to_words());
        }
    }
    let mut plan = RoundPlan::new();
    for owner in [PartyId::P0, PartyId::P1] {
        if senders[owner.index()] {
            let payload = (owner == me).then(|| std::mem::take(&mut outgoing));
            plan = plan.send(owner, owner.peer(), tag, payload);
        }
    }
    if plan.messages().is_empty() {
        return Ok(Vec::new());
    }
    let mut delivered = sess.exchange(plan)?;
    let incoming = if me.is_share_holder() && senders[me.peer().index()] {
        Some(delivered.take(me.peer())?)
    } else {
        None
    };

    let wb = sess.params().word_bytes();
    let mut offset = 0usize;
    let mut out = Vec::with_capacity(items.len());
    for (i, (owner, shape, _)) in items.iter().enumerate() {
        let payload = if !me.is_share_holder() {
            None
        } else if *owner == me {
            kept[i].take()
        } else {
            let n: usize = shape.iter().product();
            let bytes = incoming.as_ref().expect("peer sent shares");
            let t = RingTensor::from_words(bits, shape.clone(), &bytes[offset..offset + n * wb])?;
            offset += n * wb;
            Some(t)
        };
        out.push(Secret::for_party(me, payload, shape.clone())?);
    }
    Ok(out)
}

/// Reveal a secret to one share holder; the other holder sends its half.
pub fn reveal_to(sess: &mut Session, x: &Secret, to: PartyId, tag: &str) -> Result<Option<RingTensor>> {
    if !to.is_share_holder() {
        return Err(Error::ProtocolMisuse("outputs are revealed to P0 or P1".into()));
    }
    let me = sess.id();
    let from = to.peer();
    let plan = RoundPlan::new().send_from(me, from, to, tag, || x.words());
    let mut delivered = sess.exchange(plan)?;
    if me != to {
        return Ok(None);
    }
    let bytes = delivered.take(from)?;
    let theirs = RingTensor::from_words(sess.params().bits, x.shape().to_vec(), &bytes)?;
    Ok(Some(x.payload()?.add(&theirs)?))
}

/// Reveal a secret to both share holders in one round.
pub fn open(sess: &mut Session, x: &Secret, tag: &str) -> Result<Option<RingTensor>> {
    let me = sess.id();
    let plan = RoundPlan::new()
        .send_from(me, PartyId::P0, PartyId::P1, tag, || x.words())
        .send_from(me, PartyId::P1, PartyId::P0, tag, || x.words());
    let mut delivered = sess.exchange(plan)?;
    if !me.is_share_holder() {
        return Ok(None);
    }
    let bytes = delivered.take(me.peer())?;
    let theirs = RingTensor::from_words(sess.params().bits, x.shape().to_vec(), &bytes)?;
    Ok(Some(x.payload()?.add(&theirs)?))
}
