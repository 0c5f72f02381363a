use rand::RngCore;

use super::params::{from_signed, mask, to_signed, RingParams};
use super::tensor::RingTensor;
use crate::error::{Error, Result};

/// One party's additive share of a tensor. `owner` is 0 or 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShareHalf {
    owner: u8,
    payload: RingTensor,
}

impl ShareHalf {
    pub fn new(owner: u8, payload: RingTensor) -> Result<Self> {
        if owner > 1 {
            return Err(Error::ProtocolMisuse(format!(
                "share owner must be 0 or 1, got {owner}"
            )));
        }
        Ok(ShareHalf { owner, payload })
    }

    pub fn owner(&self) -> u8 {
        self.owner
    }

    pub fn payload(&self) -> &RingTensor {
        &self.payload
    }

    pub fn into_payload(self) -> RingTensor {
        self.payload
    }

    pub fn shape(&self) -> &[usize] {
        self.payload.shape()
    }

    /// Apply a local operation to the payload, keeping the owner.
    pub fn map_payload(&self, f: impl FnOnce(&RingTensor) -> Result<RingTensor>) -> Result<Self> {
        Ok(ShareHalf {
            owner: self.owner,
            payload: f(&self.payload)?,
        })
    }
}

/// Split `x` into two additive shares. The first payload is uniform.
pub fn share<R: RngCore>(x: &RingTensor, rng: &mut R) -> (ShareHalf, ShareHalf) {
    let m = mask(x.bits());
    let s0: Vec<u64> = (0..x.len()).map(|_| rng.next_u64() & m).collect();
    let s0 = RingTensor::new(x.bits(), x.shape().to_vec(), s0).expect("shape preserved");
    let s1 = x.sub(&s0).expect("shape preserved");
    (
        ShareHalf { owner: 0, payload: s0 },
        ShareHalf { owner: 1, payload: s1 },
    )
}

/// Sum two halves. Argument order does not matter; two halves from the
/// same owner are rejected.
pub fn reconstruct(a: &ShareHalf, b: &ShareHalf) -> Result<RingTensor> {
    if a.owner == b.owner {
        return Err(Error::ProtocolMisuse(format!(
            "both shares belong to party {}",
            a.owner
        )));
    }
    if a.payload.shape() != b.payload.shape() || a.payload.bits() != b.payload.bits() {
        return Err(Error::ProtocolMisuse(format!(
            "share shapes differ: {:?} vs {:?}",
            a.payload.shape(),
            b.payload.shape()
        )));
    }
    a.payload.add(&b.payload)
}

/// Local fixed-point rescale of a share whose secret carries scale
/// `2^(2*scale)`.
///
/// Party 0 shifts its payload arithmetically; party 1 negates, shifts and
/// negates back. The reconstruction is the exact truncation or one more,
/// unless the shares straddle the wrap point, which happens with
/// probability about `|x| / 2^(bits-1)` per element.
pub fn truncate_share(s: &ShareHalf, params: &RingParams) -> ShareHalf {
    let bits = params.bits;
    let f = params.scale;
    let payload = if s.owner == 0 {
        s.payload.map(|v| from_signed(to_signed(v, bits) >> f, bits))
    } else {
        s.payload
            .map(|v| from_signed(to_signed(v.wrapping_neg() & mask(bits), bits) >> f, bits).wrapping_neg())
    };
    ShareHalf {
        owner: s.owner,
        payload,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::{encode_fixed, truncate_value, Prg};

    #[test]
    fn share_of_zero_negates() {
        let x = RingTensor::zeros(64, vec![4]);
        let (a, b) = share(&x, &mut Prg::from_u64(1));
        assert_eq!(b.payload(), &a.payload().neg());
    }

    #[test]
    fn reconstruct_is_commutative_and_affine() {
        let x = RingTensor::new(64, vec![3], vec![1, 2, u64::MAX]).unwrap();
        let (a, b) = share(&x, &mut Prg::from_u64(9));
        assert_eq!(reconstruct(&a, &b).unwrap(), x);
        assert_eq!(reconstruct(&b, &a).unwrap(), x);
        let shifted = a.map_payload(|p| Ok(p.add_scalar(10))).unwrap();
        assert_eq!(reconstruct(&shifted, &b).unwrap(), x.add_scalar(10));
    }

    #[test]
    fn misuse_is_rejected() {
        let x = RingTensor::zeros(64, vec![2]);
        let (a, b) = share(&x, &mut Prg::from_u64(2));
        assert!(matches!(reconstruct(&a, &a), Err(Error::ProtocolMisuse(_))));
        let y = RingTensor::zeros(64, vec![3]);
        let (_, c) = share(&y, &mut Prg::from_u64(2));
        assert!(matches!(reconstruct(&a, &c), Err(Error::ProtocolMisuse(_))));
        assert!(b.owner() == 1 && ShareHalf::new(2, x).is_err());
    }

    #[test]
    fn truncation_of_exact_product() {
        let p = RingParams::default();
        let prod = encode_fixed(2.0, &p)
            .unwrap()
            .wrapping_mul(encode_fixed(3.0, &p).unwrap());
        let x = RingTensor::new(64, vec![1], vec![prod]).unwrap();
        for seed in 0..50 {
            let (a, b) = share(&x, &mut Prg::from_u64(seed));
            let r = reconstruct(&truncate_share(&a, &p), &truncate_share(&b, &p)).unwrap();
            let diff = r.data()[0].wrapping_sub(encode_fixed(6.0, &p).unwrap()) as i64;
            assert!(diff.abs() <= 1, "seed {seed}: off by {diff}");
        }
    }

    #[test]
    fn truncation_of_zero_is_exact() {
        let p = RingParams::default();
        let x = RingTensor::zeros(64, vec![8]);
        for seed in 0..20 {
            let (a, b) = share(&x, &mut Prg::from_u64(seed));
            let r = reconstruct(&truncate_share(&a, &p), &truncate_share(&b, &p)).unwrap();
            assert!(r.data().iter().all(|&v| v == 0));
        }
    }

    #[test]
    fn truncation_matches_exact_oracle_within_one_ulp() {
        // Monte-Carlo against exact integer truncation: 10^4 products of
        // values with |v| <= 2^10 at l=64, f=13.
        use rand::Rng;
        let p = RingParams::default();
        let mut rng = Prg::from_u64(0xC0FFEE);
        let n = 10_000;
        let mut prods = Vec::with_capacity(n);
        for _ in 0..n {
            let a: f64 = rng.gen_range(-1024.0..1024.0);
            let b: f64 = rng.gen_range(-1024.0..1024.0);
            prods.push(encode_fixed(a, &p).unwrap().wrapping_mul(encode_fixed(b, &p).unwrap()));
        }
        let x = RingTensor::new(64, vec![n], prods.clone()).unwrap();
        let (a, b) = share(&x, &mut rng);
        let r = reconstruct(&truncate_share(&a, &p), &truncate_share(&b, &p)).unwrap();
        let mut max_err = 0i64;
        for (got, want) in r.data().iter().zip(prods.iter().map(|&v| truncate_value(v, &p))) {
            let e = (got.wrapping_sub(want) as i64).abs();
            max_err = max_err.max(e);
        }
        assert!(max_err <= 1, "max error {max_err} ULP");
    }
}
