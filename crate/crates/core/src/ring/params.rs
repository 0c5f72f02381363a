use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ring and fixed-point configuration shared by every party of a session.
///
/// Values live in `Z_{2^bits}`; `field` is the prime used by the
/// comparison sub-protocols (only its size enters the cost model) and
/// `scale` is the number of fractional bits of the fixed-point encoding.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RingParams {
    pub bits: u32,
    pub field: u64,
    pub scale: u32,
}

impl Default for RingParams {
    fn default() -> Self {
        RingParams {
            bits: 64,
            field: 67,
            scale: 13,
        }
    }
}

impl RingParams {
    pub fn new(bits: u32, field: u64, scale: u32) -> Result<Self> {
        let params = RingParams { bits, field, scale };
        params.validate()?;
        Ok(params)
    }

    /// Integer ring of the given width with no fractional bits. Used for
    /// exhaustive small-ring checks.
    pub fn integer(bits: u32) -> Result<Self> {
        Self::new(bits, 67, 0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(8..=64).contains(&self.bits) {
            return Err(Error::Params(format!(
                "bit width {} outside 8..=64",
                self.bits
            )));
        }
        if self.bits < 2 * self.scale + 8 {
            return Err(Error::Params(format!(
                "bit width {} leaves no headroom for scale {} (need >= {})",
                self.bits,
                self.scale,
                2 * self.scale + 8
            )));
        }
        if self.field < 2 || !is_prime(self.field) {
            return Err(Error::Params(format!(
                "comparison field size {} is not a prime >= 2",
                self.field
            )));
        }
        Ok(())
    }

    pub fn mask(&self) -> u64 {
        mask(self.bits)
    }

    /// Bytes used to carry one ring element on the wire.
    pub fn word_bytes(&self) -> usize {
        word_bytes(self.bits)
    }

    /// One unit in the last place of the fixed-point encoding.
    pub fn ulp(&self) -> f64 {
        (-(self.scale as f64)).exp2()
    }
}

pub(crate) fn mask(bits: u32) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

pub(crate) fn word_bytes(bits: u32) -> usize {
    bits.div_ceil(8) as usize
}

/// Two's-complement signed view of a ring element.
pub fn to_signed(v: u64, bits: u32) -> i64 {
    let v = v & mask(bits);
    if bits >= 64 {
        v as i64
    } else if v >> (bits - 1) == 1 {
        (v as i64) - (1i64 << bits)
    } else {
        v as i64
    }
}

pub fn from_signed(v: i64, bits: u32) -> u64 {
    (v as u64) & mask(bits)
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d.saturating_mul(d) <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}
