use super::params::{from_signed, to_signed, RingParams};
use crate::error::{Error, Result};

/// Encode a real as `round(x * 2^scale)` in two's complement.
///
/// Ties round away from zero, which makes `encode(0.1) + encode(0.9)` equal
/// `encode(1.0)` at the default scale.
pub fn encode_fixed(x: f64, params: &RingParams) -> Result<u64> {
    let bound = ((params.bits - 1 - params.scale) as f64).exp2();
    if !x.is_finite() || x.abs() >= bound {
        return Err(Error::Range { value: x, bound });
    }
    let scaled = (x * (params.scale as f64).exp2()).round();
    Ok(from_signed(scaled as i64, params.bits))
}

pub fn decode_fixed(v: u64, params: &RingParams) -> f64 {
    to_signed(v, params.bits) as f64 / (params.scale as f64).exp2()
}

/// Exact fixed-point rescale of a plaintext ring value carrying scale
/// `2^(2*scale)`: arithmetic shift right by `scale` (floor division).
pub fn truncate_value(v: u64, params: &RingParams) -> u64 {
    from_signed(to_signed(v, params.bits) >> params.scale, params.bits)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p64() -> RingParams {
        RingParams::default()
    }

    #[test]
    fn encode_examples() {
        assert_eq!(encode_fixed(0.0, &p64()).unwrap(), 0);
        assert_eq!(encode_fixed(1.5, &p64()).unwrap(), 12288);
        assert_eq!(encode_fixed(-1.0, &p64()).unwrap(), u64::MAX - 8192 + 1);
    }

    #[test]
    fn decode_examples() {
        let p = p64();
        assert_eq!(decode_fixed(encode_fixed(3.25, &p).unwrap(), &p), 3.25);
        assert_eq!(decode_fixed(0, &p), 0.0);
        assert_eq!(decode_fixed(u64::MAX - 8191, &p), -1.0);
    }

    #[test]
    fn out_of_range_is_rejected() {
        let p = p64();
        assert!(matches!(
            encode_fixed(2f64.powi(50), &p),
            Err(Error::Range { .. })
        ));
        assert!(encode_fixed(2f64.powi(50) - 1.0, &p).is_ok());
        assert!(encode_fixed(f64::NAN, &p).is_err());
        let small = RingParams::integer(8).unwrap();
        assert!(encode_fixed(127.0, &small).is_ok());
        assert!(encode_fixed(128.0, &small).is_err());
        assert!(encode_fixed(-128.0, &small).is_err());
    }

    #[test]
    fn leaky_constants_sum_to_one() {
        let p = p64();
        let a = encode_fixed(0.1, &p).unwrap();
        let b = encode_fixed(0.9, &p).unwrap();
        assert_eq!(a.wrapping_add(b), encode_fixed(1.0, &p).unwrap());
    }

    #[test]
    fn product_then_truncate() {
        let p = p64();
        let a = encode_fixed(2.0, &p).unwrap();
        let b = encode_fixed(3.0, &p).unwrap();
        assert_eq!(
            truncate_value(a.wrapping_mul(b), &p),
            encode_fixed(6.0, &p).unwrap()
        );
        let n = encode_fixed(-2.5, &p).unwrap();
        assert_eq!(
            truncate_value(n.wrapping_mul(b), &p),
            encode_fixed(-7.5, &p).unwrap()
        );
    }
}
