use proptest::prelude::*;
use shadownet::ring::{
    decode_fixed, encode_fixed, from_signed, reconstruct, ring_arith, share, to_signed, truncate_share, truncate_value,
    Operand, Prg, RingOp, RingParams, RingTensor,
};

#[test]
fn default_params() {
    let p = RingParams::default();
    assert_eq!((p.bits, p.field, p.scale), (64, 67, 13));
    assert_eq!(p.mask(), u64::MAX);
    assert_eq!(p.word_bytes(), 8);
}

#[test]
fn invalid_params_are_rejected() {
    assert!(RingParams::new(7, 67, 0).is_err());
    assert!(RingParams::new(65, 67, 0).is_err());
    assert!(RingParams::new(32, 67, 13).is_err());
    assert!(RingParams::new(64, 66, 13).is_err());
    assert!(RingParams::new(34, 67, 13).is_ok());
}

#[test]
fn encode_out_of_range_fails() {
    let p = RingParams::default();
    assert!(encode_fixed(f64::NAN, &p).is_err());
    assert!(encode_fixed(2f64.powi(51), &p).is_err());
    assert!(encode_fixed(-(2f64.powi(50)), &p).is_err());
    assert!(encode_fixed(-(2f64.powi(49)), &p).is_ok());
}

#[test]
fn small_ring_wraps() {
    let p = RingParams::integer(8).unwrap();
    let a = RingTensor::new(8, vec![2], vec![200, 100]).unwrap();
    let b = RingTensor::new(8, vec![2], vec![100, 200]).unwrap();
    assert_eq!(a.add(&b).unwrap().data(), &[44, 44]);
    assert_eq!(to_signed(200, 8), -56);
    assert_eq!(from_signed(-1, 8), 255);
    assert_eq!(decode_fixed(255, &p), -1.0);
    assert_eq!(RingTensor::new(8, vec![1], vec![257]).unwrap().data(), &[1]);
    assert!(RingTensor::new(8, vec![2], vec![1]).is_err());
}

#[test]
fn ring_arith_shapes() {
    let a = RingTensor::new(64, vec![2, 2], vec![1, 2, 3, 4]).unwrap();
    let b = RingTensor::new(64, vec![2, 2], vec![5, 6, 7, 8]).unwrap();
    assert_eq!(a.matmul(&b).unwrap().data(), &[19, 22, 43, 50]);
    let m = ring_arith(RingOp::Mul, &a, Operand::Tensor(&b)).unwrap();
    assert_eq!(m.data(), &[5, 12, 21, 32]);
    let s = ring_arith(RingOp::Mul, &a, Operand::Scalar(3)).unwrap();
    assert_eq!(s.data(), &[3, 6, 9, 12]);
    let bad = RingTensor::zeros(64, vec![3]);
    assert!(ring_arith(RingOp::Add, &a, Operand::Tensor(&bad)).is_err());
}

proptest! {
    #[test]
    fn encode_decode_round_trip(x in -1.0e6f64..1.0e6) {
        let p = RingParams::default();
        let back = decode_fixed(encode_fixed(x, &p).unwrap(), &p);
        prop_assert!((back - x).abs() <= 0.5 * p.ulp() + 1e-12);
    }

    #[test]
    fn shares_reconstruct(data in proptest::collection::vec(any::<u64>(), 1..64), seed in any::<u64>()) {
        let n = data.len();
        let x = RingTensor::new(64, vec![n], data).unwrap();
        let (a, b) = share(&x, &mut Prg::from_u64(seed));
        prop_assert_eq!(reconstruct(&a, &b).unwrap(), x);
    }

    #[test]
    fn truncation_within_one_ulp(x in -1.0e3f64..1.0e3, y in -1.0e3f64..1.0e3, seed in any::<u64>()) {
        let p = RingParams::default();
        let prod = encode_fixed(x, &p).unwrap().wrapping_mul(encode_fixed(y, &p).unwrap());
        let t = RingTensor::new(64, vec![1], vec![prod]).unwrap();
        let (a, b) = share(&t, &mut Prg::from_u64(seed));
        let r = reconstruct(&truncate_share(&a, &p), &truncate_share(&b, &p)).unwrap();
        let exact = truncate_value(prod, &p);
        let diff = to_signed(r.data()[0].wrapping_sub(exact), 64);
        prop_assert!((0..=1).contains(&diff), "diff {}", diff);
    }
}
