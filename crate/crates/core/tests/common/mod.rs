#![allow(dead_code)]

use shadownet::protocols::{simulate, Secret, Simulation};
use shadownet::ring::{encode_fixed, from_signed, to_signed, Prg, RingParams, RingTensor};
use shadownet::transport::{Session, TransportKind};
use shadownet::Result;

pub fn tensor(bits: u32, shape: Vec<usize>, data: Vec<u64>) -> RingTensor {
    RingTensor::new(bits, shape, data).unwrap()
}

pub fn sim<F>(params: RingParams, seed: u64, inputs: &[RingTensor], f: F) -> Simulation
where
    F: Fn(&mut Session, &[Secret]) -> Result<Vec<Secret>> + Sync,
{
    simulate(TransportKind::InProcess, seed, params, inputs, f).unwrap()
}

pub fn signed(v: u64, bits: u32) -> i64 {
    to_signed(v, bits)
}

pub fn unsigned(v: i64, bits: u32) -> u64 {
    from_signed(v, bits)
}

pub fn drelu_ref(v: u64, bits: u32) -> u64 {
    (signed(v, bits) >= 0) as u64
}

pub fn relu_ref(v: u64, bits: u32) -> u64 {
    unsigned(signed(v, bits).max(0), bits)
}

pub fn relu6_ref(v: u64, p: &RingParams) -> u64 {
    let six = signed(encode_fixed(6.0, p).unwrap(), p.bits);
    unsigned(signed(v, p.bits).clamp(0, six), p.bits)
}

/// `round(x * 0.1)`-free reference: the exact fixed-point LeakyReLU the
/// secure protocol approximates to within one ULP.
pub fn leaky_ref(v: u64, p: &RingParams) -> i64 {
    let x = signed(v, p.bits) as i128;
    let lo = signed(encode_fixed(0.1, p).unwrap(), p.bits) as i128;
    let hi = signed(encode_fixed(0.9, p).unwrap(), p.bits) as i128;
    let coeff = if x >= 0 { lo + hi } else { lo };
    ((x * coeff) >> p.scale) as i64
}

/// Random fixed-point values in `[-range, range)`.
pub fn random_fixed(n: usize, range: f64, p: &RingParams, seed: u64) -> Vec<u64> {
    use rand::Rng;
    let mut rng = Prg::from_u64(seed);
    let mut out: Vec<u64> = (0..n)
        .map(|_| encode_fixed(rng.gen_range(-range..range), p).unwrap())
        .collect();
    // Always include the sign boundary.
    for (i, v) in [0i64, 1, -1].into_iter().enumerate() {
        if i < out.len() {
            out[i] = unsigned(v, p.bits);
        }
    }
    out
}

pub fn ulp_diff(a: u64, b: u64, bits: u32) -> u64 {
    let m = if bits == 64 { u64::MAX } else { (1 << bits) - 1 };
    signed(a.wrapping_sub(b) & m, bits).unsigned_abs()
}
