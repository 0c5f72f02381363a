//! Seeded randomness.
//!
//! ChaCha20 in counter mode: the 32-byte seed is the key and the message
//! counter selects the stream. This is simulation-grade common randomness,
//! not a vetted production PRG setup (seeds are derived from a single
//! master seed so that runs are reproducible).

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::params::mask;
use super::tensor::RingTensor;

/// Deterministic generator of ring tensors.
pub struct Prg(ChaCha20Rng);

impl Prg {
    pub fn new(seed: [u8; 32], stream: u64) -> Self {
        let mut rng = ChaCha20Rng::from_seed(seed);
        rng.set_stream(stream);
        Prg(rng)
    }

    pub fn from_u64(seed: u64) -> Self {
        Prg(ChaCha20Rng::seed_from_u64(seed))
    }

    pub fn ring_tensor(&mut self, bits: u32, shape: Vec<usize>) -> RingTensor {
        let n: usize = shape.iter().product();
        let m = mask(bits);
        let data = (0..n).map(|_| self.0.next_u64() & m).collect();
        RingTensor::new(bits, shape, data).expect("length matches shape")
    }
}

impl RngCore for Prg {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.0.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.0.try_fill_bytes(dest)
    }
}

/// Derive a 32-byte sub-seed from a master seed and a domain label.
pub fn derive_seed(master: u64, label: u64) -> [u8; 32] {
    let mut rng = ChaCha20Rng::seed_from_u64(master);
    rng.set_stream(label);
    let mut out = [0u8; 32];
    rng.fill_bytes(&mut out);
    out
}

/// Randomness shared by a pair of parties: a key plus a message index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CommonRandomness {
    pub seed: [u8; 32],
    pub counter: u64,
}

impl CommonRandomness {
    pub fn new(seed: [u8; 32]) -> Self {
        CommonRandomness { seed, counter: 0 }
    }

    /// Zero shares at the current counter, then advance it.
    pub fn next_zero_shares(&mut self, bits: u32, shape: Vec<usize>) -> (RingTensor, RingTensor) {
        let out = zero_shares(self, bits, shape);
        self.counter += 1;
        out
    }
}

/// Pseudorandom `(u0, u1)` with `u0 + u1 = 0`, fully determined by
/// `(seed, counter, shape)`.
pub fn zero_shares(cr: &CommonRandomness, bits: u32, shape: Vec<usize>) -> (RingTensor, RingTensor) {
    let u0 = Prg::new(cr.seed, cr.counter).ring_tensor(bits, shape);
    let u1 = u0.neg();
    (u0, u1)
}
