//! Arithmetic over `Z_{2^l}`, fixed-point encoding, additive two-party
//! sharing and seeded common randomness.

mod fixed;
mod params;
mod random;
mod share;
mod tensor;

pub use fixed::{decode_fixed, encode_fixed, truncate_value};
pub use params::{from_signed, to_signed, RingParams};
pub use random::{derive_seed, zero_shares, CommonRandomness, Prg};
pub use share::{reconstruct, share, truncate_share, ShareHalf};
pub use tensor::{ring_arith, Operand, RingOp, RingTensor};
