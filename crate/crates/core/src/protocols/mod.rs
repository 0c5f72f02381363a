//! Three-party protocols over additive shares.
//!
//! Every function here is written from one party's point of view and must
//! be called by all three parties with the same public arguments. P2
//! carries only shapes ([`Secret::shape_only`]) and acts as dealer and as
//! the host of the ideal DReLU.

mod activation;
mod beaver;
mod conv;
mod drelu;
mod harness;
pub mod layout;
mod pool;
mod secret;

pub use activation::{
    activated_channels, pi_activation, pi_leaky_relu, pi_partial_activation, pi_relu, pi_relu6,
    pi_relu6_traced, ActivationKind, PartialActivationSpec, Relu6Trace, LEAKY_SLOPE,
};
pub use beaver::{beaver_products, deal_triples, pi_matmul, pi_mul, ProductDims, TripleShare, TAG_OFFLINE, TAG_OPEN};
pub use conv::{pi_conv2d, pi_dwconv2d, pi_fully_connected};
pub use drelu::{heaviside, pi_drelu, TAG_DRELU};
pub use harness::{pre_share, simulate, Simulation};
pub use pool::{avgpool, global_avgpool, pi_maxpool};
pub use secret::{open, reveal_to, share_inputs, Secret};
