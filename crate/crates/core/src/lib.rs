//! Three-party secret-sharing secure inference with an analytic
//! round/communication cost model.

pub mod cli;
pub mod costmodel;
pub mod error;
pub mod ring;
pub mod netgraph;
pub mod protocols;
pub mod secure;
pub mod transport;

pub use error::{Error, Result};
