use thiserror::Error;

use crate::transport::PartyId;

/// Errors produced anywhere in the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("value {value} is outside the representable fixed-point range (|x| < {bound})")]
    Range { value: f64, bound: f64 },

    #[error("invalid parameters: {0}")]
    Params(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("protocol misuse: {0}")]
    ProtocolMisuse(String),

    #[error("transport error on edge {from}->{to}: {reason}")]
    Transport {
        from: PartyId,
        to: PartyId,
        reason: String,
    },

    #[error("graph parse error: {0}")]
    Parse(String),

    #[error("graph validation failed:\n  {}", .0.join("\n  "))]
    Validate(Vec<String>),

    #[error("graph contains a cycle through edge {from} -> {to}")]
    Cycle { from: String, to: String },

    #[error("cost analysis: layer `{layer}` of kind `{kind}` has no pricing rule")]
    Unpriced { layer: String, kind: String },

    #[error("selector `{0}` matched no layers")]
    SelectorMiss(String),

    #[error("missing weights for layer `{0}`")]
    MissingWeights(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("structure error: {0}")]
    Structure(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
