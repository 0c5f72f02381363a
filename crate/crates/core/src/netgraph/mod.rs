//! Network description, weights, plaintext reference evaluation, the three
//! architecture blocks and crypto-oriented rewrites.

mod blocks;
mod eval;
mod fold;
mod rewrite;
mod spec;
mod weights;
pub mod zoo;

pub use blocks::{block_graph, make_block, BlockKind, BlockTemplate, GraphBuilder, Profile, Variant};
pub use eval::{encode_array, eval_fixed, eval_float, eval_plaintext, EvalMode, Evaluated, FloatTensor};
pub use fold::fold_batchnorm;
pub use rewrite::{rewrite, rewrite_all, Pass, Selector};
pub use spec::{
    parse_graph, parse_ref, split_sizes, BnParams, ConvParams, DwConvParams, FcParams, Layer, LayerKind,
    NetworkGraph, PartialParams, PoolParams, ShuffleParams, SplitParams, INPUT, KIND_NAMES,
};
pub use weights::{gen_input, gen_weights, Array, WeightStore, MAGIC};
