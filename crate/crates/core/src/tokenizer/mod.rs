//! Face tokenization and fill-in-the-middle sequence assembly.
//!
//! Every face becomes a 12-token block (four vertices, three quantized
//! coordinates each; triangles repeat their last vertex). Context and target
//! faces are sorted independently so the context segment never depends on how
//! the missing region will be tiled.

mod format;
mod quantize;
mod sequence;

pub use format::{read_jsonl, write_jsonl, BINARY_MAGIC, BINARY_VERSION};
pub use quantize::{QuantizationSpec, Sentinels};
pub use sequence::{
    augment_context, canonical_sort, detokenize, face_blocks, serialize_fim, serialize_fim_with_layout,
    Detokenized, FaceBlock, FimLayout, FimSequence, BLOCK_LEN, FLAG_BOUNDARY, FLAG_CONTEXT,
};

use thiserror::Error;

pub type Token = u32;

#[derive(Debug, Error)]
pub enum TokenError {
    #[error("coordinate is NaN")]
    NanCoordinate,
    #[error("invalid quantization spec: {0}")]
    BadSpec(String),
    #[error("face {0} is in both the context and the target")]
    Overlap(usize),
    #[error("face id {0} out of range")]
    FaceOutOfRange(usize),
    #[error("malformed sequence: {0}")]
    Malformed(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
