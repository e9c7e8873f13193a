//! Discrete motion tokens and bidirectional motion/text translation.
//!
//! Pose sequences are compressed into codebook indices by a learned vector
//! quantizer; autoregressive translators map token streams between the
//! motion and text sides; an evaluation stack measures retrieval precision,
//! distribution distance and linguistic quality on a synthetic corpus.

pub mod cli;
pub mod config;
pub mod data;
pub mod diff;
pub mod error;
pub mod eval;
pub mod m2t;
pub mod manifest;
pub mod nn;
pub mod pipeline;
pub mod quantizer;
pub mod t2m;
pub mod tokens;
pub mod transformer;
pub mod util;
pub mod vocab;

pub use error::{Error, Result};

pub fn cli_main() -> i32 {
    cli::main_with_args(std::env::args_os())
}
