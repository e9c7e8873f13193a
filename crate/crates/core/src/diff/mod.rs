//! Reverse-mode differentiable arrays: the op set needed by the encoder /
//! decoder stacks plus the two non-standard gradient paths (straight-through
//! copy and Gumbel-Softmax relaxation), Adam, and checkpoint serialization.

pub mod checkpoint;
pub mod fdcheck;
pub mod graph;
pub mod ndarray;
pub mod optim;
pub mod params;

#[cfg(test)]
mod tests;

pub use checkpoint::Checkpoint;
pub use graph::{Graph, NodeId, Reduction};
pub use ndarray::{NdArray, Real};
pub use optim::{clip_global_norm, Adam};
pub use params::{ParamId, ParamSet, Parameter};
